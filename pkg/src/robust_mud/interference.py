"""Statistics of the multiple-access interference seen by the target user.

Each interferer contributes ``I = G * W`` with ``G ~ N(0, 1)`` and

    W = P*S + Q*(1 - S) + X + Y*(1 - 2S),

where P, Q are symmetric signs, X (resp. Y) is a sum of A (resp. B)
independent symmetric signs and S ~ U[0, 1) is the fractional chip offset.
A and B count the chip boundaries of the target signature without and with
a sign transition. All CFs here are conditioned on B.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import erf, erfc, gammaln

__all__ = [
    "BoundaryProfile",
    "InterfererDraw",
    "count_transitions",
    "binomial_support",
    "sigma_sq",
    "interferer_pdf_given_sB",
    "interferer_cf_given_sB",
    "j_kernel",
    "interferer_cf_given_B",
    "total_interference_cf",
    "draw_interferer",
    "sample_interferer",
]

_SQRT_HALF_PI = np.sqrt(np.pi / 2.0)


@dataclass(frozen=True)
class BoundaryProfile:
    """Chip-boundary counts of the target signature.

    ``a_nontransitions + b_transitions == n - 1``.
    """

    n: int
    b_transitions: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"processing gain must be >= 1, got {self.n}")
        if not 0 <= self.b_transitions <= self.n - 1:
            raise ValueError(
                f"b_transitions must lie in [0, {self.n - 1}], got {self.b_transitions}"
            )

    @property
    def a_nontransitions(self) -> int:
        return self.n - 1 - self.b_transitions


@dataclass(frozen=True)
class InterfererDraw:
    """One realisation of the ingredients of ``I = G * W``."""

    p: int
    q: int
    x: int
    y: int
    s: float
    g: float

    @property
    def w(self) -> float:
        s = self.s
        return self.p * s + self.q * (1 - s) + self.x + self.y * (1 - 2 * s)

    @property
    def value(self) -> float:
        return self.g * self.w


def count_transitions(signature) -> BoundaryProfile:
    """Count sign changes between adjacent chips of a +/-1 signature."""
    chips = np.asarray(signature)
    if chips.ndim != 1 or chips.size < 2:
        raise ValueError("signature must be a 1-D sequence of at least 2 chips")
    if not np.all((chips == 1) | (chips == -1)):
        raise ValueError("signature entries must be +1 or -1")
    b = int(np.count_nonzero(chips[1:] != chips[:-1]))
    return BoundaryProfile(n=int(chips.size), b_transitions=b)


@lru_cache(maxsize=256)
def binomial_support(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Support and pmf of a sum of `m` symmetric signs.

    Returns ``(values, probs)`` with values ``-m, -m+2, ..., m`` and
    ``probs = C(m, (v+m)/2) 2**-m``, computed in log space so that large
    `m` does not overflow. The pmf is renormalized so that it sums to one
    up to rounding.
    """
    k = np.arange(m + 1)
    logp = gammaln(m + 1) - gammaln(k + 1) - gammaln(m - k + 1) - m * np.log(2.0)
    values = 2 * k - m
    values.flags.writeable = False
    probs = np.exp(logp)
    probs /= math.fsum(probs)
    probs.flags.writeable = False
    return values, probs


def _branch_brackets(i, j, s):
    """The four brackets whose squares are the conditional variances."""
    u = 1.0 - 2.0 * s
    return (
        1.0 + i + j * u,
        2.0 * s - 1.0 + i + j * u,
        u + i + j * u,
        -1.0 + i + j * u,
    )


def sigma_sq(branch: int, i, j, s):
    """Conditional variance of branch 1..4 (one per sign pair (P, Q))."""
    if branch not in (1, 2, 3, 4):
        raise ValueError(f"branch must be 1, 2, 3 or 4, got {branch}")
    return _branch_brackets(np.asarray(i, float), np.asarray(j, float), s)[branch - 1] ** 2


def _grid(prof: BoundaryProfile):
    xi, px = binomial_support(prof.a_nontransitions)
    yj, py = binomial_support(prof.b_transitions)
    weights = np.outer(px, py)
    return xi[:, None].astype(float), yj[None, :].astype(float), weights


def interferer_pdf_given_sB(value, s: float, prof: BoundaryProfile):
    """Density of one interferer given offset `s`.

    Branches with zero conditional variance are point masses at 0 and are
    left out, so the result integrates to one minus their total weight.
    """
    value = np.asarray(value, dtype=float)
    i, j, weights = _grid(prof)
    out = np.zeros(value.shape)
    for bracket in _branch_brackets(i, j, s):
        sd = np.abs(np.broadcast_to(bracket, weights.shape)).ravel()
        w = weights.ravel()
        keep = sd > 0
        sd, w = sd[keep], w[keep]
        z = value[..., None] / sd
        out += np.sum(w * np.exp(-0.5 * z * z) / (np.sqrt(2.0 * np.pi) * sd), axis=-1)
    return out / 4.0


def interferer_cf_given_sB(omega, s: float, prof: BoundaryProfile):
    """CF of one interferer given offset `s` (Gaussian mixture in omega)."""
    omega = np.asarray(omega, dtype=float)
    i, j, weights = _grid(prof)
    w2 = (omega * omega)[..., None]
    w = weights.ravel()
    out = np.zeros(omega.shape)
    for bracket in _branch_brackets(i, j, s):
        var = (np.broadcast_to(bracket, weights.shape) ** 2).ravel()
        out += np.exp(-0.5 * var * w2) @ w
    return out / 4.0


def _gauss_mass(lo, hi):
    """``Q(lo) - Q(hi)`` without cancellation in either tail."""
    lo, hi = np.broadcast_arrays(np.asarray(lo, float), np.asarray(hi, float))
    out = 0.5 * (erf(hi / np.sqrt(2.0)) - erf(lo / np.sqrt(2.0)))
    right = lo >= 1.0
    left = hi <= -1.0
    out = np.where(right, 0.5 * (erfc(lo / np.sqrt(2.0)) - erfc(hi / np.sqrt(2.0))), out)
    out = np.where(left, 0.5 * (erfc(-hi / np.sqrt(2.0)) - erfc(-lo / np.sqrt(2.0))), out)
    return out


def j_kernel(i, j, omega):
    """``J(i, j) = int_0^1 exp(-omega^2 [i + j(1 - 2s)]^2 / 2) ds`` in closed form.

    Broadcasts over `i`, `j` and `omega`. Signed `j` is used as is; the
    closed form is invariant under ``j -> -j``.
    """
    i, j, omega = np.broadcast_arrays(
        np.asarray(i, float), np.asarray(j, float), np.abs(np.asarray(omega, float))
    )
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        general = _SQRT_HALF_PI / (j * omega) * _gauss_mass(omega * (i - j), omega * (i + j))
    # second-order expansion where the closed form divides by ~0
    small = omega * (np.abs(i) + np.abs(j)) < 1e-4
    taylor = 1.0 - 0.5 * omega * omega * (i * i + j * j / 3.0)
    out = np.where(small, taylor, general)
    out = np.where(j == 0, np.exp(-0.5 * i * i * omega * omega), out)
    out = np.where(omega == 0, 1.0, out)
    return out[()] if out.ndim == 0 else out


def interferer_cf_given_B(omega, prof: BoundaryProfile):
    """CF of one interferer with the offset averaged out."""
    omega = np.asarray(omega, dtype=float)
    i, j, weights = _grid(prof)
    i = i.ravel()[:, None].repeat(weights.shape[1], 1).ravel()
    j = np.broadcast_to(j, weights.shape).ravel()
    w = omega[..., None]
    terms = (
        j_kernel(i + 1, j, w)
        + j_kernel(i, j - 1, w)
        + j_kernel(i, j + 1, w)
        + j_kernel(i - 1, j, w)
    )
    out = terms @ weights.ravel() / 4.0
    return out[()] if out.ndim == 0 else out


def total_interference_cf(omega, prof: BoundaryProfile, num_users: int):
    """CF of the summed interference of ``num_users - 1`` i.i.d. interferers."""
    if num_users < 1:
        raise ValueError("num_users must be >= 1")
    omega = np.asarray(omega, dtype=float)
    if num_users == 1:
        return np.ones(omega.shape)[()] if omega.ndim == 0 else np.ones(omega.shape)
    return interferer_cf_given_B(omega, prof) ** (num_users - 1)


def draw_interferer(prof: BoundaryProfile, stream: np.random.Generator, s=None) -> InterfererDraw:
    """A single :class:`InterfererDraw`; `s` may be pinned."""
    p, q = stream.choice((-1, 1), size=2)
    a, b = prof.a_nontransitions, prof.b_transitions
    x = 2 * int(stream.binomial(a, 0.5)) - a
    y = 2 * int(stream.binomial(b, 0.5)) - b
    s = float(stream.random()) if s is None else float(s)
    g = float(stream.standard_normal())
    return InterfererDraw(int(p), int(q), x, y, s, g)


def sample_interferer(prof: BoundaryProfile, stream: np.random.Generator, size=None, s=None):
    """Draw interference samples ``G * W``.

    Parameters
    ----------
    prof : BoundaryProfile
    stream : numpy.random.Generator
    size : int or tuple, optional
        Output shape; a scalar float is returned when omitted.
    s : float, optional
        Fixed fractional offset. Drawn uniformly when omitted.
    """
    shape = () if size is None else ((size,) if np.isscalar(size) else tuple(size))
    a, b = prof.a_nontransitions, prof.b_transitions
    p = 2.0 * stream.integers(0, 2, size=shape) - 1.0
    q = 2.0 * stream.integers(0, 2, size=shape) - 1.0
    x = 2.0 * stream.binomial(a, 0.5, size=shape) - a
    y = 2.0 * stream.binomial(b, 0.5, size=shape) - b
    off = stream.random(shape) if s is None else np.full(shape, float(s))
    g = stream.standard_normal(shape)
    w = p * off + q * (1.0 - off) + x + y * (1.0 - 2.0 * off)
    out = g * w
    return float(out) if size is None else out
