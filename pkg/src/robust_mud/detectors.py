"""Linear and M-estimator multiuser detectors.

The regression vector is estimated from ``y = M theta + n`` and symbols are
read off coherently with the known fading coefficients. ``M`` is real, so
real and imaginary parts are estimated as two independent real problems.
Robust fits are computed by iteratively reweighted least squares started
from the decorrelator.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PenaltyFunction",
    "EstimateResult",
    "RankDeficientError",
    "rho",
    "psi",
    "irls_weights",
    "decorrelate",
    "m_estimate",
    "m_estimate_batch",
    "detect_symbols",
]

KINDS = ("least_squares", "huber", "hampel", "proposed")


class RankDeficientError(np.linalg.LinAlgError):
    """The observation matrix does not have full column rank."""


@dataclass(frozen=True)
class PenaltyFunction:
    """A penalty ``rho`` and its influence function ``psi``.

    Breakpoints are in residual units: ``a`` for Huber, ``(a, b, c)`` for
    Hampel, ``(a, b)`` for the exponential redescender (``kind="proposed"``).
    """

    kind: str
    a: float | None = None
    b: float | None = None
    c: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        need = {"least_squares": (), "huber": ("a",), "hampel": ("a", "b", "c"),
                "proposed": ("a", "b")}[self.kind]
        for name in need:
            val = getattr(self, name)
            if val is None or not val > 0:
                raise ValueError(f"{self.kind} needs positive {name}")
        if self.kind == "hampel" and not self.a < self.b < self.c:
            raise ValueError("hampel breakpoints must satisfy a < b < c")
        if self.kind == "proposed" and not self.a < self.b:
            raise ValueError("proposed breakpoints must satisfy a < b")

    @classmethod
    def least_squares(cls):
        return cls("least_squares")

    @classmethod
    def huber(cls, scale: float = 1.0, a: float = 1.345):
        return cls("huber", a * scale)

    @classmethod
    def hampel(cls, scale: float = 1.0, a: float = 1.345, b: float = 3.0, c: float = 6.0):
        return cls("hampel", a * scale, b * scale, c * scale)

    @classmethod
    def proposed(cls, scale: float = 1.0, a: float = 1.345, b: float = 3.0):
        return cls("proposed", a * scale, b * scale)

    @property
    def d(self) -> float:
        """Tail offset of the proposed penalty, fixed by continuity at ``|x| = b``."""
        if self.kind != "proposed":
            raise AttributeError("d is defined for the proposed penalty only")
        return 1.5 * self.a * self.b - 0.5 * self.a**2


def rho(x, pf: PenaltyFunction):
    """Penalty evaluated elementwise."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    quad = 0.5 * x * x
    if pf.kind == "least_squares":
        return quad
    a = pf.a
    lin = a * ax - 0.5 * a * a
    if pf.kind == "huber":
        return np.where(ax <= a, quad, lin)
    b = pf.b
    if pf.kind == "hampel":
        c = pf.c
        # integral of a (c - t) / (c - b) from b to |x|
        descend = a * b - 0.5 * a * a + a * (c * (ax - b) - 0.5 * (ax * ax - b * b)) / (c - b)
        flat = a * b - 0.5 * a * a + 0.5 * a * (c - b)
        return np.select([ax <= a, ax <= b, ax <= c], [quad, lin, descend], flat)
    tail = -0.5 * a * b * np.exp(1.0 - (x / b) ** 2) + pf.d
    return np.select([ax <= a, ax <= b], [quad, lin], tail)


def psi(x, pf: PenaltyFunction):
    """Influence function (derivative of :func:`rho`), elementwise."""
    x = np.asarray(x, dtype=float)
    if pf.kind == "least_squares":
        return x.copy()
    ax = np.abs(x)
    a = pf.a
    clip = a * np.sign(x)
    if pf.kind == "huber":
        return np.where(ax <= a, x, clip)
    b = pf.b
    if pf.kind == "hampel":
        c = pf.c
        return np.select([ax <= a, ax <= b, ax <= c], [x, clip, clip * (c - ax) / (c - b)], 0.0)
    tail = (a / b) * x * np.exp(1.0 - (x / b) ** 2)
    return np.select([ax <= a, ax <= b], [x, clip], tail)


def irls_weights(r, pf: PenaltyFunction):
    """``psi(r) / r`` with the limit value 1 at ``r = 0``."""
    r = np.asarray(r, dtype=float)
    if pf.kind == "least_squares":
        return np.ones_like(r)
    ar = np.abs(r)
    a = pf.a
    with np.errstate(divide="ignore"):
        clip = a / ar
    if pf.kind == "huber":
        return np.where(ar <= a, 1.0, clip)
    b = pf.b
    if pf.kind == "hampel":
        c = pf.c
        return np.select([ar <= a, ar <= b, ar <= c], [1.0, clip, clip * (c - ar) / (c - b)], 0.0)
    return np.select([ar <= a, ar <= b], [1.0, clip], (a / b) * np.exp(1.0 - (r / b) ** 2))


@dataclass
class EstimateResult:
    """Output of :func:`m_estimate`.

    ``objective`` is the per-iteration value of the summed penalty over
    real and imaginary residuals, starting at the least-squares fit.
    """

    theta_hat: np.ndarray
    iterations: int
    converged: bool
    final_step_norm: float
    objective: list[float] = field(default_factory=list)


def _pinv(M):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] < M.shape[1]:
        raise RankDeficientError("observation matrix must be tall")
    if np.linalg.matrix_rank(M) < M.shape[1]:
        raise RankDeficientError(f"observation matrix of shape {M.shape} is rank deficient")
    return np.linalg.pinv(M)


def decorrelate(y, M):
    """Least-squares (decorrelating) estimate of the regression vector.

    Accepts a single observation vector or a stack ``(..., n)``.
    """
    return np.asarray(y) @ _pinv(M).T


def _objective(Yr, th, M, pf):
    return rho(Yr - th @ M.T, pf).sum(axis=1)


def _irls(Yr, th, M, pf, tol, max_iter, weight_floor, history):
    """Run IRLS in place on the real problems ``Yr ~ th @ M.T``.

    Rows ``i`` and ``i + P//2`` are the real and imaginary parts of one
    complex observation.
    """
    P = Yr.shape[0]
    obj = _objective(Yr, th, M, pf)
    if history is not None:
        history.append(obj.copy())
    iters = np.zeros(P, int)
    step = np.zeros(P)
    active = np.ones(P, bool)
    n, k = M.shape
    outer = (M[:, :, None] * M[:, None, :]).reshape(n, k * k)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        t_old = th[idx]
        r = Yr[idx] - t_old @ M.T
        w = np.maximum(irls_weights(r, pf), weight_floor)
        lhs = (w @ outer).reshape(-1, k, k)
        rhs = (w * Yr[idx]) @ M
        t_new = np.linalg.solve(lhs, rhs[..., None])[..., 0]
        # halve steps that raise the objective; only round-off or the
        # weight floor can cause one, and a step that stays bad counts as zero
        o_old = obj[idx]
        o_new = _objective(Yr[idx], t_new, M, pf)
        bad = o_new > o_old
        for _ in range(30):
            if not bad.any():
                break
            t_new[bad] = 0.5 * (t_new[bad] + t_old[bad])
            o_new[bad] = _objective(Yr[idx[bad]], t_new[bad], M, pf)
            bad = o_new > o_old
        t_new[bad] = t_old[bad]
        o_new[bad] = o_old[bad]
        th[idx] = t_new
        obj[idx] = o_new
        s = np.linalg.norm(t_new - t_old, axis=1)
        step[idx] = s
        iters[idx] += 1
        # the real and imaginary halves of one complex problem stop together,
        # judged on the complex step and estimate norms
        full_s = np.zeros(P)
        full_s[idx] = s ** 2
        full_t = np.zeros(P)
        full_t[idx] = np.sum(t_new ** 2, axis=1)
        T = P // 2
        cs = np.sqrt(full_s[:T] + full_s[T:])
        ct = np.sqrt(full_t[:T] + full_t[T:])
        pair_done = cs <= tol * (1.0 + ct)
        done = np.concatenate([pair_done, pair_done])
        active &= ~done
        if history is not None:
            history.append(obj.copy())
    return iters, ~active, step


def m_estimate_batch(Y, M, pf: PenaltyFunction, tol: float = 1e-8, max_iter: int = 100,
                     weight_floor: float = 1e-10, track_objective: bool = False):
    """IRLS on a batch of observations sharing one observation matrix.

    Huber fits start from the decorrelator. Redescending penalties (Hampel,
    proposed) are non-convex, and a decorrelator start lets one gross
    outlier inflate every residual past the rejection point; they therefore
    start from the Huber fit with the same ``a``. `max_iter` applies to
    each stage.

    Parameters
    ----------
    Y : array_like, shape (T, n)
        Complex observations.
    M : array_like, shape (n, p)
    pf : PenaltyFunction
    tol : float
        Stop once ``||step|| <= tol * (1 + ||theta||)``.
    max_iter : int
    weight_floor : float
        Lower bound on IRLS weights, keeping the weighted normal equations
        solvable when a redescending penalty rejects many chips.
    track_objective : bool
        Record the objective of the final stage at every iteration.

    Returns
    -------
    theta : ndarray, shape (T, p), complex
    iterations : ndarray of int, shape (T,)
    converged : ndarray of bool, shape (T,)
    step_norm : ndarray, shape (T,)
    history : list of ndarray, shape (T,) each (empty unless tracked)
    """
    Y = np.atleast_2d(np.asarray(Y))
    M = np.asarray(M, dtype=float)
    T = Y.shape[0]
    theta = decorrelate(Y, M)
    if pf.kind == "least_squares":
        return theta, np.zeros(T, int), np.ones(T, bool), np.zeros(T), []

    # real and imaginary parts as 2T independent real problems
    Yr = np.concatenate([Y.real, Y.imag], axis=0)
    th = np.concatenate([theta.real, theta.imag], axis=0)
    iters = np.zeros(2 * T, int)
    if pf.kind in ("hampel", "proposed"):
        it0, _, _ = _irls(Yr, th, M, PenaltyFunction("huber", pf.a), tol, max_iter,
                          weight_floor, None)
        iters += it0
    history = [] if track_objective else None
    it1, conv, step = _irls(Yr, th, M, pf, tol, max_iter, weight_floor, history)
    iters += it1
    theta = th[:T] + 1j * th[T:]
    hist = [h[:T] + h[T:] for h in history] if track_objective else []
    return (theta, np.maximum(iters[:T], iters[T:]), conv[:T] & conv[T:],
            np.hypot(step[:T], step[T:]), hist)


def m_estimate(y, M, pf: PenaltyFunction, tol: float = 1e-8, max_iter: int = 100) -> EstimateResult:
    """M-estimate of the regression vector from one observation.

    Raises
    ------
    RankDeficientError
        If `M` lacks full column rank. Non-convergence is reported through
        ``EstimateResult.converged``.
    """
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError("m_estimate takes a single observation vector; see m_estimate_batch")
    theta, iters, conv, step, hist = m_estimate_batch(
        y[None, :], M, pf, tol, max_iter, track_objective=True
    )
    return EstimateResult(theta[0], int(iters[0]), bool(conv[0]), float(step[0]),
                          [float(h[0]) for h in hist])


def detect_symbols(theta_hat, g):
    """Coherent decisions ``sign(Re(conj(g) theta_hat))``; ties go to +1."""
    theta_hat = np.asarray(theta_hat)
    g = np.asarray(g)
    if theta_hat.shape != g.shape:
        raise ValueError("theta_hat and g must have the same shape")
    if np.any(g == 0):
        raise ValueError("zero fading coefficient: decision undefined")
    stat = np.real(np.conj(g) * theta_hat)
    return np.where(stat < 0, -1, 1)
