"""Chip-rate synthesis of the received signal of an asynchronous CDMA link.

Users share cyclic shifts of one m-sequence, fade independently (AR(2)
Rayleigh processes at symbol rate) and, apart from the target, arrive with
an integer chip delay. Detection is one-shot: an interferer with delay
``d > 0`` overlaps the target window with the tail of its previous symbol
and the head of its current one, which gives it two columns in the
observation matrix.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .noise import MixtureNoiseParams, sample_noise

__all__ = [
    "PRIMITIVE_POLYNOMIALS",
    "SignatureSet",
    "FadingParams",
    "ChannelRealization",
    "generate_m_sequence",
    "make_signatures",
    "generate_fading",
    "ar2_coefficients",
    "build_composite_matrix",
    "column_layout",
    "stack_theta",
    "synthesize_received",
]

# Polynomials as bit masks: bit k set <=> x^k present.
PRIMITIVE_POLYNOMIALS = {
    2: (1 << 2) | (1 << 1) | 1,
    3: (1 << 3) | (1 << 1) | 1,
    4: (1 << 4) | (1 << 1) | 1,
    5: (1 << 5) | (1 << 2) | 1,
    6: (1 << 6) | (1 << 1) | 1,
    7: (1 << 7) | (1 << 3) | 1,
    8: (1 << 8) | (1 << 4) | (1 << 3) | (1 << 2) | 1,
    9: (1 << 9) | (1 << 4) | 1,
    10: (1 << 10) | (1 << 3) | 1,
    11: (1 << 11) | (1 << 2) | 1,
    12: (1 << 12) | (1 << 6) | (1 << 4) | (1 << 1) | 1,
    13: (1 << 13) | (1 << 4) | (1 << 3) | (1 << 1) | 1,
    14: (1 << 14) | (1 << 10) | (1 << 6) | (1 << 1) | 1,
    15: (1 << 15) | (1 << 1) | 1,
    16: (1 << 16) | (1 << 12) | (1 << 3) | (1 << 1) | 1,
}


def generate_m_sequence(degree: int, taps: int | None = None) -> np.ndarray:
    """One period of the maximal-length LFSR sequence, mapped 0 -> +1, 1 -> -1.

    Parameters
    ----------
    degree : int
        Register length ``m``, 2 <= m <= 16.
    taps : int, optional
        Feedback polynomial as a bit mask including ``x^m`` and ``1``;
        defaults to :data:`PRIMITIVE_POLYNOMIALS`.

    Raises
    ------
    ValueError
        If the polynomial does not produce period ``2^m - 1``.
    """
    if not 2 <= degree <= 16:
        raise ValueError(f"degree must lie in [2, 16], got {degree}")
    if taps is None:
        taps = PRIMITIVE_POLYNOMIALS[degree]
    if taps >> degree != 1 or not taps & 1:
        raise ValueError(f"taps {taps:#b} is not a degree-{degree} polynomial with constant term")
    period = (1 << degree) - 1
    exps = [k for k in range(degree) if taps >> k & 1]
    # s[t + m] = xor of s[t + k] over the non-leading terms
    state = [1] * degree
    bits = np.empty(period, dtype=np.int8)
    start = tuple(state)
    for t in range(period):
        bits[t] = state[0]
        fb = 0
        for k in exps:
            fb ^= state[k]
        state = state[1:] + [fb]
        if tuple(state) == start and t < period - 1:
            raise ValueError(f"taps {taps:#b} is not primitive: period {t + 1} < {period}")
    return (1 - 2 * bits).astype(np.int8)


@dataclass(frozen=True)
class SignatureSet:
    """Cyclic shifts of a base m-sequence, one row per user."""

    chips: np.ndarray
    shifts: tuple[int, ...]

    @property
    def n(self) -> int:
        return self.chips.shape[1]

    @property
    def num_users(self) -> int:
        return self.chips.shape[0]


def make_signatures(n: int, num_users: int, shifts=None, taps: int | None = None) -> SignatureSet:
    """Signatures for `num_users` users from the length-`n` m-sequence.

    Default shifts spread users evenly: user ``l`` gets ``l * (n // L)``.
    """
    degree = int(np.log2(n + 1))
    if (1 << degree) - 1 != n:
        raise ValueError(f"n must be 2^m - 1, got {n}")
    if not 1 <= num_users <= n:
        raise ValueError(f"num_users must lie in [1, {n}]")
    base = generate_m_sequence(degree, taps)
    if shifts is None:
        shifts = [l * (n // num_users) for l in range(num_users)]
    shifts = tuple(int(s) % n for s in shifts)
    if len(shifts) != num_users:
        raise ValueError("one shift per user required")
    chips = np.stack([np.roll(base, -s) for s in shifts])
    chips.flags.writeable = False
    return SignatureSet(chips, shifts)


@dataclass(frozen=True)
class FadingParams:
    """AR(2) fading: pole radius, spectral peak [Hz], symbol rate [1/s]."""

    pole_radius: float = 0.998
    peak_freq: float = 80.0
    symbol_rate: float = 10_000.0

    def __post_init__(self):
        if not 0 < self.pole_radius < 1:
            raise ValueError("pole_radius must lie in (0, 1)")
        if not 0 < self.peak_freq < self.symbol_rate / 2:
            raise ValueError("peak_freq must lie in (0, symbol_rate / 2)")

    @property
    def pole_angle(self) -> float:
        return 2 * np.pi * self.peak_freq / self.symbol_rate

    @property
    def warmup(self) -> int:
        return int(np.ceil(10.0 / (1.0 - self.pole_radius)))


def ar2_coefficients(fp: FadingParams) -> tuple[float, float]:
    """``(c1, c2)`` of ``g[i] = c1 g[i-1] + c2 g[i-2] + w[i]``."""
    r = fp.pole_radius
    return 2 * r * np.cos(fp.pole_angle), -r * r


def generate_fading(length: int, fp: FadingParams, stream: np.random.Generator) -> np.ndarray:
    """Complex AR(2) fading, scaled so the realisation has unit mean power."""
    from scipy.signal import lfilter

    if length < 1:
        raise ValueError("length must be >= 1")
    c1, c2 = ar2_coefficients(fp)
    total = length + fp.warmup
    w = stream.standard_normal(total) + 1j * stream.standard_normal(total)
    g = lfilter([1.0], [1.0, -c1, -c2], w)[fp.warmup:]
    return g / np.sqrt(np.mean(np.abs(g) ** 2))


def column_layout(delays) -> list[tuple[int, str]]:
    """(user, part) per composite column; part is 'full', 'tail' or 'head'."""
    cols = [(0, "full")]
    for user, d in enumerate(delays[1:], start=1):
        if d == 0:
            cols.append((user, "full"))
        else:
            cols.extend([(user, "tail"), (user, "head")])
    return cols


def build_composite_matrix(sig: SignatureSet, delays) -> np.ndarray:
    """Observation matrix of the one-shot asynchronous model.

    `delays` holds one chip offset per user with ``delays[0] == 0``. An
    interferer with delay ``d`` contributes the last ``d`` chips of its
    signature in rows ``0..d-1`` and the first ``n - d`` chips in rows
    ``d..n-1``.
    """
    n = sig.n
    delays = [int(d) for d in delays]
    if len(delays) != sig.num_users:
        raise ValueError("one delay per user required")
    if delays[0] != 0:
        raise ValueError("target user must have delay 0")
    if any(not 0 <= d < n for d in delays):
        raise ValueError(f"delays must lie in [0, {n})")
    cols = []
    for user, part in column_layout(delays):
        a = sig.chips[user].astype(float)
        d = delays[user]
        col = np.zeros(n)
        if part == "full":
            col[:] = a
        elif part == "tail":
            col[:d] = a[n - d:]
        else:
            col[d:] = a[: n - d]
        cols.append(col)
    return np.column_stack(cols)


def stack_theta(delays, symbols, prev_symbols, fading, n: int) -> np.ndarray:
    """Regression vector matching :func:`build_composite_matrix`.

    `symbols`, `prev_symbols` and `fading` have users on the last axis.
    """
    symbols = np.asarray(symbols)
    prev_symbols = np.asarray(prev_symbols)
    fading = np.asarray(fading)
    parts = []
    for user, part in column_layout(delays):
        b = prev_symbols[..., user] if part == "tail" else symbols[..., user]
        parts.append(b * fading[..., user])
    return np.stack(parts, axis=-1) / np.sqrt(n)


@dataclass(frozen=True)
class ChannelRealization:
    """Signatures, delays and per-symbol fading/data of all users.

    ``symbols`` and ``fading`` are ``(num_symbols, L)``; row ``i`` is symbol
    interval ``i``.
    """

    signatures: SignatureSet
    delays: tuple[int, ...]
    symbols: np.ndarray
    fading: np.ndarray
    matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.delays[0] != 0:
            raise ValueError("target user must have delay 0")
        object.__setattr__(self, "matrix", build_composite_matrix(self.signatures, self.delays))
        for arr in (self.symbols, self.fading, self.matrix):
            arr.flags.writeable = False

    def theta(self, symbol_index):
        idx = np.asarray(symbol_index)
        if np.any(idx < 1):
            raise ValueError("symbol_index must be >= 1")
        return stack_theta(self.delays, self.symbols[idx], self.symbols[idx - 1],
                           self.fading[idx], self.signatures.n)


def synthesize_received(ch: ChannelRealization, noise: MixtureNoiseParams | None,
                        symbol_index, stream: np.random.Generator | None = None) -> np.ndarray:
    """``y = M theta + n`` for one or several symbol intervals.

    Pass ``noise=None`` for a noiseless observation.
    """
    y = ch.theta(symbol_index) @ ch.matrix.T
    if noise is not None:
        y = y + sample_noise(noise, y.shape, stream)
    return y
