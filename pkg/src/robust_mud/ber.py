"""Average BER of the target user through the disturbance characteristic function.

The target decision statistic is ``A1 * N + xi`` with ``A1`` Rayleigh
(density ``a exp(-a^2/2)``) and ``xi = I + n1`` the sum of the
multiple-access interference and matched-filter noise. The error
probability follows from Fourier inversion of the CF of ``xi``; averaging
over ``A1`` turns the oscillatory inversion integral into a Gaussian-damped
one.

The matched-filter noise CF comes in two flavours (``cf_mode``):

``"paper"``
    ``exp(-[v^2 (1-eps)^2 + kappa^3 v^2 eps^2] w^2)``, a Gaussian with
    ``sigma_n1^2 = 2 [v^2 (1-eps)^2 + kappa^3 v^2 eps^2]``.
``"exact"``
    The CF of the mixture itself, i.e. two Gaussian components.

Neither mode ties ``sigma_n1`` to the chip-level noise of the simulator;
see :func:`noise_for_sigma_n1` for the mapping used by the harness.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .interference import BoundaryProfile, interferer_cf_given_sB, total_interference_cf
from .noise import MixtureNoiseParams, noise_cf_exact, noise_cf_paper
from .quadrature import QuadratureError, QuadratureSpec, integrate

__all__ = [
    "AnalyticBerInputs",
    "noise_for_sigma_n1",
    "gaussian_q",
    "disturbance_cf",
    "disturbance_cdf",
    "conditional_ber",
    "average_ber",
    "average_ber_paths",
    "single_user_ber",
]

CF_MODES = ("paper", "exact")

# exp(-40) ~ 4e-18: noise CF negligible beyond sqrt(80) / sigma.
_NOISE_DECAY = np.sqrt(80.0)
# exp(-w^2 N^2 / 2) < 1e-16 for w > 8.6 / N.
_FADING_DECAY = 8.6


def gaussian_q(x):
    """Standard normal upper tail probability."""
    return ndtr(-np.asarray(x, dtype=float))


def noise_for_sigma_n1(sigma_n1: float, epsilon: float = 0.0, kappa: float = 1.0,
                       cf_mode: str = "paper") -> MixtureNoiseParams:
    """Mixture parameters whose matched-filter std equals `sigma_n1`."""
    if cf_mode == "paper":
        v = sigma_n1 / np.sqrt(2.0 * ((1 - epsilon) ** 2 + kappa**3 * epsilon**2))
    elif cf_mode == "exact":
        v = sigma_n1 / np.sqrt((1 - epsilon) + epsilon * kappa)
    else:
        raise ValueError(f"cf_mode must be one of {CF_MODES}, got {cf_mode!r}")
    return MixtureNoiseParams(float(v), epsilon, kappa)


@dataclass(frozen=True)
class AnalyticBerInputs:
    """Everything the analytic BER needs besides quadrature controls.

    `offset` pins the fractional chip offset of every interferer instead of
    averaging it out; ``offset=0`` is the chip-synchronous case.
    """

    prof: BoundaryProfile
    num_users: int
    noise: MixtureNoiseParams
    cf_mode: str = "paper"
    offset: float | None = None

    def __post_init__(self):
        if self.cf_mode not in CF_MODES:
            raise ValueError(f"cf_mode must be one of {CF_MODES}, got {self.cf_mode!r}")
        if self.num_users < 1:
            raise ValueError("num_users must be >= 1")
        if self.offset is not None and not 0 <= self.offset < 1:
            raise ValueError("offset must lie in [0, 1)")

    @classmethod
    def gaussian(cls, prof: BoundaryProfile, num_users: int, sigma_n1: float,
                 cf_mode: str = "paper", offset: float | None = None) -> "AnalyticBerInputs":
        return cls(prof, num_users, noise_for_sigma_n1(sigma_n1, cf_mode=cf_mode), cf_mode, offset)

    @property
    def sigma_n1(self) -> float:
        if self.cf_mode == "paper":
            return float(np.sqrt(2.0 * self.noise.paper_exponent))
        return float(np.sqrt(self.noise.variance))

    def noise_components(self) -> list[tuple[float, float]]:
        """(weight, variance) of the Gaussian components of ``n1``."""
        if self.cf_mode == "paper":
            return [(1.0, self.sigma_n1**2)]
        return [(w, var) for w, var in self.noise.components() if w > 0]

    def noise_cf(self, omega):
        if self.cf_mode == "paper":
            return noise_cf_paper(omega, self.noise)
        return noise_cf_exact(omega, self.noise)

    def interference_cf(self, omega):
        if self.offset is None or self.num_users == 1:
            return total_interference_cf(omega, self.prof, self.num_users)
        return interferer_cf_given_sB(omega, self.offset, self.prof) ** (self.num_users - 1)


def _noise_omega_max(inp: AnalyticBerInputs, quad: QuadratureSpec) -> float:
    if quad.omega_max is not None:
        return quad.omega_max
    sd_min = min(np.sqrt(var) for _, var in inp.noise_components())
    return _NOISE_DECAY / sd_min


def disturbance_cf(omega, inp: AnalyticBerInputs):
    """CF of interference plus matched-filter noise."""
    return inp.interference_cf(omega) * inp.noise_cf(omega)


def _sin_over(x, omega):
    # sin(x w) / w, finite at w = 0
    return x * np.sinc(x * omega / np.pi)


def disturbance_cdf(xi: float, inp: AnalyticBerInputs, quad: QuadratureSpec = QuadratureSpec()) -> float:
    """Distribution function of the total disturbance by Fourier inversion."""
    xi = float(xi)
    if xi == 0.0:
        return 0.5
    wmax = _noise_omega_max(inp, quad)

    def f(w):
        return disturbance_cf(w, inp) * _sin_over(xi, w)

    val, _ = integrate(f, 0.0, wmax, quad, max_panel_width=np.pi / (2 * abs(xi)))
    return 0.5 + val / np.pi


def conditional_ber(a1: float, inp: AnalyticBerInputs, quad: QuadratureSpec = QuadratureSpec()) -> float:
    """Error probability for a fixed target amplitude `a1`.

    Computed as the noise-only Q-function term plus the inversion integral
    of ``[1 - Phi_I] Phi_n1``; the integrand vanishes identically without
    interferers.
    """
    if a1 < 0:
        raise ValueError("a1 must be non-negative")
    n = inp.prof.n
    x = a1 * n
    base = sum(wc * gaussian_q(x / np.sqrt(var)) for wc, var in inp.noise_components())
    if x == 0.0 or inp.num_users == 1:
        return float(base)
    wmax = _noise_omega_max(inp, quad)

    def f(w):
        return (1.0 - inp.interference_cf(w)) * inp.noise_cf(w) * _sin_over(x, w)

    val, _ = integrate(f, 0.0, wmax, quad, max_panel_width=np.pi / (2 * x))
    return float(base + val / np.pi)


def single_user_ber(n: int, sigma: float) -> float:
    """Rayleigh-averaged ``Q(A N / sigma)``: ``(1 - N / sqrt(sigma^2 + N^2)) / 2``."""
    return 0.5 * (1.0 - n / np.sqrt(sigma**2 + n**2))


def average_ber_paths(inp: AnalyticBerInputs, quad: QuadratureSpec = QuadratureSpec()) -> tuple[float, float]:
    """Fading-averaged BER by two routes.

    Returns ``(direct, split)`` where ``direct`` integrates
    ``Phi_I Phi_n1 exp(-w^2 N^2 / 2)`` and ``split`` is the closed-form
    noise-only part plus the integral of ``[1 - Phi_I] Phi_n1 exp(...)``.
    """
    n = inp.prof.n
    wmax = quad.omega_max if quad.omega_max is not None else _FADING_DECAY / n
    scale = n / np.sqrt(2 * np.pi)

    def damp(w):
        return np.exp(-0.5 * (w * n) ** 2)

    direct_int, _ = integrate(lambda w: disturbance_cf(w, inp) * damp(w), 0.0, wmax, quad)
    direct = 0.5 - scale * direct_int

    base = sum(wc * single_user_ber(n, np.sqrt(var)) for wc, var in inp.noise_components())
    if inp.num_users == 1:
        split = base
    else:
        split_int, _ = integrate(
            lambda w: (1.0 - inp.interference_cf(w)) * inp.noise_cf(w) * damp(w), 0.0, wmax, quad
        )
        split = base + scale * split_int
    return float(direct), float(split)


def average_ber(inp: AnalyticBerInputs, quad: QuadratureSpec = QuadratureSpec()) -> float:
    """Fading-averaged BER of the target user.

    Raises
    ------
    QuadratureError
        On non-convergence, or if the two evaluation routes of
        :func:`average_ber_paths` disagree by more than ``10 * abs_tol``.
    """
    direct, split = average_ber_paths(inp, quad)
    if abs(direct - split) > 10 * quad.abs_tol:
        raise QuadratureError(
            f"direct and split BER routes disagree: {direct!r} vs {split!r}"
        )
    return direct
