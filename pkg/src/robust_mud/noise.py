"""epsilon-contaminated Gaussian noise.

Each real component is drawn from ``(1 - eps) N(0, v^2) + eps N(0, kappa v^2)``.
Two characteristic functions are provided: :func:`noise_cf_paper`, the closed
form used by the analytic BER route, and :func:`noise_cf_exact`, the true CF
of the mixture. Monte Carlo samples converge to the latter only.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "MixtureNoiseParams",
    "mixture_pdf",
    "sample_noise",
    "noise_cf_paper",
    "noise_cf_exact",
]


@dataclass(frozen=True)
class MixtureNoiseParams:
    """Parameters of the two-term Gaussian mixture.

    Parameters
    ----------
    v : float
        Standard deviation of the nominal component.
    epsilon : float
        Probability that a sample comes from the impulsive component.
    kappa : float
        Variance inflation of the impulsive component.
    """

    v: float
    epsilon: float = 0.0
    kappa: float = 1.0

    def __post_init__(self):
        if not self.v > 0:
            raise ValueError(f"v must be positive, got {self.v}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if not self.kappa >= 1.0:
            raise ValueError(f"kappa must be >= 1, got {self.kappa}")

    @property
    def variance(self) -> float:
        """Per-component variance ``(1 - eps) v^2 + eps kappa v^2``."""
        return (1.0 - self.epsilon) * self.v**2 + self.epsilon * self.kappa * self.v**2

    @property
    def paper_exponent(self) -> float:
        """Coefficient ``c`` with ``noise_cf_paper(w) = exp(-c w^2)``."""
        eps = self.epsilon
        return self.v**2 * (1.0 - eps) ** 2 + self.kappa**3 * self.v**2 * eps**2

    def components(self) -> list[tuple[float, float]]:
        """(weight, variance) pairs of the mixture."""
        return [
            (1.0 - self.epsilon, self.v**2),
            (self.epsilon, self.kappa * self.v**2),
        ]

    def scaled(self, v: float) -> "MixtureNoiseParams":
        return MixtureNoiseParams(v, self.epsilon, self.kappa)


def _gauss(x, var):
    return np.exp(-0.5 * x * x / var) / np.sqrt(2.0 * np.pi * var)


def mixture_pdf(x, p: MixtureNoiseParams):
    """Mixture density evaluated elementwise at `x`."""
    x = np.asarray(x, dtype=float)
    return (1.0 - p.epsilon) * _gauss(x, p.v**2) + p.epsilon * _gauss(x, p.kappa * p.v**2)


def sample_noise(p: MixtureNoiseParams, count, stream: np.random.Generator):
    """Draw complex mixture noise.

    In-phase and quadrature parts are independent, each with its own
    contamination indicator. The draws consumed from `stream` do not depend
    on ``p``, so the same stream state yields noise that scales exactly with
    ``p.v``.

    Parameters
    ----------
    p : MixtureNoiseParams
    count : int or tuple of int
        Output shape.
    stream : numpy.random.Generator

    Returns
    -------
    ndarray of complex128
    """
    shape = (count,) if np.isscalar(count) else tuple(count)
    if any(s < 0 for s in shape):
        raise ValueError("count must be non-negative")
    z = stream.standard_normal(shape + (2,))
    u = stream.random(shape + (2,))
    scale = np.where(u < p.epsilon, np.sqrt(p.kappa), 1.0) * p.v
    z *= scale
    return z[..., 0] + 1j * z[..., 1]


def noise_cf_paper(omega, p: MixtureNoiseParams):
    """Closed-form noise CF ``exp(-[v^2 (1-eps)^2 + kappa^3 v^2 eps^2] w^2)``.

    This is a Gaussian CF with variance ``2 * p.paper_exponent``; it is not
    the CF of the mixture (see :func:`noise_cf_exact`).
    """
    omega = np.asarray(omega, dtype=float)
    return np.exp(-p.paper_exponent * omega * omega)


def noise_cf_exact(omega, p: MixtureNoiseParams):
    """CF of one real mixture component."""
    omega = np.asarray(omega, dtype=float)
    w2 = omega * omega
    return (1.0 - p.epsilon) * np.exp(-0.5 * p.v**2 * w2) + p.epsilon * np.exp(
        -0.5 * p.kappa * p.v**2 * w2
    )
