"""
Impulsive noise and the interference kernel
===========================================

Draw contaminated Gaussian noise, compare its histogram with the density,
then check the closed-form interference kernel against direct quadrature.
"""
import numpy as np
from scipy.integrate import quad

from robust_mud import MixtureNoiseParams, j_kernel, mixture_pdf, sample_noise

# A nominal component of std 1 plus 10% outliers with 100x the variance
p = MixtureNoiseParams(1.0, 0.1, 100.0)
x = sample_noise(p, 10**6, np.random.default_rng(0)).real
print(f"in-phase variance {x.var():.3f}, model {p.variance:.3f}")

# narrow windows so the density is nearly flat across each one
h = 0.1
for c in (-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0):
    frac = np.mean(np.abs(x - c) < h / 2) / h
    print(f"  x={c:+.1f}  empirical {frac:.4f}  density {mixture_pdf(c, p):.4f}")

# The kernel is a Gaussian averaged over a uniform offset
for i, j, w in [(0, 1, 1.0), (3, 2, 0.4), (-1, 5, 2.0)]:
    ref = quad(lambda s: np.exp(-0.5 * w**2 * (i + j * (1 - 2 * s)) ** 2), 0, 1, epsabs=1e-14)[0]
    print(f"J({i:+d},{j},{w}) = {j_kernel(i, j, w):.14f}   quad {ref:.14f}")
