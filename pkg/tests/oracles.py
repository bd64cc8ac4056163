"""Independent reference values, computed with mpmath or direct quadrature
rather than through the package's own code paths."""

import math

import mpmath as mp
import numpy as np
from scipy import integrate

mp.mp.dps = 40


def A_n(n: int) -> float:
    """Gamma_upper(n/2, 1/4) / (n Gamma(n/2)) at 40 digits."""
    a = mp.mpf(n) / 2
    return float(mp.gammainc(a, mp.mpf(1) / 4, mp.inf) / (n * mp.gamma(a)))


def B_n(n: int) -> float:
    a = mp.mpf(n) / 2
    return float(mp.gammainc(a, 0, mp.mpf(1) / 4) / mp.gamma(a))


def c_s(s: float) -> float:
    s = mp.mpf(s)
    return float(mp.gamma(1 - s) / (mp.power(4, s - mp.mpf(1) / 2) * mp.gamma(s)))


def subordination(lam: float, s: float, y: float) -> float:
    """y^{2s}/(4^s Gamma(s)) int exp(-y^2/(4 tau) - lam tau) tau^{-1-s} dtau via mpmath."""
    lam, s, y = mp.mpf(lam), mp.mpf(s), mp.mpf(y)
    f = lambda t: mp.exp(-y * y / (4 * t) - lam * t) * t ** (-1 - s)
    return float(y ** (2 * s) / (4 ** s * mp.gamma(s)) * mp.quad(f, [0, y * y / 4, 1, mp.inf]))


def heat_gaussian_evolution(t: float, x: float) -> float:
    """int W(t, x - z) exp(-z^2/2) dz by adaptive quadrature (n = 1)."""
    if t == 0:
        return math.exp(-0.5 * x * x)
    g = lambda z: math.exp(-(x - z) ** 2 / (4 * t)) / math.sqrt(4 * math.pi * t) * math.exp(-0.5 * z * z)
    val, _ = integrate.quad(g, -np.inf, np.inf, epsabs=1e-14, epsrel=1e-13)
    return val


def mehler_direct(tau: float, x: float, y: float) -> float:
    """One-dimensional Mehler kernel from the eigenfunction sum, mpmath precision."""
    tau, x, y = mp.mpf(tau), mp.mpf(x), mp.mpf(y)
    return float((2 * mp.pi * mp.sinh(2 * tau)) ** mp.mpf(-0.5)
                 * mp.exp(-((x - y) ** 2) * mp.coth(2 * tau) / 2 - x * y * mp.tanh(tau)))
