"""Quadrature of the subordination integral

    y^{2s} / (4^s Gamma(s)) * int_0^inf exp(-y^2/(4 tau)) exp(-tau lam) tau^{-1-s} dtau

for complex lam with Re lam >= 0.  The tau ray is rotated by -arg(lam)/2 so
that it passes through the saddle point y / (2 sqrt(lam)); on that ray both
exponentials decay and the integrand does not oscillate.  The ray is then
parametrized by tau = e^u and integrated by the trapezoid rule, which is
spectrally accurate for the doubly exponential decay in u.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

U_HALF_WIDTH = 40.0
U_NODES = 4001


def subordinate(lam, s: float, y: float, nodes: int = U_NODES, half_width: float = U_HALF_WIDTH,
                chunk: int = 2048):
    lam = np.asarray(lam, dtype=complex)
    shape = lam.shape
    flat = lam.ravel()
    out = np.empty(flat.shape, dtype=complex)
    u = np.linspace(-half_width, half_width, nodes)
    du = u[1] - u[0]
    tw = np.full(nodes, du)
    tw[0] = tw[-1] = 0.5 * du
    log_pref = 2 * s * math.log(y) - s * math.log(4.0) - special.gammaln(s)
    for a in range(0, flat.size, chunk):
        lm = flat[a:a + chunk]
        zero = lm == 0
        lm_safe = np.where(zero, 1.0, lm)
        phi = -0.5 * np.angle(lm_safe)
        center = np.log(y / (2.0 * np.sqrt(np.abs(lm_safe))))
        log_r = center[:, None] + u[None, :]
        log_tau = log_r + 1j * phi[:, None]
        tau = np.exp(log_tau)
        with np.errstate(over="ignore", under="ignore"):
            expo = -y * y / (4.0 * tau) - lm_safe[:, None] * tau - s * log_tau + log_pref
            vals = np.exp(expo)
        res = vals @ tw
        out[a:a + chunk] = np.where(zero, 1.0, res)
    return out.reshape(shape)
