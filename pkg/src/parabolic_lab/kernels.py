"""Gauss-Weierstrass and Mehler kernels, their derivative kernels, and
sampled size/smoothness bounds.

Everything is evaluated in log space: hyperbolic functions go through
``log_sinh``/``log_cosh`` and a kernel is exponentiated once.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import special
from scipy.stats import qmc

__all__ = [
    "TAU_FLOOR",
    "log_sinh",
    "log_cosh",
    "coth",
    "gauss_weierstrass",
    "gw_derivative",
    "heat_kernel_derivative",
    "mehler",
    "mehler_cross_form",
    "MehlerFactorization",
    "mehler_factors",
    "mehler_x_derivative",
    "hermite_riesz_integrand",
    "poisson_density",
    "SampleCloud",
    "sample_cloud",
    "BoundReport",
    "bound_check",
    "bound_stability",
    "comparison_kernel_integral",
    "KERNEL_IDS",
]

# Smallest tau the Mehler routines accept; below it coth(tau) ~ 1/tau
# exceeds the double range once squared, so tau is clamped here.
TAU_FLOOR = 1e-200


def _check_tau(tau):
    tau = np.asarray(tau, dtype=float)
    if np.any(~(tau > 0)):
        raise ValueError("tau must be positive")
    return tau


def log_sinh(z):
    """log(sinh z) for z > 0 without overflow or cancellation."""
    z = np.asarray(z, dtype=float)
    return z - math.log(2.0) + np.log(-np.expm1(-2.0 * z))


def log_cosh(z):
    z = np.abs(np.asarray(z, dtype=float))
    return z - math.log(2.0) + np.log1p(np.exp(-2.0 * z))


def coth(z):
    z = np.asarray(z, dtype=float)
    return -1.0 / np.expm1(-2.0 * z) * (1.0 + np.exp(-2.0 * z))


def _sq(y):
    return np.sum(np.asarray(y, dtype=float) ** 2, axis=-1)


def _as_points(y, n):
    y = np.asarray(y, dtype=float)
    if n == 1 and (y.ndim == 0 or y.shape[-1] != 1):
        y = y[..., None]
    if y.shape[-1] != n:
        raise ValueError(f"last axis of spatial points must have length n={n}")
    return y


# ---------------------------------------------------------------------------
# Gauss-Weierstrass


def gauss_weierstrass(n: int, tau, y):
    """(4 pi tau)^(-n/2) exp(-|y|^2 / (4 tau)); ``y`` has last axis n
    (a bare scalar or 1-D array is accepted when n = 1)."""
    tau = _check_tau(tau)
    y = _as_points(y, n)
    return np.exp(-0.5 * n * np.log(4.0 * np.pi * tau) - _sq(y) / (4.0 * tau))


def _he(k, z):
    """Probabilists' Hermite polynomial He_k."""
    if k == 0:
        return np.ones_like(z)
    p0, p1 = np.ones_like(z), z
    for m in range(1, k):
        p0, p1 = p1, z * p1 - m * p0
    return p1


def heat_kernel_derivative(n: int, alpha: Sequence[int], tau, y, tau_order: int = 0):
    """d_tau^tau_order d_y^alpha W(tau, y) in closed form.

    Uses d_y^k W_1 = (-1)^k (2 tau)^(-k/2) He_k(y / sqrt(2 tau)) W_1 per axis
    and d_tau W = Delta W for the time derivatives.
    """
    tau = _check_tau(tau)
    y = _as_points(y, n)
    alpha = tuple(alpha) + (0,) * (n - len(alpha))
    if tau_order > 0:
        out = 0.0
        for l in range(n):
            a = list(alpha)
            a[l] += 2
            out = out + heat_kernel_derivative(n, a, tau, y, tau_order - 1)
        return out
    w = gauss_weierstrass(n, tau, y)
    s = np.sqrt(2.0 * tau)
    poly = 1.0
    for i, k in enumerate(alpha):
        if k:
            poly = poly * (-1.0) ** k * _he(k, y[..., i] / s) / s ** k
    return poly * w


def gw_derivative(kind: str, n: int, tau, y, i: int = 0, j: int = 0):
    """Derivative kernels of W: kind ``i`` (d_{y_i}), ``ij`` (d_{y_i y_j}) or
    ``tau``.  Axis indices are zero-based.  The ``ij`` kernel equals
    (-delta_ij / (2 tau) + y_i y_j / (4 tau^2)) W."""
    alpha = [0] * n
    if kind == "i":
        alpha[i] += 1
        return heat_kernel_derivative(n, alpha, tau, y)
    if kind == "ij":
        alpha[i] += 1
        alpha[j] += 1
        return heat_kernel_derivative(n, alpha, tau, y)
    if kind == "tau":
        return heat_kernel_derivative(n, alpha, tau, y, tau_order=1)
    raise ValueError(f"unknown derivative kind {kind!r}")


# ---------------------------------------------------------------------------
# Mehler


@dataclass(frozen=True)
class MehlerFactorization:
    """S * Hfac * Gfac with S = (2 pi sinh 2tau)^(-n/2),
    Hfac = exp(-|x-y|^2 coth(tau) / 4), Gfac = exp(-|x+y|^2 tanh(tau) / 4)."""

    S: np.ndarray
    Hfac: np.ndarray
    Gfac: np.ndarray
    tau: np.ndarray
    x: np.ndarray
    y: np.ndarray

    @property
    def product(self):
        return self.S * self.Hfac * self.Gfac


def _offset(x, y, z, n):
    """Points and the exact difference y - x; ``z`` (if given) overrides y = x + z."""
    x = _as_points(x, n)
    if z is None:
        y = _as_points(y, n)
        return x, y, y - x
    z = _as_points(z, n)
    return x, x + z, z


def _mehler_logs(n, tau, x, y, z=None):
    tau = np.maximum(_check_tau(tau), TAU_FLOOR)
    x, y, d = _offset(x, y, z, n)
    log_s = -0.5 * n * (math.log(2.0 * np.pi) + log_sinh(2.0 * tau))
    log_h = -0.25 * _sq(d) * coth(tau)
    log_g = -0.25 * _sq(2.0 * x + d) * np.tanh(tau)
    return log_s, log_h, log_g, tau, x, y


def mehler_factors(n: int, tau, x, y) -> MehlerFactorization:
    log_s, log_h, log_g, tau, x, y = _mehler_logs(n, tau, x, y)
    return MehlerFactorization(np.exp(log_s), np.exp(log_h), np.exp(log_g), tau, x, y)


def mehler(n: int, tau, x, y, z=None):
    """Kernel of exp(-tau H), H = -Delta + |x|^2, from the S, H, G factors.

    ``tau`` below ``TAU_FLOOR`` is clamped to it.  Passing the offset ``z``
    (with y = x + z, ``y`` ignored) keeps y - x exact for tiny offsets."""
    log_s, log_h, log_g, *_ = _mehler_logs(n, tau, x, y, z)
    return np.exp(log_s + log_h + log_g)


def mehler_cross_form(n: int, tau, x, y):
    """Cross-check form (2 pi sinh 2tau)^(-n/2) exp(-|x-y|^2 coth(2tau)/2 - x.y tanh(tau))."""
    tau = np.maximum(_check_tau(tau), TAU_FLOOR)
    x = _as_points(x, n)
    y = _as_points(y, n)
    expo = -0.5 * _sq(x - y) * coth(2.0 * tau) - np.sum(x * y, axis=-1) * np.tanh(tau)
    return np.exp(-0.5 * n * (math.log(2.0 * np.pi) + log_sinh(2.0 * tau)) + expo)


def _mehler1_poly(k, L, c):
    """P_k with d_x^k exp(Phi) = P_k exp(Phi), Phi' = L, Phi'' = -c."""
    p = [np.ones_like(L)]
    if k >= 1:
        p.append(L)
    for m in range(1, k):
        p.append(L * p[m] - m * c * p[m - 1])
    return p


def _leibniz_terms(k, p):
    """d^k (x^p u) = sum over r of coef x^(p-r) d^(k-r) u; yields (coef, p - r, k - r)."""
    for r in range(min(k, p) + 1):
        yield math.comb(k, r) * math.perm(p, r), p - r, k - r


def mehler_x_derivative(n: int, orders: Sequence[int], tau, x, y, x2_axis: Optional[int] = None,
                        z=None, powers: Optional[Sequence[int]] = None):
    """d_x^orders [ x^powers W_tau(x, y) ] for the Mehler kernel.

    ``x2_axis = l`` is shorthand for powers = 2 e_l.  The 1-D kernel is
    exp(Phi(x)) times a y-dependent factor, with Phi'(x) = -x coth 2tau +
    y / sinh 2tau and Phi'' = -coth 2tau, so each x-derivative is a scaled
    Hermite polynomial in Phi'.
    """
    base = mehler(n, tau, x, y, z)
    tau = np.maximum(_check_tau(tau), TAU_FLOOR)
    x, y, d = _offset(x, y, z, n)
    orders = tuple(orders) + (0,) * (n - len(orders))
    pw = [0] * n if powers is None else list(powers) + [0] * (n - len(powers))
    if x2_axis is not None:
        pw[x2_axis] += 2
    c = coth(2.0 * tau)
    csch = np.exp(-log_sinh(2.0 * tau))
    out = base
    for i, k in enumerate(orders):
        if not k and not pw[i]:
            continue
        # coth 2t - csch 2t = tanh t avoids cancellation for small tau
        L = d[..., i] * csch - x[..., i] * np.tanh(tau)
        P = _mehler1_poly(k, L, c)
        xi = x[..., i]
        out = out * sum(coef * xi ** q * P[j] for coef, q, j in _leibniz_terms(k, pw[i]))
    return out


def _normal_order(p, k):
    """x^p d^k as sum of coef d^(k-r) x^(p-r); yields (coef, k - r, p - r)."""
    for r in range(min(k, p) + 1):
        yield (-1) ** r * math.comb(k, r) * math.perm(p, r), k - r, p - r


def _oscillator_power(n, m):
    """(Delta - |x|^2)^m as {(derivs, powers): coef}, derivatives to the left."""
    gen = {}
    for l in range(n):
        e = tuple(2 if a == l else 0 for a in range(n))
        z = (0,) * n
        gen[(e, z)] = gen.get((e, z), 0) + 1
        gen[(z, e)] = gen.get((z, e), 0) - 1
    op = {((0,) * n, (0,) * n): 1}
    for _ in range(m):
        nxt = {}
        for (b1, g1), c1 in op.items():
            for (b2, g2), c2 in gen.items():
                # d^b1 x^g1 d^b2 x^g2: reorder the middle x^g1 d^b2 axis by axis
                terms = [(c1 * c2, (), ())]
                for a in range(n):
                    terms = [(c * cc, bb + (b1[a] + kk,), gg + (pp + g2[a],))
                             for c, bb, gg in terms for cc, kk, pp in _normal_order(g1[a], b2[a])]
                for c, bb, gg in terms:
                    nxt[(bb, gg)] = nxt.get((bb, gg), 0) + c
        op = {k: v for k, v in nxt.items() if v}
    return op


def _hermite_tau_derivative(n, orders, tau, x, y, tau_order, z=None):
    """d_tau^m d_x^orders W_tau via d_tau W = (Delta_x - |x|^2) W."""
    orders = list(orders) + [0] * (n - len(orders))
    out = 0.0
    for (b, g), c in _oscillator_power(n, tau_order).items():
        o = [u + v for u, v in zip(orders, b)]
        out = out + c * mehler_x_derivative(n, o, tau, x, y, z=z, powers=g)
    return out


def hermite_riesz_integrand(kind: str, n: int, tau, x, y, i: int = 0, j: int = 0):
    """Kernel of the Hermite parabolic Riesz transforms at (tau, x, y).

    ``ij``: d_{x_i x_j} W_tau(x, y), which is the S/H/G derivative combination
    written in the difference variable.  ``t``: d_tau W_tau(x, y), assembled
    from d_tau W = (Delta_x - |x|^2) W.
    """
    if kind == "ij":
        o = [0] * n
        o[i] += 1
        o[j] += 1
        return mehler_x_derivative(n, o, tau, x, y)
    if kind == "t":
        return _hermite_tau_derivative(n, [0] * n, tau, x, y, 1)
    raise ValueError(f"unknown integrand kind {kind!r}")


# ---------------------------------------------------------------------------
# Poisson density and kernels


def poisson_density(tau, s: float, yext: float):
    """y^{2s} exp(-y^2/(4 tau)) tau^{-1-s} / (4^s Gamma(s)); unit mass in tau."""
    tau = np.asarray(tau, dtype=float)
    out = np.zeros_like(tau)
    pos = tau > 0
    tp = tau[pos]
    out[pos] = np.exp(2 * s * math.log(yext) - yext ** 2 / (4 * tp) - (1 + s) * np.log(tp)
                      - s * math.log(4.0) - special.gammaln(s))
    return out


# ---------------------------------------------------------------------------
# bound checks


@dataclass(frozen=True)
class SampleCloud:
    """Points (tau, x, y); tau log-distributed, x and y spread over a box."""

    tau: np.ndarray
    x: np.ndarray
    y: np.ndarray
    descriptor: str

    @property
    def size(self) -> int:
        return int(self.tau.size)


def sample_cloud(n: int, count: int = 10_000, seed: int = 0, tau_range=(1e-4, 1e2),
                 box: float = 1.0) -> SampleCloud:
    """Scrambled Sobol points in (log tau, x, y); seeded and reproducible."""
    if count < 1:
        raise ValueError("cloud must be nonempty")
    sob = qmc.Sobol(d=1 + 2 * n, scramble=True, seed=seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # non power-of-two counts
        u = sob.random(count)
    lo, hi = np.log(tau_range[0]), np.log(tau_range[1])
    tau = np.exp(lo + (hi - lo) * u[:, 0])
    x = box * (2.0 * u[:, 1:1 + n] - 1.0)
    y = box * (2.0 * u[:, 1 + n:] - 1.0)
    desc = f"n={n} count={count} seed={seed} tau=[{tau_range[0]:g},{tau_range[1]:g}] box={box:g}"
    return SampleCloud(tau, x, y, desc)


@dataclass(frozen=True)
class BoundReport:
    kernel_id: str
    sup: float
    exponent: float
    cloud: str
    worst_point: tuple

    @property
    def finite(self) -> bool:
        return bool(np.isfinite(self.sup))


def _unit(n, i):
    a = [0] * n
    a[i] += 1
    return a


def _kernel_values(kernel_id, n, tau, x, y, i, j, s, yext):
    z = x - y
    if kernel_id == "gw":
        return gauss_weierstrass(n, tau, z)
    if kernel_id == "mehler":
        return mehler(n, tau, x, y)
    ij = [a + b for a, b in zip(_unit(n, i), _unit(n, j))]
    grad = [a + b for a, b in zip(ij, _unit(n, 0))]
    table = {
        "riesz_heat_ij": lambda: heat_kernel_derivative(n, ij, tau, z),
        "riesz_heat_t": lambda: heat_kernel_derivative(n, [0] * n, tau, z, 1),
        "riesz_heat_ij_grad": lambda: heat_kernel_derivative(n, grad, tau, z),
        "riesz_heat_t_grad": lambda: heat_kernel_derivative(n, _unit(n, 0), tau, z, 1),
        "riesz_heat_ij_dtau": lambda: heat_kernel_derivative(n, ij, tau, z, 1),
        "riesz_heat_t_dtau": lambda: heat_kernel_derivative(n, [0] * n, tau, z, 2),
        "riesz_hermite_ij": lambda: mehler_x_derivative(n, ij, tau, x, y),
        "riesz_hermite_t": lambda: _hermite_tau_derivative(n, [0] * n, tau, x, y, 1),
        "riesz_hermite_ij_grad": lambda: mehler_x_derivative(n, grad, tau, x, y),
        "riesz_hermite_t_grad": lambda: _hermite_tau_derivative(n, _unit(n, 0), tau, x, y, 1),
        "riesz_hermite_ij_dtau": lambda: _hermite_tau_derivative(n, ij, tau, x, y, 1),
        "riesz_hermite_t_dtau": lambda: _hermite_tau_derivative(n, [0] * n, tau, x, y, 2),
        "poisson_heat": lambda: poisson_density(tau, s, yext) * gauss_weierstrass(n, tau, z),
        "poisson_hermite": lambda: poisson_density(tau, s, yext) * mehler(n, tau, x, y),
    }
    if kernel_id not in table:
        raise ValueError(f"unknown kernel id {kernel_id!r}")
    return table[kernel_id]()


KERNEL_IDS = (
    "gw", "mehler",
    "riesz_heat_ij", "riesz_heat_t", "riesz_heat_ij_grad", "riesz_heat_t_grad",
    "riesz_heat_ij_dtau", "riesz_heat_t_dtau",
    "riesz_hermite_ij", "riesz_hermite_t", "riesz_hermite_ij_grad", "riesz_hermite_t_grad",
    "riesz_hermite_ij_dtau", "riesz_hermite_t_dtau",
    "poisson_heat", "poisson_hermite", "poisson_x_mass",
)


def bound_check(kernel_id: str, m: float, cloud: SampleCloud, i: int = 0, j: int = 0,
                s: float = 0.5, yext: float = 1.0, operator: str = "heat") -> BoundReport:
    """Sampled sup of |K(tau, x, y)| (tau^(1/2) + |x - y|)^m over the cloud.

    For ``poisson_x_mass`` the reported quantity is instead the sup over the
    cloud's tau values of the x-mass of the Poisson kernel divided by
    y^{2s} exp(-y^2/(4 tau)) / tau^{1+s}.
    """
    n = cloud.x.shape[-1]
    tau, x, y = cloud.tau, cloud.x, cloud.y
    if kernel_id == "poisson_x_mass":
        # the density cancels in the ratio; dividing would give 0/0 once it underflows
        vals = np.full_like(tau, 1.0 / (4.0 ** s * math.gamma(s)))
        if operator != "heat":
            # x-integral of the Mehler kernel is at most (cosh 2tau)^(-n/2), attained at z = 0
            vals = vals * np.exp(-0.5 * n * log_cosh(2.0 * tau))
        k = int(np.argmax(vals))
        return BoundReport(kernel_id, float(vals[k]), 0.0, cloud.descriptor, (float(tau[k]),))
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        vals = np.abs(_kernel_values(kernel_id, n, tau, x, y, i, j, s, yext))
        vals = vals * (np.sqrt(tau) + np.linalg.norm(x - y, axis=-1)) ** m
    vals = np.where(np.isfinite(vals), vals, np.inf)
    k = int(np.argmax(vals))
    worst = (float(tau[k]), tuple(float(v) for v in x[k]), tuple(float(v) for v in y[k]))
    return BoundReport(kernel_id, float(vals[k]), float(m), cloud.descriptor, worst)


def bound_stability(kernel_id: str, m: float, n: int, count: int = 10_000, seed: int = 0,
                    factor: int = 4, **kw):
    """(coarse report, refined report, relative drift) for a cloud refined by ``factor``."""
    coarse = bound_check(kernel_id, m, sample_cloud(n, count, seed), **kw)
    fine = bound_check(kernel_id, m, sample_cloud(n, factor * count, seed + 1), **kw)
    drift = abs(fine.sup - coarse.sup) / max(abs(coarse.sup), 1e-300)
    return coarse, fine, drift


def comparison_kernel_integral(n: int, nodes: int = 64) -> float:
    """Quadrature of (|z| + s^(1/2))^(-(n+2)) over {|z| > 1, 0 < s < 1}.

    Polar in z with the radial tail mapped to (0, 1] by r = 1/u; Gauss-Legendre
    in both variables.
    """
    x, w = np.polynomial.legendre.leggauss(nodes)
    u = 0.5 * (x + 1.0)
    wu = 0.5 * w
    # s = v^2 removes the square-root endpoint behaviour
    v, wv = u, wu
    r = 1.0 / u[:, None]
    jac_r = 1.0 / u[:, None] ** 2
    sv = v[None, :]
    integrand = r ** (n - 1) * (r + sv) ** (-(n + 2)) * jac_r * 2 * sv
    sphere = 2 * np.pi ** (n / 2) / math.gamma(n / 2)
    return float(sphere * np.sum(wu[:, None] * wv[None, :] * integrand))
