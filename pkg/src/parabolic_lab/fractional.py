"""Poisson extension operators for the fractional heat and oscillator
parabolic operators, their maximal functions, the Neumann limit at y = 0 and
residuals of the degenerate extension equation.

Both operators subordinate the parabolic semigroup to the density

    g_y(tau) = y^{2s} exp(-y^2/(4 tau)) tau^{-1-s} / (4^s Gamma(s)),

which has unit mass in tau.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, special

from ._engine import Engine
from ._subordination import subordinate
from .grid import GridFunction, GridSpec, finite_difference, interior_mask
from .kernels import poisson_density
from .riesz import check_support

__all__ = [
    "FracParams",
    "ExtensionField",
    "default_y_grid",
    "c_s_closed_form",
    "fit_c_s",
    "scalar_subordination",
    "kernel_mass",
    "poisson_heat",
    "poisson_hermite",
    "poisson",
    "maximal_poisson",
    "extension_field",
    "NeumannFit",
    "neumann_limit",
    "ResidualReport",
    "extension_residual",
]


def default_y_grid() -> np.ndarray:
    """2^-k, k = 12..0 (increasing)."""
    return 2.0 ** -np.arange(12, -1, -1, dtype=float)


def _check_s(s):
    if not 0.0 < s < 1.0:
        raise ValueError("s must lie in (0, 1)")


def _check_y(y):
    if not (y > 0 and math.isfinite(y)):
        raise ValueError("extension height y must be positive")


def c_s_closed_form(s: float) -> float:
    """Gamma(1-s) / (4^(s-1/2) Gamma(s)); kept as a cross-check for fit_c_s."""
    _check_s(s)
    return math.gamma(1 - s) / (4 ** (s - 0.5) * math.gamma(s))


# ---------------------------------------------------------------------------
# scalar oracle


def scalar_subordination(lam, s: float, y: float, allow_imaginary: bool = False):
    """y^{2s}/(4^s Gamma(s)) int_0^inf exp(-y^2/(4 tau) - tau lam) tau^{-1-s} dtau.

    Re lam must be positive; lam = 0 returns 1 (unit mass).  With
    ``allow_imaginary`` purely imaginary lam are accepted as well: the
    integral still converges and is continuous up to Re lam = 0.
    """
    _check_s(s)
    _check_y(y)
    lam = np.asarray(lam, dtype=complex)
    bad = (lam.real < 0) | ((lam.real == 0) & (lam != 0) & (not allow_imaginary))
    if np.any(bad):
        raise ValueError("scalar_subordination needs Re lam > 0 (or lam = 0)")
    out = subordinate(lam, s, y)
    return out if out.ndim else complex(out)


# ---------------------------------------------------------------------------
# local asymptotic fit at y -> 0


def _basis(y, s, terms):
    """Columns y^e for the exponents of the small-y expansion, sorted."""
    ex = sorted({0.0, 2 * s, 2.0, 2 + 2 * s, 4.0, 4 + 2 * s})[:terms]
    return np.stack([y ** e for e in ex], axis=-1), ex


@dataclass
class NeumannFit:
    """Least-squares fit of U(y) on the small-y exponents 0, 2s, 2, 2+2s, ...

    ``value`` = -2s * (coefficient of y^{2s}) = -lim y^{1-2s} U_y."""

    value: np.ndarray
    exponents: list
    rel_residual: float
    trace: np.ndarray


def _neumann_fit(y, U, s, terms=4):
    y = np.asarray(y, dtype=float)
    B, ex = _basis(y / y.max(), s, terms)
    k = ex.index(2 * s)
    shape = U.shape[1:]
    cols = U.reshape(U.shape[0], -1)
    # scaled columns keep the normal equations well conditioned
    Q, R = np.linalg.qr(B)
    coef = np.linalg.solve(R, Q.T @ cols)
    resid = cols - B @ coef
    # floor at round-off of the data so flat columns do not amplify noise
    scale = max(float(np.max(np.abs(cols - cols[:1]))), 1e-10 * float(np.max(np.abs(cols))), 1e-300)
    rel = float(np.max(np.abs(resid))) / scale
    a = coef[k] / y.max() ** (2 * s)
    return NeumannFit((-2 * s * a).reshape(shape), ex, rel, coef[0].reshape(shape))


def _fit_heights(s):
    return 2.0 ** -np.arange(6, 15, dtype=float)


@lru_cache(maxsize=None)
def fit_c_s(s: float) -> float:
    """c_s from the scalar oracle at lam = 1: -lim y^{1-2s} d_y P_y(1)."""
    _check_s(s)
    y = _fit_heights(s)
    vals = np.array([scalar_subordination(1.0, s, float(v)).real for v in y])
    return float(_neumann_fit(y, vals[:, None], s, terms=5).value[0])


@dataclass
class FracParams:
    s: float
    c_s: Optional[float] = None
    y_grid: np.ndarray = field(default_factory=default_y_grid)

    def __post_init__(self):
        _check_s(self.s)
        if self.c_s is None:
            self.c_s = fit_c_s(self.s)
        if not self.c_s > 0:
            raise ValueError("c_s must be positive")
        self.y_grid = np.asarray(self.y_grid, dtype=float)
        if self.y_grid.ndim != 1 or self.y_grid.size < 1 or np.any(self.y_grid <= 0):
            raise ValueError("y_grid must hold positive heights")
        if np.any(np.diff(self.y_grid) <= 0):
            raise ValueError("y_grid must be strictly increasing")


# ---------------------------------------------------------------------------
# Poisson operators


def kernel_mass(s: float, y: float) -> float:
    """Space-time mass of the heat Poisson kernel: int_0^inf g_y(tau) dtau.

    The spatial Gaussian integrates to one, so only the tau integral is
    computed (by quadrature in log tau around the peak y^2/(4(1+s)))."""
    _check_s(s)
    _check_y(y)
    c = math.log(y * y / (4 * (1 + s)))

    def g(u):
        t = math.exp(u)
        return float(poisson_density(np.array([t]), s, y)[0]) * t

    pieces = [c - 40, c - 5, c - 1, c + 1, c + 5, c + 40, c + 200, c + 700]
    total = 0.0
    for a, b in zip(pieces[:-1], pieces[1:]):
        v, _ = integrate.quad(g, a, b, epsabs=0.0, epsrel=1e-13, limit=400)
        total += v
    # mass beyond c + 700 in closed form (below 1e-70 for s >= 0.25)
    total += special.gammainc(s, y * y / (4 * math.exp(c + 700)))
    return total


def _density(s, y):
    return lambda tau: poisson_density(tau, s, y)


def _survival(s, y):
    return lambda T: float(special.gammainc(s, y * y / (4 * T)))


def poisson(u: GridFunction, y: float, s: float, operator: str = "heat", periodic: bool = False
            ) -> GridFunction:
    _check_s(s)
    _check_y(y)
    if not periodic:
        check_support(u)
    E = Engine(u.spec, operator, periodic)
    dens = _density(s, y)
    vals = E.full(u.values, "value", density=dens, extra_breaks=(y * y,), scales=(y * y,))
    if periodic and operator == "heat":
        vals = vals + E.tail(u.values, dens, _survival(s, y))
    return GridFunction(u.spec, vals)


def poisson_heat(u: GridFunction, y: float, s: float, periodic: bool = False) -> GridFunction:
    """P^s_y u for d_t - Delta by tau quadrature against the Gauss-Weierstrass
    kernel.  Non-periodic data must vanish on the grid boundary."""
    return poisson(u, y, s, "heat", periodic)


def poisson_hermite(u: GridFunction, y: float, s: float, periodic: bool = False) -> GridFunction:
    """P^s_y u for d_t + H with the Mehler kernel (``periodic``: in time only)."""
    return poisson(u, y, s, "hermite", periodic)


def maximal_poisson(u: GridFunction, s: float, y_grid: Optional[Sequence[float]] = None,
                    operator: str = "heat", periodic: bool = False) -> GridFunction:
    """Pointwise sup over y_grid of |P^s_y u|."""
    ys = default_y_grid() if y_grid is None else np.asarray(y_grid, dtype=float)
    if ys.size == 0:
        raise ValueError("y_grid is empty")
    out = np.zeros(u.spec.shape)
    for y in ys:
        out = np.maximum(out, np.abs(poisson(u, float(y), s, operator, periodic).values))
    return GridFunction(u.spec, out)


@dataclass
class ExtensionField:
    spec: GridSpec
    y_grid: np.ndarray
    values: np.ndarray  # (K,) + spec.shape; values[k] = U(., ., y_k)
    trace: Optional[np.ndarray] = None  # U(., ., 0) when known

    def __post_init__(self):
        self.y_grid = np.asarray(self.y_grid, dtype=float)
        self.values = np.asarray(self.values)
        if self.values.shape != (self.y_grid.size,) + self.spec.shape:
            raise ValueError("extension values do not match (y_grid, grid) shape")
        if np.any(np.diff(self.y_grid) <= 0) or np.any(self.y_grid < 0):
            raise ValueError("y_grid must be nonnegative and strictly increasing")


def extension_field(u: GridFunction, s: float, y_grid: Sequence[float], operator: str = "heat",
                    periodic: bool = False, include_trace: bool = True) -> ExtensionField:
    """U(., ., y) for every y in the grid; a leading y = 0 level holds u itself."""
    ys = np.asarray(y_grid, dtype=float)
    levels = [poisson(u, float(y), s, operator, periodic).values for y in ys]
    if include_trace:
        ys = np.concatenate([[0.0], ys])
        levels = [np.asarray(u.values, dtype=float)] + levels
    return ExtensionField(u.spec, ys, np.stack(levels), np.asarray(u.values))


# ---------------------------------------------------------------------------
# Neumann limit


def neumann_limit(u: GridFunction, s: float, y_schedule: Optional[Sequence[float]] = None,
                  operator: str = "heat", periodic: bool = False, report: bool = False,
                  max_rel_residual: float = 1e-3):
    """-lim_{y->0} y^{1-2s} U_y, which equals c_s (d_t - Delta)^s u.

    U is sampled on the decreasing ``y_schedule`` and every (t, x) column is
    fitted on the small-y exponents 0, 2s, 2, 2+2s; the y^{2s} coefficient
    gives the limit.  A fit whose residual exceeds ``max_rel_residual`` of
    the column variation is reported as an ArithmeticError.
    """
    _check_s(s)
    spec = u.spec
    if y_schedule is None:
        r0 = min(spec.h_x, math.sqrt(spec.h_t))
        y_schedule = r0 * 2.0 ** -np.arange(2, 11, dtype=float)
    ys = np.asarray(y_schedule, dtype=float)
    if ys.size < 5 or np.any(np.diff(ys) >= 0) or np.any(ys <= 0):
        raise ValueError("y_schedule must hold at least five decreasing positive heights")
    U = np.stack([poisson(u, float(y), s, operator, periodic).values for y in ys])
    fit = _neumann_fit(ys, U, s)
    if fit.rel_residual > max_rel_residual:
        raise ArithmeticError(f"small-y fit residual {fit.rel_residual:.2e} exceeds {max_rel_residual:.1e}")
    out = GridFunction(spec, fit.value)
    return (out, fit) if report else out


# ---------------------------------------------------------------------------
# extension equation residual


@dataclass
class ResidualReport:
    relative: float
    relative_plus: Optional[float]
    absolute: float
    nodes: int
    scale: float
    detail: dict = field(default_factory=dict)


def _weighted_y_operator(U, y, a):
    """y^{-a} d_y(y^a d_y U) at interior y nodes by conservative flux differences.

    The flux y^a U_y across [y_k, y_k+1] is dU / int y^-a dy and the control
    volume around y_k carries the measure int y^a dy; both weights are exact
    for the singular part y^(1-a) of U near y = 0."""
    def prim(v, e):
        return v ** (e + 1) / (e + 1)

    shape = (-1,) + (1,) * (U.ndim - 1)
    resist = prim(y[1:], -a) - prim(y[:-1], -a)
    flux = np.diff(U, axis=0) / resist.reshape(shape)
    ym = 0.5 * (y[1:] + y[:-1])
    mass = prim(ym[1:], a) - prim(ym[:-1], a)
    return np.diff(flux, axis=0) / mass.reshape(shape)


def extension_residual(U: ExtensionField, s: float, operator: str = "heat") -> ResidualReport:
    """Residual of d_t U - y^{-(1-2s)} div_{x,y}(y^{1-2s} grad_{x,y} U) (+|x|^2 U).

    For ``hermite`` the zeroth-order term enters as +|x|^2 U in the residual,
    i.e. the equation d_t V = y^{-a} d_y(y^a d_y V) + Delta V - |x|^2 V; the
    residual with the opposite sign is reported in ``relative_plus``.
    Interior nodes in (t, x) and in y are used."""
    _check_s(s)
    y = U.y_grid
    if y.size < 3:
        raise ValueError("extension_residual needs at least three y levels")
    spec = U.spec
    a = 1.0 - 2.0 * s
    Yop = _weighted_y_operator(U.values, y, a)
    core = []
    for k in range(1, y.size - 1):
        g = GridFunction(spec, U.values[k])
        r = finite_difference(g, "t").values - Yop[k - 1]
        for l in range(spec.n):
            r = r - finite_difference(g, "ij", l, l).values
        core.append(r)
    core = np.stack(core)
    mask = interior_mask(spec)
    scale = float(np.sqrt(np.mean(np.abs(finite_difference(GridFunction(spec, U.values[1]), "t").values[mask]) ** 2
                                  + np.abs(Yop[0][mask]) ** 2)))
    scale = max(scale, 1e-300)

    def norm(r):
        return float(np.sqrt(np.mean(np.abs(r[:, mask]) ** 2)))

    if operator == "hermite":
        x = spec.x_nodes()
        r2 = sum(x.reshape([1] * (l + 1) + [-1] + [1] * (spec.n - l - 1)) ** 2 for l in range(spec.n))
        V = U.values[1:-1]
        minus = core + r2 * V
        plus = core - r2 * V
        return ResidualReport(norm(minus) / scale, norm(plus) / scale, norm(minus), int(mask.sum()) * core.shape[0],
                              scale, {"sign": "-|x|^2 V in the equation"})
    if operator != "heat":
        raise ValueError("operator must be 'heat' or 'hermite'")
    return ResidualReport(norm(core) / scale, None, norm(core), int(mask.sum()) * core.shape[0], scale)
