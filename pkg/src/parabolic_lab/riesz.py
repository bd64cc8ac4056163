"""Solution operators for the heat and oscillator parabolic equations and the
truncated parabolic Riesz transforms with their epsilon -> 0 limits.

Local terms.  With T^omega_eps the integral over {max(sqrt(tau), |y|) > eps}
and T^sigma_eps the integral over {tau > eps}:

    d_ij u = lim T^omega_eps f - A_n delta_ij f = lim T^sigma_eps f
    d_t u  = lim T^omega_eps f + B_n f         = lim T^sigma_eps f + f
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, optimize, special

from ._engine import Engine
from .grid import GridFunction, GridSpec, finite_difference, interior_mask

__all__ = [
    "Constants",
    "constants",
    "TruncationSchedule",
    "default_schedule",
    "SolveReport",
    "ExtrapolationError",
    "check_support",
    "pde_residual",
    "solve_heat_global",
    "solve_hermite_global",
    "solve_cauchy",
    "truncated_riesz",
    "riesz_limit",
    "maximal_truncation",
    "local_term",
    "EpsLimitsReport",
    "eps_limit_quantities",
    "eps_limits_verify",
    "geometry_difference",
    "recovered_local_term",
    "resolution_floor",
]


# ---------------------------------------------------------------------------
# constants


@dataclass(frozen=True)
class Constants:
    n: int
    A_n: float
    B_n: float

    @property
    def identity_defect(self) -> float:
        return abs(self.n * self.A_n + self.B_n - 1.0)


def constants(n: int) -> Constants:
    """A_n and B_n by adaptive quadrature of the two incomplete-gamma pieces."""
    if n < 1:
        raise ValueError("n must be >= 1")
    a = 0.5 * n
    g = special.gamma(a)
    # w = v^2 removes the w^(a-1) endpoint singularity at 0 for n = 1
    lower, _ = integrate.quad(lambda v: 2.0 * v ** (2 * a - 1) * math.exp(-v * v), 0.0, 0.5,
                              epsabs=0.0, epsrel=1e-13, limit=200)
    upper, _ = integrate.quad(lambda w: w ** (a - 1) * math.exp(-w), 0.25, np.inf,
                              epsabs=0.0, epsrel=1e-13, limit=200)
    c = Constants(n, upper / (n * g), lower / g)
    if c.identity_defect > 1e-12:
        raise ArithmeticError(f"n A_n + B_n - 1 = {c.identity_defect:.3e}")
    return c


def local_term(which: str, geometry: str, n: int, i: int = 0, j: int = 0) -> float:
    """Coefficient c with d u = lim T_eps f + c f."""
    if geometry == "sigma":
        return 0.0 if which == "ij" else 1.0
    c = constants(n)
    if which == "ij":
        return -c.A_n if i == j else 0.0
    return c.B_n


# ---------------------------------------------------------------------------
# schedules


def resolution_floor(spec: GridSpec) -> float:
    """Smallest admissible eps; below it the ball quadrature loses digits."""
    return 2.0 ** -20 * min(spec.h_x, math.sqrt(spec.h_t))


@dataclass(frozen=True)
class TruncationSchedule:
    """Strictly decreasing positive eps values.

    For ``omega`` eps is the parabolic radius; for ``sigma`` it is the time
    threshold, i.e. a parabolic radius of sqrt(eps).
    """

    eps: tuple
    geometry: str = "omega"

    def __post_init__(self):
        e = tuple(float(v) for v in self.eps)
        object.__setattr__(self, "eps", e)
        if self.geometry not in ("omega", "sigma"):
            raise ValueError("geometry must be 'omega' or 'sigma'")
        if len(e) < 1 or any(v <= 0 or not math.isfinite(v) for v in e):
            raise ValueError("schedule entries must be positive and finite")
        if any(b >= a for a, b in zip(e, e[1:])):
            raise ValueError("schedule must be strictly decreasing")

    @property
    def radii(self) -> np.ndarray:
        e = np.asarray(self.eps)
        return e if self.geometry == "omega" else np.sqrt(e)

    def validate(self, spec: GridSpec) -> None:
        floor = resolution_floor(spec)
        r_min = float(self.radii[-1])
        if r_min < floor:
            raise ValueError(f"eps radius {r_min:.3e} below grid resolution floor {floor:.3e}")


def default_schedule(spec: GridSpec, geometry: str = "omega", levels: int = 4,
                     first: int = 5) -> TruncationSchedule:
    """eps_k = r0 2^-k, k = first..first+levels-1, r0 = min(h_x, sqrt(h_t)).

    Sub-grid radii put the schedule in the asymptotic O(eps) regime of the
    cubic interpolant."""
    r0 = min(spec.h_x, math.sqrt(spec.h_t))
    radii = [r0 * 2.0 ** -k for k in range(first, first + levels)]
    eps = radii if geometry == "omega" else [r * r for r in radii]
    return TruncationSchedule(tuple(eps), geometry)


# ---------------------------------------------------------------------------
# reports


@dataclass
class SolveReport:
    solution: GridFunction
    residual: float = float("nan")
    oracle_mismatch: Optional[float] = None
    diagnostics: dict = field(default_factory=dict)
    mask: Optional[np.ndarray] = None


class ExtrapolationError(ArithmeticError):
    """Raised when the truncation sequence fails the ratio test."""

    def __init__(self, msg, diagnostics):
        super().__init__(msg)
        self.diagnostics = diagnostics


# ---------------------------------------------------------------------------
# helpers


def check_support(f: GridFunction, rtol: float = 1e-12) -> None:
    """Reject data that do not vanish on the boundary faces of the grid."""
    v = np.abs(f.values)
    scale = float(v.max()) if v.size else 0.0
    if scale == 0.0:
        return
    for ax in range(v.ndim):
        for idx in (0, -1):
            face = np.take(v, idx, axis=ax)
            if float(face.max()) > rtol * scale:
                side = "lower" if idx == 0 else "upper"
                name = "t" if ax == 0 else f"x_{ax - 1}"
                raise ValueError(f"support touches the {side} boundary in {name}")


def _interior_rel(a, b, mask):
    num = np.sqrt(np.sum(np.abs(a - b)[mask] ** 2))
    den = np.sqrt(np.sum(np.abs(b)[mask] ** 2))
    return float(num / den) if den > 0 else float(num)


def pde_residual(u: GridFunction, f: GridFunction, operator: str = "heat"):
    """Relative interior L2 norm of d_t u - Delta u (+ |x|^2 u) - f, and the mask."""
    spec = u.spec
    r = finite_difference(u, "t").values
    for a in range(spec.n):
        r = r - finite_difference(u, "ij", a, a).values
    if operator == "hermite":
        x = spec.x_nodes()
        r2 = sum((x.reshape([1] * (a + 1) + [-1] + [1] * (spec.n - a - 1))) ** 2 for a in range(spec.n))
        r = r + r2 * u.values
    r = r - f.values
    mask = interior_mask(spec)
    den = np.sqrt(np.sum(np.abs(f.values[mask]) ** 2))
    num = np.sqrt(np.sum(np.abs(r[mask]) ** 2))
    return (float(num / den) if den > 0 else float(num)), mask


def _solve(f, operator, periodic, check):
    if check and not periodic:
        check_support(f)
    E = Engine(f.spec, operator, periodic)
    vals = E.full(f.values, "value")
    if periodic:
        vals = vals + E.tail(f.values)
    u = GridFunction(f.spec, vals)
    res, mask = pde_residual(u, f, operator)
    return SolveReport(u, res, diagnostics={"tau_max": E.tau_max, "periodic": periodic}, mask=mask)


def solve_heat_global(f: GridFunction, periodic: bool = False) -> SolveReport:
    """u = int_0^inf int W(tau, y) f(t - tau, x - y) dy dtau.

    Non-periodic data must vanish on the grid boundary; they are extended by
    zero.  ``periodic`` treats the grid as one space-time period."""
    return _solve(f, "heat", periodic, True)


def solve_hermite_global(f: GridFunction, periodic: bool = False) -> SolveReport:
    """u = int_0^inf e^{-tau H} f(t - tau) dtau with the Mehler kernel.

    ``periodic`` is periodic in time only."""
    return _solve(f, "hermite", periodic, True)


def solve_cauchy(f: GridFunction, g, operator: str = "heat") -> SolveReport:
    """Duhamel solution on t >= t_min with initial data g at t = t_min.

    ``g`` is an array of spatial samples or a GridFunction whose first time
    slice is used."""
    spec = f.spec
    if operator not in ("heat", "hermite"):
        raise ValueError("operator must be 'heat' or 'hermite'")
    g0 = np.asarray(g.values[0] if isinstance(g, GridFunction) else g, dtype=float)
    if g0.shape != (spec.N_x,) * spec.n:
        raise ValueError("initial data must have the spatial grid shape")
    check_support(f)
    E = Engine(spec, operator, periodic=False)
    v = E.full(f.values, "value")
    t = spec.t_nodes() - spec.t_min
    v[0] += g0
    for a in range(1, spec.N_t):
        M = E.matrix("0", float(t[a]))
        G = g0
        for ax in range(spec.n):
            G = np.moveaxis(np.tensordot(M, G, axes=([1], [ax])), 0, ax)
        v[a] += G
    u = GridFunction(spec, v)
    res, mask = pde_residual(u, f, operator)
    trace = float(np.max(np.abs(v[1] - g0)))
    return SolveReport(u, res, diagnostics={"trace_defect_first_step": trace}, mask=mask)


# ---------------------------------------------------------------------------
# truncated integrals


def _op(which):
    if which not in ("ij", "t"):
        raise ValueError("which must be 'ij' or 't'")
    return which


def truncated_riesz(f: GridFunction, eps: float, which: str = "ij", i: int = 0, j: int = 0,
                    operator: str = "heat", geometry: str = "omega", periodic: bool = False
                    ) -> GridFunction:
    """Derivative kernel integrated against f over the truncated region.

    ``omega`` removes the parabolic ball {tau < eps^2, |y| < eps} (the ball is
    integrated exactly in polar coordinates and subtracted); ``sigma``
    removes {tau < eps}.  Data are zero-extended unless ``periodic``."""
    op = _op(which)
    TruncationSchedule((eps,), geometry).validate(f.spec)
    E = Engine(f.spec, operator, periodic)
    F = f.values
    if geometry == "sigma":
        return GridFunction(f.spec, E.full(F, op, i, j, a=eps, scales=(eps,)))
    full = E.full(F, op, i, j, extra_breaks=(eps * eps,), scales=(eps * eps,))
    return GridFunction(f.spec, full - E.ball(F, op, eps, i, j))


def _truncation_sequence(f, schedule, which, i, j, operator, periodic):
    """T_eps f for every eps in the schedule, sharing the eps-independent parts."""
    E = Engine(f.spec, operator, periodic)
    F = f.values
    eps = schedule.eps
    if schedule.geometry == "sigma":
        scales = tuple(eps)
        base = E.full(F, which, i, j, a=eps[0], scales=scales)
        out, acc = [base], base
        for lo, hi in zip(eps[1:], eps[:-1]):
            acc = acc + E.full(F, which, i, j, a=lo, b=hi, scales=scales)
            out.append(acc)
        return out
    r2 = tuple(e * e for e in eps)
    full = E.full(F, which, i, j, extra_breaks=r2, scales=r2)
    return [full - E.ball(F, which, e, i, j) for e in eps]


def _empirical_order(r3, r2, r1, ratio):
    """p with (r3^p - r2^p) / (r2^p - r1^p) = ratio; nan if out of range."""
    def g(p):
        return math.log((r3 ** p - r2 ** p) / (r2 ** p - r1 ** p)) - math.log(ratio)
    lo, hi = 1e-3, 8.0
    if g(lo) * g(hi) > 0:
        return 0.0 if g(lo) > 0 else hi
    return optimize.brentq(g, lo, hi, xtol=1e-10)


def _richardson(T, r):
    """Remove the r and r^2 terms of T(r) = L + c1 r + c2 r^2 from three levels."""
    (T3, T2, T1), (r3, r2, r1) = T, r
    # Lagrange extrapolation to r = 0 through (r_k, T_k) is exact for quadratics
    w1 = r2 * r3 / ((r1 - r2) * (r1 - r3))
    w2 = r1 * r3 / ((r2 - r1) * (r2 - r3))
    w3 = r1 * r2 / ((r3 - r1) * (r3 - r2))
    return w1 * T1 + w2 * T2 + w3 * T3


def riesz_limit(f: GridFunction, schedule: Optional[TruncationSchedule] = None, which: str = "ij",
                i: int = 0, j: int = 0, operator: str = "heat", periodic: bool = False,
                report: bool = False, order_range=(0.5, 2.5)):
    """Richardson-extrapolated eps -> 0 limit of truncated_riesz plus the local term.

    In the parabolic radius r of the truncation the error is c1 r + c2 r^2:
    the r term comes from the kinks of the cubic interpolant at the
    evaluation node, the r^2 term from the smooth part of f.  Both are
    removed by extrapolating through the last three levels.  The empirical
    order of the last three levels must lie in ``order_range``, otherwise
    ExtrapolationError is raised with the diagnostics attached.
    """
    op = _op(which)
    spec = f.spec
    if schedule is None:
        schedule = default_schedule(spec)
    schedule.validate(spec)
    if len(schedule.eps) < 3:
        raise ValueError("riesz_limit needs at least three schedule entries")
    T = _truncation_sequence(f, schedule, op, i, j, operator, periodic)
    mask = interior_mask(spec)
    r = schedule.radii
    d1 = T[-2] - T[-3]
    d2 = T[-1] - T[-2]
    n1 = float(np.sqrt(np.sum(np.abs(d1[mask]) ** 2)))
    n2 = float(np.sqrt(np.sum(np.abs(d2[mask]) ** 2)))
    diffs = [float(np.sqrt(np.sum(np.abs((b - a)[mask]) ** 2))) for a, b in zip(T[:-1], T[1:])]
    scale = float(np.sqrt(np.sum(np.abs(T[-1][mask]) ** 2)))
    diag = {"radii": r.tolist(), "step_norms": diffs, "geometry": schedule.geometry}
    if n1 > 1e-13 * max(scale, 1e-300) and n2 > 0:
        order = _empirical_order(r[-3], r[-2], r[-1], n1 / n2)
        diag["empirical_order"] = order
        lo, hi = order_range
        if not lo <= order <= hi:
            raise ExtrapolationError(
                f"truncation sequence has empirical order {order:.3f}, outside [{lo}, {hi}]", diag)
    else:
        diag["empirical_order"] = float("nan")
    lim = _richardson(T[-3:], r[-3:])
    c = local_term(op, schedule.geometry, spec.n, i, j)
    out = GridFunction(spec, lim + c * f.values)
    if not report:
        return out
    diag["local_term"] = c
    return SolveReport(out, diagnostics=diag, mask=mask)


def maximal_truncation(f: GridFunction, schedule: Optional[TruncationSchedule] = None,
                       which: str = "ij", i: int = 0, j: int = 0, operator: str = "heat",
                       periodic: bool = False) -> GridFunction:
    """Pointwise sup over the schedule of |T_eps f|."""
    if schedule is None:
        schedule = default_schedule(f.spec)
    schedule.validate(f.spec)
    T = _truncation_sequence(f, schedule, _op(which), i, j, operator, periodic)
    return GridFunction(f.spec, np.max(np.abs(np.stack(T)), axis=0))


# ---------------------------------------------------------------------------
# the four eps-indexed quantities around the excluded ball


def _sphere_area(n):
    return 2.0 * math.pi ** (0.5 * n) / special.gamma(0.5 * n)


def _S(n, tau):
    return np.exp(-0.5 * n * (math.log(2 * math.pi) + np.log(np.sinh(2 * tau))))


def _H(tau, r):
    return np.exp(-0.25 * r * r / np.tanh(tau))


@dataclass
class EpsLimitsReport:
    n: int
    eps: tuple
    values: np.ndarray  # shape (len(eps), 4)
    limits: tuple
    c: float

    def errors(self) -> np.ndarray:
        return np.abs(self.values - np.asarray(self.limits)[None, :])


def eps_limit_quantities(n: int, eps: float, c: float = 1.0) -> np.ndarray:
    """(i)-(iv) at one eps.

    (i)   eps^(-n/2) int_{|y|<eps} exp(-|y|^2/(c eps)) dy
    (ii)  int_0^{eps^2} int_{|y|=eps} S dH/dy_i y_i/|y| dsigma dtau  (i = 1)
    (iii) int_{|y|<eps} S(eps^2) H(eps^2, y) dy
    (iv)  int_0^{eps^2} int_{|y|=eps} S H dsigma dtau
    with S = (2 pi sinh 2tau)^(-n/2), H = exp(-|y|^2 coth(tau)/4).
    """
    area = _sphere_area(n)
    e2 = eps * eps
    kw = dict(epsabs=0.0, epsrel=1e-12, limit=200)
    q1, _ = integrate.quad(lambda r: area * r ** (n - 1) * math.exp(-r * r / (c * eps)), 0.0, eps, **kw)
    q1 *= eps ** (-0.5 * n)
    # on |y| = eps: dH/dy_i y_i/|y| = -(y_i^2/|y|) coth(tau) H / 2; the
    # sphere average of y_i^2 is eps^2/n
    sph = area * eps ** (n - 1)

    def g2(w):
        tau = e2 * w
        return -sph * e2 * _S(n, tau) * (eps / (2.0 * n)) / math.tanh(tau) * _H(tau, eps)

    def g4(w):
        tau = e2 * w
        return sph * e2 * _S(n, tau) * _H(tau, eps)

    q2, _ = integrate.quad(g2, 0.0, 1.0, **kw)
    q4, _ = integrate.quad(g4, 0.0, 1.0, **kw)
    q3, _ = integrate.quad(lambda r: area * r ** (n - 1) * _S(n, e2) * _H(e2, r), 0.0, eps, **kw)
    return np.array([q1, q2, q3, q4])


def eps_limits_verify(n: int, eps_schedule: Sequence[float] = (1e-1, 1e-2, 1e-3), c: float = 1.0
                   ) -> EpsLimitsReport:
    k = constants(n)
    vals = np.array([eps_limit_quantities(n, float(e), c) for e in eps_schedule])
    return EpsLimitsReport(n, tuple(float(e) for e in eps_schedule), vals, (0.0, -k.A_n, k.B_n, 0.0), c)


def geometry_difference(f: GridFunction, eps: float, which: str = "ij", i: int = 0, j: int = 0,
                        operator: str = "heat", periodic: bool = False) -> GridFunction:
    """T^omega_eps f - T^sigma_{eps^2} f: the integral over {tau < eps^2, |y| > eps}.

    As eps -> 0 it tends to A_n delta_ij f (``ij``) or (1 - B_n) f (``t``)."""
    op = _op(which)
    TruncationSchedule((eps,), "omega").validate(f.spec)
    E = Engine(f.spec, operator, periodic)
    F = f.values
    inner = E.full(F, op, i, j, a=0.0, b=eps * eps, scales=(eps * eps,))
    return GridFunction(f.spec, inner - E.ball(F, op, eps, i, j))


def recovered_local_term(f: GridFunction, eps: float, which: str = "ij", i: int = 0, j: int = 0,
                         operator: str = "heat", periodic: bool = False) -> float:
    """Least-squares coefficient c in geometry_difference(f) ~ c f on interior nodes."""
    D = geometry_difference(f, eps, which, i, j, operator, periodic).values
    m = interior_mask(f.spec)
    den = float(np.sum(np.abs(f.values[m]) ** 2))
    if den == 0.0:
        raise ValueError("f vanishes on the interior")
    return float(np.real(np.sum(D[m] * np.conj(f.values[m]))) / den)
