"""Space-time grids, grid functions, finite differences and weighted norms.

The box is ``[t_min, t_max] x [-L, L]^n`` sampled uniformly with ``N_t`` time
nodes and ``N_x`` (odd, so the origin is a node) points per spatial axis.
Values of a grid function are stored with shape ``(N_t, N_x, ..., N_x)``.
Integrals use the trapezoid rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .weights import WeightSpec, grid_weight, space_weight, time_weight

__all__ = [
    "GridSpec",
    "Grid",
    "GridFunction",
    "NormSpec",
    "TrigBump",
    "ParabolicImage",
    "build_grid",
    "sample",
    "random_trig_bump",
    "trapezoid_weights",
    "lp_norm",
    "mixed_norm",
    "slice_norms",
    "weak_level_measure",
    "norm",
    "sup_norm",
    "finite_difference",
    "interior_mask",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform space-time box.  Invalid parameters raise ``ValueError``."""

    n: int = 1
    L: float = 1.0
    N_x: int = 33
    t_min: float = 0.0
    t_max: float = 1.0
    N_t: int = 33

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or not 1 <= self.n <= 3:
            raise ValueError(f"invariant violated: 1 <= n <= 3 (got n={self.n})")
        if not (self.L > 0 and math.isfinite(self.L)):
            raise ValueError(f"invariant violated: L > 0 (got L={self.L})")
        if not isinstance(self.N_x, (int, np.integer)) or self.N_x < 3 or self.N_x % 2 == 0:
            raise ValueError(f"invariant violated: N_x odd and >= 3 (got N_x={self.N_x})")
        if not isinstance(self.N_t, (int, np.integer)) or self.N_t < 3:
            raise ValueError(f"invariant violated: N_t >= 3 (got N_t={self.N_t})")
        if not (math.isfinite(self.t_min) and math.isfinite(self.t_max)) or not self.t_max > self.t_min:
            raise ValueError(f"invariant violated: t_max > t_min (got {self.t_min}, {self.t_max})")

    @property
    def h_x(self) -> float:
        return 2.0 * self.L / (self.N_x - 1)

    @property
    def h_t(self) -> float:
        return (self.t_max - self.t_min) / (self.N_t - 1)

    @property
    def shape(self) -> tuple:
        return (self.N_t,) + (self.N_x,) * self.n

    def t_nodes(self) -> np.ndarray:
        return self.t_min + self.h_t * np.arange(self.N_t)

    def x_nodes(self) -> np.ndarray:
        return -self.L + self.h_x * np.arange(self.N_x)

    def refined(self, factor: int = 2) -> "GridSpec":
        """Same box with both steps divided by ``factor``."""
        return GridSpec(self.n, self.L, (self.N_x - 1) * factor + 1, self.t_min, self.t_max,
                        (self.N_t - 1) * factor + 1)


@dataclass(frozen=True)
class Grid:
    spec: GridSpec
    t: np.ndarray
    x: np.ndarray

    def mesh(self):
        """Sparse (broadcastable) coordinate arrays ``(T, X_1, ..., X_n)``."""
        return np.meshgrid(self.t, *([self.x] * self.spec.n), indexing="ij", sparse=True)

    def points(self) -> np.ndarray:
        """Spatial node coordinates, shape ``(N_x, ..., N_x, n)``."""
        mesh = np.meshgrid(*([self.x] * self.spec.n), indexing="ij")
        return np.stack(mesh, axis=-1)


def build_grid(spec: GridSpec) -> Grid:
    return Grid(spec=spec, t=spec.t_nodes(), x=spec.x_nodes())


@dataclass
class GridFunction:
    """Scalar field on a grid.

    ``valid`` optionally marks nodes where the values are meaningful (for
    example the stencil interior of a finite difference).
    """

    spec: GridSpec
    values: np.ndarray
    valid: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != self.spec.shape:
            raise ValueError(f"value shape {self.values.shape} does not match grid shape {self.spec.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid function values must be finite")
        if self.valid is not None:
            self.valid = np.broadcast_to(np.asarray(self.valid, dtype=bool), self.spec.shape)

    @property
    def kind(self) -> str:
        return "complex" if np.iscomplexobj(self.values) else "real"

    def with_values(self, values, valid=None) -> "GridFunction":
        return GridFunction(self.spec, values, self.valid if valid is None else valid)

    def __add__(self, other):
        return self.with_values(self.values + _vals(other))

    def __sub__(self, other):
        return self.with_values(self.values - _vals(other))

    def __mul__(self, c):
        return self.with_values(self.values * _vals(c))

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)


def _vals(obj):
    return obj.values if isinstance(obj, GridFunction) else obj


# ---------------------------------------------------------------------------
# sampling


def sample(fdesc: Callable, spec: GridSpec) -> GridFunction:
    """Evaluate a closed-form descriptor ``fdesc(t, x_1, ..., x_n)`` at every
    node.  The descriptor receives broadcastable coordinate arrays.

    A non-finite value raises ``ValueError`` naming the first offending node.
    """
    grid = build_grid(spec)
    vals = np.asarray(fdesc(*grid.mesh()))
    vals = np.broadcast_to(vals, spec.shape).copy()
    bad = ~np.isfinite(vals)
    if np.any(bad):
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        coords = (grid.t[idx[0]],) + tuple(grid.x[i] for i in idx[1:])
        raise ValueError(f"non-finite value at node index {idx}, coordinates {coords}")
    return GridFunction(spec, vals)


def _bump(s, a, order):
    """exp(a - a/(1-s^2)) on |s| < 1 and its first two s-derivatives."""
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1.0
    si = np.where(inside, s, 0.0)
    d = 1.0 - si * si
    with np.errstate(over="ignore", under="ignore"):
        b = np.where(inside, np.exp(a - a / d), 0.0)
    if order == 0:
        return b
    q = -2.0 * a * si / d ** 2
    if order == 1:
        return b * q
    dq = -2.0 * a * (1.0 + 3.0 * si * si) / d ** 3
    return b * (q * q + dq)


def _axis_factors(z, center, radius, omega, a, order):
    """Values of bump(z) * basis_j(z) (or their z-derivatives), j = 0..4.

    basis = (1, cos w z, sin w z, cos 2wz, sin 2wz) with z relative to the
    center.  Returns an array of shape (5,) + z.shape.
    """
    zz = np.asarray(z, dtype=float) - center
    s = zz / radius
    bumps = [_bump(s, a, k) / radius ** k for k in range(order + 1)]
    basis = []
    for k in range(order + 1):
        row = [np.zeros_like(zz) if k else np.ones_like(zz)]
        for m in (1, 2):
            c, sn = np.cos(m * omega * zz), np.sin(m * omega * zz)
            wk = (m * omega) ** k
            # k-th derivative of cos and sin
            dc = [c, -sn, -c][k] * wk
            ds = [sn, c, -sn][k] * wk
            row += [dc, ds]
        basis.append(np.stack(row))
    if order == 0:
        return bumps[0] * basis[0]
    if order == 1:
        return bumps[1] * basis[0] + bumps[0] * basis[1]
    return bumps[2] * basis[0] + 2 * bumps[1] * basis[1] + bumps[0] * basis[2]


@dataclass(frozen=True)
class TrigBump:
    """Trigonometric polynomial times a smooth compactly supported bump.

    phi(t, x) = sum_k C[k] prod_axes bump(z) basis_{k_axis}(z), where the
    per-axis basis is (1, cos wz, sin wz, cos 2wz, sin 2wz) and
    bump(z) = exp(a - a/(1 - (z/r)^2)).  Supported in
    |t - t_center| < t_radius, |x_i| < x_radius.
    """

    n: int
    coeffs: np.ndarray = field(repr=False)
    t_center: float
    t_radius: float
    x_radius: float
    sharpness: float = 1.0

    @property
    def omega_t(self):
        return math.pi / self.t_radius

    @property
    def omega_x(self):
        return math.pi / self.x_radius

    def derivative(self, order_t: int = 0, order_x: Sequence[int] = ()) -> Callable:
        order_x = tuple(order_x) + (0,) * (self.n - len(order_x))

        def ev(t, *x):
            if len(x) != self.n:
                raise ValueError(f"expected {self.n} spatial coordinates")
            nd = max(np.ndim(z) for z in (t,) + x)
            factors = [_axis_factors(t, self.t_center, self.t_radius, self.omega_t, self.sharpness, order_t)]
            factors += [_axis_factors(xi, 0.0, self.x_radius, self.omega_x, self.sharpness, k)
                        for xi, k in zip(x, order_x)]
            res = self.coeffs.reshape(self.coeffs.shape + (1,) * nd)
            for F in factors:
                F = F.reshape(F.shape[:1] + (1,) * (nd - F.ndim + 1) + F.shape[1:])
                res = sum(res[k] * F[k] for k in range(5))
            return res

        return ev

    def __call__(self, t, *x):
        return self.derivative()(t, *x)


class ParabolicImage:
    """Descriptor for (d_t - Delta + V) phi with phi a :class:`TrigBump`.

    ``operator='heat'`` uses V = 0, ``'hermite'`` uses V = |x|^2.  Inputs built
    this way have a known compactly supported solution phi.
    """

    def __init__(self, phi: TrigBump, operator: str = "heat"):
        if operator not in ("heat", "hermite"):
            raise ValueError("operator must be 'heat' or 'hermite'")
        self.phi = phi
        self.operator = operator

    def __call__(self, t, *x):
        n = self.phi.n
        out = _eval_sparse(self.phi, 1, (0,) * n, t, x)
        for i in range(n):
            order = [0] * n
            order[i] = 2
            out = out - _eval_sparse(self.phi, 0, order, t, x)
        if self.operator == "hermite":
            r2 = sum(np.asarray(xi, dtype=float) ** 2 for xi in x)
            out = out + r2 * _eval_sparse(self.phi, 0, (0,) * n, t, x)
        return out


def _eval_sparse(phi: TrigBump, order_t, order_x, t, x):
    return phi.derivative(order_t, order_x)(t, *x)


def random_trig_bump(spec: GridSpec, seed: int, sharpness: float = 2.0) -> TrigBump:
    """Seeded member of the test family, supported in the inner half of the box.

    Coefficients are uniform in [-1, 1]; five modes per axis.
    """
    rng = np.random.default_rng(seed)
    coeffs = rng.uniform(-1.0, 1.0, size=(5,) * (spec.n + 1))
    T = spec.t_max - spec.t_min
    return TrigBump(n=spec.n, coeffs=coeffs, t_center=spec.t_min + 0.5 * T, t_radius=0.25 * T,
                    x_radius=0.5 * spec.L, sharpness=sharpness)


# ---------------------------------------------------------------------------
# norms


def trapezoid_weights(N: int, h: float) -> np.ndarray:
    w = np.full(N, h)
    w[0] = w[-1] = 0.5 * h
    return w


def _space_quad(spec: GridSpec) -> np.ndarray:
    w1 = trapezoid_weights(spec.N_x, spec.h_x)
    out = w1
    for _ in range(spec.n - 1):
        out = np.multiply.outer(out, w1)
    return out


def _check_exponent(p, name="p"):
    if not (p >= 1 and math.isfinite(p)):
        raise ValueError(f"exponent {name} must satisfy 1 <= {name} < inf (got {p})")


def lp_norm(f: GridFunction, p: float, w: Optional[WeightSpec] = None) -> float:
    """Trapezoid approximation of (int w |f|^p dt dx)^(1/p)."""
    _check_exponent(p)
    spec = f.spec
    quad = trapezoid_weights(spec.N_t, spec.h_t).reshape((-1,) + (1,) * spec.n) * _space_quad(spec)[None]
    total = np.sum(quad * grid_weight(w, spec) * np.abs(f.values) ** p)
    return float(total ** (1.0 / p))


def slice_norms(f: GridFunction, p: float, omega: Optional[WeightSpec] = None) -> np.ndarray:
    """Weighted spatial L^p norm of every time slice."""
    _check_exponent(p)
    spec = f.spec
    ow = np.ones((1,) * spec.n) if omega is None else (
        omega.total_scale * space_weight(omega, [spec.x_nodes()] * spec.n, spec.h_x))
    quad = _space_quad(spec) * ow
    axes = tuple(range(1, spec.n + 1))
    return np.sum(quad[None] * np.abs(f.values) ** p, axis=axes) ** (1.0 / p)


def _time_quad(spec: GridSpec, nu: Optional[WeightSpec]) -> np.ndarray:
    tq = trapezoid_weights(spec.N_t, spec.h_t)
    if nu is not None:
        tq = tq * nu.total_scale * time_weight(nu, spec.t_nodes(), spec.h_t)
    return tq


def mixed_norm(f: GridFunction, q: float, p: float, nu: Optional[WeightSpec] = None,
               omega: Optional[WeightSpec] = None) -> float:
    """L^q(nu; L^p(omega)) norm with trapezoid weights in both variables."""
    _check_exponent(q, "q")
    s = slice_norms(f, p, omega)
    return float(np.sum(_time_quad(f.spec, nu) * s ** q) ** (1.0 / q))


def weak_level_measure(f: GridFunction, p: float, omega: Optional[WeightSpec],
                       nu: Optional[WeightSpec], lam: float) -> float:
    """nu-measure of the set of times whose slice norm exceeds ``lam``."""
    if not lam > 0:
        raise ValueError("level must be positive")
    s = slice_norms(f, p, omega)
    return float(np.sum(_time_quad(f.spec, nu) * (s > lam)))


def sup_norm(f: GridFunction, mask=None) -> float:
    """Max |f| over nodes (debug statistic only)."""
    v = np.abs(f.values)
    if mask is not None:
        v = v[np.broadcast_to(mask, v.shape)]
    return float(np.max(v)) if v.size else 0.0


@dataclass(frozen=True)
class NormSpec:
    p: float = 2.0
    q: Optional[float] = None
    nu: Optional[WeightSpec] = None
    omega: Optional[WeightSpec] = None
    w: Optional[WeightSpec] = None

    def __post_init__(self):
        _check_exponent(self.p)
        if self.q is not None:
            _check_exponent(self.q, "q")


def norm(f: GridFunction, ns: NormSpec) -> float:
    """Plain weighted norm when ``ns.q`` is None, mixed norm otherwise."""
    if ns.q is None:
        return lp_norm(f, ns.p, ns.w)
    return mixed_norm(f, ns.q, ns.p, ns.nu, ns.omega)


# ---------------------------------------------------------------------------
# finite differences


def interior_mask(spec: GridSpec, width_t: int = 1, width_x: int = 1) -> np.ndarray:
    """Boolean mask excluding ``width`` boundary layers on each axis."""
    mask = np.zeros(spec.shape, dtype=bool)
    sl = (slice(width_t, spec.N_t - width_t),) + (slice(width_x, spec.N_x - width_x),) * spec.n
    mask[sl] = True
    return mask


def finite_difference(f: GridFunction, kind: str, i: int = 0, j: int = 0) -> GridFunction:
    """Second-order centered difference: kind ``t`` (d/dt), ``i`` (d/dx_i) or
    ``ij`` (d^2/dx_i dx_j).  Axis indices are zero-based.

    The result carries a validity mask; boundary nodes hold 0.
    """
    spec = f.spec
    v = f.values
    out = np.zeros_like(v)
    valid = np.zeros(spec.shape, dtype=bool)
    nd = spec.n + 1

    def sl(axis, lo, hi):
        s = [slice(None)] * nd
        s[axis] = slice(lo, v.shape[axis] + hi if hi <= 0 else hi)
        return tuple(s)

    if kind == "t":
        if spec.N_t < 3:
            raise ValueError("grid too small for stencil")
        core = sl(0, 1, -1)
        out[core] = (v[sl(0, 2, 0)] - v[sl(0, 0, -2)]) / (2 * spec.h_t)
        valid[core] = True
    elif kind == "i":
        a = 1 + i
        core = sl(a, 1, -1)
        out[core] = (v[sl(a, 2, 0)] - v[sl(a, 0, -2)]) / (2 * spec.h_x)
        valid[core] = True
    elif kind == "ij":
        a, b = 1 + i, 1 + j
        if a == b:
            core = sl(a, 1, -1)
            out[core] = (v[sl(a, 2, 0)] - 2 * v[core] + v[sl(a, 0, -2)]) / spec.h_x ** 2
            valid[core] = True
        else:
            def shift(da, db):
                s = [slice(None)] * nd
                s[a] = slice(1 + da, spec.N_x - 1 + da)
                s[b] = slice(1 + db, spec.N_x - 1 + db)
                return tuple(s)

            core = shift(0, 0)
            out[core] = (v[shift(1, 1)] - v[shift(1, -1)] - v[shift(-1, 1)] + v[shift(-1, -1)]) / (
                4 * spec.h_x ** 2)
            valid[core] = True
    else:
        raise ValueError(f"unknown finite-difference kind {kind!r}")
    if spec.n < max(i, j) + 1:
        raise ValueError("axis index out of range")
    return GridFunction(spec, out, valid)
