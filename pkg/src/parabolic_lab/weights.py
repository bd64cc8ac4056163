"""Weights and Muckenhoupt constant estimates.

A weight is described by a :class:`WeightSpec`.  Power weights are
``|t|^a`` (time) and ``|x|^b`` (space, Euclidean norm); a tensor weight is
``nu(t) * omega(x)``.  The estimators sample balls, average the weight and
its dual power over each ball and report the worst product.  Sampled maxima
are lower bounds of the true constants, so membership is decided by how the
estimate behaves as the smallest radius shrinks: stabilization versus growth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "WeightSpec",
    "ApReport",
    "BallSampler",
    "ParabolicBall",
    "parabolic_ball",
    "unit_ball_volume",
    "time_weight",
    "space_weight",
    "grid_weight",
    "ap_estimate",
    "a1_estimate",
    "classify",
    "tensor_parabolic_probe",
]


@dataclass(frozen=True)
class WeightSpec:
    """Description of a weight on space-time.

    kind is one of ``unit``, ``power_t``, ``power_x``, ``tensor`` or
    ``tabulated``.  Use the class constructors rather than the raw fields.
    """

    kind: str = "unit"
    exponent: float = 0.0
    nu: Optional["WeightSpec"] = None
    omega: Optional["WeightSpec"] = None
    table: Optional[np.ndarray] = field(default=None, compare=False, repr=False)
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("unit", "power_t", "power_x", "tensor", "tabulated"):
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if not math.isfinite(self.exponent):
            raise ValueError("power exponent must be finite")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError("weight scale must be positive and finite")
        if self.kind == "tensor":
            if self.nu is None or self.omega is None:
                raise ValueError("tensor weight needs both nu and omega")
            if self.nu.kind not in ("unit", "power_t"):
                raise ValueError("tensor nu must be a time weight (unit or power_t)")
            if self.omega.kind not in ("unit", "power_x"):
                raise ValueError("tensor omega must be a space weight (unit or power_x)")
        if self.kind == "tabulated":
            if self.table is None:
                raise ValueError("tabulated weight needs a table")
            tab = np.asarray(self.table)
            if not np.all(np.isfinite(tab)) or np.any(tab < 0):
                raise ValueError("tabulated weight must be finite and nonnegative")

    @classmethod
    def unit(cls):
        return cls("unit")

    @classmethod
    def power_t(cls, a):
        return cls("power_t", exponent=float(a))

    @classmethod
    def power_x(cls, b):
        return cls("power_x", exponent=float(b))

    @classmethod
    def tensor(cls, nu, omega):
        return cls("tensor", nu=nu, omega=omega)

    @classmethod
    def tabulated(cls, gf):
        values = gf.values if hasattr(gf, "values") else np.asarray(gf)
        return cls("tabulated", table=np.asarray(values, dtype=float))

    @property
    def time_part(self) -> "WeightSpec":
        if self.kind == "tensor":
            return self.nu
        if self.kind in ("unit", "power_t"):
            return self
        return WeightSpec.unit()

    @property
    def space_part(self) -> "WeightSpec":
        if self.kind == "tensor":
            return self.omega
        if self.kind in ("unit", "power_x"):
            return self
        return WeightSpec.unit()

    @property
    def total_scale(self) -> float:
        if self.kind == "tensor":
            return self.scale * self.nu.total_scale * self.omega.total_scale
        return self.scale

    def scaled(self, c: float) -> "WeightSpec":
        """The weight c * w."""
        return WeightSpec(self.kind, self.exponent, self.nu, self.omega, self.table, self.scale * c)

    def __call__(self, t, x=None):
        return self.scale * self._shape(t, x)

    def _shape(self, t, x=None):
        """Pointwise value at ``t`` (array) and ``x`` (array, last axis n)."""
        t = np.asarray(t, dtype=float)
        if self.kind == "unit":
            return np.ones_like(t)
        if self.kind == "power_t":
            with np.errstate(divide="ignore"):
                return np.abs(t) ** self.exponent
        if self.kind == "power_x":
            r = _radius(x)
            with np.errstate(divide="ignore"):
                return r ** self.exponent
        if self.kind == "tensor":
            return self.nu(t) * self.omega(t, x)
        raise ValueError("tabulated weights have no pointwise formula")


def _radius(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return np.abs(x)
    return np.sqrt(np.sum(x * x, axis=-1))


def _power_node_values(z, a, h):
    """|z|^a at 1-D nodes; a node at 0 gets the dual-cell average."""
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore"):
        vals = np.abs(z) ** a
    bad = ~np.isfinite(vals) | (vals == 0.0) & (a != 0.0)
    if np.any(bad):
        if a > -1.0:
            # mean of |s|^a over [-h/2, h/2]
            vals = np.where(bad, (0.5 * h) ** a / (a + 1.0), vals)
        else:
            vals = np.where(bad, (0.5 * h) ** a, vals)
    return vals


def time_weight(w: WeightSpec, t, h_t) -> np.ndarray:
    """Node values of the (unscaled) time factor of ``w``; a singular node
    gets the dual-cell average."""
    w = w.time_part
    t = np.asarray(t, dtype=float)
    if w.kind == "unit":
        return np.ones_like(t)
    return _power_node_values(t, w.exponent, h_t)


def space_weight(w: WeightSpec, xs, h_x) -> np.ndarray:
    """Node values of the (unscaled) space factor on the grid spanned by ``xs``.

    ``xs`` is a list of 1-D node arrays, one per axis.  For n >= 2 a node at
    the origin of a singular power weight is nudged by h/2.
    """
    w = w.space_part
    n = len(xs)
    shape = tuple(len(x) for x in xs)
    if w.kind == "unit":
        return np.ones(shape)
    if n == 1:
        return _power_node_values(xs[0], w.exponent, h_x)
    mesh = np.meshgrid(*xs, indexing="ij")
    r = np.sqrt(sum(m * m for m in mesh))
    with np.errstate(divide="ignore"):
        vals = r ** w.exponent
    bad = ~np.isfinite(vals) | (vals == 0.0) & (w.exponent != 0.0)
    return np.where(bad, (0.5 * h_x) ** w.exponent, vals)


def grid_weight(w: Optional[WeightSpec], spec) -> np.ndarray:
    """Weight values broadcastable to a grid of ``spec`` (a GridSpec)."""
    if w is None:
        return np.ones((1,) * (spec.n + 1))
    if w.kind == "unit":
        return np.full((1,) * (spec.n + 1), w.scale)
    if w.kind == "tabulated":
        tab = np.asarray(w.table, dtype=float)
        if tab.shape != spec.shape:
            raise ValueError(f"tabulated weight shape {tab.shape} != grid shape {spec.shape}")
        return w.scale * tab
    t = spec.t_nodes()
    xs = [spec.x_nodes()] * spec.n
    tw = time_weight(w, t, spec.h_t).reshape((-1,) + (1,) * spec.n)
    sw = space_weight(w, xs, spec.h_x)[np.newaxis]
    return w.total_scale * tw * sw


# ---------------------------------------------------------------------------
# balls and averages


def unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


@dataclass(frozen=True)
class ParabolicBall:
    """Cylinder {|t-s| < r^2} x {|x-y| < r} around ``center = (t, x)``."""

    center: tuple
    r: float
    n: int

    @property
    def measure(self) -> float:
        return 2.0 * self.r ** 2 * unit_ball_volume(self.n) * self.r ** self.n

    def contains(self, t, x) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        dx = np.asarray(x, dtype=float) - np.asarray(self.center[1:], dtype=float)
        return (np.abs(t - self.center[0]) < self.r ** 2) & (_radius(dx) < self.r)


def parabolic_ball(center, r: float) -> ParabolicBall:
    if not r > 0:
        raise ValueError("radius must be positive")
    center = tuple(float(c) for c in np.ravel(center))
    return ParabolicBall(center=center, r=float(r), n=len(center) - 1)


@dataclass(frozen=True)
class BallSampler:
    """Random balls: log-uniform radii in [r_min, r_max], centers uniform in
    [-box, box]^(dim)."""

    count: int = 1000
    r_min: float = 1e-3
    r_max: float = 1.0
    box: float = 1.0
    seed: int = 0

    def draw(self, dim: int):
        rng = np.random.default_rng(self.seed)
        centers = rng.uniform(-self.box, self.box, size=(self.count, dim))
        u = rng.uniform(0.0, 1.0, size=self.count)
        radii = self.r_min * (self.r_max / self.r_min) ** u
        return centers, radii

    def with_r_min(self, r_min):
        return BallSampler(self.count, r_min, self.r_max, self.box, self.seed)


@dataclass
class ApReport:
    p: float
    geometry: str
    constant: float
    ball_count: int
    radius_range: tuple
    worst_ball: tuple
    per_ball: np.ndarray = field(default=None, repr=False)


def _interval_power_mean(c, half, a):
    """Mean of |s|^a over [c - half, c + half] (exact antiderivative).

    Returns inf when the interval contains 0 and a <= -1.
    """
    lo = c - half
    hi = c + half
    out = np.empty_like(c)
    if a == 0.0:
        out[:] = 1.0
        return out
    straddle = (lo < 0) & (hi > 0)
    if a <= -1.0:
        same = ~straddle
        # both endpoints same sign
        alo = np.minimum(np.abs(lo), np.abs(hi))
        ahi = np.maximum(np.abs(lo), np.abs(hi))
        with np.errstate(divide="ignore", invalid="ignore"):
            if a == -1.0:
                val = np.log(ahi / alo)
            else:
                val = (ahi ** (a + 1) - alo ** (a + 1)) / (a + 1)
        out = np.where(same, val / (2 * half), np.inf)
        out = np.where(same & (alo == 0), np.inf, out)
        return out

    def prim(s):
        return np.sign(s) * np.abs(s) ** (a + 1) / (a + 1)

    out = (prim(hi) - prim(lo)) / (2 * half)
    return out


def _ball_mean_space(center, r, b, n, rng=None, nr=64, nang=64):
    """Mean of |x|^b over the Euclidean ball B(center, r) in R^n.

    n = 1 uses the exact antiderivative; n >= 2 uses a polar rule around the
    ball center with Gauss-Legendre radial nodes.
    """
    center = np.atleast_2d(center)
    r = np.asarray(r, dtype=float)
    if n == 1:
        return _interval_power_mean(center[:, 0], r, b)
    if b == 0.0:
        return np.ones(len(r))
    gr, gw = np.polynomial.legendre.leggauss(nr)
    rho = 0.5 * (gr + 1.0)
    wr = 0.5 * gw * n * rho ** (n - 1)  # normalized radial measure on [0, 1]
    if n == 2:
        th = 2 * np.pi * (np.arange(nang) + 0.5) / nang
        dirs = np.stack([np.cos(th), np.sin(th)], axis=-1)
        wd = np.full(nang, 1.0 / nang)
    else:
        gz, gzw = np.polynomial.legendre.leggauss(nang // 2)
        ph = 2 * np.pi * (np.arange(nang) + 0.5) / nang
        zz, pp = np.meshgrid(gz, ph, indexing="ij")
        s = np.sqrt(1 - zz ** 2)
        dirs = np.stack([s * np.cos(pp), s * np.sin(pp), zz], axis=-1).reshape(-1, 3)
        wd = (np.outer(gzw, np.full(nang, 1.0 / nang)) / 2.0).ravel()
    pts = center[:, None, None, :] + r[:, None, None, None] * rho[None, :, None, None] * dirs[None, None, :, :]
    rad = np.sqrt(np.sum(pts ** 2, axis=-1))
    with np.errstate(divide="ignore"):
        val = rad ** b
    return np.einsum("brd,r,d->b", val, wr, wd)


def _means(w: WeightSpec, power: float, centers, radii, geometry, n):
    """Mean of w**power over each sampled ball (tensor-aware)."""
    if w.kind == "tabulated":
        raise ValueError("A_p estimates need a closed-form weight")
    tpart = w.time_part
    spart = w.space_part
    if geometry == "euclidean_time":
        a = tpart.exponent * power if tpart.kind == "power_t" else 0.0
        return _interval_power_mean(centers[:, 0], radii, a)
    if geometry == "euclidean_space":
        b = spart.exponent * power if spart.kind == "power_x" else 0.0
        return _ball_mean_space(centers[:, 1:], radii, b, n)
    if geometry == "parabolic_time":
        a = tpart.exponent * power if tpart.kind == "power_t" else 0.0
        return _interval_power_mean(centers[:, 0], radii ** 2, a)
    if geometry == "parabolic":
        a = tpart.exponent * power if tpart.kind == "power_t" else 0.0
        b = spart.exponent * power if spart.kind == "power_x" else 0.0
        mt = _interval_power_mean(centers[:, 0], radii ** 2, a)
        mx = _ball_mean_space(centers[:, 1:], radii, b, n)
        return mt * mx
    raise ValueError(f"unknown geometry {geometry!r}")


def _dims(geometry, n):
    if geometry in ("euclidean_time", "parabolic_time"):
        return 1, 0
    if geometry == "euclidean_space":
        return n, n
    return n + 1, n


_GEOMETRIES = ("euclidean_time", "euclidean_space", "parabolic", "parabolic_time")


def ap_estimate(w: WeightSpec, p: float, geometry: str = "parabolic",
                sampler: BallSampler = BallSampler(), n: int = 1) -> ApReport:
    """Sampled A_p constant of ``w``.

    For each ball B the product (mean_B w) (mean_B w^{1/(1-p)})^{p-1} is
    formed; the report carries the maximum.  ``geometry`` selects balls in
    time only (intervals), space only (Euclidean balls), the parabolic
    cylinders of radius r (height r^2), or ``parabolic_time`` (time
    intervals of half-length r^2, i.e. the metric |t - s|^{1/2}).
    """
    if not p > 1:
        raise ValueError("p must be > 1")
    if geometry not in _GEOMETRIES:
        raise ValueError(f"unknown geometry {geometry!r}")
    dim, nspace = _dims(geometry, n)
    centers, radii = sampler.draw(dim)
    if geometry == "euclidean_space":
        centers = np.concatenate([np.zeros((len(radii), 1)), centers], axis=1)
    elif dim == 1:
        centers = np.concatenate([centers, np.zeros((len(radii), n))], axis=1)
    m1 = w.total_scale * _means(w, 1.0, centers, radii, geometry, n)
    m2 = w.total_scale ** (1.0 / (1.0 - p)) * _means(w, 1.0 / (1.0 - p), centers, radii, geometry, n)
    with np.errstate(invalid="ignore", over="ignore"):
        prod = m1 * m2 ** (p - 1.0)
    prod = np.where(np.isnan(prod), np.inf, prod)
    k = int(np.argmax(prod))
    return ApReport(p=p, geometry=geometry, constant=float(prod[k]), ball_count=len(radii),
                    radius_range=(sampler.r_min, sampler.r_max),
                    worst_ball=(tuple(centers[k]), float(radii[k])), per_ball=prod)


def _ball_inf(w: WeightSpec, centers, radii, geometry, n):
    """Essential infimum of w over each ball (power weights are monotone in
    the distance to the singular set, so the infimum sits at the nearest or
    farthest point)."""

    def interval_inf(c, half, a):
        lo, hi = c - half, c + half
        near = np.where((lo < 0) & (hi > 0), 0.0, np.minimum(np.abs(lo), np.abs(hi)))
        far = np.maximum(np.abs(lo), np.abs(hi))
        if a >= 0:
            return near ** a if a > 0 else np.ones_like(c)
        return far ** a

    def ball_inf(cx, r, b):
        d = np.sqrt(np.sum(cx ** 2, axis=-1))
        near = np.maximum(d - r, 0.0)
        far = d + r
        if b > 0:
            return near ** b
        if b == 0:
            return np.ones_like(d)
        return far ** b

    tpart, spart = w.time_part, w.space_part
    a = tpart.exponent if tpart.kind == "power_t" else 0.0
    b = spart.exponent if spart.kind == "power_x" else 0.0
    if geometry == "euclidean_time":
        return interval_inf(centers[:, 0], radii, a)
    if geometry == "parabolic_time":
        return interval_inf(centers[:, 0], radii ** 2, a)
    if geometry == "euclidean_space":
        return ball_inf(centers[:, 1:], radii, b)
    return interval_inf(centers[:, 0], radii ** 2, a) * ball_inf(centers[:, 1:], radii, b)


def a1_estimate(w: WeightSpec, geometry: str = "parabolic",
                sampler: BallSampler = BallSampler(), n: int = 1) -> ApReport:
    """Sampled A_1 constant: max over balls of mean(w) / ess inf(w)."""
    if geometry not in _GEOMETRIES:
        raise ValueError(f"unknown geometry {geometry!r}")
    dim, _ = _dims(geometry, n)
    centers, radii = sampler.draw(dim)
    if geometry == "euclidean_space":
        centers = np.concatenate([np.zeros((len(radii), 1)), centers], axis=1)
    elif dim == 1:
        centers = np.concatenate([centers, np.zeros((len(radii), n))], axis=1)
    m = w.total_scale * _means(w, 1.0, centers, radii, geometry, n)
    lo = w.total_scale * _ball_inf(w, centers, radii, geometry, n)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(lo > 0, m / lo, np.inf)
    k = int(np.argmax(ratio))
    return ApReport(p=1.0, geometry=geometry, constant=float(ratio[k]), ball_count=len(radii),
                    radius_range=(sampler.r_min, sampler.r_max),
                    worst_ball=(tuple(centers[k]), float(radii[k])), per_ball=ratio)


def classify(estimator, sampler: BallSampler = BallSampler(), decades: int = 1,
             stable_drift: float = 0.10, growth: float = 10.0):
    """Run ``estimator(sampler)`` at r_min and at r_min / 10**decades.

    Returns ``(label, coarse, fine)`` with label ``stable`` (relative drift at
    most ``stable_drift``), ``divergent`` (growth by at least ``growth``) or
    ``inconclusive``.
    """
    coarse = estimator(sampler).constant
    fine = estimator(sampler.with_r_min(sampler.r_min / 10 ** decades)).constant
    if not math.isfinite(fine) or (math.isfinite(coarse) and fine >= growth * coarse):
        label = "divergent"
    elif math.isfinite(coarse) and abs(fine - coarse) <= stable_drift * coarse:
        label = "stable"
    else:
        label = "inconclusive"
    return label, coarse, fine


@dataclass
class TensorProbeReport:
    p: float
    nu_parabolic: tuple
    nu_euclidean: tuple
    omega_euclidean: tuple
    tensor_parabolic: tuple

    @property
    def consistent(self) -> bool:
        """Tensor estimate is stable whenever both one-variable ones are."""
        if self.nu_euclidean[0] == "stable" and self.omega_euclidean[0] == "stable":
            return self.tensor_parabolic[0] == "stable"
        return True


def tensor_parabolic_probe(nu: WeightSpec, omega: WeightSpec, p: float,
                           sampler: BallSampler = BallSampler(), n: int = 1) -> TensorProbeReport:
    """Compare A_p behavior of nu, omega and nu(t) omega(x).

    Each entry is a ``classify`` triple (label, coarse, fine).
    """
    w = WeightSpec.tensor(nu, omega)
    return TensorProbeReport(
        p=p,
        nu_parabolic=classify(lambda s: ap_estimate(nu, p, "parabolic_time", s, n), sampler),
        nu_euclidean=classify(lambda s: ap_estimate(nu, p, "euclidean_time", s, n), sampler),
        omega_euclidean=classify(lambda s: ap_estimate(omega, p, "euclidean_space", s, n), sampler),
        tensor_parabolic=classify(lambda s: ap_estimate(w, p, "parabolic", s, n), sampler),
    )
