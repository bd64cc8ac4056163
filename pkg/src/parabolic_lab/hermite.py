"""Hermite functions, expansions, and the Hermite-in-space / Fourier-in-time
multiplier oracle for the harmonic oscillator H = -Delta + |x|^2.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .grid import GridFunction, GridSpec, trapezoid_weights
from .spectral import time_frequencies

__all__ = [
    "MultiIndex",
    "multi_indices",
    "eval_hermite",
    "eval_hermite_all",
    "eval_hermite_derivative",
    "eval_multi",
    "HermiteExpansion",
    "default_degree",
    "recommended_half_width",
    "project",
    "synthesize",
    "semigroup_spectral",
    "with_time_axis",
    "time_multiplier",
    "multiplier_symbol",
    "hermite_oracle",
]

PI_QUARTER = math.pi ** -0.25
_KEEP = object()


@dataclass(frozen=True)
class MultiIndex:
    alpha: tuple

    def __post_init__(self):
        if any(int(a) != a or a < 0 for a in self.alpha):
            raise ValueError("multi-index components must be nonnegative integers")

    @property
    def degree(self) -> int:
        return int(sum(self.alpha))

    @property
    def n(self) -> int:
        return len(self.alpha)

    @property
    def eigenvalue(self) -> int:
        return 2 * self.degree + self.n


def multi_indices(n: int, J: int) -> list:
    """All alpha in N_0^n with |alpha| <= J, ordered by degree then lexicographically."""
    out = []
    for d in range(J + 1):
        for a in itertools.product(range(d + 1), repeat=n):
            if sum(a) == d:
                out.append(tuple(a))
    return out


def eval_hermite_all(kmax: int, r) -> np.ndarray:
    """h_0..h_kmax at r via the normalized three-term recurrence; shape (kmax+1,) + r.shape."""
    r = np.asarray(r, dtype=float)
    out = np.empty((kmax + 1,) + r.shape)
    out[0] = PI_QUARTER * np.exp(-0.5 * r * r)
    if kmax >= 1:
        out[1] = math.sqrt(2.0) * r * out[0]
    for k in range(1, kmax):
        out[k + 1] = r * math.sqrt(2.0 / (k + 1)) * out[k] - math.sqrt(k / (k + 1)) * out[k - 1]
    return out


def eval_hermite(k: int, r):
    if k < 0:
        raise ValueError("degree must be nonnegative")
    return eval_hermite_all(k, r)[k]


def eval_hermite_derivative(k: int, r, order: int = 1):
    """d^order h_k via h_k' = sqrt(k/2) h_{k-1} - sqrt((k+1)/2) h_{k+1}."""
    r = np.asarray(r, dtype=float)
    coeffs = {k: 1.0}
    for _ in range(order):
        nxt = {}
        for m, c in coeffs.items():
            if m > 0:
                nxt[m - 1] = nxt.get(m - 1, 0.0) + c * math.sqrt(m / 2.0)
            nxt[m + 1] = nxt.get(m + 1, 0.0) - c * math.sqrt((m + 1) / 2.0)
        coeffs = nxt
    H = eval_hermite_all(max(coeffs), r)
    return sum(c * H[m] for m, c in coeffs.items())


def eval_multi(alpha: Union[Sequence[int], MultiIndex], x) -> np.ndarray:
    """h_alpha(x) = prod_i h_{alpha_i}(x_i); ``x`` has last axis n."""
    a = alpha.alpha if isinstance(alpha, MultiIndex) else tuple(alpha)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != len(a):
        raise ValueError("point dimension does not match multi-index")
    out = 1.0
    for i, k in enumerate(a):
        out = out * eval_hermite(k, x[..., i])
    return out


@dataclass
class HermiteExpansion:
    """Coefficients c_alpha for |alpha| <= J, optionally with a time axis.

    ``coeffs`` has shape (count,) or (count, K); with ``freqs`` set the
    trailing axis holds time-frequency coefficients c_alpha(xi_k), otherwise
    (if present) time samples.
    """

    n: int
    J: int
    coeffs: np.ndarray
    freqs: Optional[np.ndarray] = None
    indices: list = field(default=None, repr=False)

    def __post_init__(self):
        if self.indices is None:
            self.indices = multi_indices(self.n, self.J)
        self.coeffs = np.asarray(self.coeffs)
        if self.coeffs.shape[0] != len(self.indices):
            raise ValueError("coefficient count does not match the multi-index set")
        if self.freqs is not None and (self.coeffs.ndim != 2 or self.coeffs.shape[1] != len(self.freqs)):
            raise ValueError("coefficient array does not match the frequency axis")
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("coefficients must be finite")

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([2 * sum(a) + self.n for a in self.indices], dtype=float)

    def coefficient(self, alpha):
        return self.coeffs[self.indices.index(tuple(alpha))]

    def replace(self, coeffs, freqs=_KEEP) -> "HermiteExpansion":
        return HermiteExpansion(self.n, self.J, coeffs, self.freqs if freqs is _KEEP else freqs,
                                self.indices)


def default_degree(n: int) -> int:
    return 20 if n <= 2 else 12


def recommended_half_width(n: int, J: int) -> float:
    return math.sqrt(2 * J + n) + 6.0


def _quad_grid(n, J):
    Lq = recommended_half_width(n, J)
    N = int(math.ceil(2 * Lq * 10)) + 1
    x = np.linspace(-Lq, Lq, N)
    return x, trapezoid_weights(N, x[1] - x[0])


def project(f, J: Optional[int] = None, n: int = 1, x: Optional[np.ndarray] = None) -> HermiteExpansion:
    """Hermite coefficients c_alpha = int f h_alpha by the trapezoid rule.

    ``f`` is a callable f(x_1, ..., x_n) (evaluated on a box of half-width
    sqrt(2J+n)+6 with 10 points per unit), a :class:`GridFunction` (every
    time slice is projected; coefficients get a trailing time axis), or an
    array of spatial samples on the nodes ``x``.
    """
    if isinstance(f, GridFunction):
        n = f.spec.n
        x = f.spec.x_nodes()
        vals = np.moveaxis(f.values, 0, -1)  # spatial axes first, time last
        J = default_degree(n) if J is None else J
        _warn_box(x, n, J)
        w = trapezoid_weights(x.size, x[1] - x[0])
        coeffs = _project_lead(vals, x, w, n, J)
        return HermiteExpansion(n, J, coeffs)
    J = default_degree(n) if J is None else J
    if callable(f):
        xq, w = _quad_grid(n, J)
        mesh = np.meshgrid(*([xq] * n), indexing="ij")
        vals = np.broadcast_to(np.asarray(f(*mesh)), mesh[0].shape)
        return HermiteExpansion(n, J, _project_lead(vals, xq, w, n, J))
    if x is None:
        raise ValueError("array input needs its node coordinates")
    _warn_box(x, n, J)
    w = trapezoid_weights(x.size, x[1] - x[0])
    return HermiteExpansion(n, J, _project_lead(np.asarray(f), x, w, n, J))


def _warn_box(x, n, J):
    if max(abs(x[0]), abs(x[-1])) < recommended_half_width(n, J):
        warnings.warn(
            f"box half-width {max(abs(x[0]), abs(x[-1])):.3g} is below the recommended "
            f"{recommended_half_width(n, J):.3g} for degree {J}", RuntimeWarning, stacklevel=3)


def _project_lead(vals, x, w, n, J):
    """Project over the leading n axes of ``vals``; remaining axes are kept."""
    H = eval_hermite_all(J, x) * w
    idx = multi_indices(n, J)
    out = []
    for a in idx:
        c = vals
        for k in a:
            c = np.tensordot(H[k], c, axes=([0], [0]))
        out.append(c)
    return np.stack(out)


def synthesize(e: HermiteExpansion, x: np.ndarray, orders: Sequence[int] = ()) -> np.ndarray:
    """sum_alpha c_alpha d^orders h_alpha on the tensor grid x^n.

    Output shape (N,)*n + trailing coefficient axes."""
    n = e.n
    orders = tuple(orders) + (0,) * (n - len(orders))
    tables = []
    for ax in range(n):
        if orders[ax] == 0:
            tables.append(eval_hermite_all(e.J, x))
        else:
            tables.append(np.stack([eval_hermite_derivative(k, x, orders[ax]) for k in range(e.J + 1)]))
    out = 0.0
    for ci, a in enumerate(e.indices):
        basis = 1.0
        for ax, k in enumerate(a):
            shape = [1] * n
            shape[ax] = -1
            basis = basis * tables[ax][k].reshape(shape)
        out = out + np.multiply.outer(basis, e.coeffs[ci])
    return np.asarray(out)


def semigroup_spectral(e: HermiteExpansion, tau: float) -> HermiteExpansion:
    """c_alpha -> exp(-tau (2|alpha| + n)) c_alpha."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    lam = e.eigenvalues
    fac = np.exp(-tau * lam).reshape((-1,) + (1,) * (e.coeffs.ndim - 1))
    return e.replace(e.coeffs * fac)


def with_time_axis(e: HermiteExpansion, spec: GridSpec) -> HermiteExpansion:
    """Fourier transform the trailing time-sample axis (one period N_t h_t)."""
    if e.coeffs.ndim != 2 or e.coeffs.shape[1] != spec.N_t:
        raise ValueError("expansion needs a time-sample axis of length N_t")
    return e.replace(np.fft.fft(e.coeffs, axis=1), freqs=time_frequencies(spec))


def multiplier_symbol(kind: str, xi, lam):
    """(i xi + lam)^-1, i xi (i xi + lam)^-1 or lam (i xi + lam)^-1."""
    d = 1j * np.asarray(xi) + np.asarray(lam)
    if kind == "inverse":
        return 1.0 / d
    if kind == "riesz_t":
        return 1j * np.asarray(xi) / d
    if kind == "riesz_H":
        return np.asarray(lam) / d
    raise ValueError(f"unknown multiplier kind {kind!r}")


def time_multiplier(e: HermiteExpansion, kind: str) -> HermiteExpansion:
    if e.freqs is None:
        raise ValueError("expansion has no frequency axis")
    sym = multiplier_symbol(kind, e.freqs[None, :], e.eigenvalues[:, None])
    return e.replace(e.coeffs * sym)


def hermite_oracle(f: GridFunction, kind: str, J: Optional[int] = None, i: int = 0, j: int = 0
                   ) -> GridFunction:
    """Multiplier route for the oscillator on a time-periodic grid function.

    kind ``inverse``: (d_t + H)^-1 f; ``riesz_t``: d_t (d_t + H)^-1 f;
    ``riesz_ij``: d_ij (d_t + H)^-1 f (Hermite functions differentiated
    analytically); ``riesz_H``: H (d_t + H)^-1 f.
    """
    spec = f.spec
    e = with_time_axis(project(f, J), spec)
    if kind == "riesz_ij":
        u = time_multiplier(e, "inverse")
        orders = [0] * spec.n
        orders[i] += 1
        orders[j] += 1
    else:
        u = time_multiplier(e, kind)
        orders = [0] * spec.n
    u = u.replace(np.fft.ifft(u.coeffs, axis=1), freqs=None)
    vals = synthesize(u, spec.x_nodes(), orders)
    vals = np.moveaxis(vals, -1, 0)
    if not np.iscomplexobj(f.values):
        vals = vals.real
    return GridFunction(spec, vals)
