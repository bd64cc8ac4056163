"""Space-time Fourier oracle on the periodized grid.

A grid with N nodes per axis is treated as one period of length N*h, so the
discrete transform is an exact pair on the stored nodes.  Modes are
exp(i(rho t + xi . x)); d_t acts as i rho and -Delta as |xi|^2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._subordination import subordinate
from .grid import GridFunction, GridSpec

__all__ = [
    "SpectralField",
    "Symbol",
    "time_frequencies",
    "space_frequencies",
    "transform",
    "inverse_transform",
    "symbol_value",
    "symbol_on_lattice",
    "apply_symbol",
    "spectral_apply",
    "ZERO_MODE_POLICIES",
]

ZERO_MODE_POLICIES = ("subtract", "reject", "zero")


def time_frequencies(spec: GridSpec) -> np.ndarray:
    return 2.0 * np.pi * np.fft.fftfreq(spec.N_t, d=spec.h_t)


def space_frequencies(spec: GridSpec) -> np.ndarray:
    return 2.0 * np.pi * np.fft.fftfreq(spec.N_x, d=spec.h_x)


@dataclass
class SpectralField:
    spec: GridSpec
    coeffs: np.ndarray
    real_input: bool = False
    subtracted_mean: complex = 0.0

    @property
    def rho(self):
        return time_frequencies(self.spec)

    @property
    def xi(self):
        return space_frequencies(self.spec)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        c = self.coeffs
        flipped = np.conj(np.roll(np.flip(c), 1, axis=tuple(range(c.ndim))))
        scale = max(np.max(np.abs(c)), 1e-300)
        return bool(np.max(np.abs(c - flipped)) <= tol * scale)


def transform(f: GridFunction) -> SpectralField:
    return SpectralField(f.spec, np.fft.fftn(f.values), real_input=not np.iscomplexobj(f.values))


def inverse_transform(F: SpectralField, real: Optional[bool] = None) -> GridFunction:
    vals = np.fft.ifftn(F.coeffs)
    if real is None:
        real = F.real_input
    if real:
        vals = vals.real
    return GridFunction(F.spec, vals)


@dataclass(frozen=True)
class Symbol:
    """Multiplier kinds: ``heat_inverse``, ``riesz_ij`` (needs i, j), ``riesz_t``,
    ``frac_power`` (needs s), ``poisson`` (needs s and y).

    ``riesz_ij`` is the multiplier of d_ij (d_t - Delta)^(-1), which is
    -xi_i xi_j / (i rho + |xi|^2) in this convention.
    """

    kind: str
    i: int = 0
    j: int = 0
    s: float = 0.5
    y: float = 1.0

    def __post_init__(self):
        if self.kind not in ("heat_inverse", "riesz_ij", "riesz_t", "frac_power", "poisson"):
            raise ValueError(f"unknown symbol kind {self.kind!r}")
        if self.kind == "poisson" and not (0 < self.s < 1 and self.y > 0):
            raise ValueError("poisson symbol needs 0 < s < 1 and y > 0")
        if self.kind == "frac_power" and not self.s > 0:
            raise ValueError("frac_power needs s > 0")

    @property
    def singular(self) -> bool:
        return self.kind in ("heat_inverse", "riesz_ij", "riesz_t")


def symbol_value(sym: Symbol, rho, xi, policy: str = "reject"):
    """Closed-form value at (rho, xi); ``xi`` has last axis n.

    At (0, 0) the singular symbols raise under ``reject`` and return 0 under
    ``zero``/``subtract``."""
    rho = np.asarray(rho, dtype=float)
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    xi2 = np.sum(xi ** 2, axis=-1)
    lam = 1j * rho + xi2
    origin = lam == 0
    if sym.singular and np.any(origin):
        if policy == "reject":
            raise ValueError("symbol is singular at the zero frequency")
    lam_safe = np.where(origin, 1.0, lam)
    if sym.kind == "heat_inverse":
        val = 1.0 / lam_safe
    elif sym.kind == "riesz_ij":
        val = -xi[..., sym.i] * xi[..., sym.j] / lam_safe
    elif sym.kind == "riesz_t":
        val = 1j * rho / lam_safe
    elif sym.kind == "frac_power":
        return np.where(origin, 0.0, lam_safe ** sym.s)
    else:
        return subordinate(lam, sym.s, sym.y)
    return np.where(origin, 0.0, val)


def _lattice(spec: GridSpec):
    rho = time_frequencies(spec).reshape((-1,) + (1,) * spec.n)
    xi1 = space_frequencies(spec)
    comps = []
    for a in range(spec.n):
        shape = [1] * (spec.n + 1)
        shape[a + 1] = -1
        comps.append(xi1.reshape(shape))
    return rho, comps


def symbol_on_lattice(sym: Symbol, spec: GridSpec) -> np.ndarray:
    """Symbol values on the full frequency lattice (grid shape); zero at the
    origin for the singular symbols."""
    rho, comps = _lattice(spec)
    full = [np.broadcast_to(c, spec.shape) for c in comps]
    xi = np.stack(full, axis=-1)
    return symbol_value(sym, np.broadcast_to(rho, spec.shape), xi, policy="zero")


def apply_symbol(F: SpectralField, sym: Symbol, policy: str = "subtract") -> SpectralField:
    """Pointwise multiplication.  For singular symbols the zero mode follows
    ``policy``: ``subtract`` removes the mean (recorded in the result),
    ``reject`` raises if the mean mode is nonzero, ``zero`` drops it."""
    if policy not in ZERO_MODE_POLICIES:
        raise ValueError(f"unknown zero-mode policy {policy!r}")
    coeffs = F.coeffs
    mean = 0.0
    origin = (0,) * coeffs.ndim
    if sym.singular:
        c0 = coeffs[origin]
        scale = max(float(np.max(np.abs(coeffs))), 1e-300)
        if policy == "reject" and abs(c0) > 1e-12 * scale:
            raise ValueError("nonzero mean mode under zero-mode policy 'reject'")
        mean = c0 / coeffs.size
    mult = symbol_on_lattice(sym, F.spec)
    return SpectralField(F.spec, coeffs * mult, F.real_input, mean if policy == "subtract" else 0.0)


def spectral_apply(f: GridFunction, sym: Symbol, policy: str = "subtract") -> GridFunction:
    """transform -> apply_symbol -> inverse_transform."""
    return inverse_transform(apply_symbol(transform(f), sym, policy))
