"""Numerical toolkit for parabolic singular integrals: heat and harmonic
oscillator kernels, Riesz transforms as truncated space-time integrals,
fractional Poisson operators and weighted mixed norms."""

from . import fractional, grid, hermite, kernels, riesz, spectral, weights
from .grid import GridFunction, GridSpec, random_trig_bump, sample
from .riesz import constants, riesz_limit, solve_heat_global, solve_hermite_global

__version__ = "0.1.0"

__all__ = [
    "fractional", "grid", "hermite", "kernels", "riesz", "spectral", "weights",
    "GridFunction", "GridSpec", "random_trig_bump", "sample",
    "constants", "riesz_limit", "solve_heat_global", "solve_hermite_global",
]
