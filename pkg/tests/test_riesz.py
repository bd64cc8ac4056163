import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parabolic_lab import hermite, riesz
from parabolic_lab.grid import GridFunction, GridSpec, ParabolicImage, interior_mask, random_trig_bump, sample
from parabolic_lab.spectral import Symbol, spectral_apply

import oracles

SPEC33 = GridSpec(n=1, L=1.0, N_x=33, t_min=-0.5, t_max=0.5, N_t=33)


def rel(a, b, mask):
    return np.linalg.norm((a - b)[mask]) / np.linalg.norm(b[mask])


def bump(spec, seed=0):
    return sample(random_trig_bump(spec, seed), spec)


# constants ------------------------------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_constants_against_mpmath(n):
    c = riesz.constants(n)
    assert c.A_n == pytest.approx(oracles.A_n(n), abs=1e-13)
    assert c.B_n == pytest.approx(oracles.B_n(n), abs=1e-13)
    assert c.identity_defect <= 1e-12


def test_constants_closed_forms():
    assert riesz.constants(1).A_n == pytest.approx(math.erfc(0.5), abs=1e-12)
    assert riesz.constants(1).B_n == pytest.approx(1 - math.erfc(0.5), abs=1e-12)
    assert riesz.constants(2).A_n == pytest.approx(0.5 * math.exp(-0.25), abs=1e-12)
    assert riesz.constants(2).B_n == pytest.approx(1 - math.exp(-0.25), abs=1e-12)
    with pytest.raises(ValueError):
        riesz.constants(0)


def test_local_terms():
    c = riesz.constants(2)
    assert riesz.local_term("ij", "omega", 2, 0, 0) == -c.A_n
    assert riesz.local_term("ij", "omega", 2, 0, 1) == 0.0
    assert riesz.local_term("t", "omega", 2) == c.B_n
    assert riesz.local_term("t", "sigma", 2) == 1.0


# schedules ------------------------------------------------------------------

def test_schedule_validation():
    with pytest.raises(ValueError):
        riesz.TruncationSchedule((0.1, 0.2))
    with pytest.raises(ValueError):
        riesz.TruncationSchedule((0.1, -0.1))
    with pytest.raises(ValueError):
        riesz.TruncationSchedule((0.1,), "cube")
    tiny = riesz.TruncationSchedule((1e-12,))
    with pytest.raises(ValueError, match="resolution floor"):
        tiny.validate(SPEC33)


def test_default_schedule_geometries():
    om = riesz.default_schedule(SPEC33, "omega")
    sg = riesz.default_schedule(SPEC33, "sigma")
    assert np.allclose(om.radii, sg.radii)
    assert np.all(np.diff(om.eps) < 0)


# solvers --------------------------------------------------------------------

def test_solve_zero():
    f = GridFunction(SPEC33, np.zeros(SPEC33.shape))
    assert np.all(riesz.solve_heat_global(f).solution.values == 0)
    assert np.all(riesz.solve_hermite_global(f).solution.values == 0)


def test_support_check_names_face():
    f = sample(lambda t, x: 1.0 + 0 * x, SPEC33)
    with pytest.raises(ValueError, match="boundary"):
        riesz.solve_heat_global(f)


def test_heat_solve_mode_against_spectral():
    f = sample(lambda t, x: np.cos(2 * np.pi * (t / (33 * SPEC33.h_t) + x / (33 * SPEC33.h_x))), SPEC33)
    u = riesz.solve_heat_global(f, periodic=True).solution.values
    o = spectral_apply(f, Symbol("heat_inverse"), "zero").values
    assert rel(u, o, interior_mask(SPEC33)) <= 1e-2


def test_hermite_solve_mode_against_oracle():
    spec = GridSpec(n=1, L=5.0, N_x=41, t_min=0.0, t_max=2.0, N_t=41)
    om = 2 * np.pi / (spec.N_t * spec.h_t)
    f = sample(lambda t, x: np.cos(om * t) * hermite.eval_hermite(1, x), spec)
    u = riesz.solve_hermite_global(f, periodic=True).solution.values
    with pytest.warns(RuntimeWarning):
        o = hermite.hermite_oracle(f, "inverse", J=12).values
    assert rel(u, o, interior_mask(spec)) <= 1e-2


def test_heat_solve_residual_decreases():
    res = []
    for spec in (SPEC33, SPEC33.refined(2)):
        f = sample(ParabolicImage(random_trig_bump(spec, 0), "heat"), spec)
        res.append(riesz.solve_heat_global(f).residual)
    assert res[1] < res[0]


def test_cauchy_heat_gaussian():
    spec = GridSpec(n=1, L=8.0, N_x=121, t_min=0.0, t_max=1.0, N_t=11)
    x = spec.x_nodes()
    rep = riesz.solve_cauchy(GridFunction(spec, np.zeros(spec.shape)), np.exp(-x * x / 2), "heat")
    exact = np.array([[oracles.heat_gaussian_evolution(t, xx) for xx in x] for t in spec.t_nodes()])
    assert np.max(np.abs(rep.solution.values - exact)) <= 1e-4


def test_cauchy_hermite_ground_state():
    spec = GridSpec(n=1, L=8.0, N_x=241, t_min=0.0, t_max=1.0, N_t=6)
    x = spec.x_nodes()
    g = hermite.eval_hermite(0, x)
    rep = riesz.solve_cauchy(GridFunction(spec, np.zeros(spec.shape)), g, "hermite")
    exact = np.exp(-spec.t_nodes())[:, None] * g[None]
    assert np.max(np.abs(rep.solution.values - exact)) <= 1e-6


def test_cauchy_initial_trace():
    defects = []
    for N_t in (11, 41):
        spec = GridSpec(n=1, L=8.0, N_x=121, t_min=0.0, t_max=1.0, N_t=N_t)
        x = spec.x_nodes()
        rep = riesz.solve_cauchy(GridFunction(spec, np.zeros(spec.shape)), np.exp(-x * x / 2), "heat")
        assert np.array_equal(rep.solution.values[0], np.exp(-x * x / 2))
        defects.append(rep.diagnostics["trace_defect_first_step"])
        assert defects[-1] <= math.sqrt(spec.h_t)
    assert defects[1] < defects[0]


# truncations ----------------------------------------------------------------

def test_truncation_odd_integrand_vanishes():
    spec = GridSpec(n=2, L=1.0, N_x=17, t_min=-0.5, t_max=0.5, N_t=17)
    f = sample(lambda t, x1, x2: np.cos(np.pi * t) ** 4 * np.cos(np.pi * x1 / 2) ** 4 * np.cos(np.pi * x2 / 2) ** 4,
               spec)
    T = riesz.truncated_riesz(f, 0.05, "ij", 0, 1).values
    centre = T[:, 8, 8]
    assert np.max(np.abs(centre)) <= 1e-10 * np.max(np.abs(T))


def test_truncation_steps_shrink():
    f = bump(SPEC33)
    rep = riesz.riesz_limit(f, riesz.default_schedule(SPEC33, levels=5, first=4), report=True)
    steps = rep.diagnostics["step_norms"]
    assert all(b < a for a, b in zip(steps, steps[1:]))


def test_riesz_limit_heat_vs_spectral():
    # u = phi has compact support, so the periodic oracle sees no wrap-around
    f = sample(ParabolicImage(random_trig_bump(SPEC33, 1), "heat"), SPEC33)
    m = interior_mask(SPEC33)
    assert rel(riesz.riesz_limit(f, which="ij").values, spectral_apply(f, Symbol("riesz_ij")).values, m) <= 1e-2


def test_riesz_limit_geometries_agree():
    f = bump(SPEC33, 2)
    a = riesz.riesz_limit(f, riesz.default_schedule(SPEC33, "omega"), "t").values
    b = riesz.riesz_limit(f, riesz.default_schedule(SPEC33, "sigma"), "t").values
    assert rel(a, b, interior_mask(SPEC33)) <= 2e-2


def test_riesz_limit_heat_reconstruction():
    f = bump(SPEC33, 3)
    rt = riesz.riesz_limit(f, which="t").values
    rij = riesz.riesz_limit(f, which="ij").values
    assert rel(rt, rij + f.values, interior_mask(SPEC33)) <= 1e-2


def test_riesz_limit_hermite_reconstruction():
    spec = GridSpec(n=1, L=5.0, N_x=41, t_min=0.0, t_max=2.0, N_t=41)
    om = 2 * np.pi / (spec.N_t * spec.h_t)
    f = sample(lambda t, x: np.cos(om * t) * hermite.eval_hermite(1, x), spec)
    rt = riesz.riesz_limit(f, which="t", operator="hermite", periodic=True).values
    rij = riesz.riesz_limit(f, which="ij", operator="hermite", periodic=True).values
    u = riesz.solve_hermite_global(f, periodic=True).solution.values
    x2 = spec.x_nodes()[None, :] ** 2
    assert rel(rt, rij - x2 * u + f.values, interior_mask(spec)) <= 2e-2


def test_riesz_limit_needs_three_levels():
    with pytest.raises(ValueError):
        riesz.riesz_limit(bump(SPEC33), riesz.TruncationSchedule((1e-3, 5e-4)))


def test_extrapolation_error_carries_diagnostics():
    f = bump(SPEC33)
    with pytest.raises(riesz.ExtrapolationError) as info:
        riesz.riesz_limit(f, order_range=(5.0, 6.0))
    assert "empirical_order" in info.value.diagnostics


def test_maximal_truncation():
    f = bump(SPEC33)
    sch = riesz.default_schedule(SPEC33)
    M = riesz.maximal_truncation(f, sch).values
    for e in sch.eps:
        assert np.all(M >= np.abs(riesz.truncated_riesz(f, e).values) - 1e-12)
    zero = GridFunction(SPEC33, np.zeros(SPEC33.shape))
    assert np.all(riesz.maximal_truncation(zero, sch).values == 0)


def test_maximal_truncation_stable():
    f = bump(SPEC33)
    a = riesz.maximal_truncation(f, riesz.default_schedule(SPEC33, levels=4)).values
    b = riesz.maximal_truncation(f, riesz.default_schedule(SPEC33, levels=6)).values
    assert np.all(np.isfinite(b))
    assert np.max(b) <= 1.1 * np.max(a)


def test_geometry_difference_local_term():
    spec = GridSpec(n=1, L=1.0, N_x=65, t_min=-0.5, t_max=0.5, N_t=65)
    f = bump(spec)
    eps = spec.h_x / 64
    assert riesz.recovered_local_term(f, eps) == pytest.approx(riesz.constants(1).A_n, abs=5e-3)
    assert riesz.recovered_local_term(f, eps, "t") == pytest.approx(1 - riesz.constants(1).B_n, abs=5e-3)


@settings(max_examples=8, deadline=None)
@given(a=st.floats(-2, 2), b=st.floats(-2, 2))
def test_truncation_linear(a, b):
    spec = GridSpec(n=1, L=1.0, N_x=17, t_min=-0.5, t_max=0.5, N_t=17)
    f, g = bump(spec, 0), bump(spec, 1)
    T = lambda h: riesz.truncated_riesz(h, 0.01).values
    assert np.max(np.abs(T(f * a + g * b) - (a * T(f) + b * T(g)))) <= 1e-10 * (1 + abs(a) + abs(b))


@settings(max_examples=6, deadline=None)
@given(k=st.integers(-3, 3), m=st.integers(-3, 3))
def test_truncation_translation_covariant(k, m):
    spec = GridSpec(n=1, L=1.0, N_x=25, t_min=-0.5, t_max=0.5, N_t=25)
    f = bump(GridSpec(n=1, L=0.5, N_x=13, t_min=-0.25, t_max=0.25, N_t=13))
    v = np.zeros(spec.shape)
    v[6 + k:19 + k, 6 + m:19 + m] = f.values
    base = np.zeros(spec.shape)
    base[6:19, 6:19] = f.values
    Ta = riesz.truncated_riesz(GridFunction(spec, v), 0.02).values
    Tb = riesz.truncated_riesz(GridFunction(spec, base), 0.02).values
    shifted = np.roll(Tb, (k, m), axis=(0, 1))
    core = (slice(8, 17), slice(8, 17))
    assert np.max(np.abs(Ta[core] - shifted[core])) <= 1e-10 * np.max(np.abs(Tb))


# the four eps-indexed quantities ----------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 3])
def test_eps_limits_ii_iii(n):
    rep = riesz.eps_limits_verify(n)
    err = rep.errors()[-1]
    assert err[1] <= 1e-3 and err[2] <= 1e-3


@pytest.mark.parametrize("n", [1, 2, 3])
def test_eps_limit_iv(n):
    assert riesz.eps_limits_verify(n).errors()[-1][3] <= 1e-3


def test_eps_limits_converge():
    err = riesz.eps_limits_verify(2, (1e-1, 1e-2, 1e-3)).errors()
    assert np.all(np.diff(err[:, 1:], axis=0) <= 0)
