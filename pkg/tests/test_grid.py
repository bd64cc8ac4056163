import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parabolic_lab.grid import (GridFunction, GridSpec, NormSpec, ParabolicImage, build_grid, finite_difference,
                                interior_mask, lp_norm, mixed_norm, norm, random_trig_bump, sample, slice_norms,
                                sup_norm, weak_level_measure)
from parabolic_lab.weights import WeightSpec

UNIT_BOX = GridSpec(n=1, L=1.0, N_x=21, t_min=0.0, t_max=1.0, N_t=11)


def test_nodes_n1():
    g = build_grid(GridSpec(n=1, L=1.0, N_x=3))
    assert np.array_equal(g.x, [-1.0, 0.0, 1.0])


def test_node_count_n2():
    spec = GridSpec(n=2, N_x=5)
    assert spec.shape[1:] == (5, 5)
    assert build_grid(spec).points().reshape(-1, 2).shape[0] == 25


def test_time_step():
    assert GridSpec(t_min=0.0, t_max=1.0, N_t=11).h_t == pytest.approx(0.1, abs=1e-15)


@pytest.mark.parametrize("kw", [dict(n=0), dict(n=4), dict(L=-1.0), dict(N_x=4), dict(N_x=1), dict(N_t=2),
                                dict(t_min=1.0, t_max=1.0)])
def test_invalid_spec(kw):
    with pytest.raises(ValueError, match="invariant"):
        GridSpec(**kw)


def test_refined_keeps_box():
    s = UNIT_BOX.refined(2)
    assert (s.N_x, s.N_t) == (41, 21)
    assert s.h_x == pytest.approx(UNIT_BOX.h_x / 2)


def test_sample_constant_and_time():
    assert np.all(sample(lambda t, x: 1.0, UNIT_BOX).values == 1.0)
    f = sample(lambda t, x: t + 0 * x, UNIT_BOX)
    assert f.values[5, 3] == pytest.approx(0.5)


def test_sample_rejects_nonfinite():
    with pytest.raises(ValueError, match="node index"), np.errstate(divide="ignore"):
        sample(lambda t, x: 1.0 / x, GridSpec(n=1, N_x=5))


def test_random_bump_deterministic():
    a = sample(random_trig_bump(UNIT_BOX, 7), UNIT_BOX).values
    b = sample(random_trig_bump(UNIT_BOX, 7), UNIT_BOX).values
    c = sample(random_trig_bump(UNIT_BOX, 8), UNIT_BOX).values
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_random_bump_vanishes_on_boundary():
    spec = GridSpec(n=2, L=1.0, N_x=17, t_min=-1.0, t_max=1.0, N_t=17)
    v = sample(random_trig_bump(spec, 0), spec).values
    assert np.all(v[0] == 0) and np.all(v[-1] == 0)
    assert np.all(v[:, 0] == 0) and np.all(v[:, :, -1] == 0)


def test_parabolic_image_heat():
    # u = phi, so f = d_t phi - phi_xx; check against finite differences of phi
    spec = GridSpec(n=1, L=1.0, N_x=201, t_min=0.0, t_max=1.0, N_t=201)
    phi = random_trig_bump(spec, 3)
    u = sample(phi, spec)
    f = sample(ParabolicImage(phi, "heat"), spec).values
    fd = finite_difference(u, "t").values - finite_difference(u, "ij").values
    m = interior_mask(spec)
    assert np.max(np.abs(fd - f)[m]) <= 2e-2 * np.max(np.abs(f))


def test_lp_norm_unit_box():
    f = sample(lambda t, x: 1.0, UNIT_BOX)
    assert lp_norm(f, 2) == pytest.approx(math.sqrt(2), rel=1e-12)
    assert lp_norm(f * 0.0, 2) == 0.0


def test_lp_norm_weighted_time():
    # int_0^1 t^(1/2) dt = 2/3; the trapezoid rule converges like h^(3/2) at the singular endpoint
    exact = math.sqrt(2 * 2 / 3)
    errs = []
    for N_t in (101, 401):
        spec = GridSpec(n=1, L=1.0, N_x=5, t_min=0.0, t_max=1.0, N_t=N_t)
        errs.append(abs(lp_norm(sample(lambda t, x: 1.0, spec), 2, WeightSpec.power_t(0.5)) - exact))
    assert errs[1] <= 1e-4 * exact
    assert math.log(errs[0] / errs[1], 4) == pytest.approx(1.5, abs=0.1)


def test_mixed_norm_matches_lp_norm():
    f = sample(random_trig_bump(UNIT_BOX, 1), UNIT_BOX)
    assert mixed_norm(f, 2, 2) == pytest.approx(lp_norm(f, 2), rel=1e-12)
    assert norm(f, NormSpec(p=2, q=2)) == pytest.approx(norm(f, NormSpec(p=2)), rel=1e-12)


def test_mixed_norm_separable():
    f = sample(lambda t, x: (1 + t) * np.cos(x), UNIT_BOX)
    phi = sample(lambda t, x: (1 + t) + 0 * x, UNIT_BOX)
    psi = sample(lambda t, x: np.cos(x) + 0 * t, UNIT_BOX)
    q, p = 3.0, 1.5
    tn = mixed_norm(phi, q, p) / 2 ** (1 / p)
    xn = mixed_norm(psi, q, p)
    assert mixed_norm(f, q, p) == pytest.approx(tn * xn, rel=1e-10)


def test_mixed_norm_q1_unit():
    assert mixed_norm(sample(lambda t, x: 1.0, UNIT_BOX), 1, 2) == pytest.approx(math.sqrt(2), rel=1e-12)


def test_weak_level_measure():
    f = sample(lambda t, x: 1.0, UNIT_BOX)
    assert weak_level_measure(f, 2, None, None, 10.0) == 0.0
    assert weak_level_measure(f, 2, None, None, 1.0) == pytest.approx(1.0)
    half = sample(lambda t, x: (t <= 0.5) * 1.0 + 0 * x, UNIT_BOX)
    assert abs(weak_level_measure(half, 2, None, None, 0.5) - 0.5) <= UNIT_BOX.h_t
    with pytest.raises(ValueError):
        weak_level_measure(f, 2, None, None, 0.0)


def test_exponent_validation():
    f = sample(lambda t, x: 1.0, UNIT_BOX)
    with pytest.raises(ValueError):
        lp_norm(f, 0.5)
    with pytest.raises(ValueError):
        mixed_norm(f, math.inf, 2)


def test_fd_exact_on_polynomials():
    f = sample(lambda t, x: t + 0 * x, UNIT_BOX)
    d = finite_difference(f, "t")
    assert np.allclose(d.values[d.valid], 1.0, atol=1e-12)
    spec = GridSpec(n=2, N_x=9)
    g = finite_difference(sample(lambda t, x1, x2: x1 * x2 + 0 * t, spec), "ij", 0, 1)
    assert np.allclose(g.values[g.valid], 1.0, atol=1e-12)


def test_fd_second_order():
    errs = []
    for N in (41, 81):
        spec = GridSpec(n=1, L=1.0, N_x=N, N_t=5)
        d = finite_difference(sample(lambda t, x: np.sin(x) + 0 * t, spec), "ij")
        exact = -np.sin(spec.x_nodes())[None, :]
        errs.append(np.max(np.abs(d.values - exact)[d.valid]))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_sup_norm_and_mask():
    f = sample(lambda t, x: x + 0 * t, UNIT_BOX)
    assert sup_norm(f) == 1.0
    assert sup_norm(f, interior_mask(UNIT_BOX)) < 1.0


def test_gridfunction_shape_check():
    with pytest.raises(ValueError):
        GridFunction(UNIT_BOX, np.zeros((3, 3)))
    with pytest.raises(ValueError):
        GridFunction(UNIT_BOX, np.full(UNIT_BOX.shape, np.nan))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), c=st.floats(-5, 5).filter(lambda v: v == 0 or abs(v) > 1e-6),
       q=st.floats(1, 6), p=st.floats(1, 6))
def test_mixed_norm_homogeneous(seed, c, q, p):
    f = sample(random_trig_bump(UNIT_BOX, seed), UNIT_BOX)
    assert mixed_norm(f * c, q, p) == pytest.approx(abs(c) * mixed_norm(f, q, p), rel=1e-10, abs=1e-300)


@settings(max_examples=25, deadline=None)
@given(a=st.integers(0, 10_000), b=st.integers(0, 10_000), q=st.floats(1, 6), p=st.floats(1, 6))
def test_mixed_norm_triangle(a, b, q, p):
    f = sample(random_trig_bump(UNIT_BOX, a), UNIT_BOX)
    g = sample(random_trig_bump(UNIT_BOX, b), UNIT_BOX)
    assert mixed_norm(f + g, q, p) <= mixed_norm(f, q, p) + mixed_norm(g, q, p) + 1e-12


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), lam=st.floats(1e-3, 10))
def test_weak_measure_chebyshev(seed, lam):
    f = sample(random_trig_bump(UNIT_BOX, seed), UNIT_BOX)
    s = slice_norms(f, 2)
    # lambda * |{s > lambda}| <= ||s||_1 holds node-wise for the trapezoid measure
    assert lam * weak_level_measure(f, 2, None, None, lam) <= mixed_norm(f, 1, 2) + 1e-12
    assert weak_level_measure(f, 2, None, None, lam) <= UNIT_BOX.t_max - UNIT_BOX.t_min + 1e-12
    assert np.all(s >= 0)
