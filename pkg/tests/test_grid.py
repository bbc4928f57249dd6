import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hpfact.grid import (
    Ball,
    GridError,
    GridFunction,
    GridSpec,
    average_on_ball,
    axpy,
    ball_count,
    block_average,
    coarse_spec,
    functions_equal,
    indicator,
    inner,
    integrate,
    integrate_abs,
    load_grid_function,
    lp_norm,
    prolong,
    restrict_to_ball,
    save_grid_function,
    scale,
    spec_from_dict,
    spec_to_dict,
)


def test_integrate_constant_counts_cells():
    spec = GridSpec(1, 1.0, 0.125)
    f = GridFunction(spec, np.ones(spec.shape))
    assert integrate(f) == pytest.approx((spec.n_cells + 1) * 0.125, rel=1e-15)


def test_indicator_is_strict_ball():
    spec = GridSpec(1, 2.0, 0.25)
    chi = indicator(spec, Ball((0.0,), 0.5))
    pts, vals = chi.nonzero()
    # |x| < 0.5 on the lattice 0.25 Z: -0.25, 0, 0.25
    assert sorted(pts[:, 0].tolist()) == [-0.25, 0.0, 0.25]
    assert ball_count(spec, Ball((0.0,), 0.5)) == 3


def test_indicator_rejects_tiny_or_outside_balls():
    spec = GridSpec(1, 1.0, 0.25)
    with pytest.raises(GridError):
        indicator(spec, Ball((0.0,), 0.3))
    with pytest.raises(GridError):
        indicator(spec, Ball((0.9,), 0.5))


def test_average_uses_discrete_measure():
    spec = GridSpec(2, 2.0, 0.1)
    ball = Ball((0.05, -0.3), 0.7)
    f = GridFunction.from_callable(spec, lambda x: np.sin(3 * x[..., 0]) + x[..., 1] ** 2)
    g = restrict_to_ball(f, ball) - scale(average_on_ball(f, ball), indicator(spec, ball))
    assert abs(integrate(g)) <= 1e-12 * integrate_abs(g)


def test_lp_norms_of_indicator():
    spec = GridSpec(1, 2.0, 1 / 32)
    chi = indicator(spec, Ball((0.0,), 1.0))
    m = ball_count(spec, Ball((0.0,), 1.0)) / 32
    assert lp_norm(chi, 1) == pytest.approx(m)
    assert lp_norm(chi, 3) == pytest.approx(m ** (1 / 3))
    assert lp_norm(chi, math.inf) == 1.0


def test_sparse_boxes_combine():
    spec = GridSpec(1, 4.0, 0.25)
    a = indicator(spec, Ball((-2.0,), 0.6))
    b = indicator(spec, Ball((2.0,), 0.6))
    s = a + b
    assert integrate(s) == pytest.approx(integrate(a) + integrate(b))
    assert inner(a, b) == 0.0
    np.testing.assert_array_equal(axpy(2.0, a, b).dense(), 2 * a.dense() + b.dense())


def test_block_average_preserves_integral():
    fine = GridSpec(1, 2.0, 1 / 32)
    f = GridFunction.from_callable(fine, lambda x: np.cos(2 * x[..., 0]), indicator(fine, Ball((0.0,), 1.0)).support)
    cs = coarse_spec(fine, 4, (0.0,), 2.0)
    F = block_average(f, cs)
    assert integrate(F) == pytest.approx(integrate(f), rel=1e-12)
    back = prolong(F, fine)
    assert integrate(back) == pytest.approx(integrate(f), rel=1e-12)


def test_grid_function_npz_roundtrip(tmp_path):
    spec = GridSpec(2, 1.0, 0.125, origin=(0.5, -0.25))
    f = GridFunction.from_callable(spec, lambda x: x[..., 0] * x[..., 1], ((2, 3), (9, 12)))
    save_grid_function(tmp_path / "f.npz", f)
    g = load_grid_function(tmp_path / "f.npz")
    assert functions_equal([f, g])
    assert spec_from_dict(spec_to_dict(spec)) == spec


def test_mismatched_grids_raise():
    a = GridFunction.zeros(GridSpec(1, 1.0, 0.25))
    b = GridFunction.zeros(GridSpec(1, 1.0, 0.125))
    with pytest.raises(GridError):
        a + b


@settings(max_examples=40, deadline=None)
@given(
    st.floats(-3, 3), st.floats(-3, 3),
    st.lists(st.floats(-5, 5), min_size=17, max_size=17),
    st.lists(st.floats(-5, 5), min_size=17, max_size=17),
)
def test_integrate_is_linear(alpha, beta, u, v):
    spec = GridSpec(1, 1.0, 0.125)
    f, g = GridFunction(spec, np.array(u)), GridFunction(spec, np.array(v))
    lhs = integrate(scale(alpha, f) + scale(beta, g))
    rhs = alpha * integrate(f) + beta * integrate(g)
    assert abs(lhs - rhs) <= 1e-12 * (abs(alpha) * integrate_abs(f) + abs(beta) * integrate_abs(g)) + 1e-300
