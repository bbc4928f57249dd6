import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hpfact import operators
from hpfact.grid import GridSpec, inner
from hpfact.operators import apply_T, apply_partial_adjoint, evaluate_at, trilinear_form

from conftest import bump


def _loop_oracle(K, slot, f1, f2):
    """Triple loop over dense grids; free slot ``slot``, masked like the fast path."""
    spec = f1.spec
    h, hn = spec.spacing, spec.cell_volume
    x = spec.box_points((0,) * spec.dim, spec.shape).reshape(-1, spec.dim)
    a, b = f1.dense().ravel(), f2.dense().ravel()
    ia, ib = np.nonzero(a)[0], np.nonzero(b)[0]
    out = np.zeros(len(x))
    for t in range(len(x)):
        acc = 0.0
        for i in ia:
            for j in ib:
                if slot == 0:
                    z0, z1, z2 = x[t], x[i], x[j]
                elif slot == 1:  # f1 in slot 0, f2 in slot 2
                    z0, z1, z2 = x[i], x[t], x[j]
                else:  # f2 in slot 0, f1 in slot 1
                    z0, z1, z2 = x[j], x[i], x[t]
                if np.linalg.norm(z0 - z1) < h or np.linalg.norm(z0 - z2) < h:
                    continue
                acc += K(z0, z1, z2) * a[i] * b[j]
        out[t] = acc * hn * hn
    return out.reshape(spec.shape)


@pytest.fixture
def inputs():
    spec = GridSpec(1, 1.0, 1 / 8)
    rng = np.random.default_rng(4)
    return spec, bump(spec, (-0.5,), 0.3, rng), bump(spec, (0.375,), 0.3, rng)


@pytest.mark.parametrize("slot", [0, 1, 2])
def test_matches_loop_oracle(K1, inputs, slot):
    spec, f1, f2 = inputs
    full = spec.full_box()
    got = apply_T(K1, f1, f2, full) if slot == 0 else apply_partial_adjoint(K1, slot, f1, f2, full)
    np.testing.assert_allclose(got.dense(), _loop_oracle(K1, slot, f1, f2), rtol=1e-12, atol=1e-14)


def test_matches_loop_oracle_2d(K2):
    spec = GridSpec(2, 1.0, 1 / 4)
    rng = np.random.default_rng(5)
    f1, f2 = bump(spec, (-0.5, 0.0), 0.5, rng), bump(spec, (0.5, 0.25), 0.5, rng)
    got = apply_partial_adjoint(K2, 2, f1, f2, spec.full_box())
    np.testing.assert_allclose(got.dense(), _loop_oracle(K2, 2, f1, f2), rtol=1e-12, atol=1e-14)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**20))
def test_discrete_adjoint_identities(seed):
    from hpfact.kernels import builtin_riesz_kernel

    K = builtin_riesz_kernel(1, 1)
    spec = GridSpec(1, 2.0, 1 / 8)
    rng = np.random.default_rng(seed)
    c = rng.permutation([-1.2, 0.0, 1.2])
    phi, f1, f2 = (bump(spec, (float(ci),), 0.5, rng) for ci in c)
    lam = trilinear_form(K, phi, f1, f2)
    vals = [
        inner(apply_T(K, f1, f2, phi.support), phi),
        inner(apply_partial_adjoint(K, 1, phi, f2, f1.support), f1),
        inner(apply_partial_adjoint(K, 2, f1, phi, f2.support), f2),
    ]
    for v in vals:
        assert abs(v - lam) <= 1e-10 * max(abs(lam), 1e-300)


def test_evaluate_at_agrees_on_grid_points(K1, inputs):
    spec, f1, f2 = inputs
    grid_vals = apply_partial_adjoint(K1, 2, f1, f2, spec.full_box())
    pts = spec.box_points((0,), spec.shape)[[1, 4, 15]]
    direct = evaluate_at(K1, 2, f1, f2, pts)
    np.testing.assert_allclose(direct, grid_vals.dense()[[1, 4, 15]], rtol=1e-13, atol=1e-15)


def test_thread_count_never_changes_bits(K1):
    spec = GridSpec(1, 4.0, 1 / 64)
    rng = np.random.default_rng(0)
    f1, f2 = bump(spec, (-2.0,), 1.0, rng), bump(spec, (2.0,), 1.0, rng)
    a = apply_T(K1, f1, f2, spec.full_box(), threads=1)
    b = apply_T(K1, f1, f2, spec.full_box(), threads=4)
    assert np.array_equal(a.samples, b.samples)


def test_set_threads_validates():
    old = operators.get_threads()
    operators.set_threads(3)
    assert operators.get_threads() == 3
    operators.set_threads(old)
    with pytest.raises(ValueError):
        operators.set_threads(0)


def test_mixed_grids_raise(K1):
    a = bump(GridSpec(1, 1.0, 1 / 8), (0.0,), 0.5, np.random.default_rng(0))
    b = bump(GridSpec(1, 1.0, 1 / 16), (0.0,), 0.5, np.random.default_rng(0))
    with pytest.raises(ValueError):
        apply_T(K1, a, b)


def test_report_counts_skipped_cells(K1, inputs):
    spec, f1, f2 = inputs
    rep = {}
    apply_T(K1, f1, f2, spec.full_box(), report=rep)
    assert rep.get("skipped_cells", 0) > 0
