
import numpy as np
import pytest

from hpfact.kernels import (
    SeparatedConfig,
    available_kernels,
    builtin_riesz_kernel,
    check_homogeneity,
    check_size_condition,
    check_smoothness_condition,
    get_kernel,
    load_calibration,
    pair_distance_sum,
    register_kernel,
)


def test_riesz_closed_form(K1):
    # (y0 - y1) / ((y0-y1)^2 + (y0-y2)^2)^(3/2) at (3, 0, -1): 3 / 25^(3/2)
    assert K1((3.0,), (0.0,), (-1.0,)) == pytest.approx(3 / 125, rel=1e-15)


def test_riesz_homogeneous_and_translation_invariant(K2):
    rng = np.random.default_rng(1)
    y = rng.normal(size=(3, 50, 2))
    base = K2(y[0], y[1], y[2])
    np.testing.assert_allclose(K2(2 * y[0], 2 * y[1], 2 * y[2]), base / 16, rtol=1e-12)
    s = np.array([0.7, -1.1])
    np.testing.assert_allclose(K2(y[0] + s, y[1] + s, y[2] + s), base, rtol=1e-10)


def test_constants_come_from_frozen_calibration():
    cal = load_calibration()
    K = builtin_riesz_kernel(1, 1)
    assert K.A == cal["kernels"]["riesz_n1_j1"]["A"]
    assert K.C_hom == cal["kernels"]["riesz_n1_j1"]["C_hom"]
    assert K.epsilon == 0.75
    assert builtin_riesz_kernel(2, 2).epsilon == 0.8


def test_bad_riesz_parameters():
    with pytest.raises(ValueError):
        builtin_riesz_kernel(1, 2)
    with pytest.raises(ValueError):
        builtin_riesz_kernel(3, 1)


def test_registry_roundtrip():
    register_kernel("test_scaled_riesz", lambda n=1: builtin_riesz_kernel(n).scaled(2.0))
    K = get_kernel("test_scaled_riesz")
    assert "test_scaled_riesz" in available_kernels()
    assert K((3.0,), (0.0,), (-1.0,)) == pytest.approx(6 / 125)
    with pytest.raises(KeyError):
        get_kernel("nope")


def test_pair_distance_sum():
    assert pair_distance_sum(np.array([0.0]), np.array([1.0]), np.array([3.0])) == pytest.approx(12.0)


@pytest.mark.parametrize("dim", [1, 2])
def test_builtin_kernel_passes_certificates(dim):
    K = builtin_riesz_kernel(dim, 1)
    assert check_size_condition(K, 4000, 0).passed
    assert check_smoothness_condition(K, 4000, 0).passed
    for N in (16, 32):
        assert check_homogeneity(K, SeparatedConfig.for_slot(2, N, dim=dim), 4000, 0).passed


def test_scaled_kernel_fails_size_check(K1):
    rep = check_size_condition(K1.scaled(20.0).with_constants(A=K1.A), 4000, 0)
    assert not rep.passed


def test_checks_are_seeded(K1):
    a = check_smoothness_condition(K1, 2000, 7)
    b = check_smoothness_condition(K1, 2000, 7)
    assert a.measured == b.measured and a.seed == 7


def test_homogeneity_scales_like_N_to_minus_2n(K1):
    m = [check_homogeneity(K1, SeparatedConfig.for_slot(2, N), 4000, 0).measured / N**2 for N in (16, 32)]
    assert 0.25 / 1.5 <= m[1] / m[0] <= 0.25 * 1.5


def test_separated_config_rejects_bad_geometry():
    with pytest.raises(ValueError):
        SeparatedConfig((0.0,), (1.0,), (20.0,), 1.0, 10)
    with pytest.raises(ValueError):
        SeparatedConfig((0.0,), (10.0,), (100.0,), 1.0, 10)
