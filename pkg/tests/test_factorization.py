import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hpfact.atoms import AtomicDecomposition, atomic_quasinorm, validate_atom
from hpfact.factorization import (
    ExponentSystem,
    FactorTriple,
    FactorizationResult,
    approximate_atom,
    factorization_norm,
    factorization_record,
    pi_l,
    regrid_atom,
    save_factorization,
    select_N,
    uchiyama_factorize,
)
from hpfact.grid import Ball, GridFunction, GridSpec, integrate, integrate_abs, indicator, restrict_to_ball, scale
from hpfact.kernels import load_calibration
from hpfact.reference import make_atom, ramp_atom

from conftest import bump

P = 0.75
EXPS = ExponentSystem.balanced(P)


def test_exponent_identity_enforced():
    ExponentSystem(0.75, 2.0, 4.0, 12 / 7)  # 1/2 + 1/4 + 7/12 = 4/3
    with pytest.raises(ValueError):
        ExponentSystem(0.75, 2.0, 2.0, 2.0)
    with pytest.raises(ValueError):
        ExponentSystem(0.75, 0.9, 3.0, 3.0)
    assert EXPS.lip_alpha(1) == pytest.approx(1 / 3)


def test_select_N_examples():
    assert select_N(0.9, 0.75, 1, 0.8) == 1024
    assert select_N(100.0, 0.75, 1, 0.8) == 2
    with pytest.raises(ValueError):
        select_N(0.5, 0.5, 1, 1.0)


def test_pi_of_zero_is_zero(K1):
    spec = GridSpec(1, 2.0, 1 / 8)
    z = GridFunction.zeros(spec)
    h1 = indicator(spec, Ball((1.0,), 0.5))
    assert pi_l(K1, 2, z, h1, z).sup() == 0
    assert pi_l(K1, 1, z, z, h1).sup() == 0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**20), st.sampled_from([1, 2]))
def test_pi_has_zero_integral(seed, l):
    from hpfact.factorization import _pi_parts
    from hpfact.kernels import builtin_riesz_kernel

    K = builtin_riesz_kernel(1, 1)
    spec = GridSpec(1, 2.0, 1 / 16)
    rng = np.random.default_rng(seed)
    c = rng.permutation([-1.2, 0.0, 1.2])
    g, h1, h2 = (bump(spec, (float(ci),), 0.5, rng) for ci in c)
    first, second = _pi_parts(K, l, g, h1, h2)
    val = integrate(first - second)
    assert abs(val) <= 1e-9 * (integrate_abs(first) + integrate_abs(second))


def _den_oracle(K, g, other, x0, l):
    """Direct quadrature of the denominator with numpy broadcasting (n = 1)."""
    yg, vg = g.nonzero()
    yo, vo = other.nonzero()
    h = g.spec.spacing
    if l == 2:  # g in slot 0, other in slot 1, x0 in slot 2
        kv = K(yg[:, None, :], yo[None, :, :], np.asarray(x0)[None, None, :])
    else:  # g in slot 0, x0 in slot 1, other in slot 2
        kv = K(yg[:, None, :], np.asarray(x0)[None, None, :], yo[None, :, :])
    return float(np.sum(kv * vg[:, None] * vo[None, :])) * h * h


@pytest.mark.parametrize("l", [1, 2])
def test_approximation_construction(K1, l):
    a = ramp_atom(P, 1, 16)
    ap = approximate_atom(K1, a, EXPS, l, 16)
    t = ap.triple
    # geometry: g on B(16, 1), the other input on B(32, 1), h_l = a / den
    assert ap.balls[1].center == (16.0,)
    other = t.h1 if l == 2 else t.h2
    hl = t.h2 if l == 2 else t.h1
    assert integrate(other) == integrate(indicator(other.spec, Ball((32.0,), 1.0)))
    assert ap.denominator == pytest.approx(_den_oracle(K1, t.g, other, (0.0,), l), rel=1e-12)
    np.testing.assert_allclose((scale(ap.denominator, hl) - a.fn.embed(hl.spec)).sup(), 0, atol=1e-15)
    # the returned error is a - Pi_l
    direct = a.fn.embed(t.g.spec) - pi_l(K1, l, t.g, t.h1, t.h2)
    assert (direct - ap.error).sup() <= 1e-14 * ap.error.sup()
    # supported on the atom ball and the ball of g, mean zero
    rest = ap.error - restrict_to_ball(ap.error, ap.balls[0]) - restrict_to_ball(ap.error, ap.balls[1])
    assert rest.sup() == 0
    assert abs(integrate(ap.error)) <= 1e-9 * integrate_abs(ap.error)


def test_approximation_bounds_use_frozen_constants(K1):
    cal = load_calibration()["approximation"]
    for N in (8, 16):
        t = approximate_atom(K1, ramp_atom(P, 1, 16), EXPS, 2, N).triple
        assert t.norm_product <= cal["C_budget"] * N**2
        assert t.info["decay_ratio"] <= cal["C_decay"]


def test_error_halves_with_N(K1):
    sups = [approximate_atom(K1, ramp_atom(P, 1, 16), EXPS, 2, N).error.sup() for N in (16, 32)]
    target = 2 ** -K1.epsilon
    assert 0.5 * target <= sups[1] / sups[0] <= 2 * target


def test_non_homogeneous_kernel_is_rejected(K1):
    zero = K1.scaled(0.0).with_constants(C_hom=K1.C_hom)
    with pytest.raises(ValueError, match="homogeneous"):
        approximate_atom(zero, ramp_atom(P, 1, 16), EXPS, 2, 8)


def test_regrid_keeps_an_atom():
    a = make_atom(GridSpec(1, 2.0, 1 / 64), Ball((0.1,), 1.0), P, lambda x: np.sin(3 * x[..., 0]))
    b, factor, info = regrid_atom(a, 8)
    assert info["factor"] == 8
    assert validate_atom(b.fn, b.ball, P).valid
    # coefficient times coarse atom has the same integral against constants and
    # the same mass (block averages preserve integrals)
    assert integrate(scale(factor, b.fn)) == pytest.approx(integrate(a.fn), abs=1e-12)
    same, f1, _ = regrid_atom(a, 64)
    assert f1 == 1.0 and (same.fn.embed(a.spec) - a.fn).sup() == 0


def test_empty_input_gives_empty_result(K1):
    res = uchiyama_factorize(K1, 2, AtomicDecomposition([], P), EXPS, 8, 3)
    assert res.rounds == [] and res.error_norms == []
    assert factorization_norm(res) == 0.0


@pytest.fixture(scope="module")
def small_run():
    from hpfact.kernels import builtin_riesz_kernel

    K = builtin_riesz_kernel(1, 1)
    f = AtomicDecomposition([(1.0, ramp_atom(P, 1, 16))], P)
    return K, f, uchiyama_factorize(K, 2, f, EXPS, 16, 2, points_per_radius=16)


def test_iteration_contracts(small_run):
    K, f, res = small_run
    assert len(res.rounds) == 2 and len(res.rounds[0]) == 1
    assert res.error_norms[1] < res.error_norms[0]
    assert not res.non_contraction
    rows = res.decay_table()
    assert [r["round"] for r in rows] == [1, 2]
    assert rows[1]["num_triples"] == len(res.rounds[1])


def test_error_terms_are_two_bump_atoms(small_run):
    K, f, res = small_run
    for lam, a in res.final_terms:
        assert validate_atom(a.fn, a.ball, P).valid


def test_coefficient_summability(small_run):
    K, f, res = small_run
    total = sum(abs(t.lam) ** P for t in res.triples())
    rho = max(res.contraction_ratios[1:])
    # sum over rounds of sum |lam|^p <= (first-round budget) / (1 - rho)
    first = sum(abs(t.lam) ** P for t in res.rounds[0])
    assert total <= (first + res.error_norms[0] / (1 - rho)) * atomic_quasinorm(f) ** P


def test_stop_tolerance(K1):
    f = AtomicDecomposition([(1.0, ramp_atom(P, 1, 16))], P)
    res = uchiyama_factorize(K1, 2, f, EXPS, 16, 5, stop_tol=10.0, points_per_radius=16)
    assert len(res.rounds) == 1


def test_factorization_norm_homogeneity():
    spec = GridSpec(1, 2.0, 1 / 8)
    ball = Ball((0.0,), 1.0)
    one = scale(1 / integrate(indicator(spec, ball)) ** (1 / 2.25), indicator(spec, ball))
    t = FactorTriple(1.0, one, one, one, 2, EXPS)
    res = FactorizationResult([[t]], [0.0], EXPS, 8, 0.75, 2, 1.0)
    assert factorization_norm(res) == pytest.approx(1.0, rel=1e-12)
    t2 = FactorTriple(1.0, scale(3.0, one), one, one, 2, EXPS)
    res2 = FactorizationResult([[t2]], [0.0], EXPS, 8, 0.75, 2, 1.0)
    assert factorization_norm(res2) == pytest.approx(3.0, rel=1e-12)


def test_record_is_json(small_run, tmp_path):
    K, f, res = small_run
    save_factorization(tmp_path / "r.json", res)
    rec = json.loads((tmp_path / "r.json").read_text())
    assert rec["format"] == "hpfact.factorization"
    assert rec["error_norms"] == res.error_norms
    assert len(rec["rounds"][1]) == len(res.rounds[1])
    assert rec == json.loads(json.dumps(factorization_record(res)))


def test_two_dimensional_smoke(K2):
    a = ramp_atom(P, 2, 4)
    ap = approximate_atom(K2, a, EXPS, 2, 8)
    assert ap.error.sup() < a.fn.sup()
    assert abs(integrate(ap.error)) <= 1e-9 * integrate_abs(ap.error)
