"""Acceptance criteria 1-9.  Each test prints exactly one PASS/FAIL line.

Criteria 1-8 are computed by ``run_criteria`` so criterion 9 can replay
them and compare serialized outputs byte for byte.
"""

import json
import math
import time
from collections import defaultdict

import numpy as np
import pytest

from hpfact import operators
from hpfact.atoms import AtomicDecomposition, atomic_quasinorm
from hpfact.experiments import (
    approximation_decay,
    commutator_family,
    commutator_grid,
    duality_corpus,
    kernel_checks,
    single_atom_factorization,
    two_bump_corpus_run,
)
from hpfact.factorization import ExponentSystem, approximate_atom, factorization_norm, uchiyama_factorize
from hpfact.kernels import builtin_riesz_kernel, load_calibration
from hpfact.reference import lip_family, ramp_atom

P = 0.75

# pinned tolerances
ATOM_TOL = 1e-8
MEAN_TOL = 1e-10
ENVELOPE_SPREAD = 4.0
DECAY_BAND = (0.5, 2.0)
RHO_VARIATION = 0.25
C_EQ_CAP = 100.0
DUALITY_TOL = 1e-10
DOUBLING_SLACK = 1.5
LIMITS = {1: 10, 2: 10, 3: 60, 4: 300, 6: 30, 7: 300}


def _timed(fn, *a, **kw):
    t = time.perf_counter()
    out = fn(*a, **kw)
    return out, time.perf_counter() - t


def run_criteria(threads: int = 1) -> dict:
    """Raw outputs of criteria 1-8 (deterministic content) plus wall times."""
    operators.set_threads(threads)
    K = builtin_riesz_kernel(1, 1)
    out, secs = {}, {}
    out[1], secs[1] = _timed(two_bump_corpus_run)
    out[2], secs[2] = out[1], secs[1]
    out[3], secs[3] = _timed(approximation_decay, K, 2, (16, 32), P)
    (f, res), secs[4] = _timed(single_atom_factorization, K, 2, 32, 3, P)
    out[4] = {
        "error_norms": res.error_norms,
        "initial": res.initial_norm_p,
        "triples": [len(r) for r in res.rounds],
        "lams": [t.lam for t in res.triples()],
    }
    out[5] = {"factorization_norm": factorization_norm(res), "quasinorm": atomic_quasinorm(f)}
    spec = commutator_grid(1)
    alpha = ExponentSystem.balanced(P).lip_alpha(1)

    def duality():
        return {b.name: duality_corpus(K, b, 50, seed=0) for b in lip_family(spec, alpha)}

    out[6], secs[6] = _timed(duality)
    out[7], secs[7] = _timed(commutator_family, K, 2, P, 256, 0)
    out[8], secs[8] = _timed(kernel_checks, K, (16, 32), 10_000, 0, 2)
    operators.set_threads(1)
    return {"out": out, "secs": secs}


def serialize(out: dict) -> bytes:
    return json.dumps({str(k): v for k, v in out.items()}, sort_keys=True).encode()


@pytest.fixture(scope="module")
def first():
    return run_criteria(1)


@pytest.fixture(scope="module")
def cal():
    return load_calibration()


def report(capsys, k, ok, text):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {k}: {text}")


def test_criterion_1_atom_validity(first, capsys):
    recs = first["out"][1]
    t = first["secs"][1]
    valid = all(r["all_valid"] for r in recs)
    mean = max(r["max_mean_slack"] for r in recs)
    ok = len(recs) == 50 and valid and mean <= MEAN_TOL and t < LIMITS[1]
    report(capsys, 1, ok, f"{len(recs)} cases, all atoms valid at tol {ATOM_TOL:g}: {valid}; "
           f"max mean slack {mean:.2e} (<= {MEAN_TOL:g}); {t:.2f}s (< {LIMITS[1]}s)")
    assert ok


def test_criterion_2_two_bump_envelope(first, cal, capsys):
    recs = first["out"][2]
    C_cal = cal["two_bump"]["C_cal"]
    groups = defaultdict(list)
    for i, r in enumerate(recs[:48]):
        groups[(r["p"], i % 4)].append(r["stated_ratio"])
    spread = max(max(v) / min(v) for v in groups.values())
    worst = max(r["stated_ratio"] for r in recs)
    t = first["secs"][2]
    ok = spread < ENVELOPE_SPREAD and worst <= C_cal and t < LIMITS[2]
    report(capsys, 2, ok, f"max spread across N {spread:.3f}x (< {ENVELOPE_SPREAD:g}x); "
           f"max ratio {worst:.3f} <= C_cal {C_cal:.3f}; {t:.2f}s")
    assert ok


def test_criterion_3_approximation_decay(first, capsys):
    K = builtin_riesz_kernel(1, 1)
    r16, r32 = first["out"][3]
    ratio = r32["sup_error"] / r16["sup_error"]
    lo, hi = DECAY_BAND[0] * 2 ** -K.epsilon, DECAY_BAND[1] * 2 ** -K.epsilon
    t = first["secs"][3]
    ok = lo <= ratio <= hi and r16["support_in_two_balls"] and r32["support_in_two_balls"] and t < LIMITS[3]
    report(capsys, 3, ok, f"halving ratio 16->32 = {ratio:.4f} in [{lo:.4f}, {hi:.4f}]; {t:.2f}s")
    assert ok


def test_criterion_4_geometric_decay(first, capsys):
    o = first["out"][4]
    e = o["error_norms"]
    rho = [b / a for a, b in zip(e, e[1:])]
    variation = abs(rho[1] / rho[0] - 1)
    t = first["secs"][4]
    decreasing = all(b < a for a, b in zip(e, e[1:]))
    ok = len(e) == 3 and decreasing and max(rho) < 1 and variation <= RHO_VARIATION and t < LIMITS[4]
    report(capsys, 4, ok, f"errors {[round(x, 4) for x in e]}, rho {[round(x, 4) for x in rho]} (< 1), "
           f"variation {variation:.1%} (<= {RHO_VARIATION:.0%}); round-1 error / ||f||^p = "
           f"{e[0] / o['initial']:.3f} (informational); {t:.1f}s")
    assert ok


def test_criterion_5_norm_equivalence(first, cal, capsys):
    o = first["out"][5]
    C_eq = cal["factorization"]["C_eq"]
    ratio = o["factorization_norm"] / o["quasinorm"]
    inside = 1 / C_eq <= ratio <= C_eq
    ok = inside and C_eq <= C_EQ_CAP
    report(capsys, 5, ok, f"factorization_norm / quasinorm = {ratio:.1f} in [1/C_eq, C_eq]: {inside}; "
           f"frozen C_eq = {C_eq:.1f} (cap {C_EQ_CAP:g})")
    assert ok


def test_criterion_6_exact_duality(first, capsys):
    recs = first["out"][6]
    worst = max(r["rel_err"] for v in recs.values() for r in v)
    n = sum(len(v) for v in recs.values())
    t = first["secs"][6]
    ok = worst <= DUALITY_TOL and t < LIMITS[6]
    report(capsys, 6, ok, f"{n} triples ({len(recs)} symbols x 50), max rel_err {worst:.2e} (<= {DUALITY_TOL:g}); {t:.2f}s")
    assert ok


def test_criterion_7_lip_comparison(first, cal, capsys):
    recs = first["out"][7]
    C = cal["commutator"]["C_eq_lip"]
    ratios = [r["ratio"] for r in recs]
    t = first["secs"][7]
    ok = all(1 / C <= x <= C for x in ratios) and t < LIMITS[7]
    report(capsys, 7, ok, f"ratios {[round(x, 4) for x in ratios]} in [{1 / C:.4f}, {C:.4f}]; {t:.2f}s")
    assert ok


def test_criterion_8_kernel_certification(first, capsys):
    recs = first["out"][8]
    dbl = [r for r in recs if r["name"] == "homogeneity_doubling"]
    ok = all(r["passed"] for r in recs) and len(dbl) == 1
    target = 0.25
    report(capsys, 8, ok, "; ".join(f"{r['name']}={r['measured']:.4g}{'' if r['passed'] else ' FAIL'}" for r in recs)
           + f"; doubling band [{target / DOUBLING_SLACK:.4f}, {target * DOUBLING_SLACK:.4f}]")
    assert ok


def test_criterion_9_determinism(first, capsys):
    ref = serialize(first["out"])
    again = serialize(run_criteria(1)["out"])
    four = serialize(run_criteria(4)["out"])
    ok = ref == again == four
    report(capsys, 9, ok, f"criteria 1-8 outputs ({len(ref)} bytes) identical across two runs: {ref == again}; "
           f"threads 1 vs 4: {ref == four}")
    assert ok


def test_two_dimensional_smoke(capsys):
    K = builtin_riesz_kernel(2, 1)
    exps = ExponentSystem.balanced(P)
    a = ramp_atom(P, 2, 6)
    t0 = time.perf_counter()
    ap = approximate_atom(K, a, exps, 2, 8)
    res = uchiyama_factorize(K, 2, AtomicDecomposition([(1.0, a)], P), exps, 8, 1, points_per_radius=4)
    checks = kernel_checks(K, (8, 16), 4000, 0, 2)
    t = time.perf_counter() - t0
    mean = abs(float(np.sum(ap.error.samples))) / float(np.sum(np.abs(ap.error.samples)))
    ok = all(c["passed"] for c in checks) and mean <= 1e-9 and math.isfinite(res.error_norms[0])
    report(capsys, "n=2 smoke", ok, f"kernel checks pass: {all(c['passed'] for c in checks)}; "
           f"error mean ratio {mean:.1e}; one-round error^p {res.error_norms[0]:.3f}; {t:.1f}s")
    assert ok
