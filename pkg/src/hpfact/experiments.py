"""Reference experiments: each returns plain records so callers can tabulate or assert."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .atoms import TwoBumpFunction, atomic_quasinorm, quasinorm_p, two_bump_decompose
from .commutator import duality_pairing_check, estimate_commutator_norm, LipFunction
from .factorization import (
    ExponentSystem,
    approximate_atom,
    pi_l,
    uchiyama_factorize,
)
from .grid import Ball, GridFunction, GridSpec, indicator, pointwise_multiply
from .kernels import (
    KernelSpec,
    SeparatedConfig,
    check_homogeneity,
    check_size_condition,
    check_smoothness_condition,
)
from .reference import lip_family, ramp_atom, single_atom_decomposition, two_bump_case, two_bump_corpus

__all__ = [
    "kernel_checks",
    "two_bump_corpus_run",
    "envelope_across_N",
    "approximation_decay",
    "single_atom_factorization",
    "commutator_family",
    "duality_corpus",
    "pi_boundedness",
    "random_separated_triple",
]


def kernel_checks(K: KernelSpec, Ns: Sequence[int] = (16, 32), samples: int = 10_000, seed: int = 0, slot: int = 2) -> list[dict]:
    """Size, smoothness and homogeneity certificates plus the doubling ratio."""
    recs = [check_size_condition(K, samples, seed).as_record(), check_smoothness_condition(K, samples, seed).as_record()]
    mins = {}
    for N in Ns:
        rep = check_homogeneity(K, SeparatedConfig.for_slot(slot, N, 1.0, dim=K.dim), samples, seed)
        mins[N] = rep.measured / N ** (2 * K.dim)
        recs.append(rep.as_record())
    Ns = list(Ns)
    target = 2.0 ** (-2 * K.dim)
    for a, b in zip(Ns, Ns[1:]):
        if b == 2 * a:
            ratio = mins[b] / mins[a]
            recs.append(
                {
                    "name": "homogeneity_doubling",
                    "measured": ratio,
                    "passed": bool(target / 1.5 <= ratio <= 1.5 * target),
                    "sample_count": samples,
                    "seed": seed,
                    "N": a,
                }
            )
    return recs


def two_bump_corpus_run(seed: int = 0) -> list[dict]:
    out = []
    for tb, p in two_bump_corpus(seed):
        d = two_bump_decompose(tb, p)
        reps = d.validate(1e-8)
        rec = d.reconstruct(tb.fn.spec)
        env = d.envelopes()
        out.append(
            {
                "N": round(tb.N),
                "p": p,
                "r": tb.r,
                "terms": len(d),
                "J0": d.J0,
                "all_valid": all(reps),
                "max_mean_slack": max(r.mean_slack for r in reps),
                "max_size_slack": max(r.size_slack for r in reps),
                "reconstruction_err": (rec - tb.fn).sup() / max(tb.C1, tb.C2),
                "alpha_mid_gap": abs(d.alpha_mid[0] - d.alpha_mid[1]) / max(abs(d.alpha_mid[0]), 1e-300),
                "quasinorm_p": quasinorm_p(d),
                "stated_ratio": quasinorm_p(d) / env["stated"],
                "homogeneous_ratio": quasinorm_p(d) / env["homogeneous"],
                "intermediate_ratio": quasinorm_p(d) / env["intermediate"],
                "max_coefficient_ratio": float(np.nanmax(d.coefficient_ratios())),
            }
        )
    return out


def envelope_across_N(p: float, shape: str = "indicator", Ns: Sequence[int] = (8, 16, 32, 64)) -> list[float]:
    """quasinorm^p / (N^{n(1-p)} log2 N (C1|B1| + C2|B2|)) for one shape family."""
    vals = []
    for N in Ns:
        d = two_bump_decompose(two_bump_case(N, shape), p)
        vals.append(quasinorm_p(d) / d.envelopes()["stated"])
    return vals


def approximation_decay(K: KernelSpec, l: int = 2, Ns: Sequence[int] = (16, 32), p: float = 0.75) -> list[dict]:
    exps = ExponentSystem.balanced(p)
    a = ramp_atom(p, K.dim)
    out = []
    for N in Ns:
        ap = approximate_atom(K, a, exps, l, N)
        info = ap.triple.info
        supp_ok = (ap.error - _restrict_two(ap.error, ap.balls)).sup() == 0
        out.append(
            {
                "N": N,
                "sup_error": ap.error.sup(),
                "W1_sup": info["W1_sup"],
                "W2_sup": info["W2_sup"],
                "budget_ratio": info["budget_ratio"],
                "decay_ratio": info["decay_ratio"],
                "mean_ratio": abs(info["error_mean"]) / info["error_l1"],
                "support_in_two_balls": bool(supp_ok),
            }
        )
    return out


def _restrict_two(f: GridFunction, balls):
    from .grid import restrict_to_ball

    return restrict_to_ball(f, balls[0]) + restrict_to_ball(f, balls[1])


def single_atom_factorization(K: KernelSpec, l: int = 2, N: int = 32, rounds: int = 3, p: float = 0.75):
    """Criterion run: one ramp atom on B(0,1).  Returns ``(f, result)``."""
    f = single_atom_decomposition(p, K.dim)
    res = uchiyama_factorize(K, l, f, ExponentSystem.balanced(p), N, rounds)
    return f, res


def commutator_grid(dim: int = 1) -> GridSpec:
    return GridSpec(dim, 2.0, 1 / 64) if dim == 1 else GridSpec(dim, 2.0, 1 / 8)


def commutator_family(
    K: KernelSpec, l: int = 2, p: float = 0.75, trials: int = 256, seed: int = 0, spec: GridSpec | None = None
) -> list[dict]:
    exps = ExponentSystem.balanced(p)
    spec = spec or commutator_grid(K.dim)
    alpha = exps.lip_alpha(K.dim)
    out = []
    for b in lip_family(spec, alpha):
        est = estimate_commutator_norm(K, l, b, exps, trials, seed)
        out.append({"b": b.name, "seminorm_est": b.seminorm_est, "commutator_estimate": est, "ratio": est / b.seminorm_est})
    return out


def random_separated_triple(spec: GridSpec, rng: np.random.Generator):
    """Three disjoint random bumps ``(g, h1, h2)`` on ``spec``."""
    n, L, h = spec.dim, spec.half_width, spec.spacing
    while True:
        r = rng.uniform(3 * h, L / 6)
        c = rng.uniform(-L + r, L - r, size=(3, n))
        d = [np.linalg.norm(c[i] - c[j]) for i, j in ((0, 1), (0, 2), (1, 2))]
        if min(d) > 2 * r + 2 * h:
            break
    out = []
    for k in range(3):
        chi = indicator(spec, Ball(tuple(c[k]), r))
        w = rng.normal(size=n + 1)
        prof = GridFunction.from_callable(
            spec, lambda x, w=w, c0=c[k]: w[0] + (x - c0) @ w[1:] / r, chi.support
        )
        out.append(pointwise_multiply(chi, prof))
    return out


def duality_corpus(K: KernelSpec, b: LipFunction, count: int = 50, seed: int = 0, slots=(1, 2)) -> list[dict]:
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        g, h1, h2 = random_separated_triple(b.fn.spec, rng)
        l = slots[k % len(slots)]
        rep = duality_pairing_check(K, l, b, g, h1, h2)
        out.append({"index": k, "slot": l, "lhs": rep.lhs, "rhs": rep.rhs, "rel_err": rep.rel_err})
    return out


def pi_boundedness(K: KernelSpec, l: int = 2, p: float = 0.75, count: int = 20, seed: int = 0, N: int = 16) -> list[float]:
    """quasinorm of the two-bump split of ``Pi_l`` over ``||g|| ||h1|| ||h2||``.

    ``g`` and the free input are indicators at separation ``N r`` as in the
    approximation, ``h_l`` a random mean-zero bump, all on a grid of 16 points
    per radius.
    """
    from .reference import make_atom

    exps = ExponentSystem.balanced(p)
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        spec = GridSpec(K.dim, 2.0, 1 / 16)
        w = rng.normal(size=3)
        a = make_atom(spec, Ball((0.0,) * K.dim, 1.0), p, lambda x, w=w: np.sin(w[0] * 3 * x[..., 0] + w[1]) + w[2] * x[..., 0])
        ap = approximate_atom(K, a, exps, l, N)
        t = ap.triple
        P = pi_l(K, l, t.g, t.h1, t.h2)
        tb = TwoBumpFunction.from_function(P, *ap.balls)
        d = two_bump_decompose(tb, p)
        out.append(atomic_quasinorm(d) / t.norm_product)
    return out
