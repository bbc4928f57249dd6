"""Commutators ``[b, T]_l``, their duality with ``Pi_l``, and Lip_alpha comparisons."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .atoms import AtomicDecomposition, lip_seminorm
from .factorization import ExponentSystem, FactorizationResult, pi_l
from .grid import (
    Ball,
    GridError,
    GridFunction,
    GridSpec,
    indicator,
    inner,
    lp_norm,
    pointwise_multiply,
    scale,
)
from .kernels import KernelSpec
from .operators import apply_T

__all__ = [
    "LipFunction",
    "DualityReport",
    "apply_commutator",
    "duality_pairing_check",
    "estimate_commutator_norm",
    "lip_lower_bound_via_factorization",
    "pairing_identity",
    "trial_pair",
]


@dataclass
class LipFunction:
    """A Lip_alpha symbol ``b``: grid samples, exponent and seminorm estimate.

    ``func`` (vectorized over points ``(..., dim)``) lets ``b`` be sampled on
    grids other than ``fn.spec``; without it only ``fn.spec`` is usable.
    """

    fn: GridFunction
    alpha: float
    seminorm_est: float
    func: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    name: str = "b"

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if not math.isfinite(self.seminorm_est):
            raise ValueError("seminorm estimate must be finite")

    @classmethod
    def from_callable(
        cls,
        func: Callable[[np.ndarray], np.ndarray],
        spec: GridSpec,
        alpha: float,
        name: str = "b",
        sample_budget: int = 4_000_000,
    ) -> "LipFunction":
        fn = GridFunction.from_callable(spec, func)
        return cls(fn, alpha, lip_seminorm(fn, alpha, sample_budget), func, name)

    def check_exponents(self, exps: ExponentSystem, dim: int) -> None:
        want = exps.lip_alpha(dim)
        if abs(self.alpha - want) > 1e-12:
            raise ValueError(f"alpha = {self.alpha} but n(1/p - 1) = {want} for p = {exps.p}")

    def on(self, spec: GridSpec, box) -> GridFunction:
        """``b`` on an index box of ``spec``."""
        if self.func is not None:
            return GridFunction.from_callable(spec, self.func, box)
        if spec != self.fn.spec:
            raise GridError("b has no callable form and lives on another grid")
        return GridFunction(spec, self.fn.box_values(*box), box[0])

    def times(self, f: GridFunction) -> GridFunction:
        if f.is_empty_box:
            return f
        return pointwise_multiply(self.on(f.spec, f.support), f)

    def scaled(self, c: float) -> "LipFunction":
        func = None if self.func is None else (lambda x, _f=self.func: c * _f(x))
        return LipFunction(scale(c, self.fn), self.alpha, abs(c) * self.seminorm_est, func, f"{c:g}*{self.name}")

    def shifted(self, c: float) -> "LipFunction":
        """``b - c``; same seminorm, same commutator."""
        if c == 0:
            return self
        func = None if self.func is None else (lambda x, _f=self.func: _f(x) - c)
        fn = GridFunction(self.fn.spec, self.fn.samples - c, self.fn.lo)
        return LipFunction(fn, self.alpha, self.seminorm_est, func, f"{self.name}-{c:g}")


def apply_commutator(
    K: KernelSpec, l: int, b: LipFunction, f1: GridFunction, f2: GridFunction, eval_support=None, threads=None
) -> GridFunction:
    """``T(f1, b f2) - b T(f1, f2)`` for ``l = 2``; ``T(b f1, f2) - b T(f1, f2)`` for ``l = 1``."""
    if f1.spec != f2.spec:
        raise GridError("f1 and f2 live on different grids")
    if l == 2:
        first = apply_T(K, f1, b.times(f2), eval_support, threads)
    elif l == 1:
        first = apply_T(K, b.times(f1), f2, eval_support, threads)
    else:
        raise ValueError(f"slot must be 1 or 2, got {l}")
    plain = apply_T(K, f1, f2, eval_support, threads)
    if plain.is_empty_box:
        return first
    return first - pointwise_multiply(b.on(plain.spec, plain.support), plain)


@dataclass(frozen=True)
class DualityReport:
    lhs: float
    rhs: float
    rel_err: float
    shift: float = 0.0


def duality_pairing_check(
    K: KernelSpec,
    l: int,
    b: LipFunction,
    g: GridFunction,
    h1: GridFunction,
    h2: GridFunction,
    threads=None,
    center: bool = True,
) -> DualityReport:
    """Compare ``<b, Pi_l(g, h1, h2)>`` with ``<g, [b, T]_l(h1, h2)>``.

    Both sides are unchanged when a constant is subtracted from ``b`` (Pi_l
    has zero integral, commutators kill constants).  With ``center`` the
    midrange of ``b`` over the three supports is removed first, which keeps
    a nearly constant ``b`` from turning the pairing into pure cancellation.
    """
    P = pi_l(K, l, g, h1, h2, threads)
    c = 0.0
    if center:
        vals = [b.on(f.spec, f.support).samples[f.samples != 0] for f in (g, h1, h2) if not f.is_empty_box]
        vals = np.concatenate([v.ravel() for v in vals]) if vals else np.zeros(0)
        if vals.size:
            c = 0.5 * (float(vals.max()) + float(vals.min()))
        b = b.shifted(c)
    lhs = inner(b.on(P.spec, P.support), P) if not P.is_empty_box else 0.0
    if g.is_empty_box:
        rhs = 0.0
    else:
        rhs = inner(g, apply_commutator(K, l, b, h1, h2, eval_support=g.support, threads=threads))
    scale_ = max(abs(lhs), abs(rhs))
    return DualityReport(lhs, rhs, abs(lhs - rhs) / scale_ if scale_ > 0 else 0.0, c)


# -- commutator norm estimate ----------------------------------------------------------
def trial_pair(spec: GridSpec, seed: int, index: int):
    """Deterministic bump pair number ``index`` of the seeded family.

    Returns ``(f1, f2, eval_box)``.  Radii are log-uniform between 2h and
    L/6; separations are 2.5 to 6 radii; shapes are indicators or signed
    half-ball bumps.
    """
    rng = np.random.default_rng([seed, index])
    n, h, L = spec.dim, spec.spacing, spec.half_width
    rmin, rmax = 2.0 * h, max(2.0 * h, L / 6)
    r = float(math.exp(rng.uniform(math.log(rmin), math.log(rmax))))
    sep = float(rng.uniform(2.5, 6.0)) * r
    u = rng.normal(size=n)
    u /= np.linalg.norm(u)
    room = L - r - 1e-9
    for _ in range(64):
        c1 = np.asarray(spec.origin) + rng.uniform(-room, room, size=n)
        c2 = c1 + sep * u
        if np.all(np.abs(c2 - np.asarray(spec.origin)) <= room):
            break
    else:
        c2 = c1 - sep * u
    funcs = []
    for c in (c1, c2):
        ball = Ball(tuple(c), r)
        chi = indicator(spec, ball)
        if rng.uniform() < 0.5:
            funcs.append(chi)
        else:
            d = rng.normal(size=n)
            sgn = GridFunction.from_callable(
                spec, lambda x, c=c, d=d: np.sign(np.sum((x - c) * d, axis=-1)), chi.support
            )
            funcs.append(pointwise_multiply(chi, sgn))
    lo = [min(a, b) for a, b in zip(funcs[0].lo, funcs[1].lo)]
    hi = [max(a, b) for a, b in zip(funcs[0].hi, funcs[1].hi)]
    pad = [hh - ll for ll, hh in zip(lo, hi)]
    box = (
        tuple(max(0, l - q) for l, q in zip(lo, pad)),
        tuple(min(s, hh + q) for s, hh, q in zip(spec.shape, hi, pad)),
    )
    return funcs[0], funcs[1], box


def estimate_commutator_norm(
    K: KernelSpec,
    l: int,
    b: LipFunction,
    exps: ExponentSystem,
    trial_count: int = 64,
    seed: int = 0,
    threads=None,
    return_trials: bool = False,
):
    """Max over the seeded trial family of ``||[b,T]_l(f1,f2)||_{q'} / (||f1||_{r1} ||f2||_{r2})``.

    The output norm is taken over an evaluation window around the pair (the
    tail is dropped), so the value is a lower estimate of the operator norm.
    """
    if trial_count < 1:
        raise ValueError("trial_count must be >= 1")
    b.check_exponents(exps, b.fn.spec.dim)
    qd = exps.q_dual
    best = 0.0
    ratios = []
    for k in range(trial_count):
        f1, f2, box = trial_pair(b.fn.spec, seed, k)
        out = apply_commutator(K, l, b, f1, f2, eval_support=box, threads=threads)
        ratio = lp_norm(out, qd) / (lp_norm(f1, exps.r1) * lp_norm(f2, exps.r2))
        ratios.append(ratio)
        best = max(best, ratio)
    return (best, ratios) if return_trials else best


# -- factorization side ------------------------------------------------------------------
def lip_lower_bound_via_factorization(b: LipFunction, res: FactorizationResult, K: KernelSpec, threads=None) -> dict:
    """Pairing ``<b, sum lam Pi_l>`` and its Hoelder chain bound.

    The chain is ``sum |lam| ||g||_q ||[b,T]_l(h1, h2)||_{q'}`` with the
    commutator norm taken on ``supp g``, which is all the pairing sees.
    """
    e = res.exponents
    pairing = 0.0
    chain = 0.0
    for t in res.triples():
        P = pi_l(K, t.slot, t.g, t.h1, t.h2, threads)
        pairing += t.lam * inner(b.on(P.spec, P.support), P)
        com = apply_commutator(K, t.slot, b, t.h1, t.h2, eval_support=t.g.support, threads=threads)
        chain += abs(t.lam) * lp_norm(t.g, e.q) * lp_norm(com, e.q_dual)
    return {"pairing": abs(pairing), "signed_pairing": pairing, "chain_bound": chain, "holds": abs(pairing) <= chain + 1e-9}


def _pair_atom(b: LipFunction, coef: float, fn: GridFunction) -> float:
    if coef == 0 or fn.is_empty_box:
        return 0.0
    return coef * inner(b.on(fn.spec, fn.support), fn)


def pairing_identity(
    b: LipFunction, f: AtomicDecomposition, res: FactorizationResult, K: KernelSpec, threads=None
) -> dict:
    """Split ``<b, f>`` into the Pi_l series, the final error and regridding defects.

    ``<b, f> = sum lam <b, Pi> + <b, E_M> + sum defects``, where each defect is
    the change in ``<b, atom>`` caused by coarsening that atom.  The identity is
    exact up to roundoff; ``discrepancy`` measures it.
    """
    direct = sum(_pair_atom(b, lam, a.fn) for lam, a in f.terms)
    series = 0.0
    defects = 0.0
    magnitude = 0.0
    for t in res.triples():
        P = pi_l(K, t.slot, t.g, t.h1, t.h2, threads)
        term = t.lam * inner(b.on(P.spec, P.support), P)
        series += term
        magnitude += abs(term)
        if t.fine_atom is not None:
            defects += _pair_atom(b, t.fine_coef, t.fine_atom.fn) - _pair_atom(b, t.lam, t.atom.fn)
    tail = sum(_pair_atom(b, c, a.fn) for c, a in res.final_terms)
    total = series + tail + defects
    magnitude += abs(tail) + abs(defects) + abs(direct)
    return {
        "direct": direct,
        "series": series,
        "final_error": tail,
        "defects": defects,
        "discrepancy": abs(direct - total),
        "relative_discrepancy": abs(direct - total) / magnitude if magnitude > 0 else 0.0,
        "truncation_gap": abs(direct - series),
    }
