"""Multiplication operators Pi_l, atom approximation and the Uchiyama iteration."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .atoms import (
    Atom,
    AtomicDecomposition,
    TwoBumpFunction,
    check_p,
    quasinorm_p,
    smallest_integer_above_log2,
    two_bump_decompose,
)
from .grid import (
    Ball,
    GridError,
    GridFunction,
    block_average,
    coarse_spec,
    indicator,
    integrate,
    integrate_abs,
    lp_norm,
    pointwise_multiply,
    restrict_to_ball,
    scale,
    spec_to_dict,
)
from .kernels import KernelSpec
from .operators import apply_partial_adjoint, apply_T, evaluate_at

__all__ = [
    "ExponentSystem",
    "FactorTriple",
    "FactorizationResult",
    "Approximation",
    "pi_l",
    "select_N",
    "approximate_atom",
    "regrid_atom",
    "uchiyama_factorize",
    "factorization_norm",
    "save_factorization",
]


@dataclass(frozen=True)
class ExponentSystem:
    """Hoelder exponents with ``1/q + 1/r1 + 1/r2 = 1/p``."""

    p: float
    q: float
    r1: float
    r2: float

    def __post_init__(self):
        if not 0.5 < self.p < 1:
            raise ValueError(f"p = {self.p} is outside (1/2, 1)")
        if min(self.q, self.r1, self.r2) <= 1:
            raise ValueError("q, r1, r2 must exceed 1")
        gap = 1 / self.q + 1 / self.r1 + 1 / self.r2 - 1 / self.p
        if abs(gap) > 1e-12:
            raise ValueError(f"1/q + 1/r1 + 1/r2 - 1/p = {gap:.3e}, expected 0")

    @classmethod
    def balanced(cls, p: float) -> "ExponentSystem":
        return cls(p, 3 * p, 3 * p, 3 * p)

    @property
    def q_dual(self) -> float:
        return self.q / (self.q - 1)

    def lip_alpha(self, dim: int) -> float:
        return dim * (1 / self.p - 1)

    def check_dim(self, dim: int) -> None:
        check_p(self.p, dim)


@dataclass
class FactorTriple:
    """One term ``lam * Pi_l(g, h1, h2)`` together with the atom it approximates."""

    lam: float
    g: GridFunction
    h1: GridFunction
    h2: GridFunction
    slot: int
    exps: ExponentSystem
    atom: Atom | None = None
    fine_atom: Atom | None = None  # atom before regridding (None if unchanged)
    fine_coef: float | None = None
    info: dict = field(default_factory=dict)

    @property
    def norms(self) -> tuple[float, float, float]:
        e = self.exps
        return lp_norm(self.g, e.q), lp_norm(self.h1, e.r1), lp_norm(self.h2, e.r2)

    @property
    def norm_product(self) -> float:
        a, b, c = self.norms
        return a * b * c


@dataclass
class FactorizationResult:
    rounds: list[list[FactorTriple]]
    error_norms: list[float]
    exponents: ExponentSystem
    N_used: int
    eps_used: float
    slot: int
    initial_norm_p: float
    final_terms: list[tuple[float, Atom]] = field(default_factory=list)
    non_contraction: bool = False
    regrid_log: list[dict] = field(default_factory=list)

    @property
    def contraction_ratios(self) -> list[float]:
        prev = [self.initial_norm_p] + self.error_norms[:-1]
        return [e / q if q > 0 else math.nan for e, q in zip(self.error_norms, prev)]

    def triples(self):
        for rnd in self.rounds:
            yield from rnd

    def decay_table(self) -> list[dict]:
        rows = []
        for k, (rnd, err, rho) in enumerate(zip(self.rounds, self.error_norms, self.contraction_ratios), 1):
            budget = max((t.info.get("budget_ratio", 0.0) for t in rnd), default=0.0)
            rows.append(
                {
                    "round": k,
                    "num_triples": len(rnd),
                    "error_quasinorm_p": err,
                    "contraction_ratio": rho,
                    "triple_norm_budget_max": budget,
                }
            )
        return rows


# -- Pi_l ---------------------------------------------------------------------------
def _pi_parts(K: KernelSpec, l: int, g: GridFunction, h1: GridFunction, h2: GridFunction, threads=None):
    if not (g.spec == h1.spec == h2.spec):
        raise GridError("g, h1, h2 live on different grids")
    if l == 2:
        hl = h2
        adj = apply_partial_adjoint(K, 2, h1, g, eval_support=h2.support, threads=threads)
    elif l == 1:
        hl = h1
        adj = apply_partial_adjoint(K, 1, g, h2, eval_support=h1.support, threads=threads)
    else:
        raise ValueError(f"slot must be 1 or 2, got {l}")
    first = pointwise_multiply(hl, adj) if not hl.is_empty_box else GridFunction.zeros(g.spec)
    if g.is_empty_box:
        second = GridFunction.zeros(g.spec)
    else:
        second = pointwise_multiply(g, apply_T(K, h1, h2, eval_support=g.support, threads=threads))
    return first, second


def pi_l(K: KernelSpec, l: int, g: GridFunction, h1: GridFunction, h2: GridFunction, threads=None) -> GridFunction:
    """``h_l T_l^*(...) - g T(h1, h2)`` with ``T_2^*(h1, g)`` or ``T_1^*(g, h2)``.

    Evaluated only on ``supp h_l`` and ``supp g``; the integral vanishes up to
    roundoff because the partial adjoints are exact transposes.
    """
    first, second = _pi_parts(K, l, g, h1, h2, threads)
    return first - second


# -- choice of N --------------------------------------------------------------------
def select_N(eps: float, p: float, n: int, eps_s: float, max_power: int = 200) -> int:
    """Smallest power of two ``N >= 2`` from which ``log2 N / N^(eps_s p - n(1-p)) < eps^p`` holds on.

    The left side rises before it decays, so a small ``N`` can pass by
    accident; the returned ``N`` is past the last failing power of two.
    """
    expo = eps_s * p - n * (1 - p)
    if expo <= 0:
        raise ValueError(f"eps_s*p - n(1-p) = {expo:.3g} <= 0: parameters outside the admissible range")
    if eps <= 0:
        raise ValueError("eps must be positive")
    target = eps**p
    # log2 N / N^expo peaks at N = e^(1/expo); beyond that it only decreases
    peak = max(1, math.ceil(1 / (expo * math.log(2))))
    last_fail = 0
    for k in range(1, max_power + 1):
        if not k / 2 ** (k * expo) < target:
            last_fail = k
        elif k > peak:
            return 2 ** (last_fail + 1)
    raise ValueError(f"no N <= 2^{max_power} meets the threshold")


# -- atom approximation -------------------------------------------------------------
@dataclass
class Approximation:
    triple: FactorTriple
    error: GridFunction
    balls: tuple[Ball, Ball]  # (atom ball, displaced ball) supporting the error
    denominator: float
    J0: int


def _displacement(center: Sequence[float], N: float, R: float) -> np.ndarray:
    n = len(center)
    return np.full(n, N * R / math.sqrt(n))


def required_half_width(N: float, R: float, dim: int) -> float:
    """Box half-width around the atom center holding the construction and its two-bump split."""
    J0 = smallest_integer_above_log2(N)
    s = math.sqrt(dim)
    return max(2 * N * R / s + R, N * R / (2 * s) + 2 ** (J0 + 1) * R)


def approximate_atom(
    K: KernelSpec,
    a: Atom,
    exps: ExponentSystem,
    l: int = 2,
    N: int = 32,
    threads=None,
    calibration: dict | None = None,
) -> Approximation:
    """Build ``(g, h1, h2)`` with ``Pi_l(g, h1, h2)`` close to the atom ``a``.

    With ``v = (N r / sqrt(n)) (1, ..., 1)``, the indicator of ``B(x0 + v, r)``
    becomes ``g`` and the indicator of ``B(x0 + 2v, r)`` fills the other input;
    ``h_l = a / T_l^*(...)(x0)``.  The grid is enlarged on the same lattice so
    the displaced balls and the mid ball of the error's two-bump split fit.
    """
    spec = a.spec
    n = spec.dim
    exps.check_dim(n)
    if l not in (1, 2):
        raise ValueError(f"slot must be 1 or 2, got {l}")
    if N < 4:
        raise ValueError("N must be at least 4")
    ball = a.ball
    R = ball.radius
    x0 = np.asarray(ball.center)
    if restrict_to_ball(a.fn, ball).sup() != a.fn.sup() or (a.fn - restrict_to_ball(a.fn, ball)).sup() > 0:
        raise GridError("atom support must lie in the open ball")
    half = required_half_width(N, R, n) * (1 + 1e-9) + 2 * spec.spacing
    big = spec.enclosing(tuple(x0), half)
    afn = a.fn.embed(big)
    v = _displacement(x0, N, R)
    near = Ball(tuple(x0 + v), R)
    far = Ball(tuple(x0 + 2 * v), R)
    g = indicator(big, near)
    other = indicator(big, far)
    if l == 2:
        den = float(evaluate_at(K, 2, other, g, x0, threads)[0])
    else:
        den = float(evaluate_at(K, 1, g, other, x0, threads)[0])
    floor = 1e-3 * K.C_hom * (N * R) ** (-2 * n) * integrate(g) * integrate(other)
    if not abs(den) >= floor:
        raise ValueError(f"|T_{l}^*(...)(x0)| = {abs(den):.3e} below {floor:.3e}: kernel not homogeneous here")
    hl = scale(1.0 / den, afn)
    h1, h2 = (other, hl) if l == 2 else (hl, other)
    first, second = _pi_parts(K, l, g, h1, h2, threads)
    err = afn - first + second
    triple = FactorTriple(1.0, g, h1, h2, l, exps, atom=a)
    nprod = triple.norm_product
    w1 = restrict_to_ball(err, ball).sup()
    w2 = restrict_to_ball(err, near).sup()
    env = N ** (-K.epsilon) * R ** (-n / a.p)
    triple.info.update(
        {
            "denominator": den,
            "norm_product": nprod,
            "budget_ratio": nprod / N ** (2 * n),
            "W1_sup": w1,
            "W2_sup": w2,
            "decay_ratio": max(w1, w2) / env,
            "error_mean": integrate(err),
            "error_l1": integrate_abs(err),
            "radius": R,
            "spacing": spec.spacing,
        }
    )
    return Approximation(triple, err, (ball, near), den, smallest_integer_above_log2(N))


# -- regridding ---------------------------------------------------------------------
def regrid_atom(a: Atom, points_per_radius: int) -> tuple[Atom, float, dict]:
    """Coarsen an atom to about ``points_per_radius`` cells per radius.

    Block averaging keeps the integral, cannot raise the sup, and moves the
    support at most ``sqrt(n)(c-1)h/2`` outward, so the result is an atom on
    the enlarged ball once renormalized.  Returns ``(atom, factor, info)``
    where ``factor`` multiplies the parent coefficient.
    """
    spec = a.spec
    n = spec.dim
    R = a.ball.radius
    c = max(1, int(math.floor(R / (points_per_radius * spec.spacing) + 1e-9)))
    tight = a.fn.tight()
    if c == 1:
        # still drop the (possibly huge) parent box
        small = spec.enclosing(a.ball.center, R + 2 * spec.spacing)
        return Atom(tight.embed(small), a.ball, a.p), 1.0, {"factor": 1}
    cs = coarse_spec(spec, c, a.ball.center, R + 2 * c * spec.spacing)
    avg = block_average(tight, cs)
    R2 = R + math.sqrt(n) * (c - 1) * spec.spacing / 2
    ball2 = Ball(a.ball.center, R2)
    sup = avg.sup()
    if sup == 0:
        return Atom(avg, ball2, a.p), 0.0, {"factor": c}
    gamma = sup * ball2.volume ** (1 / a.p)
    return Atom(scale(1 / gamma, avg), ball2, a.p), gamma, {"factor": c, "radius_in": R, "radius_out": R2}


def default_points_per_radius(dim: int) -> int:
    return 32 if dim == 1 else 6


# -- the iteration -------------------------------------------------------------------
def uchiyama_factorize(
    K: KernelSpec,
    l: int,
    f: AtomicDecomposition,
    exps: ExponentSystem,
    N: int = 32,
    max_rounds: int = 3,
    stop_tol: float = 0.0,
    points_per_radius: int | None = None,
    threads=None,
    progress=None,
) -> FactorizationResult:
    """Approximate every atom, decompose each error as a two-bump function, repeat.

    ``error_norms[M-1]`` is ``sum |lam|^p`` over the atoms of ``E_M``.  Atoms
    are coarsened before approximation (see :func:`regrid_atom`); this is
    exact for the construction because every step commutes with dilations.
    """
    if abs(f.p - exps.p) > 1e-15:
        raise ValueError("decomposition and exponent system disagree on p")
    ppr = points_per_radius
    current = [(lam, a) for lam, a in f.terms if lam != 0]
    if current:
        ppr = ppr or default_points_per_radius(current[0][1].spec.dim)
    res = FactorizationResult([], [], exps, int(N), K.epsilon, l, quasinorm_p(f))
    for M in range(1, max_rounds + 1):
        if not current:
            break
        triples = []
        nxt: list[tuple[float, Atom]] = []
        for lam, a in current:
            coarse, factor, info = regrid_atom(a, ppr)
            if factor == 0:
                continue
            approx = approximate_atom(K, coarse, exps, l, N, threads)
            t = approx.triple
            t.lam = lam * factor
            if info["factor"] > 1:
                t.fine_atom, t.fine_coef = a, lam
                res.regrid_log.append(dict(info, round=M))
            triples.append(t)
            tb = TwoBumpFunction.from_function(approx.error, *approx.balls)
            dec = two_bump_decompose(tb, exps.p)
            nxt += [(t.lam * gam, child) for gam, child in dec.terms if gam != 0]
        res.rounds.append(triples)
        err = float(sum(abs(c) ** exps.p for c, _ in nxt))
        res.error_norms.append(err)
        current = nxt
        if progress:
            progress(M, len(triples), err)
        if len(res.error_norms) >= 3 and res.error_norms[-1] > res.error_norms[-2] > res.error_norms[-3]:
            res.non_contraction = True
        if err < stop_tol:
            break
    res.final_terms = current
    return res


def factorization_norm(res: FactorizationResult) -> float:
    """``(sum |lam|^p (||g||_q ||h1||_r1 ||h2||_r2)^p)^(1/p)`` over all rounds."""
    p = res.exponents.p
    s = sum(abs(t.lam) ** p * t.norm_product**p for t in res.triples())
    return s ** (1 / p) if s > 0 else 0.0


# -- serialization ---------------------------------------------------------------
def factorization_record(res: FactorizationResult) -> dict:
    """JSON-ready summary: per-round tables with coefficients, balls and norm triples."""
    e = res.exponents
    out = {
        "format": "hpfact.factorization",
        "format_version": 1,
        "exponents": {"p": e.p, "q": e.q, "r1": e.r1, "r2": e.r2},
        "N": res.N_used,
        "epsilon": res.eps_used,
        "slot": res.slot,
        "initial_quasinorm_p": res.initial_norm_p,
        "error_norms": res.error_norms,
        "contraction_ratios": res.contraction_ratios,
        "non_contraction": res.non_contraction,
        "factorization_norm": factorization_norm(res),
        "rounds": [],
    }
    for rnd in res.rounds:
        rows = []
        for t in rnd:
            gq, h1r, h2r = t.norms
            rows.append(
                {
                    "lambda": t.lam,
                    "center": list(t.atom.ball.center),
                    "radius": t.atom.ball.radius,
                    "grid": spec_to_dict(t.g.spec),
                    "norm_g": gq,
                    "norm_h1": h1r,
                    "norm_h2": h2r,
                    "budget_ratio": t.info["budget_ratio"],
                    "decay_ratio": t.info["decay_ratio"],
                    "denominator": t.info["denominator"],
                }
            )
        out["rounds"].append(rows)
    return out


def save_factorization(path, res: FactorizationResult) -> None:
    with open(path, "w") as fh:
        json.dump(factorization_record(res), fh, indent=1, sort_keys=True)
        fh.write("\n")
