"""Hardy-space atoms, the two-bump telescoping decomposition, and related seminorms."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.signal import fftconvolve

from .grid import (
    Ball,
    GridError,
    GridFunction,
    GridSpec,
    ball_count,
    grid_function_arrays,
    grid_function_from_arrays,
    indicator,
    integrate,
    restrict_to_ball,
    scale,
)

__all__ = [
    "Atom",
    "AtomReport",
    "AtomicDecomposition",
    "TwoBumpFunction",
    "TwoBumpDecomposition",
    "validate_atom",
    "check_p",
    "two_bump_decompose",
    "smallest_integer_above_log2",
    "atomic_quasinorm",
    "quasinorm_p",
    "lip_seminorm",
    "poisson_maximal_diagnostic",
    "save_decomposition",
    "load_decomposition",
]


def check_p(p: float, dim: int) -> float:
    p = float(p)
    if not (dim / (dim + 1) < p < 1):
        raise ValueError(f"p = {p} is outside ({dim}/{dim + 1}, 1)")
    return p


@dataclass(frozen=True)
class AtomReport:
    """Outcome of :func:`validate_atom`; slacks are measured, not thresholded."""

    support_ok: bool
    support_excess: float  # max distance of a nonzero sample beyond the radius, in units of r
    size_slack: float  # ||a||_inf / |B|^{-1/p}
    mean_slack: float  # |int a| / (||a||_inf |B|)
    tol: float

    @property
    def size_ok(self) -> bool:
        return self.size_slack <= 1 + self.tol

    @property
    def mean_ok(self) -> bool:
        return self.mean_slack <= self.tol

    @property
    def valid(self) -> bool:
        return self.support_ok and self.size_ok and self.mean_ok

    def __bool__(self):
        return self.valid


def validate_atom(fn: GridFunction, ball: Ball, p: float, tol: float = 1e-8) -> AtomReport:
    """Check support, size and vanishing mean of a candidate atom.

    Support is tested against the closed ball with a 1e-12 relative margin, so
    block-averaged atoms whose centroids land on the boundary still pass.
    """
    check_p(p, fn.spec.dim)
    pts, vals = fn.nonzero()
    if len(vals):
        dist = np.sqrt(np.sum((pts - np.asarray(ball.center)) ** 2, axis=-1))
        excess = float(max(0.0, (dist.max() - ball.radius) / ball.radius))
    else:
        excess = 0.0
    sup = fn.sup()
    size_slack = sup * ball.volume ** (1 / p)
    mean_slack = abs(integrate(fn)) / (sup * ball.volume) if sup > 0 else 0.0
    return AtomReport(excess <= 1e-12, excess, size_slack, mean_slack, tol)


@dataclass(frozen=True)
class Atom:
    """A grid function certified as an L^inf atom for H^p on ``ball``."""

    fn: GridFunction
    ball: Ball
    p: float

    def __post_init__(self):
        if self.ball.dim != self.fn.spec.dim:
            raise GridError("atom ball and grid dimensions differ")

    def report(self, tol: float = 1e-8) -> AtomReport:
        return validate_atom(self.fn, self.ball, self.p, tol)

    @property
    def spec(self) -> GridSpec:
        return self.fn.spec


@dataclass
class AtomicDecomposition:
    """Finite sum ``sum_j lam_j a_j``; ``p`` is shared by every atom."""

    terms: list[tuple[float, Atom]]
    p: float

    def __post_init__(self):
        self.terms = [(float(lam), a) for lam, a in self.terms]
        for lam, a in self.terms:
            if not math.isfinite(lam):
                raise ValueError("non-finite coefficient")
            if abs(a.p - self.p) > 1e-15:
                raise ValueError("atom exponent differs from the decomposition exponent")

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([lam for lam, _ in self.terms])

    def validate(self, tol: float = 1e-8) -> list[AtomReport]:
        return [a.report(tol) for _, a in self.terms]

    def concat(self, other: "AtomicDecomposition") -> "AtomicDecomposition":
        if other.p != self.p:
            raise ValueError("cannot concatenate decompositions with different p")
        return AtomicDecomposition(self.terms + other.terms, self.p)

    def reconstruct(self, spec: GridSpec | None = None) -> GridFunction:
        """``sum lam_j a_j`` on ``spec`` (defaults to the first atom's grid)."""
        if spec is None:
            if not self.terms:
                raise ValueError("empty decomposition needs an explicit grid")
            spec = self.terms[0][1].spec
        out = GridFunction.zeros(spec)
        for lam, a in self.terms:
            if lam != 0:
                out = out + scale(lam, a.fn.embed(spec))
        return out


def atomic_quasinorm(d: AtomicDecomposition | Iterable[float], p: float | None = None) -> float:
    """``(sum |lam_j|^p)^(1/p)``."""
    if isinstance(d, AtomicDecomposition):
        lam, p = d.coefficients, d.p
    else:
        lam = np.asarray(list(d), dtype=float)
        if p is None:
            raise ValueError("p is required for a bare coefficient list")
    if lam.size == 0:
        return 0.0
    return float(np.sum(np.abs(lam) ** p)) ** (1.0 / p)


def quasinorm_p(d: AtomicDecomposition) -> float:
    """``sum |lam_j|^p``, additive under concatenation."""
    lam = d.coefficients
    return float(np.sum(np.abs(lam) ** d.p)) if lam.size else 0.0


# -- two-bump functions ---------------------------------------------------------
@dataclass(frozen=True)
class TwoBumpFunction:
    """Mean-zero ``f`` bounded by ``C1 chi_B1 + C2 chi_B2`` for equal-radius balls."""

    fn: GridFunction
    B1: Ball
    B2: Ball
    C1: float
    C2: float

    @property
    def r(self) -> float:
        return self.B1.radius

    @property
    def N(self) -> float:
        return self.B1.distance_to(self.B2) / self.B1.radius

    @classmethod
    def from_function(cls, fn: GridFunction, B1: Ball, B2: Ball) -> "TwoBumpFunction":
        """Use the measured sup of ``fn`` on each ball as ``C_i``."""
        C1 = restrict_to_ball(fn, B1).sup()
        C2 = restrict_to_ball(fn, B2).sup()
        return cls(fn, B1, B2, C1, C2)

    def violations(self, tol: float = 1e-9) -> list[str]:
        out = []
        if abs(self.B1.radius - self.B2.radius) > 1e-12 * self.B1.radius:
            out.append("balls have different radii")
        if not self.B1.disjoint_from(self.B2):
            out.append("balls overlap")
        if self.C1 < 0 or self.C2 < 0:
            out.append("negative bound")
        f1 = restrict_to_ball(self.fn, self.B1)
        f2 = restrict_to_ball(self.fn, self.B2)
        rest = self.fn - f1 - f2
        if rest.sup() > 0:
            out.append("nonzero samples outside both balls")
        if f1.sup() > (1 + tol) * self.C1 or f2.sup() > (1 + tol) * self.C2:
            out.append("pointwise bound exceeded")
        mass = self.C1 * self.B1.volume + self.C2 * self.B2.volume
        if abs(integrate(self.fn)) > tol * mass:
            out.append(f"mean not zero: {integrate(self.fn):.3e}")
        return out


def smallest_integer_above_log2(x: float) -> int:
    """Smallest integer strictly larger than log2(x), robust to roundoff in x."""
    t = math.log2(x)
    k = round(t)
    if abs(t - k) < 1e-9:
        return int(k) + 1
    return math.floor(t) + 1


@dataclass
class TwoBumpDecomposition(AtomicDecomposition):
    """Output of :func:`two_bump_decompose` with the bookkeeping of the construction."""

    J0: int = 0
    labels: list[tuple[int, int]] = field(default_factory=list)  # (i, k), i in {1,2}
    alpha_mid: tuple[float, float] = (0.0, 0.0)  # via <f1> and via -<f2>
    source: TwoBumpFunction | None = None

    def envelopes(self) -> dict:
        """Lemma envelopes for this decomposition (all with unit constant)."""
        s = self.source
        N = s.N
        n = s.fn.spec.dim
        p = self.p
        v1, v2 = s.B1.volume, s.B2.volume
        stated = N ** (n * (1 - p)) * math.log2(N) * (s.C1 * v1 + s.C2 * v2)
        homog = N ** (n * (1 - p)) * math.log2(N) * (s.C1**p * v1 + s.C2**p * v2)
        inter = (self.J0 + 1) * 2 ** ((self.J0 + 1) * n * (1 - p)) * (s.C1**p * v1 + s.C2**p * v2)
        return {"stated": stated, "homogeneous": homog, "intermediate": inter}

    def coefficient_ratios(self) -> np.ndarray:
        """|gamma_i^k| / (C_i 2^{kn(1/p-1)} |B_i|^{1/p}); NaN where C_i = 0."""
        s = self.source
        n = s.fn.spec.dim
        out = []
        for (lam, _), (i, k) in zip(self.terms, self.labels):
            C = s.C1 if i == 1 else s.C2
            B = s.B1 if i == 1 else s.B2
            env = C * 2 ** (k * n * (1 / self.p - 1)) * B.volume ** (1 / self.p)
            out.append(abs(lam) / env if env > 0 else float("nan"))
        return np.array(out)


def _normalized_term(fk: GridFunction, ball: Ball, p: float) -> tuple[float, Atom]:
    sup = fk.sup()
    if sup == 0:
        return 0.0, Atom(GridFunction.zeros(fk.spec), ball, p)
    gamma = sup * ball.volume ** (1 / p)
    return gamma, Atom(scale(1.0 / gamma, fk).tight(), ball, p)


def two_bump_decompose(f: TwoBumpFunction, p: float, check: bool = True) -> TwoBumpDecomposition:
    """Telescoping atomic decomposition of a two-bump function.

    Produces ``2*(J0+1)`` terms ordered ``(1,1..J0+1), (2,1..J0+1)``.  Averages
    divide by the discrete measure of each discrete ball, so every emitted atom
    has mean zero up to roundoff.  Zero terms are kept with coefficient 0.
    """
    spec = f.fn.spec
    n = spec.dim
    check_p(p, n)
    if check:
        bad = f.violations()
        if bad:
            raise ValueError("not a two-bump function: " + "; ".join(bad))
    r = f.r
    J0 = smallest_integer_above_log2(f.N)
    y = [np.asarray(f.B1.center), np.asarray(f.B2.center)]
    mid = Ball(tuple((y[0] + y[1]) / 2), 2 ** (J0 + 1) * r)
    if not spec.contains_ball(mid):
        raise GridError(f"grid box (half-width {spec.half_width}) cannot hold the mid ball {mid}")
    hn = spec.cell_volume

    f1 = restrict_to_ball(f.fn, f.B1)
    parts = [f1, f.fn - f1]
    mass = [integrate(parts[0]), integrate(parts[1])]
    mid_ind = indicator(spec, mid)
    mid_count = ball_count(spec, mid)
    alpha_mid = (mass[0] / (mid_count * hn), -mass[1] / (mid_count * hn))

    terms: list[tuple[float, Atom]] = []
    labels = []
    for i in (0, 1):
        prev = parts[i]
        for k in range(1, J0 + 1):
            Bk = Ball(tuple(y[i]), 2**k * r)
            chi = indicator(spec, Bk)
            alpha = mass[i] / (ball_count(spec, Bk) * hn)
            cur = scale(alpha, chi)
            terms.append(_normalized_term(prev - cur, Bk, p))
            labels.append((i + 1, k))
            prev = cur
        sign = -1.0 if i == 0 else 1.0
        last = prev + scale(sign * alpha_mid[0], mid_ind)
        terms.append(_normalized_term(last, mid, p))
        labels.append((i + 1, J0 + 1))
    return TwoBumpDecomposition(terms, p, J0=J0, labels=labels, alpha_mid=alpha_mid, source=f)


# -- Lipschitz seminorm ------------------------------------------------------------
def _pair_offsets(shape: Sequence[int]) -> list[tuple[int, ...]]:
    """Dyadic offsets along each axis (and the diagonals in 2D)."""
    m = max(shape)
    steps = [1 << j for j in range(max(1, int(math.log2(max(m - 1, 1))) + 1)) if (1 << j) < m]
    out = []
    for s in steps:
        if len(shape) == 1:
            out.append((s,))
        else:
            out += [(s, 0), (0, s), (s, s), (s, -s)]
    return out


def _ratio_for_offset(vals: np.ndarray, off: tuple[int, ...], h: float, alpha: float) -> float:
    src, dst = [], []
    for o, m in zip(off, vals.shape):
        if abs(o) >= m:
            return 0.0
        src.append(slice(max(0, -o), m - max(0, o)))
        dst.append(slice(max(0, o), m - max(0, -o)))
    diff = np.abs(vals[tuple(dst)] - vals[tuple(src)])
    if diff.size == 0:
        return 0.0
    dist = h * math.sqrt(sum(o * o for o in off))
    return float(diff.max()) / dist**alpha


def lip_seminorm(b: GridFunction, alpha: float, sample_budget: int = 4_000_000, seed: int = 0) -> float:
    """Lower estimate of the Lip_alpha seminorm from grid difference quotients.

    Works on the support box grown by one cell (clipped to the grid), which
    holds every pair that can realize the maximum jump to the zero exterior.
    Exhaustive when the pair count fits ``sample_budget``; otherwise all dyadic
    offsets plus seeded random pairs up to the budget.
    """
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    spec = b.spec
    lo = [max(0, l - 1) for l in b.lo]
    hi = [min(s, h + 1) for s, h in zip(spec.shape, b.hi)]
    vals = b.box_values(lo, hi)
    if vals.size < 2 or not np.any(vals):
        return 0.0
    h = spec.spacing
    npts = vals.size
    if npts * (npts - 1) // 2 <= sample_budget:
        # every offset vector with nonnegative leading component covers all pairs
        best = 0.0
        if spec.dim == 1:
            offs = [(s,) for s in range(1, vals.shape[0])]
        else:
            m0, m1 = vals.shape
            offs = [(a, c) for a in range(0, m0) for c in range(-(m1 - 1), m1) if a > 0 or c > 0]
        for off in offs:
            best = max(best, _ratio_for_offset(vals, off, h, alpha))
        return best
    best = 0.0
    used = 0
    for off in _pair_offsets(vals.shape):
        best = max(best, _ratio_for_offset(vals, off, h, alpha))
        used += npts
    remaining = max(0, sample_budget - used)
    if remaining:
        rng = np.random.default_rng(seed)
        flat = vals.ravel()
        idx = np.indices(vals.shape).reshape(spec.dim, -1).T
        for start in range(0, remaining, 1 << 20):
            m = min(1 << 20, remaining - start)
            i = rng.integers(0, npts, m)
            j = rng.integers(0, npts, m)
            keep = i != j
            i, j = i[keep], j[keep]
            dist = h * np.sqrt(np.sum((idx[i] - idx[j]) ** 2, axis=1))
            if dist.size:
                best = max(best, float(np.max(np.abs(flat[i] - flat[j]) / dist**alpha)))
    return best


# -- Poisson maximal diagnostic ----------------------------------------------------
def poisson_kernel(x: np.ndarray, t: float, dim: int) -> np.ndarray:
    c = math.gamma((dim + 1) / 2) / math.pi ** ((dim + 1) / 2)
    r2 = np.sum(x**2, axis=-1)
    return c * t / (t * t + r2) ** ((dim + 1) / 2)


def poisson_maximal_diagnostic(f: GridFunction, t_levels: Sequence[float]) -> GridFunction:
    """``max_t |P_t * f|`` over the given levels, kernel truncated to the grid box."""
    t_levels = [float(t) for t in t_levels]
    if not t_levels or min(t_levels) <= 0:
        raise ValueError("t_levels must be nonempty and positive")
    spec = f.spec
    if f.is_empty_box:
        return GridFunction(spec, np.zeros(spec.shape))
    m = spec.shape[0]
    offs = spec.spacing * np.arange(-(m - 1), m)
    grids = np.meshgrid(*([offs] * spec.dim), indexing="ij")
    disp = np.stack(grids, axis=-1)
    best = np.zeros(spec.shape)
    dense = f.dense()
    for t in t_levels:
        ker = poisson_kernel(disp, t, spec.dim) * spec.cell_volume
        conv = fftconvolve(dense, ker, mode="full")
        sl = tuple(slice(m - 1, 2 * m - 1) for _ in range(spec.dim))
        best = np.maximum(best, np.abs(conv[sl]))
    return GridFunction(spec, best)


# -- serialization ----------------------------------------------------------------
DECOMP_FORMAT_VERSION = 1


def decomposition_arrays(d: AtomicDecomposition, prefix: str = "") -> dict[str, np.ndarray]:
    arrs: dict[str, np.ndarray] = {
        prefix + "p": np.array(d.p),
        prefix + "lambda": d.coefficients,
        prefix + "centers": np.array([a.ball.center for _, a in d.terms]).reshape(len(d), -1),
        prefix + "radii": np.array([a.ball.radius for _, a in d.terms]),
    }
    for j, (_, a) in enumerate(d.terms):
        arrs.update(grid_function_arrays(a.fn, f"{prefix}atom{j}_"))
    return arrs


def decomposition_from_arrays(z, prefix: str = "") -> AtomicDecomposition:
    p = float(z[prefix + "p"])
    lam = np.asarray(z[prefix + "lambda"])
    centers = np.asarray(z[prefix + "centers"])
    radii = np.asarray(z[prefix + "radii"])
    terms = []
    for j in range(len(lam)):
        fn = grid_function_from_arrays(z, f"{prefix}atom{j}_")
        terms.append((float(lam[j]), Atom(fn, Ball(tuple(centers[j]), float(radii[j])), p)))
    return AtomicDecomposition(terms, p)


def save_decomposition(path, d: AtomicDecomposition) -> None:
    arrs = decomposition_arrays(d)
    arrs["kind"] = np.array("AtomicDecomposition")
    arrs["format_version"] = np.array(DECOMP_FORMAT_VERSION)
    with open(path, "wb") as fh:
        np.savez(fh, **arrs)


def load_decomposition(path) -> AtomicDecomposition:
    with np.load(path, allow_pickle=False) as z:
        if str(z["kind"]) != "AtomicDecomposition":
            raise ValueError(f"{path} does not hold an AtomicDecomposition")
        return decomposition_from_arrays(z)
