"""Bilinear Calderon-Zygmund kernels and numerical certificates for their conditions."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable

import numpy as np

__all__ = [
    "KernelSpec",
    "SeparatedConfig",
    "CheckReport",
    "builtin_riesz_kernel",
    "register_kernel",
    "get_kernel",
    "available_kernels",
    "load_calibration",
    "check_size_condition",
    "check_smoothness_condition",
    "check_homogeneity",
    "pair_distance_sum",
]

KernelEval = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class KernelSpec:
    """A bilinear kernel ``K(y0, y1, y2)`` with its declared constants.

    ``eval`` takes three arrays of points (last axis = dim) that broadcast
    against each other and returns the kernel values with the broadcast shape
    minus the last axis.  It must be pure.
    """

    name: str
    dim: int
    epsilon: float
    A: float
    C_hom: float
    eval: KernelEval = field(compare=False, repr=False)
    params: dict = field(default_factory=dict, compare=False)

    def __call__(self, y0, y1, y2) -> np.ndarray:
        return self.eval(np.asarray(y0, float), np.asarray(y1, float), np.asarray(y2, float))

    def scaled(self, c: float) -> "KernelSpec":
        base = self.eval
        return KernelSpec(
            f"{self.name}*{c:g}", self.dim, self.epsilon, abs(c) * self.A, abs(c) * self.C_hom,
            lambda a, b, d: c * base(a, b, d), dict(self.params, scale=c),
        )

    def with_constants(self, **kw) -> "KernelSpec":
        vals = {"epsilon": self.epsilon, "A": self.A, "C_hom": self.C_hom}
        vals.update(kw)
        return KernelSpec(self.name, self.dim, vals["epsilon"], vals["A"], vals["C_hom"], self.eval, self.params)


_CALIBRATION: dict | None = None


def load_calibration() -> dict:
    """Frozen constants shipped with the package (regenerate with scripts/calibrate.py)."""
    global _CALIBRATION
    if _CALIBRATION is None:
        try:
            text = resources.files("hpfact").joinpath("calibration.json").read_text()
            _CALIBRATION = json.loads(text)
        except FileNotFoundError:
            _CALIBRATION = {}
    return _CALIBRATION


def _riesz_eval(n: int, j: int) -> KernelEval:
    axis = j - 1

    def ev(y0, y1, y2):
        d01 = y0 - y1
        d02 = y0 - y2
        s = np.sum(d01 * d01, axis=-1) + np.sum(d02 * d02, axis=-1)
        root = np.sqrt(s)
        den = s * root if n == 1 else s * s * root
        return d01[..., axis] / den

    return ev


def builtin_riesz_kernel(n: int = 1, j: int = 1) -> KernelSpec:
    """``(y0 - y1)_j / (|y0-y1|^2 + |y0-y2|^2)^((2n+1)/2)``.

    Homogeneous of degree -2n, translation invariant, odd in ``y0 - y1``.
    ``A`` and ``C_hom`` come from the frozen calibration file.
    """
    if n not in (1, 2) or not 1 <= j <= n:
        raise ValueError(f"need n in (1, 2) and 1 <= j <= n, got n={n}, j={j}")
    eps = 0.75 if n == 1 else 0.8
    cal = load_calibration().get("kernels", {}).get(f"riesz_n{n}_j{j}", {})
    return KernelSpec(
        "riesz", n, eps, float(cal.get("A", math.nan)), float(cal.get("C_hom", math.nan)),
        _riesz_eval(n, j), {"n": n, "j": j},
    )


_REGISTRY: dict[str, Callable[..., KernelSpec]] = {"riesz": builtin_riesz_kernel}


def register_kernel(name: str, factory: Callable[..., KernelSpec]) -> None:
    _REGISTRY[name] = factory


def get_kernel(name: str, **params) -> KernelSpec:
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown kernel {name!r}; known: {sorted(_REGISTRY)}") from None
    return factory(**params)


def available_kernels() -> list[str]:
    return sorted(_REGISTRY)


# -- certificates --------------------------------------------------------------------
@dataclass
class CheckReport:
    name: str
    measured: float
    passed: bool
    sample_count: int
    seed: int | None
    extra: dict = field(default_factory=dict)

    def as_record(self) -> dict:
        rec = {
            "name": self.name,
            "measured": self.measured,
            "passed": bool(self.passed),
            "sample_count": self.sample_count,
            "seed": self.seed,
        }
        rec.update(self.extra)
        return rec


def pair_distance_sum(y0, y1, y2) -> np.ndarray:
    """``sum_{k,l} |y_k - y_l|`` over ordered pairs, i.e. twice the unordered sum."""
    d = lambda a, b: np.sqrt(np.sum((a - b) ** 2, axis=-1))
    return 2.0 * (d(y0, y1) + d(y0, y2) + d(y1, y2))


def _random_triples(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    """Off-diagonal triples mixing scales over six decades, shape (count, 3, dim)."""
    base = rng.normal(size=(count, 3, dim))
    scales = 10.0 ** rng.uniform(-3, 3, size=(count, 3, 1))
    pts = base * scales
    shift = rng.normal(size=(count, 1, dim)) * 10.0 ** rng.uniform(-2, 2, size=(count, 1, 1))
    return pts + shift


def check_size_condition(K: KernelSpec, sample_count: int = 10_000, seed: int = 0) -> CheckReport:
    rng = np.random.default_rng(seed)
    t = _random_triples(rng, sample_count, K.dim)
    y0, y1, y2 = t[:, 0], t[:, 1], t[:, 2]
    S = pair_distance_sum(y0, y1, y2)
    ok = S > 0
    ratio = np.abs(K(y0[ok], y1[ok], y2[ok])) * S[ok] ** (2 * K.dim)
    measured = float(np.max(ratio)) if ratio.size else 0.0
    return CheckReport("size", measured, bool(measured <= 2 * K.A), int(ok.sum()), seed)


def check_smoothness_condition(
    K: KernelSpec,
    sample_count: int = 10_000,
    seed: int = 0,
    scales: tuple[float, ...] = (0.5, 0.05, 0.005),
) -> CheckReport:
    """Hoelder-epsilon smoothness in every slot against the declared ``A``.

    Each base triple is perturbed in slot j by a random vector of length
    ``s * (1/2) max_{k != j} |y_j - y_k|`` for each scale ``s``.  The report
    records the maximum ratio per scale and flags growth as the scale shrinks
    (a symptom of a declared epsilon larger than the kernel supports).
    """
    rng = np.random.default_rng(seed)
    n = K.dim
    eps = K.epsilon
    t = _random_triples(rng, sample_count, n)
    per_scale = []
    for s in scales:
        best = 0.0
        for j in range(3):
            others = [k for k in range(3) if k != j]
            dmax = np.max(
                np.stack([np.sqrt(np.sum((t[:, j] - t[:, k]) ** 2, axis=-1)) for k in others]), axis=0
            )
            u = rng.normal(size=(sample_count, n))
            u /= np.linalg.norm(u, axis=1, keepdims=True)
            frac = rng.uniform(0.5, 1.0, size=(sample_count, 1))
            delta = u * (frac * s * 0.5 * dmax[:, None])
            moved = t.copy()
            moved[:, j] = t[:, j] + delta
            dist = np.linalg.norm(delta, axis=1)
            ok = dist > 0
            k0 = K(t[ok, 0], t[ok, 1], t[ok, 2])
            k1 = K(moved[ok, 0], moved[ok, 1], moved[ok, 2])
            S = pair_distance_sum(t[ok, 0], t[ok, 1], t[ok, 2])
            ratio = np.abs(k1 - k0) * S ** (2 * n + eps) / dist[ok] ** eps
            if ratio.size:
                best = max(best, float(np.max(ratio)))
        per_scale.append(best)
    measured = max(per_scale)
    growth = all(b > a for a, b in zip(per_scale, per_scale[1:]))
    return CheckReport(
        "smoothness", measured, bool(measured <= 2 * K.A), 3 * sample_count * len(scales), seed,
        {"per_scale": per_scale, "scales": list(scales), "growth_flag": growth, "epsilon": eps},
    )


@dataclass(frozen=True)
class SeparatedConfig:
    """Kernel-slot centers ``x0, x1, x2`` of three radius-``r`` balls at separation ~ ``N r``."""

    x0: tuple[float, ...]
    x1: tuple[float, ...]
    x2: tuple[float, ...]
    r: float
    N: float

    def __post_init__(self):
        pts = [np.atleast_1d(np.asarray(c, float)) for c in (self.x0, self.x1, self.x2)]
        for name, c in zip(("x0", "x1", "x2"), pts):
            object.__setattr__(self, name, tuple(float(v) for v in c))
        if not (self.r > 0 and self.N > 0):
            raise ValueError("r and N must be positive")
        for a in range(3):
            for b in range(a + 1, 3):
                if np.linalg.norm(pts[a] - pts[b]) < 2 * self.r:
                    raise ValueError(f"balls {a} and {b} overlap")
        Nr = self.N * self.r
        for l in (1, 2):
            d = float(np.linalg.norm(pts[0] - pts[l]))
            if not (Nr / 2 * (1 - 1e-12) <= d <= 2 * Nr * (1 + 1e-12)):
                raise ValueError(f"|x0 - x{l}| = {d} is outside [Nr/2, 2Nr]")

    @classmethod
    def for_slot(cls, l: int, N: float, r: float = 1.0, x0=None, dim: int = 1) -> "SeparatedConfig":
        """Slot geometry seen by the denominator of the atom approximation.

        With ``v = (Nr/sqrt(n)) (1,...,1)`` the construction places ``g`` and the
        free input at ``x0 + v`` and ``x0 + 2v``; evaluating the partial adjoint
        at ``x0`` puts the kernel slots at ``(v, 2v, 0)`` for ``l = 2`` and at
        ``(v, 0, 2v)`` for ``l = 1``, relative to ``x0``.
        """
        base = np.zeros(dim) if x0 is None else np.asarray(x0, float)
        v = np.full(base.shape, N * r / math.sqrt(base.size))
        if l == 2:
            c = (base + v, base + 2 * v, base)
        elif l == 1:
            c = (base + v, base, base + 2 * v)
        else:
            raise ValueError("slot must be 1 or 2")
        return cls(tuple(c[0]), tuple(c[1]), tuple(c[2]), r, N)


def _uniform_in_ball(rng, count, center, r):
    dim = len(center)
    u = rng.normal(size=(count, dim))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    rad = r * rng.uniform(0, 1, size=(count, 1)) ** (1 / dim)
    return np.asarray(center) + u * rad


def check_homogeneity(K: KernelSpec, cfg: SeparatedConfig, sample_count: int = 10_000, seed: int = 0) -> CheckReport:
    """``min |K(z0,z1,z2)| (N r)^{2n}`` over samples from the three balls (centers included)."""
    if len(cfg.x0) != K.dim:
        raise ValueError("config dimension differs from the kernel dimension")
    rng = np.random.default_rng(seed)
    z = [_uniform_in_ball(rng, sample_count, c, cfg.r) for c in (cfg.x0, cfg.x1, cfg.x2)]
    z = [np.vstack([np.asarray(c)[None, :], zi]) for c, zi in zip((cfg.x0, cfg.x1, cfg.x2), z)]
    vals = np.abs(K(z[0], z[1], z[2])) * (cfg.N * cfg.r) ** (2 * K.dim)
    measured = float(np.min(vals))
    return CheckReport(
        "homogeneity", measured, bool(measured >= K.C_hom / 2), sample_count + 1, seed,
        {"N": cfg.N, "r": cfg.r},
    )
