"""Canonical inputs shared by the tests, the CLI and the calibration script."""

from __future__ import annotations

import math

import numpy as np

from .atoms import Atom, AtomicDecomposition, TwoBumpFunction, check_p
from .commutator import LipFunction
from .grid import Ball, GridFunction, GridSpec, ball_count, indicator, restrict_to_ball, scale

__all__ = [
    "make_atom",
    "ramp_atom",
    "two_bump_grid",
    "two_bump_case",
    "two_bump_corpus",
    "lip_family",
    "lip_family_names",
    "lip_member",
    "single_atom_decomposition",
]


def make_atom(spec: GridSpec, ball: Ball, p: float, profile) -> Atom:
    """Atom from a profile: restrict to the ball, subtract the discrete mean, normalize the sup."""
    check_p(p, spec.dim)
    chi = indicator(spec, ball)
    raw = GridFunction.from_callable(spec, profile, chi.support)
    raw = restrict_to_ball(raw, ball)
    mean = float(np.sum(raw.samples)) / ball_count(spec, ball)
    centered = raw - scale(mean, chi)
    sup = centered.sup()
    if sup == 0:
        raise ValueError("profile is constant on the ball")
    return Atom(scale(1 / (sup * ball.volume ** (1 / p)), centered).tight(), ball, p)


def ramp_atom(p: float = 0.75, dim: int = 1, points_per_radius: int | None = None) -> Atom:
    """Linear ramp in the first coordinate on the unit ball at the origin."""
    m = points_per_radius or (32 if dim == 1 else 6)
    spec = GridSpec(dim, 2.0, 1.0 / m)
    return make_atom(spec, Ball((0.0,) * dim, 1.0), p, lambda x: x[..., 0])


def two_bump_grid(N: int, r: float, h: float, dim: int = 1) -> GridSpec:
    """Grid centered at the origin holding B(0, r), B(N r e, r) and the mid ball of the split."""
    from .atoms import smallest_integer_above_log2

    J0 = smallest_integer_above_log2(N)
    reach = max(N * r + r, N * r / 2 + 2 ** (J0 + 1) * r) + 2 * h
    cells = math.ceil(reach / h)
    return GridSpec(dim, cells * h, h)


_SHAPES = ("indicator", "smooth", "signed", "lopsided")


def two_bump_case(N: int, shape: str, r: float = 1.0, points_per_radius: int = 16, seed: int = 0) -> TwoBumpFunction:
    """A mean-zero two-bump function with balls ``B(0, r)`` and ``B(N r, r)`` (n = 1)."""
    h = r / points_per_radius
    spec = two_bump_grid(N, r, h)
    B1, B2 = Ball((0.0,), r), Ball((N * r,), r)
    c1, c2 = indicator(spec, B1), indicator(spec, B2)
    rng = np.random.default_rng([seed, N, _SHAPES.index(shape)])
    if shape == "indicator":
        f = c1 - c2 * (ball_count(spec, B1) / ball_count(spec, B2))
    else:
        k = rng.uniform(1, 4, size=2)
        ph = rng.uniform(0, 2 * math.pi, size=2)
        amp = (1.0, 0.1) if shape == "lopsided" else (1.0, 1.0)
        parts = []
        for j, (ball, chi) in enumerate(((B1, c1), (B2, c2))):
            cen = ball.center[0]
            if shape == "signed":
                prof = lambda x, cen=cen, kk=k[j], pp=ph[j]: np.sin(kk * math.pi * (x[..., 0] - cen) / r + pp)
            else:
                prof = lambda x, cen=cen, kk=k[j], pp=ph[j]: 1.5 + np.cos(kk * (x[..., 0] - cen) / r + pp)
            g = GridFunction.from_callable(spec, prof, chi.support)
            parts.append(scale(amp[j] * (1 if j == 0 else -1), restrict_to_ball(g, ball)))
        f = parts[0] + parts[1]
        # remove the discrete mean on B2 so the total integral vanishes on-grid
        total = float(np.sum(f.samples))
        f = f - scale(total / ball_count(spec, B2), c2)
    return TwoBumpFunction.from_function(f, B1, B2)


def two_bump_corpus(seed: int = 0) -> list[tuple[TwoBumpFunction, float]]:
    """50 ``(f, p)`` cases: N in {8,16,32,64} x p in {0.6,0.75,0.9} x 4 shapes, plus 2 at r = 1/2."""
    out = []
    for N in (8, 16, 32, 64):
        for p in (0.6, 0.75, 0.9):
            for shape in _SHAPES:
                out.append((two_bump_case(N, shape, seed=seed), p))
    out.append((two_bump_case(16, "smooth", r=0.5, seed=seed), 0.75))
    out.append((two_bump_case(32, "signed", r=0.5, seed=seed), 0.75))
    return out


def lip_family_names() -> list[str]:
    return ["power", "shifted_power", "smoothed_step"]


def lip_member(name: str, spec: GridSpec, alpha: float, width: float = 0.1) -> LipFunction:
    """``power`` = |x|^a, ``shifted_power`` = dist(x, 0.3 e1)^a, ``smoothed_step`` = tanh(x1/width), ``zero``."""
    shift = np.zeros(spec.dim)
    shift[0] = 0.3
    funcs = {
        "power": lambda x: np.sqrt(np.sum(x**2, axis=-1)) ** alpha,
        "shifted_power": lambda x: np.sqrt(np.sum((x - shift) ** 2, axis=-1)) ** alpha,
        "smoothed_step": lambda x: np.tanh(x[..., 0] / width),
        "zero": lambda x: np.zeros(x.shape[:-1]),
    }
    if name not in funcs:
        raise ValueError(f"unknown b-family member {name!r}")
    return LipFunction.from_callable(funcs[name], spec, alpha, name)


def lip_family(spec: GridSpec, alpha: float, width: float = 0.1) -> list[LipFunction]:
    return [lip_member(name, spec, alpha, width) for name in lip_family_names()]


def single_atom_decomposition(p: float = 0.75, dim: int = 1) -> AtomicDecomposition:
    return AtomicDecomposition([(1.0, ramp_atom(p, dim))], p)
