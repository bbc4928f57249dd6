"""Input checks shared by the estimator wrappers and the CLI."""

from __future__ import annotations

import math
from typing import Iterable

from .atoms import Atom, AtomicDecomposition, TwoBumpFunction, check_p
from .grid import GridFunction
from .kernels import KernelSpec, get_kernel


def check_slot(l) -> int:
    if l not in (1, 2):
        raise ValueError(f"slot must be 1 or 2, got {l!r}")
    return int(l)


def check_separation(N) -> int:
    N = int(N)
    if N < 4:
        raise ValueError(f"N must be an integer >= 4, got {N}")
    return N


def check_positive_int(value, name: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or int(value) != value or int(value) < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_kernel(kernel, dim: int | None = None) -> KernelSpec:
    """Accept a :class:`KernelSpec` or a registered name (builtin kernels take ``n = dim``)."""
    if isinstance(kernel, KernelSpec):
        K = kernel
    elif isinstance(kernel, str):
        K = get_kernel(kernel, n=dim or 1) if kernel == "riesz" else get_kernel(kernel)
    else:
        raise TypeError(f"kernel must be a KernelSpec or a name, got {type(kernel).__name__}")
    if dim is not None and K.dim != dim:
        raise ValueError(f"kernel dimension {K.dim} differs from data dimension {dim}")
    if not (K.dim / (K.dim + 1) < K.epsilon < 1):
        raise ValueError(f"kernel smoothness {K.epsilon} outside ({K.dim}/{K.dim + 1}, 1)")
    if not (math.isfinite(K.A) and math.isfinite(K.C_hom)):
        raise ValueError(f"kernel {K.name!r} has no calibrated constants")
    return K


def check_grid_functions(X: Iterable) -> list[GridFunction]:
    X = list(X) if not isinstance(X, GridFunction) else [X]
    for x in X:
        if not isinstance(x, GridFunction):
            raise TypeError(f"expected GridFunction, got {type(x).__name__}")
    return X


def check_two_bumps(X) -> list[TwoBumpFunction]:
    X = [X] if isinstance(X, TwoBumpFunction) else list(X)
    for x in X:
        if not isinstance(x, TwoBumpFunction):
            raise TypeError(f"expected TwoBumpFunction, got {type(x).__name__}")
        bad = x.violations()
        if bad:
            raise ValueError("invalid two-bump input: " + "; ".join(bad))
    return X


def check_atoms(X, p: float) -> list[Atom]:
    X = [X] if isinstance(X, Atom) else list(X)
    for a in X:
        if not isinstance(a, Atom):
            raise TypeError(f"expected Atom, got {type(a).__name__}")
        check_p(a.p, a.spec.dim)
        if abs(a.p - p) > 1e-15:
            raise ValueError(f"atom exponent {a.p} differs from p = {p}")
        rep = a.report()
        if not rep:
            raise ValueError(f"not an atom: {rep}")
    return X


def check_decomposition(f, p: float) -> AtomicDecomposition:
    if isinstance(f, Atom):
        f = AtomicDecomposition([(1.0, f)], f.p)
    if not isinstance(f, AtomicDecomposition):
        raise TypeError(f"expected AtomicDecomposition, got {type(f).__name__}")
    check_atoms([a for _, a in f.terms], p)
    return f
