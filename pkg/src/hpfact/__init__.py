"""Weak factorization of Hardy spaces through bilinear Calderon-Zygmund operators, on grids."""

from .grid import Ball, GridFunction, GridSpec, indicator, integrate, lp_norm, average_on_ball
from .atoms import (
    Atom,
    AtomicDecomposition,
    TwoBumpFunction,
    atomic_quasinorm,
    lip_seminorm,
    two_bump_decompose,
    validate_atom,
)
from .kernels import KernelSpec, SeparatedConfig, builtin_riesz_kernel
from .operators import apply_T, apply_partial_adjoint, set_threads
from .factorization import ExponentSystem, approximate_atom, pi_l, uchiyama_factorize
from .commutator import LipFunction, apply_commutator, duality_pairing_check
from .estimators import AtomApproximator, CommutatorNormEstimator, TwoBumpDecomposer, UchiyamaFactorizer

__version__ = "0.1.0"

__all__ = [
    "Ball", "GridFunction", "GridSpec", "indicator", "integrate", "lp_norm", "average_on_ball",
    "Atom", "AtomicDecomposition", "TwoBumpFunction", "atomic_quasinorm", "lip_seminorm",
    "two_bump_decompose", "validate_atom",
    "KernelSpec", "SeparatedConfig", "builtin_riesz_kernel",
    "apply_T", "apply_partial_adjoint", "set_threads",
    "ExponentSystem", "approximate_atom", "pi_l", "uchiyama_factorize",
    "LipFunction", "apply_commutator", "duality_pairing_check",
    "AtomApproximator", "CommutatorNormEstimator", "TwoBumpDecomposer", "UchiyamaFactorizer",
]
