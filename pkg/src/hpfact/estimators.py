"""scikit-learn style wrappers over the functional core.

Hyperparameters live in ``__init__`` (so ``get_params``/``set_params`` and
``clone`` work); fitted state ends with an underscore.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .atoms import atomic_quasinorm, quasinorm_p, two_bump_decompose
from .commutator import LipFunction, estimate_commutator_norm
from .factorization import ExponentSystem, approximate_atom, factorization_norm, uchiyama_factorize
from .validation import (
    check_atoms,
    check_decomposition,
    check_kernel,
    check_positive_int,
    check_separation,
    check_slot,
    check_two_bumps,
)


class TwoBumpDecomposer(TransformerMixin, BaseEstimator):
    """Map two-bump functions to their telescoping atomic decompositions."""

    def __init__(self, p: float = 0.75):
        self.p = p

    def fit(self, X, y=None):
        X = check_two_bumps(X)
        self.n_features_in_ = X[0].fn.spec.dim if X else 1
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        return [two_bump_decompose(f, self.p) for f in check_two_bumps(X)]

    def score(self, X, y=None) -> float:
        """Negative mean of quasinorm^p over the stated envelope (higher is tighter)."""
        ds = self.transform(X)
        return -float(np.mean([quasinorm_p(d) / d.envelopes()["stated"] for d in ds]))


class AtomApproximator(TransformerMixin, BaseEstimator):
    """Approximate atoms by single ``Pi_l`` terms; ``transform`` returns the errors."""

    def __init__(self, kernel="riesz", slot: int = 2, N: int = 32, p: float = 0.75):
        self.kernel = kernel
        self.slot = slot
        self.N = N
        self.p = p

    def _setup(self, atoms):
        atoms = check_atoms(atoms, self.p)
        dim = atoms[0].spec.dim if atoms else 1
        return atoms, check_kernel(self.kernel, dim), check_slot(self.slot), check_separation(self.N)

    def fit(self, X, y=None):
        atoms, K, l, N = self._setup(X)
        exps = ExponentSystem.balanced(self.p)
        self.approximations_ = [approximate_atom(K, a, exps, l, N) for a in atoms]
        self.triples_ = [ap.triple for ap in self.approximations_]
        return self

    def transform(self, X):
        check_is_fitted(self, "triples_")
        atoms, K, l, N = self._setup(X)
        exps = ExponentSystem.balanced(self.p)
        return [approximate_atom(K, a, exps, l, N).error for a in atoms]


class UchiyamaFactorizer(BaseEstimator):
    """Iterated weak factorization of an atomic decomposition."""

    def __init__(
        self,
        kernel="riesz",
        slot: int = 2,
        N: int = 32,
        max_rounds: int = 3,
        stop_tol: float = 0.0,
        p: float = 0.75,
        points_per_radius: int | None = None,
    ):
        self.kernel = kernel
        self.slot = slot
        self.N = N
        self.max_rounds = max_rounds
        self.stop_tol = stop_tol
        self.p = p
        self.points_per_radius = points_per_radius

    def fit(self, X, y=None):
        f = check_decomposition(X, self.p)
        dim = f.terms[0][1].spec.dim if f.terms else 1
        K = check_kernel(self.kernel, dim)
        rounds = check_positive_int(self.max_rounds, "max_rounds")
        self.result_ = uchiyama_factorize(
            K, check_slot(self.slot), f, ExponentSystem.balanced(self.p), check_separation(self.N),
            rounds, float(self.stop_tol), self.points_per_radius,
        )
        self.error_norms_ = np.asarray(self.result_.error_norms)
        self.contraction_ratios_ = np.asarray(self.result_.contraction_ratios)
        self.factorization_norm_ = factorization_norm(self.result_)
        self.input_quasinorm_ = atomic_quasinorm(f)
        return self

    def transform(self, X=None):
        check_is_fitted(self, "result_")
        return self.result_


class CommutatorNormEstimator(BaseEstimator):
    """Estimate ``||[b, T]_l||`` for symbols ``b``; ``predict`` returns estimate / seminorm."""

    def __init__(self, kernel="riesz", slot: int = 2, p: float = 0.75, trial_count: int = 256, seed: int = 0):
        self.kernel = kernel
        self.slot = slot
        self.p = p
        self.trial_count = trial_count
        self.seed = seed

    def _estimate(self, X):
        X = [X] if isinstance(X, LipFunction) else list(X)
        out = []
        for b in X:
            if not isinstance(b, LipFunction):
                raise TypeError(f"expected LipFunction, got {type(b).__name__}")
            K = check_kernel(self.kernel, b.fn.spec.dim)
            n = check_positive_int(self.trial_count, "trial_count", 1)
            out.append(
                estimate_commutator_norm(K, check_slot(self.slot), b, ExponentSystem.balanced(self.p), n, self.seed)
            )
        return np.asarray(out), X

    def fit(self, X, y=None):
        est, X = self._estimate(X)
        self.estimates_ = est
        self.seminorms_ = np.array([b.seminorm_est for b in X])
        return self

    def predict(self, X):
        check_is_fitted(self, "estimates_")
        est, X = self._estimate(X)
        sem = np.array([b.seminorm_est for b in X])
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(sem > 0, est / sem, 0.0)
