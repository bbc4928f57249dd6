import numpy as np
import pytest

from hpfact.grid import Ball, GridFunction, GridSpec, indicator, pointwise_multiply
from hpfact.kernels import builtin_riesz_kernel


@pytest.fixture(scope="session")
def K1():
    return builtin_riesz_kernel(1, 1)


@pytest.fixture(scope="session")
def K2():
    return builtin_riesz_kernel(2, 1)


@pytest.fixture
def small_spec():
    return GridSpec(1, 2.0, 1 / 16)


def bump(spec, center, r, rng):
    """Random affine profile on a discrete ball."""
    chi = indicator(spec, Ball(tuple(center), r))
    w = rng.normal(size=spec.dim + 1)
    prof = GridFunction.from_callable(spec, lambda x: w[0] + (x - np.asarray(center)) @ w[1:], chi.support)
    return pointwise_multiply(chi, prof)
