"""Synthetic data generators for the two benchmark settings.

Both draw locations uniformly on ``[-1, 1]^2`` with ``T = 20`` time
points and a rank-two inner-product mean whose index directions are
``(0.5, 0.5, 0.5, 0.5)`` and ``(-0.5, -0.5, 0.5, 0.5)`` in the
coordinate/square covariates.  The first setting adds a random effect
that is independent across time with an exponential spatial covariance;
the second draws the effect from the full space-time product-sum
covariance.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .data import STDataset, build_covariates
from .exceptions import InvalidInputError
from .kriging import ProductSumCovariance, grid_covariance_matrix

TRUE_THETAS = np.array(
    [
        [0.5, -0.5],
        [0.5, -0.5],
        [0.5, 0.5],
        [0.5, 0.5],
    ]
)

EXAMPLE2_COVARIANCE = ProductSumCovariance(k1=1.0, k2=0.5, k3=0.25, r_s=2.0, r_t=1.25)

_CHOL_JITTER = 1e-10


@dataclass(frozen=True)
class SimTruth:
    """Ground-truth components behind a simulated dataset (Y = mean + u + noise)."""

    thetas: np.ndarray
    mean: np.ndarray
    u: np.ndarray
    noise: np.ndarray
    example: int


def _draw_locations(n, T, rng):
    if n < 10:
        raise InvalidInputError("need at least 10 locations")
    locations = rng.uniform(-1.0, 1.0, size=(n, 2))
    times = np.arange(1.0, T + 1.0)
    return locations, times


def example1_mean(locations, times):
    """Quadratic-in-time and sine-in-time components with trigonometric spatial bumps."""
    d1 = np.sum((locations - np.array([-0.5, -0.5])) ** 2, axis=1)
    d2 = np.sum((locations - np.array([0.5, 0.5])) ** 2, axis=1)
    f1 = np.cos(0.5 * np.pi * d1)
    f2 = np.sin(0.5 * np.pi * d2)
    w1 = (0.5 * times - 5.0) ** 2
    w2 = 5.0 * np.sin(0.1 * np.pi * times)
    return np.outer(f1, w1) + np.outer(f2, w2)


def example2_mean(locations, times):
    """Arctangent and log-quadratic temporal components with sharper spatial features."""
    d1 = np.sum((locations - np.array([-0.5, -0.5])) ** 2, axis=1)
    d2 = np.sum((locations - np.array([0.5, 0.5])) ** 2, axis=1)
    f1 = 15.0 / (-0.75 + np.exp(d1))
    f2 = 1.5 * (-2.0 + d2) ** 2
    w1 = np.arctan(0.1 * np.pi * times)
    w2 = 2.0 * np.log(0.75 + (0.1 * times - 1.0) ** 2)
    return np.outer(f1, w1) + np.outer(f2, w2)


def _chol(C):
    try:
        return np.linalg.cholesky(C)
    except np.linalg.LinAlgError:
        return np.linalg.cholesky(C + _CHOL_JITTER * np.eye(C.shape[0]))


def gen_example1(n, seed, T=20):
    """First benchmark generator: time-independent spatial random effect, noise var 0.25."""
    rng = np.random.default_rng(seed)
    locations, times = _draw_locations(n, T, rng)
    mean = example1_mean(locations, times)
    L = _chol(np.exp(-0.5 * cdist(locations, locations)))
    u = L @ rng.standard_normal(size=(n, T))
    noise = rng.normal(0.0, 0.5, size=(n, T))
    Y = mean + u + noise
    dataset = STDataset(locations=locations, times=times, Y=Y, X=build_covariates(locations))
    truth = SimTruth(thetas=TRUE_THETAS.copy(), mean=mean, u=u, noise=noise, example=1)
    return dataset, truth


def gen_example2(n, seed, T=20):
    """Second benchmark generator: full product-sum random effect, noise var 0.5."""
    rng = np.random.default_rng(seed)
    locations, times = _draw_locations(n, T, rng)
    mean = example2_mean(locations, times)
    C = grid_covariance_matrix(EXAMPLE2_COVARIANCE, locations, times, include_nugget=False)
    L = _chol(C)
    u = (L @ rng.standard_normal(size=n * T)).reshape(n, T)
    noise = rng.normal(0.0, np.sqrt(0.5), size=(n, T))
    Y = mean + u + noise
    dataset = STDataset(locations=locations, times=times, Y=Y, X=build_covariates(locations))
    truth = SimTruth(thetas=TRUE_THETAS.copy(), mean=mean, u=u, noise=noise, example=2)
    return dataset, truth


def generate(example, n, seed, T=20):
    if example == 1:
        return gen_example1(n, seed, T=T)
    if example == 2:
        return gen_example2(n, seed, T=T)
    raise InvalidInputError(f"unknown example tag {example!r}")
