"""Comparison predictors: per-time naive mean and ordinary space-time kriging."""

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist

from .exceptions import ConditioningError, InvalidInputError
from .kriging import (
    empirical_variogram,
    fit_product_sum,
    grid_covariance_matrix,
)

_OK_MAX_POINTS = 8_192


def naive_predict(learn_Y, time_index=None):
    """Sample mean of the learning locations at each time (constant over space)."""
    Y = np.asarray(learn_Y, dtype=float)
    means = Y.mean(axis=0)
    if time_index is None:
        return means
    return means[np.atleast_1d(time_index)] if np.ndim(time_index) else float(means[time_index])


class OrdinaryKrigingModel:
    """Constant-mean space-time kriging fitted to the raw response.

    The product-sum covariance is fit to the empirical variogram of the
    response itself; predictions solve the weight system augmented with
    the sum-to-one constraint through a Lagrange multiplier.
    """

    def __init__(self, dataset, n_space_bins=12, max_time_lag=10, n_starts=5):
        n, T = dataset.Y.shape
        if n * T > _OK_MAX_POINTS:
            raise InvalidInputError(
                f"ordinary kriging is capped at {_OK_MAX_POINTS} grid points, got {n * T}"
            )
        emp = empirical_variogram(
            dataset.locations,
            dataset.times,
            dataset.Y,
            n_space_bins=n_space_bins,
            max_time_lag=max_time_lag,
        )
        self.covariance = fit_product_sum(emp, n_starts=n_starts)
        self.locations = dataset.locations
        self.times = dataset.times
        self.y_flat = dataset.Y.ravel()
        K = grid_covariance_matrix(self.covariance, dataset.locations, dataset.times)
        K[np.diag_indices_from(K)] += 1e-10 * (self.covariance.sill + self.covariance.nugget)
        m = n * T
        A = np.empty((m + 1, m + 1))
        A[:m, :m] = K
        A[m, :m] = 1.0
        A[:m, m] = 1.0
        A[m, m] = 0.0
        try:
            self._lu = linalg.lu_factor(A, check_finite=False)
        except (linalg.LinAlgError, ValueError) as exc:
            raise ConditioningError("ordinary-kriging system could not be factorized") from exc

    def _cross_covariance(self, query_locations, query_times):
        p = self.covariance
        a = p.spatial_corr(cdist(query_locations, self.locations))
        b = p.temporal_corr(np.abs(query_times[:, None] - self.times[None, :]))
        # c0[q, (i, t)] laid out location-major to match the system ordering
        c0 = (
            p.k1 * a[:, :, None]
            + p.k2 * b[:, None, :]
            + p.k3 * a[:, :, None] * b[:, None, :]
        )
        return c0.reshape(query_locations.shape[0], -1)

    def weights(self, query_locations, query_times):
        """Kriging weights (rows) and Lagrange multipliers for point queries."""
        query_locations = np.asarray(query_locations, dtype=float)
        query_times = np.asarray(query_times, dtype=float)
        c0 = self._cross_covariance(query_locations, query_times)
        rhs = np.hstack([c0, np.ones((c0.shape[0], 1))])
        sol = linalg.lu_solve(self._lu, rhs.T, check_finite=False).T
        return sol[:, :-1], sol[:, -1]

    def predict_points(self, query_locations, query_times):
        w, _ = self.weights(query_locations, query_times)
        return w @ self.y_flat

    def predict_grid(self, query_locations, query_times=None):
        query_locations = np.asarray(query_locations, dtype=float)
        q_times = self.times if query_times is None else np.asarray(query_times, dtype=float)
        locs = np.repeat(query_locations, q_times.size, axis=0)
        times = np.tile(q_times, query_locations.shape[0])
        flat = self.predict_points(locs, times)
        return flat.reshape(query_locations.shape[0], q_times.size)


def ordinary_kriging_fit_predict(learn, query_locations, query_times=None, **kwargs):
    """Fit on the learning data and predict a (locations x times) grid."""
    model = OrdinaryKrigingModel(learn, **kwargs)
    return model.predict_grid(query_locations, query_times)
