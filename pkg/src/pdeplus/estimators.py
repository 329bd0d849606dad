"""Estimator-style wrappers with a fit/predict surface.

Each estimator consumes an ``(n, 2)`` matrix of site coordinates and an
``(n, T)`` response matrix of curves on a shared time grid, and predicts
full curves at new sites.  Hyperparameters are plain constructor
arguments so ``get_params``/``set_params`` and grid-search tooling work
as usual.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .baselines import OrdinaryKrigingModel, naive_predict
from .data import STDataset, build_covariates
from .model import PdePlusConfig, pdeplus_fit, pdeplus_predict
from .pde import PdeConfig
from .validation import check_locations, check_response


def _assemble_dataset(locations, Y, X=None, times=None):
    locations = check_locations(locations)
    Y = check_response(Y, locations.shape[0])
    if times is None:
        times = np.arange(1.0, Y.shape[1] + 1.0)
    if X is None:
        X = build_covariates(locations)
    return STDataset(locations=locations, times=times, Y=Y, X=np.asarray(X, dtype=float))


class PdePlusRegressor(RegressorMixin, BaseEstimator):
    """Inner-product mean estimation plus residual space-time kriging.

    Parameters
    ----------
    kappa : int, optional
        Number of mean components; chosen from the initializer eigenvalue
        profile when None.
    h_y, h_x : float, optional
        Kernel bandwidths for the curve index and the covariate index
        (Silverman's rule when None).
    delta : float
        Convergence tolerance on successive basis changes.
    max_iter : int
        Cap on basis iterations.
    n_slices : int
        Slice count for the inverse-regression initializer.
    init_method : {'mrSIR', 'pe-mrPHD', 'both'}
    knn : int
        Neighbor count for transferring scaled coefficients to new sites.
    n_space_bins, max_time_lag, variogram_starts : int
        Empirical-variogram and covariance-fit controls.
    nugget_override : float, optional
        Replaces the fitted nugget (useful for exact interpolation).
    second_pass : bool
        Disable to keep the plain one-pass fit (diagnostic ablation).
    suppress_mean : bool
        Skip the mean entirely and krige the raw response.
    """

    def __init__(
        self,
        kappa=None,
        h_y=None,
        h_x=None,
        delta=1e-3,
        max_iter=100,
        n_slices=10,
        init_method="both",
        knn=3,
        n_space_bins=12,
        max_time_lag=10,
        variogram_starts=5,
        nugget_override=None,
        second_pass=True,
        suppress_mean=False,
    ):
        self.kappa = kappa
        self.h_y = h_y
        self.h_x = h_x
        self.delta = delta
        self.max_iter = max_iter
        self.n_slices = n_slices
        self.init_method = init_method
        self.knn = knn
        self.n_space_bins = n_space_bins
        self.max_time_lag = max_time_lag
        self.variogram_starts = variogram_starts
        self.nugget_override = nugget_override
        self.second_pass = second_pass
        self.suppress_mean = suppress_mean

    def _config(self):
        return PdePlusConfig(
            pde=PdeConfig(
                kappa=self.kappa,
                h_y=self.h_y,
                h_x=self.h_x,
                delta=self.delta,
                max_iter=self.max_iter,
                n_slices=self.n_slices,
                init_method=self.init_method,
            ),
            knn=self.knn,
            n_space_bins=self.n_space_bins,
            max_time_lag=self.max_time_lag,
            variogram_starts=self.variogram_starts,
            nugget_override=self.nugget_override,
            second_pass=self.second_pass,
            suppress_mean=self.suppress_mean,
        )

    def fit(self, locations, Y, X=None, times=None):
        dataset = _assemble_dataset(locations, Y, X=X, times=times)
        self.model_ = pdeplus_fit(dataset, self._config())
        self.n_features_in_ = dataset.locations.shape[1]
        self.kappa_ = self.model_.kappa
        self.w_hats_ = self.model_.w_hats
        self.thetas_ = self.model_.thetas
        self.covariance_ = self.model_.covariance
        return self

    def predict(self, locations, X=None):
        check_is_fitted(self, "model_")
        return pdeplus_predict(self.model_, np.asarray(locations, dtype=float), X=X)


class NaiveMeanRegressor(RegressorMixin, BaseEstimator):
    """Predicts the learning-set mean curve at every query site."""

    def fit(self, locations, Y, X=None, times=None):
        dataset = _assemble_dataset(locations, Y, X=X, times=times)
        self.mean_curve_ = naive_predict(dataset.Y)
        self.n_features_in_ = dataset.locations.shape[1]
        return self

    def predict(self, locations, X=None):
        check_is_fitted(self, "mean_curve_")
        locations = np.asarray(locations, dtype=float)
        return np.tile(self.mean_curve_, (locations.shape[0], 1))


class OrdinaryKrigingRegressor(RegressorMixin, BaseEstimator):
    """Constant-mean space-time kriging of the raw response."""

    def __init__(self, n_space_bins=12, max_time_lag=10, variogram_starts=5):
        self.n_space_bins = n_space_bins
        self.max_time_lag = max_time_lag
        self.variogram_starts = variogram_starts

    def fit(self, locations, Y, X=None, times=None):
        dataset = _assemble_dataset(locations, Y, X=X, times=times)
        self.model_ = OrdinaryKrigingModel(
            dataset,
            n_space_bins=self.n_space_bins,
            max_time_lag=self.max_time_lag,
            n_starts=self.variogram_starts,
        )
        self.covariance_ = self.model_.covariance
        self.n_features_in_ = dataset.locations.shape[1]
        return self

    def predict(self, locations, X=None):
        check_is_fitted(self, "model_")
        return self.model_.predict_grid(np.asarray(locations, dtype=float))
