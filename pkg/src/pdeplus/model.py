"""Two-pass fitting pipeline and the assembled spatio-temporal predictor.

Pass one estimates the inner-product mean, kriges its per-location
linear-fit residuals and subtracts the kriged random effect from the
response; pass two re-estimates the mean on that cleaned response.  The
final predictor adds the scaled mean (transferred to new sites by
nearest neighbors on the index values) to a kriging of the response
minus the fitted in-sample mean.
"""

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import STDataset, Standardization, build_covariates
from .exceptions import InvalidInputError
from .kriging import KrigingSystem, ProductSumCovariance, empirical_variogram, fit_product_sum
from .pde import PdeConfig, PdeFit, pde_fit
from .scaling import ScaledCoefficients, knn_transfer_batch, scale_fit

_FORMAT_VERSION = 1


@dataclass(frozen=True)
class PdePlusConfig:
    """All tuning parameters of the two-pass pipeline."""

    pde: PdeConfig = field(default_factory=PdeConfig)
    knn: int = 3
    n_space_bins: int = 12
    max_time_lag: int = 10
    variogram_starts: int = 5
    nugget_override: Optional[float] = None
    second_pass: bool = True
    suppress_mean: bool = False

    def to_dict(self):
        payload = {
            "knn": self.knn,
            "n_space_bins": self.n_space_bins,
            "max_time_lag": self.max_time_lag,
            "variogram_starts": self.variogram_starts,
            "nugget_override": self.nugget_override,
            "second_pass": self.second_pass,
            "suppress_mean": self.suppress_mean,
        }
        payload.update(
            {
                "kappa": self.pde.kappa,
                "h_y": self.pde.h_y,
                "h_x": self.pde.h_x,
                "delta": self.pde.delta,
                "max_iter": self.pde.max_iter,
                "n_slices": self.pde.n_slices,
                "init_method": self.pde.init_method,
                "mave_tol": self.pde.mave_tol,
                "mave_max_iter": self.pde.mave_max_iter,
                "step2_intercept": self.pde.step2_intercept,
            }
        )
        return payload

    @classmethod
    def from_dict(cls, payload):
        pde_keys = {
            "kappa",
            "h_y",
            "h_x",
            "delta",
            "max_iter",
            "n_slices",
            "init_method",
            "mave_tol",
            "mave_max_iter",
            "step2_intercept",
        }
        pde = PdeConfig(**{k: payload[k] for k in pde_keys if k in payload})
        own = {
            k: payload[k]
            for k in (
                "knn",
                "n_space_bins",
                "max_time_lag",
                "variogram_starts",
                "nugget_override",
                "second_pass",
                "suppress_mean",
            )
            if k in payload
        }
        return cls(pde=pde, **own)


@dataclass(frozen=True)
class PdePlusModel:
    """Fitted predictor: mean structure, scale factors and residual kriging system."""

    learn: STDataset
    config: PdePlusConfig
    pass1: Optional[PdeFit]
    pass2: Optional[PdeFit]
    scaled: Optional[ScaledCoefficients]
    covariance: ProductSumCovariance
    kriging_system: KrigingSystem
    residuals: np.ndarray
    u_hat_pass1: Optional[np.ndarray] = None

    @property
    def kappa(self):
        return 0 if self.pass2 is None else self.pass2.kappa

    @property
    def w_hats(self):
        return None if self.pass2 is None else self.pass2.w_hats

    @property
    def thetas_standardized(self):
        return None if self.pass2 is None else self.pass2.thetas

    @property
    def thetas(self):
        """Index directions re-expressed in the original covariate units."""
        if self.pass2 is None:
            return None
        record = self.learn.standardization
        if record is None:
            return self.pass2.thetas
        cols = [record.destandardize_direction(c) for c in self.pass2.thetas.T]
        return np.column_stack(cols)

    def query_covariates(self, locations, X=None):
        """Covariates for query locations mapped into the fitted coordinates."""
        raw = build_covariates(locations) if X is None else np.asarray(X, dtype=float)
        if raw.shape[1] != self.learn.n_covariates:
            raise InvalidInputError(
                f"query covariates have {raw.shape[1]} columns, expected {self.learn.n_covariates}"
            )
        record = self.learn.standardization
        return record.apply(raw) if record is not None else raw

    def mean_at(self, locations, X=None, time_index=None):
        """Scaled-mean component at query sites (zero when the mean is suppressed)."""
        locations = np.asarray(locations, dtype=float)
        n_times = self.learn.n_times if time_index is None else np.size(time_index)
        if self.pass2 is None:
            return np.zeros((locations.shape[0], n_times))
        x0 = self.query_covariates(locations, X=X)
        coeffs = knn_transfer_batch(self.scaled, self.pass2.thetas, x0, self.config.knn)
        W = self.pass2.w_hats if time_index is None else self.pass2.w_hats[np.atleast_1d(time_index)]
        return coeffs @ W.T


def _fit_covariance(residuals, dataset, config):
    emp = empirical_variogram(
        dataset.locations,
        dataset.times,
        residuals,
        n_space_bins=config.n_space_bins,
        max_time_lag=config.max_time_lag,
    )
    params = fit_product_sum(emp, n_starts=config.variogram_starts)
    if config.nugget_override is not None:
        params = ProductSumCovariance(
            k1=params.k1,
            k2=params.k2,
            k3=params.k3,
            r_s=params.r_s,
            r_t=params.r_t,
            nugget=float(config.nugget_override),
        )
    return params, emp


def pdeplus_fit(learn, config=None):
    """Fit the full predictor on a learning dataset.

    The covariates are standardized with learning-set statistics (unless
    the dataset already carries a record); all later queries reuse that
    record.
    """
    config = config or PdePlusConfig()
    learn = learn.standardized()
    Y = learn.Y

    if config.suppress_mean:
        params, _ = _fit_covariance(Y, learn, config)
        system = KrigingSystem(params, learn.locations, learn.times, Y)
        return PdePlusModel(
            learn=learn,
            config=config,
            pass1=None,
            pass2=None,
            scaled=None,
            covariance=params,
            kriging_system=system,
            residuals=Y,
        )

    pass1 = pde_fit(learn, config.pde)
    u_hat = None
    if config.second_pass:
        params1, _ = _fit_covariance(pass1.residuals, learn, config)
        system1 = KrigingSystem(params1, learn.locations, learn.times, pass1.residuals)
        u_hat = system1.predict_at_observed()
        cleaned = learn.with_response(Y - u_hat)
        pass2 = pde_fit(cleaned, config.pde)
        scaling_response = cleaned.Y
    else:
        pass2 = pass1
        scaling_response = Y

    index_values = learn.X @ pass2.thetas
    scaled = scale_fit(scaling_response, pass2.w_hats, pass2.g_hats, index_values)
    # residuals are taken against the mean exactly as the transfer rule
    # reproduces it in-sample, so whatever the neighbor average cannot
    # track is left for the kriging stage to pick up spatially
    coeffs_learn = knn_transfer_batch(scaled, pass2.thetas, learn.X, config.knn)
    mean_matrix = coeffs_learn @ pass2.w_hats.T
    residuals = Y - mean_matrix
    params, _ = _fit_covariance(residuals, learn, config)
    system = KrigingSystem(params, learn.locations, learn.times, residuals)
    return PdePlusModel(
        learn=learn,
        config=config,
        pass1=pass1,
        pass2=pass2,
        scaled=scaled,
        covariance=params,
        kriging_system=system,
        residuals=residuals,
        u_hat_pass1=u_hat,
    )


def pdeplus_predict(model, locations, X=None, time_index=None):
    """Predict the noiseless process at query sites.

    Returns an ``(n_query, T)`` matrix over the learning time grid, or
    over ``time_index`` (grid positions) when given.
    """
    locations = np.asarray(locations, dtype=float)
    if locations.ndim != 2 or locations.shape[1] != model.learn.locations.shape[1]:
        raise InvalidInputError("query locations must match the fitted coordinate dimension")
    mean = model.mean_at(locations, X=X, time_index=time_index)
    q_times = (
        model.learn.times
        if time_index is None
        else model.learn.times[np.atleast_1d(time_index)]
    )
    u = model.kriging_system.predict_grid(locations, q_times)
    return mean + u


def pdeplus_predict_points(model, locations, times, X=None):
    """Predictions for arbitrary (location, time) query rows.

    Every query time must be a point of the learning grid (the temporal
    basis is only defined there).
    """
    locations = np.asarray(locations, dtype=float)
    times = np.asarray(times, dtype=float)
    grid = model.learn.times
    idx = np.searchsorted(grid, times)
    idx = np.clip(idx, 0, grid.size - 1)
    if not np.allclose(grid[idx], times):
        raise InvalidInputError("query times must lie on the learning time grid")
    full = pdeplus_predict(model, locations, X=X)
    return full[np.arange(locations.shape[0]), idx]


def model_to_dict(model):
    """JSON-serializable representation sufficient to rebuild the predictor."""
    learn = model.learn
    payload = {
        "format_version": _FORMAT_VERSION,
        "config": model.config.to_dict(),
        "locations": learn.locations.tolist(),
        "times": learn.times.tolist(),
        "X": learn.X.tolist(),
        "covariance": model.covariance.to_dict(),
        "residuals": model.residuals.tolist(),
        "standardization": None
        if learn.standardization is None
        else {
            "mean": learn.standardization.mean.tolist(),
            "scale": learn.standardization.scale.tolist(),
        },
    }
    if model.pass2 is not None:
        payload["mean_structure"] = {
            "kappa": model.pass2.kappa,
            "w_hats": model.pass2.w_hats.tolist(),
            "thetas": model.pass2.thetas.tolist(),
            "g_hats": model.pass2.g_hats.tolist(),
            "b": model.scaled.b.tolist(),
            "f_tilde": model.scaled.f_tilde.tolist(),
            "index_values": model.scaled.index_values.tolist(),
        }
    return payload


def model_from_dict(payload):
    """Rebuild a fitted model (kriging system refactorized on load)."""
    if payload.get("format_version") != _FORMAT_VERSION:
        raise InvalidInputError("unsupported model format version")
    config = PdePlusConfig.from_dict(payload["config"])
    locations = np.asarray(payload["locations"], dtype=float)
    times = np.asarray(payload["times"], dtype=float)
    residuals = np.asarray(payload["residuals"], dtype=float)
    covariance = ProductSumCovariance.from_dict(payload["covariance"])
    std = payload.get("standardization")
    record = (
        None
        if std is None
        else Standardization(
            mean=np.asarray(std["mean"], dtype=float),
            scale=np.asarray(std["scale"], dtype=float),
        )
    )
    mean_part = payload.get("mean_structure")
    pass2 = None
    scaled = None
    if mean_part is not None:
        w_hats = np.asarray(mean_part["w_hats"], dtype=float)
        thetas = np.asarray(mean_part["thetas"], dtype=float)
        g_hats = np.asarray(mean_part["g_hats"], dtype=float)
        pass2 = PdeFit(
            kappa=int(mean_part["kappa"]),
            thetas=thetas,
            w_hats=w_hats,
            g_hats=g_hats,
            g_linear=g_hats,
            residuals=residuals,
            iterations=0,
            converged=True,
            step2_rss=np.asarray([]),
        )
        scaled = ScaledCoefficients(
            b=np.asarray(mean_part["b"], dtype=float),
            f_tilde=np.asarray(mean_part["f_tilde"], dtype=float),
            index_values=np.asarray(mean_part["index_values"], dtype=float),
        )
    X = np.asarray(payload["X"], dtype=float)
    learn = STDataset(
        locations=locations,
        times=times,
        Y=residuals,  # placeholder response; predictions never read it
        X=X,
        standardization=record,
    )
    system = KrigingSystem(covariance, locations, times, residuals)
    return PdePlusModel(
        learn=learn,
        config=config,
        pass1=None,
        pass2=pass2,
        scaled=scaled,
        covariance=covariance,
        kriging_system=system,
        residuals=residuals,
    )


def save_model(model, path):
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh)


def load_model(path):
    with open(path) as fh:
        return model_from_dict(json.load(fh))
