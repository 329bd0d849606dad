"""Space-time covariance modeling and simple kriging of gridded residuals.

The covariance family is the isotropic product-sum model

    C(h_s, h_t) = k1*Cs(h_s) + k2*Ct(h_t) + k3*Cs(h_s)*Ct(h_t)

with unit-sill exponential components ``Cs(h) = exp(-h/r_s)`` and
``Ct(h) = exp(-h/r_t)`` plus a nugget at the origin.  Parameters are fit
by count-weighted least squares to the empirical semivariogram.  On a
complete location-by-time grid the joint covariance has Kronecker
structure: the product term is a Kronecker product and the two marginal
terms are low rank across the other factor, so large systems are solved
exactly via an eigendecomposition plus a Woodbury correction instead of a
dense factorization.
"""

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd
from scipy import linalg, optimize
from scipy.spatial.distance import cdist

from .exceptions import (
    ConditioningError,
    InvalidInputError,
    UnderdeterminedVariogramError,
)

MAX_GRID_POINTS = 20_000
DENSE_BACKEND_CAP = 4_096
_JITTER_REL = 1e-12


@dataclass(frozen=True)
class ProductSumCovariance:
    """Parameters of the product-sum space-time covariance."""

    k1: float
    k2: float
    k3: float
    r_s: float
    r_t: float
    nugget: float = 0.0

    def __post_init__(self):
        for name in ("k1", "k2", "k3", "nugget"):
            if getattr(self, name) < 0:
                raise InvalidInputError(f"{name} must be non-negative")
        if self.r_s <= 0 or self.r_t <= 0:
            raise InvalidInputError("ranges r_s and r_t must be positive")
        if self.k1 + self.k2 + self.k3 <= 0:
            raise InvalidInputError("total sill k1 + k2 + k3 must be positive")

    @property
    def sill(self):
        return self.k1 + self.k2 + self.k3

    def spatial_corr(self, h):
        return np.exp(-np.asarray(h, dtype=float) / self.r_s)

    def temporal_corr(self, h):
        return np.exp(-np.asarray(h, dtype=float) / self.r_t)

    def to_dict(self):
        return {
            "k1": self.k1,
            "k2": self.k2,
            "k3": self.k3,
            "r_s": self.r_s,
            "r_t": self.r_t,
            "nugget": self.nugget,
        }

    @classmethod
    def from_dict(cls, payload):
        return cls(**{k: float(payload[k]) for k in ("k1", "k2", "k3", "r_s", "r_t", "nugget")})


def covariance_eval(params, h_s, h_t):
    """Covariance at non-negative lags; the nugget enters only at the exact origin."""
    h_s = np.asarray(h_s, dtype=float)
    h_t = np.asarray(h_t, dtype=float)
    if np.any(h_s < 0) or np.any(h_t < 0):
        raise InvalidInputError("lags must be non-negative")
    cs = params.spatial_corr(h_s)
    ct = params.temporal_corr(h_t)
    value = params.k1 * cs + params.k2 * ct + params.k3 * cs * ct
    value = value + params.nugget * ((h_s == 0) & (h_t == 0))
    if value.ndim == 0:
        return float(value)
    return value


def semivariance_eval(params, h_s, h_t):
    """Model semivariogram: total sill (incl. nugget) minus the no-nugget covariance."""
    h_s = np.asarray(h_s, dtype=float)
    h_t = np.asarray(h_t, dtype=float)
    cs = params.spatial_corr(h_s)
    ct = params.temporal_corr(h_t)
    cov = params.k1 * cs + params.k2 * ct + params.k3 * cs * ct
    return params.sill + params.nugget - cov


@dataclass(frozen=True)
class EmpiricalVariogram:
    """Binned semivariance estimates on a (space bin) x (time lag) grid.

    ``gamma[b, l]`` averages half squared differences over point pairs
    whose spatial distance falls in bin ``b`` and whose time offset is the
    ``l``-th lag; ``mean_distance`` records the average spatial distance of
    the contributing pairs (bin centers where a cell is empty).
    """

    space_bin_edges: np.ndarray
    time_lags: np.ndarray
    gamma: np.ndarray
    counts: np.ndarray
    mean_distance: np.ndarray

    def to_frame(self):
        rows = []
        for b, l in itertools.product(range(self.gamma.shape[0]), range(self.gamma.shape[1])):
            rows.append(
                {
                    "h_s_center": self.mean_distance[b, l],
                    "h_t": self.time_lags[l],
                    "gamma": self.gamma[b, l],
                    "count": self.counts[b, l],
                }
            )
        return pd.DataFrame(rows)


def empirical_variogram(locations, times, values, n_space_bins=12, max_time_lag=10, space_bin_edges=None):
    """Empirical space-time semivariogram of a gridded field.

    Parameters
    ----------
    locations : (n, d) array
    times : (T,) equally spaced grid
    values : (n, T) array
        Field observed at every (location, time) pair.
    n_space_bins : int
        Number of equal-width distance bins spanning up to half the
        maximum pairwise distance (ignored when edges are given).
    max_time_lag : int
        Largest time-index lag considered (clipped to ``T - 1``).
    space_bin_edges : array, optional
        Explicit increasing bin edges starting at 0.
    """
    locations = np.asarray(locations, dtype=float)
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    n, T = values.shape
    if locations.shape[0] != n or times.size != T:
        raise InvalidInputError("values must be locations-by-times")
    if n < 2:
        raise InvalidInputError("need at least two locations")
    dt = 1.0
    if T > 1:
        steps = np.diff(times)
        if not np.allclose(steps, steps[0]):
            raise InvalidInputError("times must be equally spaced")
        dt = float(steps[0])

    D = cdist(locations, locations)
    if space_bin_edges is None:
        top = D.max() / 2.0
        if top <= 0:
            raise InvalidInputError("all locations coincide")
        edges = np.linspace(0.0, top, n_space_bins + 1)
    else:
        edges = np.asarray(space_bin_edges, dtype=float)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise InvalidInputError("space_bin_edges must be increasing with >= 2 entries")
    n_bins = edges.size - 1

    bin_idx = np.digitize(D, edges) - 1
    bin_idx[D == edges[-1]] = n_bins - 1
    valid = (bin_idx >= 0) & (bin_idx < n_bins) & (D <= edges[-1])

    n_lags = min(T - 1, int(max_time_lag)) + 1
    sq_sums = np.zeros((n_bins, n_lags))
    counts = np.zeros((n_bins, n_lags), dtype=np.int64)
    dist_sums = np.zeros((n_bins, n_lags))

    norms = np.einsum("it,it->i", values, values)
    iu, ju = np.triu_indices(n, k=1)
    for lag in range(n_lags):
        if lag == 0:
            cross = values @ values.T
            sq = norms[:, None] + norms[None, :] - 2.0 * cross
            mask = valid[iu, ju]
            bins = bin_idx[iu, ju][mask]
            contrib = sq[iu, ju][mask]
            dists = D[iu, ju][mask]
            pairs_per_entry = T
        else:
            if lag >= T:
                break
            A = values[:, : T - lag]
            B = values[:, lag:]
            na = np.einsum("it,it->i", A, A)
            nb = np.einsum("it,it->i", B, B)
            sq = na[:, None] + nb[None, :] - 2.0 * (A @ B.T)
            mask = valid.ravel()
            bins = bin_idx.ravel()[mask]
            contrib = sq.ravel()[mask]
            dists = D.ravel()[mask]
            pairs_per_entry = T - lag
        np.add.at(sq_sums[:, lag], bins, contrib)
        np.add.at(counts[:, lag], bins, pairs_per_entry)
        np.add.at(dist_sums[:, lag], bins, dists * pairs_per_entry)

    gamma = np.full((n_bins, n_lags), np.nan)
    mean_distance = np.tile(0.5 * (edges[:-1] + edges[1:])[:, None], (1, n_lags))
    populated = counts > 0
    gamma[populated] = sq_sums[populated] / (2.0 * counts[populated])
    mean_distance[populated] = dist_sums[populated] / counts[populated]
    time_lags = np.arange(n_lags) * dt
    return EmpiricalVariogram(
        space_bin_edges=edges,
        time_lags=time_lags,
        gamma=gamma,
        counts=counts,
        mean_distance=mean_distance,
    )


def _variogram_objective(emp):
    populated = emp.counts > 0
    h_s = emp.mean_distance[populated]
    h_t = np.broadcast_to(emp.time_lags, emp.gamma.shape)[populated]
    gamma = emp.gamma[populated]
    weights = emp.counts[populated].astype(float)
    weights = weights / weights.mean()
    gamma_scale = max(float(np.abs(gamma).max()), 1e-30)

    def objective(log_params):
        k1, k2, k3, r_s, r_t, nugget = np.exp(log_params)
        cs = np.exp(-h_s / r_s)
        ct = np.exp(-h_t / r_t)
        model = (k1 + k2 + k3 + nugget) - (k1 * cs + k2 * ct + k3 * cs * ct)
        return float(np.sum(weights * (model - gamma) ** 2)) / gamma_scale**2

    return objective, h_s, h_t, gamma


def fit_product_sum(emp, n_starts=5):
    """Least-squares fit of the product-sum model to an empirical variogram.

    Count-weighted squared error over the populated cells is minimized by
    Nelder-Mead on log-transformed parameters from several deterministic
    starting points; the best run is polished by restarting until it stops
    improving.
    """
    populated = emp.counts > 0
    lag_span = np.unique(np.nonzero(populated)[1]).size
    bin_span = np.unique(np.nonzero(populated)[0]).size
    if populated.sum() < 6 or lag_span < 2 or bin_span < 2:
        raise UnderdeterminedVariogramError(
            "need >= 6 populated cells spanning >= 2 time lags and >= 2 space bins"
        )
    objective, h_s, h_t, gamma = _variogram_objective(emp)

    sill0 = max(float(np.percentile(gamma, 80)), 1e-12)
    d_max = max(float(h_s.max()), 1e-6)
    t_max = max(float(h_t.max()), 1e-6)
    t_small = max(float(np.min(h_t[h_t > 0])) if np.any(h_t > 0) else 1.0, 1e-6)
    splits = [
        (0.45, 0.45, 0.10),
        (0.80, 0.10, 0.10),
        (0.10, 0.80, 0.10),
        (0.10, 0.10, 0.80),
        (1 / 3, 1 / 3, 1 / 3),
        (0.02, 0.02, 0.02),  # nugget-dominated start
    ]
    ranges = [(d_max / 3.0, t_max / 3.0), (d_max / 8.0, t_small)]
    starts = []
    for (a, b, c), (rs, rt) in itertools.product(splits, ranges):
        nug = max(sill0 * (1.0 - min(a + b + c, 0.98)), 1e-8)
        starts.append(np.log([sill0 * a, sill0 * b, sill0 * c, rs, rt, nug]))
    starts = starts[: max(int(n_starts), 5) * 2]

    options = {"maxiter": 4000, "maxfev": 6000, "xatol": 1e-9, "fatol": 1e-13, "adaptive": True}
    best = None
    for x0 in starts:
        res = optimize.minimize(objective, x0, method="Nelder-Mead", options=options)
        if best is None or res.fun < best.fun:
            best = res
    for _ in range(4):  # polish: restart from the incumbent until converged
        res = optimize.minimize(objective, best.x, method="Nelder-Mead", options=options)
        if res.fun >= best.fun - 1e-15:
            best = res if res.fun < best.fun else best
            break
        best = res

    k1, k2, k3, r_s, r_t, nugget = np.exp(best.x)
    floor = 1e-12 * max(k1 + k2 + k3 + nugget, 1e-12)
    if k1 + k2 + k3 <= 0 or not np.isfinite(k1 + k2 + k3):
        raise UnderdeterminedVariogramError("variogram fit collapsed to a zero covariance")
    return ProductSumCovariance(
        k1=max(k1, 0.0) if k1 > floor else 0.0,
        k2=max(k2, 0.0) if k2 > floor else 0.0,
        k3=max(k3, floor) if k3 > floor else floor,
        r_s=r_s,
        r_t=r_t,
        nugget=nugget if nugget > floor else 0.0,
    )


def grid_covariance_matrix(params, locations, times, include_nugget=True):
    """Dense joint covariance of a full grid, ordered location-major."""
    locations = np.asarray(locations, dtype=float)
    times = np.asarray(times, dtype=float)
    n, T = locations.shape[0], times.size
    Cs = params.spatial_corr(cdist(locations, locations))
    Ct = params.temporal_corr(np.abs(times[:, None] - times[None, :]))
    K = (
        params.k3 * Cs[:, None, :, None] * Ct[None, :, None, :]
        + params.k1 * np.broadcast_to(Cs[:, None, :, None], (n, T, n, T))
        + params.k2 * np.broadcast_to(Ct[None, :, None, :], (n, T, n, T))
    ).reshape(n * T, n * T)
    if include_nugget and params.nugget:
        K[np.diag_indices_from(K)] += params.nugget
    return K


class KrigingSystem:
    """Factorized simple-kriging system for a residual field on a full grid.

    The mean is known to be zero; predictions are ``c0' Sigma^{-1} r``
    computed through the precomputed dual weights ``Sigma^{-1} r``.  Small
    systems use a dense Cholesky factorization, large gridded ones an
    exact eigendecomposition-plus-Woodbury representation of the same
    matrix.
    """

    def __init__(self, params, locations, times, residuals, dense_cap=DENSE_BACKEND_CAP):
        self.params = params
        self.locations = np.asarray(locations, dtype=float)
        self.times = np.asarray(times, dtype=float)
        self.residuals = np.asarray(residuals, dtype=float)
        n, T = self.residuals.shape
        if self.locations.shape[0] != n or self.times.size != T:
            raise InvalidInputError("residuals must be locations-by-times")
        if n * T > MAX_GRID_POINTS:
            raise InvalidInputError(
                f"system has {n * T} points; the solver is capped at {MAX_GRID_POINTS}"
            )
        self._jitter = _JITTER_REL * (params.sill + params.nugget)
        self._sigma_diag_extra = params.nugget + self._jitter
        self.backend = "dense" if n * T <= dense_cap else "structured"
        if self.backend == "dense":
            self._factor_dense()
        else:
            self._factor_structured()
        self.alpha = self.solve(self.residuals)

    # -- factorizations ----------------------------------------------------
    def _factor_dense(self):
        K = grid_covariance_matrix(self.params, self.locations, self.times, include_nugget=False)
        K[np.diag_indices_from(K)] += self._sigma_diag_extra
        try:
            self._chol = linalg.cho_factor(K, lower=True, overwrite_a=True, check_finite=False)
        except linalg.LinAlgError as exc:
            raise ConditioningError(
                "joint covariance could not be factorized; raise the nugget floor"
            ) from exc

    def _factor_structured(self):
        p = self.params
        n, T = self.residuals.shape
        Cs = p.spatial_corr(cdist(self.locations, self.locations))
        Ct = p.temporal_corr(np.abs(self.times[:, None] - self.times[None, :]))
        lam_s, self._Us = linalg.eigh(Cs)
        lam_t, self._Ut = linalg.eigh(Ct)
        lam_s = np.clip(lam_s, 0.0, None)
        lam_t = np.clip(lam_t, 0.0, None)
        self._denom = p.k3 * np.outer(lam_s, lam_t) + self._sigma_diag_extra
        try:
            chol_jit = 1e-10 * max(1.0, float(np.trace(Cs)) / n)
            Ls = np.linalg.cholesky(Cs + chol_jit * np.eye(n))
            Lt = np.linalg.cholesky(Ct + chol_jit * np.eye(T))
        except np.linalg.LinAlgError as exc:
            raise ConditioningError("marginal correlation matrices are not positive definite") from exc
        self._Ls = np.sqrt(p.k1) * Ls
        self._Lt = np.sqrt(p.k2) * Lt

        # W holds M^{-1} applied to every low-rank column (n spatial + T temporal)
        W = np.empty((n + T, n, T))
        ones_T = np.ones(T)
        ones_n = np.ones(n)
        for a in range(n):
            W[a] = self._apply_minv(np.outer(self._Ls[:, a], ones_T))
        for b in range(T):
            W[n + b] = self._apply_minv(np.outer(ones_n, self._Lt[:, b]))
        core = np.eye(n + T)
        for b in range(n + T):
            u1 = self._Ls.T @ (W[b] @ ones_T)
            u2 = self._Lt.T @ (W[b].T @ ones_n)
            core[:, b] += np.concatenate([u1, u2])
        core = 0.5 * (core + core.T)
        try:
            self._core_chol = linalg.cho_factor(core, lower=True, check_finite=False)
        except linalg.LinAlgError as exc:
            raise ConditioningError("Woodbury core could not be factorized") from exc
        self._W = W

    def _apply_minv(self, R):
        inner = self._Us.T @ R @ self._Ut
        return self._Us @ (inner / self._denom) @ self._Ut.T

    # -- solves and predictions --------------------------------------------
    def solve(self, rhs):
        """Apply the inverse of the factorized joint covariance to a gridded field."""
        rhs = np.asarray(rhs, dtype=float)
        n, T = self.residuals.shape
        if rhs.shape != (n, T):
            raise InvalidInputError("rhs must match the residual grid shape")
        if self.backend == "dense":
            flat = linalg.cho_solve(self._chol, rhs.ravel(), check_finite=False)
            return flat.reshape(n, T)
        y = self._apply_minv(rhs)
        t1 = self._Ls.T @ (y @ np.ones(T))
        t2 = self._Lt.T @ (y.T @ np.ones(n))
        s = linalg.cho_solve(self._core_chol, np.concatenate([t1, t2]), check_finite=False)
        return y - np.tensordot(s, self._W, axes=(0, 0))

    def predict_grid(self, query_locations, query_times=None):
        """Kriged field values on a (query locations) x (query times) grid."""
        p = self.params
        query_locations = np.asarray(query_locations, dtype=float)
        q_times = self.times if query_times is None else np.asarray(query_times, dtype=float)
        a = p.spatial_corr(cdist(query_locations, self.locations))
        b = p.temporal_corr(np.abs(q_times[:, None] - self.times[None, :]))
        row = self.alpha.sum(axis=1)
        col = self.alpha.sum(axis=0)
        return (
            p.k1 * (a @ row)[:, None]
            + p.k2 * (b @ col)[None, :]
            + p.k3 * a @ self.alpha @ b.T
        )

    def predict_points(self, query_locations, query_times):
        """Kriged values at arbitrary (location, time) pairs."""
        p = self.params
        query_locations = np.asarray(query_locations, dtype=float)
        query_times = np.asarray(query_times, dtype=float)
        if query_locations.shape[0] != query_times.size:
            raise InvalidInputError("one query time per query location is required")
        a = p.spatial_corr(cdist(query_locations, self.locations))
        b = p.temporal_corr(np.abs(query_times[:, None] - self.times[None, :]))
        row = self.alpha.sum(axis=1)
        col = self.alpha.sum(axis=0)
        return (
            p.k1 * (a @ row)
            + p.k2 * (b @ col)
            + p.k3 * np.einsum("qn,nt,qt->q", a, self.alpha, b)
        )

    def predict_at_observed(self):
        """Kriged values at the observed grid: the residuals shrunk by the nugget."""
        return self.residuals - self._sigma_diag_extra * self.alpha

    def variance_points(self, query_locations, query_times):
        """Simple-kriging variance at (location, time) pairs (diagnostic)."""
        p = self.params
        query_locations = np.asarray(query_locations, dtype=float)
        query_times = np.asarray(query_times, dtype=float)
        a = p.spatial_corr(cdist(query_locations, self.locations))
        b = p.temporal_corr(np.abs(query_times[:, None] - self.times[None, :]))
        out = np.empty(query_times.size)
        for q in range(query_times.size):
            c0 = p.k1 * a[q][:, None] + p.k2 * b[q][None, :] + p.k3 * np.outer(a[q], b[q])
            out[q] = p.sill - float(np.sum(c0 * self.solve(c0)))
        return np.clip(out, 0.0, None)


def krige_predict(system, query_locations, query_times):
    """Functional wrapper over :meth:`KrigingSystem.predict_points`."""
    return system.predict_points(query_locations, query_times)
