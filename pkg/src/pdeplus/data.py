"""Dataset container, spatial covariate construction, standardization and splitting.

A spatio-temporal dataset couples ``n`` locations with a shared, equally
spaced time grid of length ``T``.  The response is stored as an ``n x T``
matrix ``Y`` with ``Y[i, t] = y(s_i, t)``, and every location carries a
spatial-only covariate vector; by default these are the coordinates and
their squares.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from .exceptions import DegenerateColumnError, InvalidInputError
from .validation import check_locations, check_matrix, check_response

_STD_TOL = 1e-10


@dataclass(frozen=True)
class Standardization:
    """Per-column centering/scaling record, kept so query covariates can be mapped."""

    mean: np.ndarray
    scale: np.ndarray

    def apply(self, X):
        """Standardize new rows with the stored statistics."""
        X = np.asarray(X, dtype=float)
        return (X - self.mean) / self.scale

    def invert(self, Z):
        """Map standardized rows back to the original covariate units."""
        Z = np.asarray(Z, dtype=float)
        return Z * self.scale + self.mean

    def destandardize_direction(self, beta):
        """Re-express a direction fitted on standardized covariates in original units.

        The index ``beta' z`` with ``z = (x - mean)/scale`` equals, up to a
        constant, ``(beta/scale)' x``; the returned vector is that rescaled
        direction with unit Euclidean norm.
        """
        raw = np.asarray(beta, dtype=float) / self.scale
        nrm = np.linalg.norm(raw)
        if nrm == 0:
            raise InvalidInputError("cannot rescale a zero direction")
        return raw / nrm


@dataclass(frozen=True)
class STDataset:
    """Immutable spatio-temporal dataset.

    Attributes
    ----------
    locations : (n, d) array
        Site coordinates; never standardized so that kriging distances stay
        in the original geographic units.
    times : (T,) array
        Strictly increasing, equally spaced time grid (defaults to ``1..T``).
    Y : (n, T) array
        Response matrix, ``Y[i, t] = y(s_i, times[t])``.
    X : (n, p) array
        Spatial-only covariates.
    standardization : Standardization, optional
        Present when ``X`` is stored in standardized form.
    """

    locations: np.ndarray
    times: np.ndarray
    Y: np.ndarray
    X: np.ndarray
    standardization: Optional[Standardization] = field(default=None)

    def __post_init__(self):
        locations = check_locations(self.locations)
        Y = check_response(self.Y, locations.shape[0])
        X = check_matrix(self.X, "X")
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or times.size != Y.shape[1]:
            raise InvalidInputError("times must be a 1-d grid matching Y's columns")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise InvalidInputError("times must be strictly increasing")
        if X.shape[0] != locations.shape[0]:
            raise InvalidInputError("X and locations disagree on the number of rows")
        if X.shape[1] < 1:
            raise InvalidInputError("X needs at least one column")
        if self.standardization is not None:
            if np.any(np.abs(X.mean(axis=0)) > _STD_TOL):
                raise InvalidInputError("standardized X must have zero column means")
            sd = X.std(axis=0, ddof=1)
            if np.any(np.abs(sd - 1.0) > _STD_TOL):
                raise InvalidInputError("standardized X must have unit column scales")
        object.__setattr__(self, "locations", locations)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "X", X)

    @property
    def n(self):
        return self.locations.shape[0]

    @property
    def n_times(self):
        return self.times.size

    @property
    def n_covariates(self):
        return self.X.shape[1]

    def subset(self, indices):
        """Dataset restricted to a set of location indices (time grid kept)."""
        idx = np.asarray(indices, dtype=int)
        return STDataset(
            locations=self.locations[idx],
            times=self.times,
            Y=self.Y[idx],
            X=self.X[idx],
            standardization=self.standardization,
        )

    def with_response(self, Y):
        """Same sites and covariates with a replacement response matrix."""
        return STDataset(
            locations=self.locations,
            times=self.times,
            Y=np.asarray(Y, dtype=float),
            X=self.X,
            standardization=self.standardization,
        )

    def standardized(self):
        """Copy with standardized covariates (no-op when already recorded)."""
        if self.standardization is not None:
            return self
        Xs, record = standardize_covariates(self.X)
        return STDataset(self.locations, self.times, self.Y, Xs, record)


@dataclass(frozen=True)
class SplitIndices:
    """Disjoint learn/test location index sets partitioning ``0..n-1``."""

    learn: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        learn = np.asarray(self.learn, dtype=int)
        test = np.asarray(self.test, dtype=int)
        if learn.size < 2 or test.size < 1:
            raise InvalidInputError("learn set needs >= 2 sites and test set >= 1")
        combined = np.concatenate([learn, test])
        n = combined.size
        if np.intersect1d(learn, test).size or not np.array_equal(
            np.sort(combined), np.arange(n)
        ):
            raise InvalidInputError("learn/test must partition 0..n-1")
        object.__setattr__(self, "learn", learn)
        object.__setattr__(self, "test", test)


def build_covariates(locations):
    """Stack coordinates with their squares: ``x(s) = (s_1..s_d, s_1^2..s_d^2)``.

    Parameters
    ----------
    locations : (n, d) array

    Returns
    -------
    (n, 2d) array
    """
    locations = check_matrix(locations, "locations")
    return np.hstack([locations, locations**2])


def standardize_covariates(X):
    """Center and scale each column to mean 0 and standard deviation 1 (ddof=1).

    Returns the standardized matrix together with the per-column
    :class:`Standardization` record needed to map query points.

    Raises
    ------
    DegenerateColumnError
        If any column is constant.
    """
    X = check_matrix(X, "X")
    mean = X.mean(axis=0)
    scale = X.std(axis=0, ddof=1)
    bad = np.flatnonzero(scale == 0)
    if bad.size:
        raise DegenerateColumnError(
            f"covariate column(s) {bad.tolist()} are constant and cannot be standardized"
        )
    record = Standardization(mean=mean, scale=scale)
    return (X - mean) / scale, record


def split_learn_test(dataset, test_fraction, seed):
    """Simple random learn/test split of the locations.

    The test set has ``round(test_fraction * n)`` sites, drawn without
    replacement; the draw is deterministic for a given ``seed``.
    """
    if not 0.0 < float(test_fraction) < 1.0:
        raise InvalidInputError(f"test_fraction must lie in (0, 1), got {test_fraction!r}")
    n = dataset.n
    n_test = int(np.rint(test_fraction * n))
    if n_test < 1 or n - n_test < 2:
        raise InvalidInputError(
            f"split of n={n} at fraction {test_fraction} leaves too few sites"
        )
    rng = np.random.default_rng(seed)
    test = np.sort(rng.choice(n, size=n_test, replace=False))
    learn = np.setdiff1d(np.arange(n), test)
    return SplitIndices(learn=learn, test=test)


def dataset_from_long_frame(frame, covariates=None):
    """Build an :class:`STDataset` from a long-format table.

    Parameters
    ----------
    frame : DataFrame with columns ``id, s1, s2, t, y``
        One row per (location, time); every id must carry the identical
        time grid.
    covariates : DataFrame with columns ``id, x1..xp``, optional
        Explicit covariates per id; when omitted the coordinate/square
        covariates are derived from the locations.
    """
    required = {"id", "s1", "s2", "t", "y"}
    missing = required - set(frame.columns)
    if missing:
        raise InvalidInputError(f"long-format data is missing columns {sorted(missing)}")
    ids = frame["id"].unique()
    times = None
    rows_y = []
    coords = []
    for the_id, group in frame.groupby("id", sort=False):
        group = group.sort_values("t")
        t_grid = group["t"].to_numpy(dtype=float)
        if times is None:
            times = t_grid
        elif t_grid.shape != times.shape or not np.allclose(t_grid, times):
            raise InvalidInputError(f"id {the_id!r} has a different time grid")
        loc = group[["s1", "s2"]].to_numpy(dtype=float)
        if not np.allclose(loc, loc[0]):
            raise InvalidInputError(f"id {the_id!r} moves between rows; locations must be static")
        coords.append(loc[0])
        rows_y.append(group["y"].to_numpy(dtype=float))
    locations = np.asarray(coords)
    Y = np.asarray(rows_y)
    if covariates is not None:
        if "id" not in covariates.columns:
            raise InvalidInputError("covariate table needs an 'id' column")
        cov = covariates.set_index("id").loc[ids]
        X = cov.to_numpy(dtype=float)
    else:
        X = build_covariates(locations)
    return STDataset(locations=locations, times=times, Y=Y, X=X)


def load_long_csv(path, covariates_path=None):
    """Read a long-format CSV (``id,s1,s2,t,y``) into an :class:`STDataset`."""
    frame = pd.read_csv(path)
    covariates = pd.read_csv(covariates_path) if covariates_path else None
    return dataset_from_long_frame(frame, covariates)


def dataset_to_long_frame(dataset, ids=None):
    """Flatten a dataset into the long ``id,s1,s2,t,y`` layout."""
    n, T = dataset.Y.shape
    if ids is None:
        ids = np.arange(n)
    ids = np.asarray(ids)
    return pd.DataFrame(
        {
            "id": np.repeat(ids, T),
            "s1": np.repeat(dataset.locations[:, 0], T),
            "s2": np.repeat(dataset.locations[:, 1], T),
            "t": np.tile(dataset.times, n),
            "y": dataset.Y.ravel(),
        }
    )


def save_long_csv(dataset, path, ids=None):
    dataset_to_long_frame(dataset, ids=ids).to_csv(path, index=False)
