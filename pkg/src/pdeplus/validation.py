"""Input validation helpers used by the estimators and pipeline functions."""

import numpy as np

from .exceptions import InvalidInputError


def check_matrix(A, name, *, ndim=2, dtype=float):
    """Coerce ``A`` to a contiguous float array and verify dimensionality and finiteness."""
    A = np.asarray(A, dtype=dtype)
    if A.ndim != ndim:
        raise InvalidInputError(f"{name} must be {ndim}-dimensional, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return A


def check_locations(locations):
    locations = check_matrix(locations, "locations")
    if locations.shape[0] < 2:
        raise InvalidInputError("need at least two locations")
    return locations


def check_response(Y, n_locations=None):
    Y = check_matrix(Y, "Y")
    if n_locations is not None and Y.shape[0] != n_locations:
        raise InvalidInputError(
            f"Y has {Y.shape[0]} rows but there are {n_locations} locations"
        )
    if Y.shape[1] < 1:
        raise InvalidInputError("Y needs at least one time column")
    return Y


def check_vector(v, name, *, min_len=1):
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise InvalidInputError(f"{name} must be 1-dimensional, got shape {v.shape}")
    if v.size < min_len:
        raise InvalidInputError(f"{name} needs at least {min_len} entries")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return v


def check_positive(value, name):
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise InvalidInputError(f"{name} must be a positive finite number, got {value!r}")
    return value
