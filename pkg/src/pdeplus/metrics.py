"""Prediction-error criteria and direction-recovery accuracy."""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .exceptions import InvalidInputError


@dataclass(frozen=True)
class MetricsReport:
    rimse: float
    rpmse: float
    cos_abs: Optional[np.ndarray] = None


def rimse_rpmse(y_test, z_hat):
    """Root integrated and rooted-prediction mean squared errors.

    The first averages per-location curve error norms, the second pools
    squared errors across all (location, time) cells.
    """
    y_test = np.asarray(y_test, dtype=float)
    z_hat = np.asarray(z_hat, dtype=float)
    if y_test.shape != z_hat.shape:
        raise InvalidInputError(f"shape mismatch: {y_test.shape} vs {z_hat.shape}")
    err = y_test - z_hat
    rimse = float(np.linalg.norm(err, axis=1).mean())
    rpmse = float(np.sqrt(np.mean(err**2)))
    return rimse, rpmse


def cos_accuracy(theta_hat, theta_true):
    """Absolute cosine of the angle between two direction vectors."""
    a = np.asarray(theta_hat, dtype=float)
    b = np.asarray(theta_true, dtype=float)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise InvalidInputError("direction vectors must be nonzero")
    return float(min(abs(a @ b) / (na * nb), 1.0))


def matched_direction_accuracy(thetas_hat, thetas_true):
    """Per-true-direction |cos| under the best one-to-one matching.

    Estimated components carry no canonical order, so the assignment
    maximizing total |cos| pairs them with the true directions.
    """
    H = np.asarray(thetas_hat, dtype=float)
    T = np.asarray(thetas_true, dtype=float)
    cos = np.zeros((T.shape[1], H.shape[1]))
    for i in range(T.shape[1]):
        for j in range(H.shape[1]):
            cos[i, j] = cos_accuracy(H[:, j], T[:, i])
    rows, cols = linear_sum_assignment(-cos)
    out = np.zeros(T.shape[1])
    out[rows] = cos[rows, cols]
    return out
