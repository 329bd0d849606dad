"""Per-location scale factors and nearest-neighbor transfer of coefficients.

The temporal basis is unit-norm, so each component's magnitude at a site
is recovered by regressing that site's curve on the products of its
coefficient values with the basis columns.  At unseen sites the scaled
coefficients are transferred by averaging the nearest learning sites in
each component's one-dimensional index.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidInputError


@dataclass(frozen=True)
class ScaledCoefficients:
    """Scale factors ``b``, scaled values ``f_tilde = b * g`` and the index values used for lookup."""

    b: np.ndarray
    f_tilde: np.ndarray
    index_values: np.ndarray


def scale_fit(Y, w_hats, g_hats, index_values):
    """Per-location least squares of each curve on ``{g_hat_j(s_i) * w_hat_j}``.

    A zero coefficient value makes its design column vanish; the matching
    scale factor is set to zero (the scaled product is zero either way)
    and a warning is emitted.
    """
    Y = np.asarray(Y, dtype=float)
    W = np.asarray(w_hats, dtype=float)
    G = np.asarray(g_hats, dtype=float)
    n, T = Y.shape
    kappa = W.shape[1]
    if W.shape[0] != T or G.shape != (n, kappa):
        raise InvalidInputError("w_hats and g_hats are inconsistent with Y")
    gram = W.T @ W
    proj = Y @ W  # row i holds W'y_i
    b = np.zeros((n, kappa))
    n_zero = 0
    for i in range(n):
        g = G[i]
        active = np.abs(g) > 0
        if not np.all(active):
            n_zero += 1
        if not np.any(active):
            continue
        A = gram[np.ix_(active, active)] * np.outer(g[active], g[active])
        rhs = g[active] * proj[i, active]
        try:
            b[i, active] = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError:
            b[i, active] = np.linalg.lstsq(A, rhs, rcond=None)[0]
    if n_zero:
        warnings.warn(
            f"{n_zero} location(s) had a zero coefficient column; scale set to 0 there",
            stacklevel=2,
        )
    return ScaledCoefficients(b=b, f_tilde=b * G, index_values=np.asarray(index_values, dtype=float))


def knn_transfer(scaled, thetas, x0, k):
    """Scaled coefficients at one query covariate vector via k-nearest neighbors.

    Neighbors are found independently per component on the fitted index
    values; ties prefer the lower location index.
    """
    return knn_transfer_batch(scaled, thetas, np.asarray(x0, dtype=float)[None, :], k)[0]


def knn_transfer_batch(scaled, thetas, X0, k):
    """Vectorized :func:`knn_transfer` over query rows."""
    X0 = np.asarray(X0, dtype=float)
    thetas = np.asarray(thetas, dtype=float)
    n, kappa = scaled.f_tilde.shape
    k = int(k)
    if k < 1 or k > n:
        raise InvalidInputError(f"k must lie in [1, {n}], got {k}")
    out = np.empty((X0.shape[0], kappa))
    for j in range(kappa):
        idx0 = X0 @ thetas[:, j]
        dist = np.abs(scaled.index_values[None, :, j] - idx0[:, None])
        order = np.argsort(dist, axis=1, kind="stable")[:, :k]
        out[:, j] = scaled.f_tilde[order, j].mean(axis=1)
    return out
