"""Weighted local-linear single-index solver.

Minimizes, over a direction ``beta`` and per-anchor local lines, the
kernel-weighted least squares

    sum_l sum_i  w_il * (a_i - d1_l - d2_l * beta'(Z_i - Z_l))^2

where the weights come from a Gaussian kernel on the index differences
``beta'(Z_i - Z_l)`` and are normalized over ``i`` for each anchor ``l``.
The solver alternates exact local fits with an exact global direction
update, re-deriving the kernel weights from each accepted direction; an
update that fails to lower the objective is rejected, which keeps the
recorded objective trace non-increasing.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import FlatLinkError, InvalidInputError
from .validation import check_positive, check_vector

_LOCAL_RIDGE = 1e-10


@dataclass(frozen=True)
class KernelWeights:
    """Normalized Gaussian kernel weights.

    ``delta[i, l]`` weighs observation ``i`` at anchor ``l``; each anchor
    column sums to one.
    """

    delta: np.ndarray
    bandwidth: float
    kernel: str = "gaussian"


@dataclass(frozen=True)
class MaveSolution:
    """Fitted direction with the per-anchor local lines.

    ``locals_intercept[l]`` is the fitted value of the target at anchor
    ``l`` (the local line evaluated at zero index offset) and
    ``locals_slope[l]`` the local derivative along the index.
    """

    beta: np.ndarray
    locals_intercept: np.ndarray
    locals_slope: np.ndarray
    objective_trace: np.ndarray
    converged: bool
    n_iter: int


def kernel_weights(index_values, bandwidth, normalize_axis=0):
    """Gaussian kernel weights on pairwise index differences.

    Parameters
    ----------
    index_values : (n,) array
    bandwidth : positive float
    normalize_axis : {0, 1}
        Axis summed to one.  The default (0) normalizes over observations
        for each anchor column.
    """
    v = check_vector(index_values, "index_values")
    h = check_positive(bandwidth, "bandwidth")
    diff = (v[:, None] - v[None, :]) / h
    K = np.exp(-0.5 * diff**2)
    delta = K / K.sum(axis=normalize_axis, keepdims=True)
    return KernelWeights(delta=delta, bandwidth=h)


def _local_fits(a, U, delta):
    """Closed-form weighted local-linear fits at every anchor.

    ``U[i, l]`` is the index offset of observation ``i`` from anchor ``l``.
    Returns intercepts, slopes and the objective value attained.
    """
    s1 = np.einsum("il,il->l", delta, U)
    s2 = np.einsum("il,il->l", delta, U * U)
    t0 = delta.T @ a
    t1 = np.einsum("il,il->l", delta, U * a[:, None])
    det = s2 - s1 * s1 + _LOCAL_RIDGE
    d1 = (s2 * t0 - s1 * t1) / det
    d2 = (t1 - s1 * t0) / det
    resid = a[:, None] - d1[None, :] - d2[None, :] * U
    objective = float(np.einsum("il,il->", delta, resid**2))
    return d1, d2, objective


def _evaluate(a, Z, beta, bandwidth):
    v = Z @ beta
    delta = kernel_weights(v, bandwidth).delta
    U = v[:, None] - v[None, :]
    d1, d2, objective = _local_fits(a, U, delta)
    return v, delta, U, d1, d2, objective


def _beta_step(a, Z, delta, d1, d2):
    """Exact minimizer of the objective over beta with the locals held fixed.

    The normal equations contract the pairwise design through an n x n
    coupling matrix, so the update costs two matrix products.
    """
    n, m = Z.shape
    C = delta * (d2**2)[None, :]
    row = C.sum(axis=1)
    col = C.sum(axis=0)
    M = np.diag(row + col) - C - C.T
    A = Z.T @ M @ Z
    E = delta * d2[None, :] * (a[:, None] - d1[None, :])
    b = Z.T @ (E.sum(axis=1) - E.T.sum(axis=1))
    scale = np.abs(A).max()
    if not np.isfinite(scale) or scale <= 1e-12 * max(1.0, float(a @ a)):
        raise FlatLinkError("all local slopes are (numerically) zero; no direction update exists")
    try:
        beta = np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        beta = np.linalg.lstsq(A, b, rcond=None)[0]
    norm = np.linalg.norm(beta)
    if not np.isfinite(norm) or norm == 0:
        raise FlatLinkError("direction update collapsed to zero")
    return beta / norm


def _fix_sign(beta):
    sign = np.sign(beta[np.argmax(np.abs(beta))])
    return beta * (sign if sign != 0 else 1.0)


def mave_solve(target, carriers, bandwidth, init_beta, tol=1e-6, max_iter=50):
    """Fit a single-index local-linear model of ``target`` on ``carriers``.

    Parameters
    ----------
    target : (n,) array
    carriers : (n, m) array
    bandwidth : positive float
        Kernel bandwidth on the index values.
    init_beta : (m,) array
        Nonzero starting direction.
    tol : float
        Relative objective improvement below which iteration stops.
    max_iter : int

    Returns
    -------
    MaveSolution
        With ``beta`` unit-norm and sign-fixed.  ``converged`` is False
        only when ``max_iter`` was exhausted while still improving.
    """
    a = check_vector(target, "target")
    Z = np.asarray(carriers, dtype=float)
    if Z.ndim != 2 or Z.shape[0] != a.size:
        raise InvalidInputError("carriers must be an (n, m) matrix aligned with target")
    n, m = Z.shape
    beta = np.asarray(init_beta, dtype=float)
    if beta.shape != (m,) or np.linalg.norm(beta) == 0:
        raise InvalidInputError("init_beta must be a nonzero length-m vector")
    h = check_positive(bandwidth, "bandwidth")

    # The objective sees the carriers only through index differences, so when
    # m exceeds the sample count the problem is reparametrized exactly onto
    # the row space of the centered carriers and mapped back afterwards.
    span = None
    if m >= n:
        Zc = Z - Z.mean(axis=0)
        _, svals, vt = np.linalg.svd(Zc, full_matrices=False)
        rank = max(int(np.sum(svals > svals[0] * 1e-12)), 1) if svals.size else 1
        span = vt[:rank].T
        Z = Z @ span
        m = rank
        reduced = span.T @ beta
        if np.linalg.norm(reduced) < 1e-12 * np.linalg.norm(beta):
            reduced = np.zeros(m)
            reduced[0] = 1.0
        beta = reduced
    elif n < m + 2 and m > 1:
        raise InvalidInputError(f"need n >= m + 2 samples (n={n}, m={m})")
    beta = beta / np.linalg.norm(beta)

    _, delta, _, d1, d2, objective = _evaluate(a, Z, beta, h)
    trace = [objective]
    converged = False
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        candidate = _beta_step(a, Z, delta, d1, d2)
        if candidate @ beta < 0:
            candidate = -candidate
        _, delta_new, _, d1_new, d2_new, obj_new = _evaluate(a, Z, candidate, h)
        if obj_new > trace[-1]:
            # the adaptive weights made this step worse; keep the previous iterate
            converged = True
            break
        improvement = trace[-1] - obj_new
        beta, delta, d1, d2 = candidate, delta_new, d1_new, d2_new
        trace.append(obj_new)
        if improvement <= tol * max(trace[0], 1e-300):
            converged = True
            break

    if span is not None:
        beta = span @ beta
        beta /= np.linalg.norm(beta)
    return MaveSolution(
        beta=_fix_sign(beta),
        locals_intercept=d1,
        locals_slope=d2,
        objective_trace=np.asarray(trace),
        converged=converged,
        n_iter=n_iter,
    )
