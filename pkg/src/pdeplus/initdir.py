"""Initial direction estimates for the covariate index.

Two moment-based multivariate-response estimators seed the iterative
direction search: a sliced inverse-regression variant that pools
between-slice covariances over the time grid (mrSIR), and a principal
Hessian variant that pools absolute-eigenvalue second-moment matrices of
principal-component scores (pe-mrPHD).  Both reduce to a generalized
symmetric-definite eigenproblem against the covariate covariance.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .exceptions import InvalidInputError, SingularMetricError

_SYM_TOL = 1e-10
_RANK_REL_TOL = 1e-8
_RANK_ABS_TOL = 1e-12


@dataclass(frozen=True)
class InitResult:
    """Candidate directions with their generalized eigenvalues.

    ``directions`` holds unit-norm columns ordered by decreasing
    eigenvalue, each with its largest-magnitude entry made positive;
    ``method`` records which estimator produced them.
    """

    directions: np.ndarray
    eigenvalues: np.ndarray
    method: str


def _fix_signs(vectors):
    """Flip column signs so each column's largest-|entry| coordinate is positive."""
    V = np.array(vectors, dtype=float)
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def generalized_eigen(A, B):
    """Solve ``A v = rho B v`` for symmetric ``A`` and SPD ``B``.

    Returns eigenvalues in non-increasing order and B-orthonormal
    eigenvectors as columns.

    Raises
    ------
    SingularMetricError
        If B's smallest eigenvalue is below ``1e-12`` of its largest.
    InvalidInputError
        If A is asymmetric beyond tolerance.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidInputError("A and B must be square matrices of equal size")
    scale = max(1.0, np.abs(A).max())
    if np.abs(A - A.T).max() > _SYM_TOL * scale:
        raise InvalidInputError("A is not symmetric")
    b_eigs = linalg.eigvalsh(B)
    if b_eigs[0] <= 1e-12 * max(b_eigs[-1], 0.0):
        raise SingularMetricError("metric matrix B is not positive definite")
    vals, vecs = linalg.eigh(0.5 * (A + A.T), B)
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order]


def choose_kappa(eigenvalues, override=None):
    """Pick the number of directions from a non-increasing eigenvalue profile.

    With an override the value is clamped to ``[1, p]``.  Otherwise the
    count maximizing the consecutive-ratio gap over eigenvalues above
    ``1e-8`` wins (largest count on ties); a flat profile defaults to 2.
    """
    eig = np.asarray(eigenvalues, dtype=float)
    if eig.size == 0:
        raise InvalidInputError("empty eigenvalue profile")
    p = eig.size
    if override is not None:
        return int(min(max(int(override), 1), p))
    if p == 1:
        return 1
    ratios = {}
    for k in range(1, p):
        if eig[k - 1] <= 1e-8:
            break
        denom = max(eig[k], 1e-300)
        ratios[k] = eig[k - 1] / denom
    if not ratios:
        return min(2, p)
    if len(ratios) == 1:
        return next(iter(ratios))
    values = np.array(list(ratios.values()))
    finite = values[np.isfinite(values)]
    if finite.size == values.size and (
        values.max() - values.min() <= 1e-9 * max(values.max(), 1.0)
    ):
        return min(2, p)
    best = max(ratios, key=lambda k: (ratios[k], k))
    return best


def _covariance(X):
    # population (1/n) convention so the between/within decomposition is exact
    Xc = X - X.mean(axis=0)
    return Xc.T @ Xc / X.shape[0]


def _slice_boundaries(n, n_slices):
    base = n // n_slices
    sizes = np.full(n_slices, base, dtype=int)
    sizes[-1] += n - base * n_slices  # last slice absorbs the remainder
    return np.concatenate([[0], np.cumsum(sizes)])


def _rank_proportion(M, sigma_x, threshold_rel):
    vals, _ = generalized_eigen(M, sigma_x)
    top = vals[0] if vals.size else 0.0
    cutoff = max(threshold_rel * max(top, 0.0), _RANK_ABS_TOL)
    return np.count_nonzero(vals > cutoff) / vals.size


def mrsir_init(dataset, n_slices=10, rank_threshold=_RANK_REL_TOL):
    """Sliced inverse-regression initializer pooled over the time grid.

    For each time the locations are sliced by the response and the
    between-slice covariance of the covariates is formed; slices are
    weighted by their rank proportion before pooling, and the pooled
    matrix is eigendecomposed against the covariate covariance.
    """
    X = dataset.X
    Y = dataset.Y
    n, p = X.shape
    if n_slices < 2:
        raise InvalidInputError("need at least two slices")
    if n < n_slices:
        raise InvalidInputError(f"n={n} is smaller than n_slices={n_slices}")
    sigma_x = _covariance(X)
    x_bar = X.mean(axis=0)
    bounds = _slice_boundaries(n, n_slices)

    psi_sum = np.zeros((p, p))
    weights = np.empty(Y.shape[1])
    psis = []
    for t in range(Y.shape[1]):
        # ties broken by location index: stable sort on the response column
        order = np.argsort(Y[:, t], kind="stable")
        psi = np.zeros((p, p))
        for h in range(n_slices):
            members = order[bounds[h] : bounds[h + 1]]
            diff = X[members].mean(axis=0) - x_bar
            psi += (members.size / n) * np.outer(diff, diff)
        psis.append(psi)
        weights[t] = _rank_proportion(psi, sigma_x, rank_threshold)
    total = weights.sum()
    if total <= 0:
        weights = np.full_like(weights, 1.0 / weights.size)
        total = 1.0
    for t, psi in enumerate(psis):
        psi_sum += (weights[t] / total) * psi

    vals, vecs = generalized_eigen(psi_sum, sigma_x)
    directions = _fix_signs(vecs / np.linalg.norm(vecs, axis=0))
    return InitResult(directions=directions, eigenvalues=vals, method="mrSIR")


def pe_mrphd_init(dataset):
    """Positive-eigenvalue principal-Hessian initializer.

    Principal-component scores of the response curves (standardized to
    unit variance) weight second-moment matrices of the covariates; each
    matrix is rebuilt from the absolute values of its eigenvalues, the
    collection is pooled with component-variance weights, and the pooled
    matrix is eigendecomposed against the covariate covariance.  The
    absolute-value step is taken in the covariance-whitened metric, which
    keeps the estimated subspace affine-equivariant.
    """
    X = dataset.X
    Y = dataset.Y
    n, p = X.shape
    if n <= p:
        raise InvalidInputError(f"pe-mrPHD needs n > p (n={n}, p={p})")
    sigma_x = _covariance(X)
    sx_vals = linalg.eigvalsh(sigma_x)
    if sx_vals[0] <= 1e-12 * max(sx_vals[-1], 0.0):
        raise SingularMetricError("covariate covariance is singular")
    Xc = X - X.mean(axis=0)
    evals, evecs = linalg.eigh(sigma_x)
    whiten = (evecs * evals**-0.5) @ evecs.T
    V = Xc @ whiten
    Yc = Y - Y.mean(axis=0)
    cov_y = Yc.T @ Yc / n
    lam, axes = linalg.eigh(cov_y)
    order = np.argsort(lam)[::-1]
    lam = np.clip(lam[order], 0.0, None)
    axes = axes[:, order]
    scores = Yc @ axes

    h_bar = np.zeros((p, p))
    lam_total = lam.sum()
    if lam_total <= 0:
        return InitResult(
            directions=_fix_signs(np.eye(p)),
            eigenvalues=np.zeros(p),
            method="pe-mrPHD",
        )
    for t in range(Y.shape[1]):
        if lam[t] <= 0:
            continue
        z = scores[:, t] / np.sqrt(lam[t])
        z = z - z.mean()
        weighted = (V * z[:, None]).T @ V / n
        vals, vecs = linalg.eigh(0.5 * (weighted + weighted.T))
        h_bar += (lam[t] / lam_total) * (vecs * np.abs(vals)) @ vecs.T

    vals, vecs = linalg.eigh(h_bar)
    order = np.argsort(vals)[::-1]
    directions = whiten @ vecs[:, order]
    directions = _fix_signs(directions / np.linalg.norm(directions, axis=0))
    return InitResult(directions=directions, eigenvalues=vals[order], method="pe-mrPHD")


_DUPLICATE_COS2 = 0.8


def _gram_schmidt_select(candidates, metric, kappa):
    """Keep candidates in order, skipping any too close to the span already kept.

    Closeness is measured in the metric inner product; a candidate whose
    projection onto the kept span carries more than ``_DUPLICATE_COS2`` of
    its squared norm is treated as a duplicate.
    """
    kept = []
    basis = []
    for idx in range(candidates.shape[1]):
        v = candidates[:, idx].copy()
        norm2_orig = v @ metric @ v
        if norm2_orig <= 0:
            continue
        for b in basis:
            v -= (b @ metric @ v) * b
        norm2 = v @ metric @ v
        if norm2 <= (1.0 - _DUPLICATE_COS2) * norm2_orig:
            continue
        basis.append(v / np.sqrt(norm2))
        kept.append(idx)
        if len(kept) == kappa:
            break
    return [candidates[:, i] for i in kept]


def combine_initializers(mrsir, pe_mrphd, sigma_x, kappa):
    """Merge the two candidate pools, alternating between the methods.

    Candidates are visited in the order (first mrSIR direction, first
    pe-mrPHD direction, second mrSIR, ...) so each method contributes its
    strongest directions; near-duplicates in the covariance inner product
    are skipped.
    """
    p = mrsir.directions.shape[0]
    cols = []
    for j in range(p):
        cols.append(mrsir.directions[:, j])
        cols.append(pe_mrphd.directions[:, j])
    pool = np.column_stack(cols)
    chosen = _gram_schmidt_select(pool, sigma_x, kappa)
    if len(chosen) < kappa:
        raise InvalidInputError(
            f"could not assemble {kappa} independent initial directions"
        )
    directions = _fix_signs(np.column_stack(chosen))
    directions /= np.linalg.norm(directions, axis=0)
    return directions


def initial_directions(dataset, kappa=None, n_slices=10, method="both"):
    """Run the configured initializer(s) and return ``(thetas, diagnostics)``.

    ``kappa=None`` picks the count from the pe-mrPHD eigenvalue profile
    (mrSIR's when that is the only method run).
    """
    diagnostics = {}
    if method not in ("mrSIR", "pe-mrPHD", "both"):
        raise InvalidInputError(f"unknown init method {method!r}")
    sir = phd = None
    if method in ("mrSIR", "both"):
        sir = mrsir_init(dataset, n_slices=n_slices)
        diagnostics["mrsir_eigenvalues"] = sir.eigenvalues
    if method in ("pe-mrPHD", "both"):
        phd = pe_mrphd_init(dataset)
        diagnostics["pe_mrphd_eigenvalues"] = phd.eigenvalues

    profile = phd.eigenvalues if phd is not None else sir.eigenvalues
    kappa = choose_kappa(profile, override=kappa)
    diagnostics["kappa"] = kappa

    if method == "mrSIR":
        thetas = sir.directions[:, :kappa]
    elif method == "pe-mrPHD":
        thetas = phd.directions[:, :kappa]
    else:
        thetas = combine_initializers(sir, phd, _covariance(dataset.X), kappa)
    return thetas, diagnostics
