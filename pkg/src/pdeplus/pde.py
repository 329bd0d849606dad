"""Iterative pairwise-directions estimation of the inner-product mean.

The mean of the response curves is modeled as a sum of products of
unit-norm temporal basis vectors and spatial coefficient functions that
depend on the covariates only through fitted index directions.  The
algorithm alternates a per-location linear fit of the curves on the
current basis with a single-index update of each basis column, then
refines the covariate directions against the converged basis.
"""

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import CollinearBasisError, InvalidInputError
from .initdir import initial_directions
from .mave import mave_solve

_DEFAULT_DELTA = 1e-3


@dataclass(frozen=True)
class PdeConfig:
    """Tuning knobs for the direction search.

    ``h_y`` is the kernel bandwidth on the curve index, ``h_x`` the
    bandwidth on the covariate index; both fall back to Silverman's rule
    on the relevant index values when left unset.
    """

    kappa: Optional[int] = None
    h_y: Optional[float] = None
    h_x: Optional[float] = None
    delta: float = _DEFAULT_DELTA
    max_iter: int = 100
    n_slices: int = 10
    init_method: str = "both"
    mave_tol: float = 1e-6
    mave_max_iter: int = 50
    step3_mave_iters: int = 1
    step2_intercept: bool = False

    def __post_init__(self):
        if self.delta <= 0:
            raise InvalidInputError("delta must be positive")
        for name in ("h_y", "h_x"):
            value = getattr(self, name)
            if value is not None and value <= 0:
                raise InvalidInputError(f"{name} must be positive when given")
        if self.max_iter < 1:
            raise InvalidInputError("max_iter must be at least 1")


@dataclass(frozen=True)
class PdeFit:
    """Converged mean-structure estimate.

    ``w_hats`` holds the unit-norm temporal basis columns, ``thetas`` the
    covariate directions (in the coordinates of the covariates the fit
    consumed), ``g_hats`` the local-linear coefficient values at the
    observed sites and ``g_linear`` the per-location linear-fit
    coefficients at the converged basis; ``residuals`` are the rows left
    over by that linear fit.
    """

    kappa: int
    thetas: np.ndarray
    w_hats: np.ndarray
    g_hats: np.ndarray
    g_linear: np.ndarray
    residuals: np.ndarray
    iterations: int
    converged: bool
    step2_rss: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def silverman_bandwidth(values):
    """Silverman's rule-of-thumb bandwidth for a 1-d sample."""
    v = np.asarray(values, dtype=float)
    n = v.size
    sd = v.std(ddof=1) if n > 1 else 1.0
    iqr = np.subtract(*np.percentile(v, [75, 25]))
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    if spread <= 0:
        spread = max(abs(v).max(), 1.0)
    return 0.9 * spread * n ** (-0.2)


def _curve_covariance(Y):
    Yc = Y - Y.mean(axis=0)
    return Yc.T @ Yc / max(Y.shape[0] - 1, 1)


def _normalize_columns(M):
    norms = np.linalg.norm(M, axis=0)
    if np.any(norms == 0):
        raise CollinearBasisError("a temporal basis column collapsed to zero")
    return M / norms


def pde_step2_linear_fit(Y, phi, intercept=False):
    """Per-location least squares of each curve on the basis columns.

    Returns the coefficient matrix (one row per location) and the residual
    matrix.  The displayed model carries no intercept; ``intercept=True``
    augments the design and drops the extra coefficient from the output.
    """
    Y = np.asarray(Y, dtype=float)
    phi = np.asarray(phi, dtype=float)
    design = np.column_stack([phi, np.ones(phi.shape[0])]) if intercept else phi
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise CollinearBasisError("basis columns are collinear; cannot fit coefficients")
    coef, *_ = np.linalg.lstsq(design, Y.T, rcond=None)
    fitted = design @ coef
    residuals = Y - fitted.T
    G = coef.T[:, : phi.shape[1]]
    return G, residuals


def _mave_inits_from_curves(Y, kappa):
    """Starting basis directions: leading right-singular vectors of the centered curves."""
    Yc = Y - Y.mean(axis=0)
    _, _, vt = np.linalg.svd(Yc, full_matrices=False)
    inits = []
    for j in range(kappa):
        inits.append(vt[min(j, vt.shape[0] - 1)])
    return inits


def pde_step1(dataset, thetas0, config):
    """Initial temporal basis from the covariate-index targets.

    Each initial direction's index values are regressed on the curves via
    the single-index solver; the minimizer is premultiplied by the curve
    covariance and normalized.
    """
    Y = dataset.Y
    kappa = thetas0.shape[1]
    h_y = config.h_y if config.h_y is not None else silverman_bandwidth(
        (Y - Y.mean(axis=0)) @ _mave_inits_from_curves(Y, 1)[0]
    )
    sigma_y = _curve_covariance(Y)
    inits = _mave_inits_from_curves(Y, kappa)
    phi = np.empty((Y.shape[1], kappa))
    phi_tilde = []
    for j in range(kappa):
        target = dataset.X @ thetas0[:, j]
        sol = mave_solve(
            target, Y, h_y, inits[j], tol=config.mave_tol, max_iter=config.mave_max_iter
        )
        phi_tilde.append(sol.beta)
        phi[:, j] = sigma_y @ sol.beta
    return _normalize_columns(phi), phi_tilde


def pde_iterate(dataset, thetas0, config):
    """Alternate the linear fit and the basis update until the basis settles.

    Returns ``(phi, G, residuals, iterations, converged, rss_trace,
    phi_tilde)`` with the linear fit recomputed at the final basis.
    """
    Y = dataset.Y
    h_y = config.h_y if config.h_y is not None else silverman_bandwidth(
        (Y - Y.mean(axis=0)) @ _mave_inits_from_curves(Y, 1)[0]
    )
    sigma_y = _curve_covariance(Y)
    phi, phi_tilde = pde_step1(dataset, thetas0, config)
    kappa = phi.shape[1]

    converged = False
    rss_trace = []
    iterations = 0
    for iterations in range(1, config.max_iter + 1):
        G, residuals = pde_step2_linear_fit(Y, phi, intercept=config.step2_intercept)
        rss_trace.append(float(np.sum(residuals**2)))
        phi_new = np.empty_like(phi)
        for j in range(kappa):
            # one warm-started direction update per sweep; the outer loop
            # supplies the fixed-point iteration
            sol = mave_solve(
                G[:, j],
                Y,
                h_y,
                phi_tilde[j],
                tol=config.mave_tol,
                max_iter=config.step3_mave_iters,
            )
            phi_tilde[j] = sol.beta
            phi_new[:, j] = sigma_y @ sol.beta
        phi_new = _normalize_columns(phi_new)
        # updates are sign-ambiguous; align to the previous iterate first
        flips = np.sign(np.einsum("tj,tj->j", phi_new, phi))
        flips[flips == 0] = 1.0
        phi_new *= flips
        change = np.linalg.norm(phi_new - phi, axis=0).max()
        phi = phi_new
        if change < config.delta:
            converged = True
            break
    if not converged:
        warnings.warn("basis iteration hit max_iter without settling", stacklevel=2)

    G, residuals = pde_step2_linear_fit(Y, phi, intercept=config.step2_intercept)
    rss_trace.append(float(np.sum(residuals**2)))
    return phi, G, residuals, iterations, converged, np.asarray(rss_trace), phi_tilde


def _direction_starts(dataset, target, theta0, n_slices):
    """Candidate directions for one final single-index solve.

    Besides the supplied initializer direction, inverse-regression
    estimates of the scalar target, the coordinate axes and a few fixed
    pseudo-random directions are tried; the caller keeps whichever start
    reaches the lowest objective.  The index link can wiggle over its
    range, which leaves the objective multimodal with a narrow basin
    around the truth, so cheap wide exploration buys robustness.
    """
    from .data import STDataset
    from .initdir import mrsir_init, pe_mrphd_init

    p = dataset.X.shape[1]
    starts = [theta0]
    pseudo = STDataset(
        locations=dataset.locations,
        times=np.asarray([1.0]),
        Y=np.asarray(target, dtype=float)[:, None],
        X=dataset.X,
    )
    try:
        starts.append(mrsir_init(pseudo, n_slices=min(n_slices, dataset.n // 2)).directions[:, 0])
    except Exception:
        pass
    try:
        starts.append(pe_mrphd_init(pseudo).directions[:, 0])
    except Exception:
        pass
    for k in range(min(p, 6)):
        axis = np.zeros(p)
        axis[k] = 1.0
        starts.append(axis)
    rng = np.random.default_rng(0)
    for _ in range(4):
        starts.append(rng.standard_normal(p))
    return starts


def pde_step5_finalize(dataset, phi_final, thetas0, config):
    """Refine the covariate directions against the converged basis.

    For each component the basis scores of the curves are regressed on the
    covariates through the single-index solver; the fitted local values at
    the observed sites become the coefficient estimates.
    """
    X = dataset.X
    kappa = phi_final.shape[1]
    # score each component with the basis column orthogonalized against the
    # earlier ones; a large-scale component would otherwise bleed into the
    # scores of a smaller one and drag its direction estimate off target
    Q, R = np.linalg.qr(phi_final)
    Q = Q * np.sign(np.diag(R))[None, :]
    thetas = np.empty((X.shape[1], kappa))
    g_hats = np.empty((X.shape[0], kappa))
    for j in range(kappa):
        target = dataset.Y @ Q[:, j]
        h_x = config.h_x if config.h_x is not None else silverman_bandwidth(
            X @ thetas0[:, j]
        )
        best = None
        for start in _direction_starts(dataset, target, thetas0[:, j], config.n_slices):
            sol = mave_solve(
                target, X, h_x, start, tol=config.mave_tol, max_iter=config.mave_max_iter
            )
            if best is None or sol.objective_trace[-1] < best.objective_trace[-1]:
                best = sol
        thetas[:, j] = best.beta
        g_hats[:, j] = best.locals_intercept
    return thetas, g_hats


def pde_fit(dataset, config=None, thetas0=None, init_diagnostics=None):
    """Full direction-search pipeline on one dataset.

    When ``thetas0`` is omitted the configured initializers provide the
    starting directions and pick the component count.
    """
    config = config or PdeConfig()
    if thetas0 is None:
        thetas0, init_diagnostics = initial_directions(
            dataset,
            kappa=config.kappa,
            n_slices=config.n_slices,
            method=config.init_method,
        )
    phi, G, residuals, iterations, converged, rss_trace, _ = pde_iterate(
        dataset, thetas0, config
    )
    thetas, g_hats = pde_step5_finalize(dataset, phi, thetas0, config)
    return PdeFit(
        kappa=phi.shape[1],
        thetas=thetas,
        w_hats=phi,
        g_hats=g_hats,
        g_linear=G,
        residuals=residuals,
        iterations=iterations,
        converged=converged,
        step2_rss=rss_trace,
        diagnostics=dict(init_diagnostics or {}),
    )
