"""L1-penalized least squares by cyclic coordinate descent.

Minimizes (1/2n) ||y - b0 - Z theta||^2 + lambda ||theta||_1 where Z holds
the design columns standardized to mean zero and unit population variance
and the intercept b0 is never penalized. Standardization is implicit: the
sparse design is untouched and the centering is folded into the running
residual mean, so sweeps stay O(nnz). Solutions are reported on the
original column scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .design import SparseDesign
from .errors import ConvergenceError

__all__ = [
    "LassoProblem",
    "LassoSolution",
    "CvResult",
    "fit",
    "path",
    "cv_select",
    "lambda_max",
    "kkt_residuals",
]

DEFAULT_TOL = 1e-7
DEFAULT_MAX_SWEEPS = 10_000


@dataclass(frozen=True)
class LassoProblem:
    """A penalized regression instance.

    ``design`` may be a SparseDesign, any scipy sparse matrix, or a dense
    array. ``lam`` is the penalty used by :func:`fit`; the path and CV
    drivers build their own grids.
    """

    design: object
    response: np.ndarray
    lam: float = 0.0
    standardize: bool = True

    def __post_init__(self):
        y = np.ascontiguousarray(self.response, dtype=float)
        object.__setattr__(self, "response", y)
        if self.lam < 0:
            raise ValueError("penalty must be nonnegative")
        if self.matrix.shape[0] != len(y):
            raise ValueError("response length does not match design rows")

    @property
    def matrix(self) -> sp.spmatrix | np.ndarray:
        if isinstance(self.design, SparseDesign):
            return self.design.matrix
        return self.design


@dataclass(frozen=True)
class LassoSolution:
    """Converged coordinate-descent solution on the original column scale."""

    intercept: float
    coefficients: np.ndarray
    lam: float
    iterations: int
    converged: bool

    def predict(self, design) -> np.ndarray:
        matrix = design.matrix if isinstance(design, SparseDesign) else design
        return np.asarray(matrix @ self.coefficients).ravel() + self.intercept

    @property
    def n_active(self) -> int:
        return int(np.count_nonzero(self.coefficients))


@dataclass(frozen=True)
class CvResult:
    """Cross-validation summary over a descending penalty grid."""

    lambdas: np.ndarray
    mean_mse: np.ndarray
    se_mse: np.ndarray
    selected: float
    seed: int
    warnings: tuple[str, ...] = field(default=())

    @property
    def selected_index(self) -> int:
        return int(np.argmin(self.mean_mse))


class _Prepared:
    """CSC view plus column moments, shared across fits of one matrix."""

    def __init__(self, matrix, y: np.ndarray, standardize: bool):
        if sp.issparse(matrix):
            csc = matrix.tocsc()
            csc.sort_indices()
            self.matrix = matrix
        else:
            dense = np.asarray(matrix, dtype=float)
            csc = sp.csc_matrix(dense)
            self.matrix = dense
        self.data = np.ascontiguousarray(csc.data, dtype=np.float64)
        self.indices = np.ascontiguousarray(csc.indices, dtype=np.int32)
        self.indptr = np.ascontiguousarray(csc.indptr, dtype=np.int64)
        self.csc = sp.csc_matrix(
            (self.data, self.indices, self.indptr), shape=matrix.shape
        )
        self.n, self.p = matrix.shape
        moments = _kernels.column_moments(self.data, self.indices, self.indptr, self.n)
        if standardize:
            self.col_mean = moments[0].copy()
            self.col_scale = np.where(moments[1] > 0.0, moments[1], 1.0)
        else:
            self.col_mean = np.zeros(self.p)
            self.col_scale = np.ones(self.p)
        self.y = y

    def correlations(self, z: np.ndarray) -> np.ndarray:
        return _kernels.column_correlations(
            self.data, self.indices, self.indptr, self.col_mean, self.col_scale, z
        )

    def lambda_max(self) -> float:
        corr = self.correlations(self.y.copy())
        return float(np.max(np.abs(corr)) / self.n) if self.p else 0.0


def _fit_prepared(
    prep: _Prepared,
    lam: float,
    coef_std: np.ndarray | None,
    tol: float,
    max_sweeps: int,
    polish_cap: int = 0,
) -> LassoSolution:
    n = prep.n
    if coef_std is None:
        coef_std = np.zeros(prep.p)
        z = prep.y.copy()
    else:
        coef_std = coef_std.copy()
        z = prep.y - (prep.matrix @ (coef_std / prep.col_scale)).ravel()
    n_inv = 1.0 / n
    all_cols = np.arange(prep.p, dtype=np.int64)
    sweeps = 0

    def sweep(order):
        nonlocal sweeps
        sweeps += 1
        return _kernels.cd_sweep(
            prep.data, prep.indices, prep.indptr, coef_std,
            prep.col_mean, prep.col_scale, z, lam, n_inv, order,
        )

    last_polished_face = None
    rounds = 0
    while sweeps < max_sweeps:
        delta = sweep(all_cols)
        rounds += 1
        if delta < tol:
            if polish_cap:
                coef_std, z = _polish_face(prep, lam, coef_std, z, polish_cap)
            intercept = float(z.mean())
            return LassoSolution(intercept, coef_std / prep.col_scale, lam, sweeps, True)
        if polish_cap and (delta < 1e3 * tol or rounds % 10 == 0):
            # descent is creeping along a flat direction; if the face has
            # stabilized, solve it exactly and confirm with a full sweep
            face = (np.sign(coef_std).tobytes(), lam)
            if face != last_polished_face:
                last_polished_face = face
                new_coef, new_z = _polish_face(prep, lam, coef_std, z, polish_cap)
                if new_coef is not coef_std:
                    coef_std, z = new_coef, new_z
                    if sweep(all_cols) < tol:
                        intercept = float(z.mean())
                        return LassoSolution(
                            intercept, coef_std / prep.col_scale, lam, sweeps, True
                        )
        active = np.flatnonzero(coef_std).astype(np.int64)
        while sweeps < max_sweeps and len(active):
            if sweep(active) < tol:
                break
    intercept = float(z.mean())
    last = LassoSolution(intercept, coef_std / prep.col_scale, lam, sweeps, False)
    raise ConvergenceError(
        f"coordinate descent hit the {max_sweeps}-sweep cap at lambda={lam:.6g}",
        last_solution=last,
    )


def _objective(z: np.ndarray, lam: float, coef_std: np.ndarray) -> float:
    r = z - z.mean()
    return 0.5 * float(r @ r) / len(z) + lam * float(np.abs(coef_std).sum())


def _polish_face(prep: _Prepared, lam: float, coef_std: np.ndarray, z: np.ndarray, cap: int):
    """Exact minimization on the face coordinate descent settled on.

    Ill-conditioned designs leave cyclic descent creeping along a slow
    near-singular direction with tiny per-sweep changes; with the active
    set and signs fixed, the optimum solves a linear system. The solve is
    accepted only when it keeps the signs (penalized case) and lowers the
    objective.
    """
    if lam == 0.0:
        active = np.arange(prep.p)
    else:
        active = np.flatnonzero(coef_std)
    if len(active) == 0 or len(active) > cap:
        return coef_std, z
    mu = prep.col_mean[active]
    scale = prep.col_scale[active]
    sub = prep.csc[:, active]
    gram = np.asarray((sub.T @ sub).todense(), dtype=float) / prep.n
    gram -= np.outer(mu, mu)
    gram /= np.outer(scale, scale)
    ybar = prep.y.mean()
    rhs = (np.asarray(sub.T @ prep.y).ravel() / prep.n - mu * ybar) / scale
    rhs -= lam * np.sign(coef_std[active])
    try:
        theta = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        theta = np.linalg.lstsq(gram, rhs, rcond=None)[0]
    if lam > 0.0 and not np.all(
        np.sign(theta) == np.sign(coef_std[active])
    ):
        return coef_std, z
    new_coef = np.zeros(prep.p)
    new_coef[active] = theta
    new_z = prep.y - (prep.csc @ (new_coef / prep.col_scale)).ravel()
    if _objective(new_z, lam, new_coef) > _objective(z, lam, coef_std) + 1e-12:
        return coef_std, z
    return new_coef, new_z


def fit(
    problem: LassoProblem,
    warm_start: LassoSolution | None = None,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    polish_cap: int = 0,
) -> LassoSolution:
    """Solve one penalized instance, optionally warm-started.

    ``polish_cap`` > 0 finishes a converged fit with an exact solve on the
    identified active face when it has at most that many columns; this
    pins down the slow directions of ill-conditioned designs that cyclic
    descent leaves behind at very small penalties.
    """
    prep = _Prepared(problem.matrix, problem.response, problem.standardize)
    coef_std = None
    if warm_start is not None:
        coef_std = warm_start.coefficients * prep.col_scale
    return _fit_prepared(prep, problem.lam, coef_std, tol, max_sweeps, polish_cap)


def lambda_max(problem: LassoProblem) -> float:
    """Smallest penalty at which every penalized coefficient is zero."""
    prep = _Prepared(problem.matrix, problem.response, problem.standardize)
    return prep.lambda_max()


def _grid(lam_max: float, n_lambdas: int, lambda_min_ratio: float) -> np.ndarray:
    if n_lambdas < 2:
        raise ValueError("need at least two grid points")
    if not 0.0 < lambda_min_ratio < 1.0:
        raise ValueError("lambda_min_ratio must be in (0, 1)")
    if lam_max <= 0.0:
        return np.zeros(n_lambdas)
    return np.exp(
        np.linspace(np.log(lam_max), np.log(lam_max * lambda_min_ratio), n_lambdas)
    )


def path(
    problem: LassoProblem,
    n_lambdas: int = 100,
    lambda_min_ratio: float = 1e-3,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> list[LassoSolution]:
    """Warm-started solutions down a log-spaced penalty grid."""
    prep = _Prepared(problem.matrix, problem.response, problem.standardize)
    grid = _grid(prep.lambda_max(), n_lambdas, lambda_min_ratio)
    return _path_prepared(prep, grid, tol, max_sweeps)


def _path_prepared(prep: _Prepared, grid: np.ndarray, tol, max_sweeps) -> list[LassoSolution]:
    solutions: list[LassoSolution] = []
    coef_std = None
    for i, lam in enumerate(grid):
        try:
            sol = _fit_prepared(prep, float(lam), coef_std, tol, max_sweeps)
        except ConvergenceError as exc:
            raise ConvergenceError(
                f"path fit failed at grid point {i} (lambda={lam:.6g}): {exc}",
                last_solution=exc.last_solution,
            ) from exc
        solutions.append(sol)
        coef_std = sol.coefficients * prep.col_scale
    return solutions


def cv_select(
    problem: LassoProblem,
    folds: int = 10,
    seed: int = 0,
    n_lambdas: int = 100,
    lambda_min_ratio: float = 1e-3,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> CvResult:
    """Pick the penalty minimizing mean held-out MSE over k folds.

    The grid comes from the full data; folds are a seeded uniform random
    partition, so results are reproducible from (inputs, seed).
    """
    y = problem.response
    n = len(y)
    if folds < 2:
        raise ValueError("need at least two folds")
    if n < folds:
        raise ValueError(f"cannot split {n} rows into {folds} folds")
    full_prep = _Prepared(problem.matrix, y, problem.standardize)
    grid = _grid(full_prep.lambda_max(), n_lambdas, lambda_min_ratio)

    perm = np.random.default_rng(seed).permutation(n)
    fold_of = np.empty(n, dtype=np.int64)
    fold_of[perm] = np.arange(n) % folds

    matrix = problem.matrix
    if not sp.issparse(matrix):
        matrix = np.asarray(matrix, dtype=float)
    fold_mse = np.empty((folds, len(grid)))
    warnings: list[str] = []
    for f in range(folds):
        test = fold_of == f
        train = ~test
        train_matrix = matrix[train]
        y_train = y[train]
        if np.ptp(y_train) == 0.0:
            warnings.append(f"fold {f}: training response has zero variance")
        prep = _Prepared(train_matrix, y_train, problem.standardize)
        sols = _path_prepared(prep, grid, tol, max_sweeps)
        test_matrix = matrix[test]
        y_test = y[test]
        for i, sol in enumerate(sols):
            resid = y_test - sol.predict(test_matrix)
            fold_mse[f, i] = float(resid @ resid) / len(y_test)

    mean_mse = fold_mse.mean(axis=0)
    se_mse = fold_mse.std(axis=0, ddof=1) / np.sqrt(folds)
    selected = float(grid[int(np.argmin(mean_mse))])
    return CvResult(grid, mean_mse, se_mse, selected, seed, tuple(warnings))


def kkt_residuals(problem: LassoProblem, solution: LassoSolution) -> tuple[float, float]:
    """Optimality certificate for a fitted solution.

    Returns ``(inactive_excess, active_mismatch)`` where the first is
    max(|g_j| - lam, 0) over zero coefficients and the second is
    max|g_j - lam * sign(theta_j)| over active ones, with g the
    standardized-column gradient <z_j, r>/n at the fitted residual.
    """
    prep = _Prepared(problem.matrix, problem.response, problem.standardize)
    resid = problem.response - solution.predict(problem.matrix)
    g = prep.correlations(resid.copy()) / prep.n
    coef_std = solution.coefficients * prep.col_scale
    active = coef_std != 0.0
    lam = solution.lam
    inactive_excess = float(np.max(np.abs(g[~active]) - lam, initial=0.0))
    if active.any():
        active_mismatch = float(np.max(np.abs(g[active] - lam * np.sign(coef_std[active]))))
    else:
        active_mismatch = 0.0
    return inactive_excess, active_mismatch
