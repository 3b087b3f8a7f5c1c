import itertools

import numpy as np
import pytest

from scalesep.errors import ConvergenceError
from scalesep.lasso import (
    CvResult,
    LassoProblem,
    LassoSolution,
    cv_select,
    fit,
    kkt_residuals,
    lambda_max,
    path,
)
from scalesep.lasso import _Prepared, _fit_prepared


def standardized(X):
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    return (X - mu) / np.where(sd > 0, sd, 1.0)


def sign_enumeration_oracle(X, y, lam):
    """Exhaustive minimizer of (1/2n)||y - b0 - Z theta||^2 + lam ||theta||_1
    over all sign patterns, with Z the standardized columns. For each
    pattern the stationarity system is linear; candidates are kept when the
    solved signs agree and the inactive-gradient bound holds. Returns
    (intercept, coefficients) on the original scale."""
    n, p = X.shape
    Z = standardized(X)
    sd = X.std(axis=0)
    best = None
    for signs in itertools.product((-1, 0, 1), repeat=p):
        signs = np.array(signs, dtype=float)
        active = np.flatnonzero(signs)
        cols = np.column_stack([np.ones(n), Z[:, active]])
        rhs = cols.T @ y / n
        rhs[1:] -= lam * signs[active]
        try:
            sol = np.linalg.solve(cols.T @ cols / n, rhs)
        except np.linalg.LinAlgError:
            continue
        theta = np.zeros(p)
        theta[active] = sol[1:]
        if not np.all(np.sign(theta[active]) == signs[active]):
            continue
        resid = y - sol[0] - Z @ theta
        grad = Z.T @ resid / n
        if np.any(np.abs(grad[signs == 0]) > lam + 1e-10):
            continue
        obj = 0.5 * resid @ resid / n + lam * np.abs(theta).sum()
        if best is None or obj < best[0]:
            best = (obj, sol[0], theta)
    assert best is not None, "no sign pattern satisfied the KKT conditions"
    _, b0_std, theta_std = best
    coef = theta_std / np.where(sd > 0, sd, 1.0)
    intercept = float(np.mean(y - X @ coef))
    return intercept, coef


@pytest.fixture(scope="module")
def instance():
    rng = np.random.default_rng(11)
    n, p = 120, 25
    X = rng.normal(size=(n, p))
    beta = np.zeros(p)
    beta[:4] = [4.0, -3.0, 2.0, -1.5]
    y = X @ beta + rng.normal(scale=0.7, size=n) + 5.0
    return X, y


class TestFit:
    def test_null_model_at_lambda_max(self, instance):
        X, y = instance
        lam = lambda_max(LassoProblem(X, y))
        sol = fit(LassoProblem(X, y, lam=lam * (1 + 1e-12)))
        assert sol.n_active == 0
        assert sol.intercept == pytest.approx(y.mean(), abs=1e-12)
        # exactly zero, not just small
        assert np.all(sol.coefficients == 0.0)

    def test_orthonormal_design_soft_threshold(self):
        rng = np.random.default_rng(3)
        n, p = 64, 8
        raw = rng.normal(size=(n, p))
        raw -= raw.mean(axis=0)
        q, _ = np.linalg.qr(raw)
        X = q * np.sqrt(n)  # (1/n) X'X = I, column means 0
        beta = np.array([3.0, -2.0, 0.0, 1.0, 0.0, 0.0, 0.5, 0.0])
        y = X @ beta + 2.0
        sol = fit(LassoProblem(X, y, lam=0.0), max_sweeps=20000)
        want = X.T @ (y - y.mean()) / n
        assert np.abs(sol.coefficients - want).max() < 1e-6

    def test_sign_enumeration_oracle_8x3(self):
        # fixed dense instance; compare against the exhaustive oracle
        X = np.array(
            [
                [0.8, -1.2, 0.4],
                [-0.5, 0.9, 1.6],
                [1.9, 0.3, -0.8],
                [-1.1, -0.7, 0.2],
                [0.6, 1.4, -1.3],
                [-2.0, 0.5, 0.9],
                [1.2, -0.4, -0.5],
                [0.1, 1.1, 0.7],
            ]
        )
        y = np.array([2.1, -0.4, 3.3, -1.8, 1.2, -3.5, 2.4, 0.3])
        for lam in (0.05, 0.2, 0.6):
            sol = fit(LassoProblem(X, y, lam=lam))
            b0, coef = sign_enumeration_oracle(X, y, lam)
            assert abs(sol.intercept - b0) < 1e-6
            assert np.abs(sol.coefficients - coef).max() < 1e-6

    def test_kkt_certificate(self, instance):
        X, y = instance
        for lam_frac in (0.5, 0.1, 0.01):
            lam = lam_frac * lambda_max(LassoProblem(X, y))
            prob = LassoProblem(X, y, lam=lam)
            sol = fit(prob)
            inactive_excess, active_mismatch = kkt_residuals(prob, sol)
            assert inactive_excess <= 1e-6
            assert active_mismatch <= 1e-6

    def test_sparse_and_dense_agree(self, instance):
        import scipy.sparse as sp

        X, y = instance
        lam = 0.1 * lambda_max(LassoProblem(X, y))
        dense = fit(LassoProblem(X, y, lam=lam))
        sparse = fit(LassoProblem(sp.csr_matrix(X), y, lam=lam))
        assert np.abs(dense.coefficients - sparse.coefficients).max() < 1e-12
        assert dense.intercept == pytest.approx(sparse.intercept, abs=1e-12)

    def test_iteration_cap_carries_last_iterate(self, instance):
        X, y = instance
        with pytest.raises(ConvergenceError) as err:
            fit(LassoProblem(X, y, lam=1e-6), max_sweeps=2)
        last = err.value.last_solution
        assert isinstance(last, LassoSolution)
        assert not last.converged
        assert last.iterations == 2

    def test_warm_start_matches_cold(self, instance):
        X, y = instance
        lam1 = 0.3 * lambda_max(LassoProblem(X, y))
        lam2 = 0.5 * lam1
        warm = fit(LassoProblem(X, y, lam=lam2), warm_start=fit(LassoProblem(X, y, lam=lam1)))
        cold = fit(LassoProblem(X, y, lam=lam2))
        assert np.abs(warm.coefficients - cold.coefficients).max() < 1e-6


class TestProperties:
    def test_objective_monotone_over_sweeps(self, instance):
        X, y = instance
        lam = 0.05 * lambda_max(LassoProblem(X, y))
        prep = _Prepared(X, y, True)
        Z = standardized(X)
        objs = []
        coef = None
        for sweeps in range(1, 12):
            try:
                sol = _fit_prepared(prep, lam, None, tol=0.0, max_sweeps=sweeps)
            except ConvergenceError as err:
                sol = err.last_solution
            theta_std = sol.coefficients * prep.col_scale
            resid = y - sol.intercept - X @ sol.coefficients
            objs.append(0.5 * resid @ resid / len(y) + lam * np.abs(theta_std).sum())
        assert all(a >= b - 1e-12 for a, b in zip(objs, objs[1:]))

    def test_scaling_equivariance(self, instance):
        X, y = instance
        lam = 0.2 * lambda_max(LassoProblem(X, y))
        base = fit(LassoProblem(X, y, lam=lam))
        s = 3.7
        scaled = fit(LassoProblem(X, s * y, lam=s * lam))
        assert np.abs(scaled.coefficients - s * base.coefficients).max() < 1e-8
        assert scaled.intercept == pytest.approx(s * base.intercept, rel=1e-10)

    def test_rescaled_columns_reach_same_fit(self, instance):
        # standardization makes the fitted values invariant to column scale
        X, y = instance
        lam = 0.2 * lambda_max(LassoProblem(X, y))
        scale = np.linspace(0.2, 5.0, X.shape[1])
        a = fit(LassoProblem(X, y, lam=lam))
        b = fit(LassoProblem(X * scale, y, lam=lam))
        assert np.abs(a.predict(X) - b.predict(X * scale)).max() < 1e-8


class TestPath:
    def test_first_point_null(self, instance):
        X, y = instance
        sols = path(LassoProblem(X, y), n_lambdas=20, lambda_min_ratio=1e-2)
        assert sols[0].n_active == 0

    def test_active_set_monotone_orthonormal(self):
        rng = np.random.default_rng(4)
        n, p = 128, 10
        raw = rng.normal(size=(n, p))
        raw -= raw.mean(axis=0)
        q, _ = np.linalg.qr(raw)
        X = q * np.sqrt(n)
        beta = rng.normal(size=p) * np.array([3, 2.5, 2, 1.5, 1, 0.7, 0.5, 0.2, 0.1, 0.05])
        y = X @ beta + rng.normal(size=n)
        sols = path(LassoProblem(X, y), n_lambdas=30, lambda_min_ratio=1e-3)
        sizes = [s.n_active for s in sols]
        assert all(a <= b for a, b in zip(sizes, sizes[1:]))

    def test_path_matches_cold_start_refits(self, instance):
        X, y = instance
        sols = path(LassoProblem(X, y), n_lambdas=12, lambda_min_ratio=1e-2)
        for sol in sols[::4]:
            cold = fit(LassoProblem(X, y, lam=sol.lam))
            assert np.abs(sol.coefficients - cold.coefficients).max() < 1e-6

    def test_grid_validation(self, instance):
        X, y = instance
        with pytest.raises(ValueError):
            path(LassoProblem(X, y), n_lambdas=1)
        with pytest.raises(ValueError):
            path(LassoProblem(X, y), lambda_min_ratio=1.5)


class TestCrossValidation:
    def test_deterministic_given_seed(self, instance):
        X, y = instance
        a = cv_select(LassoProblem(X, y), folds=5, seed=42, n_lambdas=25)
        b = cv_select(LassoProblem(X, y), folds=5, seed=42, n_lambdas=25)
        assert np.array_equal(a.lambdas, b.lambdas)
        assert np.array_equal(a.mean_mse, b.mean_mse)
        assert a.selected == b.selected

    def test_selected_attains_minimum(self, instance):
        X, y = instance
        cv = cv_select(LassoProblem(X, y), folds=5, seed=0, n_lambdas=25)
        assert cv.selected == cv.lambdas[np.argmin(cv.mean_mse)]
        assert np.all(np.diff(cv.lambdas) < 0)

    def test_zero_variance_fold_warns_but_runs(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(30, 4))
        y = np.full(30, 7.0)
        cv = cv_select(LassoProblem(X, y), folds=3, seed=1, n_lambdas=10)
        assert isinstance(cv, CvResult)
        assert len(cv.warnings) == 3  # every training fold is constant

    def test_pure_noise_selects_near_lambda_max(self):
        # Monte Carlo: with no signal, the chosen penalty should sit within
        # one grid step of the top in at least 80% of seeded replications
        rng = np.random.default_rng(100)
        hits = 0
        reps = 50
        for rep in range(reps):
            X = rng.normal(size=(80, 12))
            y = rng.normal(size=80)
            cv = cv_select(
                LassoProblem(X, y), folds=5, seed=rep, n_lambdas=40, lambda_min_ratio=1e-3
            )
            if cv.selected_index <= 1:
                hits += 1
        assert hits >= 0.8 * reps

    def test_strong_sparse_signal_recovers_support(self):
        rng = np.random.default_rng(200)
        hits = 0
        reps = 50
        for rep in range(reps):
            n, p = 120, 20
            X = rng.normal(size=(n, p))
            beta = np.zeros(p)
            beta[:5] = [3.0, -3.0, 2.5, 2.0, -2.0]
            signal = X @ beta
            noise_sd = np.std(signal) / np.sqrt(10.0)  # SNR 10 in variance
            y = signal + rng.normal(scale=noise_sd, size=n)
            cv = cv_select(
                LassoProblem(X, y), folds=5, seed=rep, n_lambdas=30, lambda_min_ratio=1e-3
            )
            sol = fit(LassoProblem(X, y, lam=cv.selected))
            if set(np.flatnonzero(sol.coefficients)) >= {0, 1, 2, 3, 4}:
                hits += 1
        assert hits >= 0.9 * reps

    def test_fold_count_validation(self, instance):
        X, y = instance
        with pytest.raises(ValueError):
            cv_select(LassoProblem(X, y), folds=1)
        with pytest.raises(ValueError):
            cv_select(LassoProblem(X[:3], y[:3]), folds=5)
