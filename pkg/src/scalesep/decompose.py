"""Per-day decomposition of surfaces into mean, low, and high components.

Each day is fit independently: the surface's spatial mean is split off as
the purely temporal component, a penalized wavelet regression captures the
spatial structure, the low-frequency part is reconstructed from columns at
or below the level cutoff in both directions, and the high-frequency part
is the residual remainder so that mean + low + high reproduces the
observations. Level filtering for the coarse-to-fine sweeps subtracts
partial reconstructions from the spatial component.
"""

from __future__ import annotations

import datetime
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import lasso
from .design import (
    DEFAULT_MEMORY_CAP,
    DailySurface,
    SparseDesign,
    build_design,
    fit_affine_map,
    low_column_mask,
)
from .errors import ConvergenceError
from .wavelets import PeriodizedBasis, build_basis

__all__ = [
    "DecompositionConfig",
    "DecomposedSurface",
    "LevelFilterSpec",
    "BatchFailure",
    "DecompositionBatchError",
    "decompose_day",
    "decompose_batch",
    "reconstruct",
    "filter_levels",
    "day_seed",
]


@dataclass(frozen=True)
class DecompositionConfig:
    """Knobs for the per-day wavelet decomposition."""

    levels: int = 7
    low_cutoff: int = 3
    order: int = 5
    depth: int = 14
    cv_folds: int = 10
    n_lambdas: int = 100
    lambda_min_ratio: float = 1e-3
    fixed_lambda_fraction: float | None = None
    seed: int = 0
    workers: int = 1
    tol: float = lasso.DEFAULT_TOL
    cv_tol: float = 1e-5
    max_sweeps: int = lasso.DEFAULT_MAX_SWEEPS
    polish_cap: int = 4096
    memory_cap_bytes: int = DEFAULT_MEMORY_CAP

    def __post_init__(self):
        if not 1 <= self.levels <= 8:
            raise ValueError("levels must be in 1..8")
        if not 1 <= self.low_cutoff <= self.levels:
            raise ValueError("low_cutoff must be in 1..levels")
        if self.workers < 1:
            raise ValueError("workers must be positive")
        if self.fixed_lambda_fraction is not None and self.fixed_lambda_fraction < 0:
            raise ValueError("fixed_lambda_fraction must be nonnegative")

    def make_basis(self) -> PeriodizedBasis:
        return build_basis(self.order, self.levels, self.depth)


@dataclass(frozen=True)
class DecomposedSurface:
    """One day's decomposition, aligned to the surface's points."""

    date: datetime.date
    mean: float
    coefficients: lasso.LassoSolution
    low_values: np.ndarray
    high_values: np.ndarray
    selected_lambda: float
    points: np.ndarray = field(repr=False)

    def __post_init__(self):
        low = np.asarray(self.low_values, dtype=float)
        high = np.asarray(self.high_values, dtype=float)
        if low.shape != high.shape:
            raise ValueError("low and high components must align")
        if abs(low.mean()) > 1e-9 or abs(high.mean()) > 1e-9:
            raise ValueError("spatial components must have mean zero")
        object.__setattr__(self, "low_values", low)
        object.__setattr__(self, "high_values", high)

    def total(self) -> np.ndarray:
        """Reassembled observations, mean + low + high."""
        return self.mean + self.low_values + self.high_values


@dataclass(frozen=True)
class LevelFilterSpec:
    """Wavelet levels to drop from the spatial component."""

    dropped: frozenset[int]

    def __init__(self, dropped):
        object.__setattr__(self, "dropped", frozenset(int(d) for d in dropped))

    def validate(self, levels: int):
        bad = [d for d in self.dropped if not 1 <= d <= levels]
        if bad:
            raise ValueError(f"dropped levels {sorted(bad)} outside 1..{levels}")


class BatchFailure:
    """A single day's failure inside a batch run."""

    def __init__(self, date, error: Exception):
        self.date = date
        self.error = error

    def __repr__(self):
        return f"BatchFailure({self.date}: {self.error})"


class DecompositionBatchError(RuntimeError):
    """Raised when some days of a batch fail; successful results attached."""

    def __init__(self, failures: list[BatchFailure], results: list[DecomposedSurface]):
        dates = ", ".join(str(f.date) for f in failures)
        super().__init__(f"{len(failures)} day(s) failed to decompose: {dates}")
        self.failures = failures
        self.results = results


def day_seed(config_seed: int, date: datetime.date) -> int:
    """Deterministic per-day seed, independent of batch ordering."""
    return (config_seed * 1_000_003 + date.toordinal()) % (1 << 63)


def decompose_day(
    surface: DailySurface,
    config: DecompositionConfig,
    basis: PeriodizedBasis | None = None,
    design: SparseDesign | None = None,
) -> DecomposedSurface:
    """Decompose one surface into mean, low, and high components."""
    if basis is None:
        basis = config.make_basis()
    if design is None:
        amap = fit_affine_map(surface.points)
        design = build_design(
            surface, basis, amap, memory_cap_bytes=config.memory_cap_bytes
        )
    problem = lasso.LassoProblem(design, surface.values)
    try:
        if config.fixed_lambda_fraction is not None:
            lam = config.fixed_lambda_fraction * lasso.lambda_max(problem)
        else:
            cv = lasso.cv_select(
                problem,
                folds=config.cv_folds,
                seed=day_seed(config.seed, surface.date),
                n_lambdas=config.n_lambdas,
                lambda_min_ratio=config.lambda_min_ratio,
                tol=config.cv_tol,
                max_sweeps=config.max_sweeps,
            )
            lam = cv.selected
        solution = lasso.fit(
            lasso.LassoProblem(design, surface.values, lam=lam),
            tol=config.tol,
            max_sweeps=config.max_sweeps,
            polish_cap=config.polish_cap,
        )
    except ConvergenceError as exc:
        raise ConvergenceError(
            f"decomposition failed for {surface.date}: {exc}",
            last_solution=exc.last_solution,
        ) from exc

    mean = float(surface.values.mean())
    low_raw = reconstruct(solution, low_column_mask(design, config.low_cutoff), design)
    low = low_raw - low_raw.mean()
    high = (surface.values - mean) - low
    return DecomposedSurface(
        surface.date, mean, solution, low, high, lam, surface.points
    )


def reconstruct(
    coefficients: lasso.LassoSolution,
    keep,
    design: SparseDesign,
) -> np.ndarray:
    """Fitted values from the intercept plus a subset of columns.

    ``keep`` is a boolean mask over columns or a predicate over
    ColumnIndex; keeping everything reproduces the full fitted surface.
    """
    mask = _as_mask(keep, design)
    coef = coefficients.coefficients
    if len(coef) != design.n_cols:
        raise ValueError(
            f"solution has {len(coef)} coefficients but design has {design.n_cols} columns"
        )
    kept = np.where(mask, coef, 0.0)
    return np.asarray(design.matrix @ kept).ravel() + coefficients.intercept


def _as_mask(keep, design: SparseDesign) -> np.ndarray:
    if callable(keep):
        return np.fromiter(
            (bool(keep(design.column(j))) for j in range(design.n_cols)),
            dtype=bool,
            count=design.n_cols,
        )
    mask = np.asarray(keep, dtype=bool)
    if mask.shape != (design.n_cols,):
        raise ValueError("keep mask length does not match design columns")
    return mask


def filter_levels(
    decomposed: DecomposedSurface,
    spec: LevelFilterSpec,
    design: SparseDesign,
) -> np.ndarray:
    """Spatial component after removing the fitted content of some levels.

    A column is dropped when either direction's level is in the dropped
    set, mirroring the high-frequency classification rule. The dropped
    partial reconstruction is recentered before subtraction so the result
    keeps spatial mean zero and an empty spec returns low + high
    unchanged.
    """
    spec.validate(design.levels)
    spatial = decomposed.low_values + decomposed.high_values
    if not spec.dropped:
        return spatial.copy()
    dropped_levels = np.fromiter(spec.dropped, dtype=np.int64)
    dropped_mask = np.isin(design.col_level_x1, dropped_levels) | np.isin(
        design.col_level_x2, dropped_levels
    )
    coef = np.where(dropped_mask, decomposed.coefficients.coefficients, 0.0)
    partial = np.asarray(design.matrix @ coef).ravel()
    partial -= partial.mean()
    return spatial - partial


def decompose_batch(
    surfaces: list[DailySurface],
    config: DecompositionConfig,
) -> list[DecomposedSurface]:
    """Decompose many days, reusing the basis and any shared designs.

    Days with identical point sets share one design matrix. Results keep
    the input order and match individual ``decompose_day`` calls; failures
    are collected into a ``DecompositionBatchError`` carrying the days that
    did succeed.
    """
    dates = [s.date for s in surfaces]
    if len(set(dates)) != len(dates):
        raise ValueError("surfaces must have distinct dates")
    basis = config.make_basis()

    designs: dict[bytes, SparseDesign] = {}
    bad_keys: dict[bytes, Exception] = {}
    keys: list[bytes] = []
    failures: list[BatchFailure] = []
    for surface in surfaces:
        key = surface.points.tobytes()
        keys.append(key)
        if key in designs or key in bad_keys:
            continue
        try:
            amap = fit_affine_map(surface.points)
            designs[key] = build_design(
                surface, basis, amap, memory_cap_bytes=config.memory_cap_bytes
            )
        except Exception as exc:
            bad_keys[key] = exc
    for i, key in enumerate(keys):
        if key in bad_keys:
            failures.append(BatchFailure(surfaces[i].date, bad_keys[key]))

    def run(i: int):
        return decompose_day(surfaces[i], config, basis, designs[keys[i]])

    todo = [i for i in range(len(surfaces)) if keys[i] not in bad_keys]
    results: list[DecomposedSurface | None] = [None] * len(surfaces)
    if config.workers == 1 or len(todo) <= 1:
        for i in todo:
            try:
                results[i] = run(i)
            except Exception as exc:
                failures.append(BatchFailure(surfaces[i].date, exc))
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            futures = {i: pool.submit(run, i) for i in todo}
            for i, fut in futures.items():
                try:
                    results[i] = fut.result()
                except Exception as exc:
                    failures.append(BatchFailure(surfaces[i].date, exc))
    if failures:
        raise DecompositionBatchError(failures, [r for r in results if r is not None])
    return results  # type: ignore[return-value]
