"""Subject-level exposure assignment and gestational-window averaging.

Decomposed daily components are indexed by date and grid cell; each
subject is matched to the nearest grid cell of the mother's residence and
the mean, low, and high components are averaged over the days of a
gestational window. Trimester boundaries sit at gestational days 90 and
180; windows are truncated at birth and a window whose start lies beyond
the gestation length is an error.
"""

from __future__ import annotations

import datetime
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree

from .decompose import DecomposedSurface
from .errors import CoverageError, UnassignableSubjectError

__all__ = [
    "Subject",
    "WindowKind",
    "ExposureWindow",
    "ExposureTriple",
    "ExposureField",
    "nearest_cell",
    "nearest_cells",
    "resolve_window",
    "aggregate",
    "window_averages",
    "aggregate_cohort",
]

GESTATION_RANGE = (140, 320)
DEFAULT_COVERAGE = 0.8


@dataclass(frozen=True)
class Subject:
    """One birth record with location, timing, outcome, and confounders."""

    id: str
    location: tuple[float, float]
    birth_date: datetime.date
    gestation_days: int
    tract_id: str
    outcome: float
    confounders: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        lo, hi = GESTATION_RANGE
        if not lo <= self.gestation_days <= hi:
            raise ValueError(
                f"subject {self.id}: gestation {self.gestation_days} outside [{lo}, {hi}]"
            )
        if not self.outcome > 0:
            raise ValueError(f"subject {self.id}: outcome must be positive")
        for name, value in self.confounders.items():
            if value is None or not math.isfinite(value):
                raise ValueError(f"subject {self.id}: confounder {name!r} missing")

    @property
    def conception(self) -> datetime.date:
        return self.birth_date - datetime.timedelta(days=self.gestation_days)


class WindowKind(Enum):
    TRIMESTER_1 = "t1"
    TRIMESTER_2 = "t2"
    TRIMESTER_3 = "t3"
    FULL = "full"
    LAST_30_DAYS = "last30"


_WINDOW_START = {
    WindowKind.TRIMESTER_1: 1,
    WindowKind.TRIMESTER_2: 91,
    WindowKind.TRIMESTER_3: 181,
    WindowKind.FULL: 1,
}
_WINDOW_END = {
    WindowKind.TRIMESTER_1: 90,
    WindowKind.TRIMESTER_2: 180,
}


@dataclass(frozen=True)
class ExposureWindow:
    """Resolved inclusive calendar range of one exposure window."""

    kind: WindowKind
    start: datetime.date
    end: datetime.date

    def __post_init__(self):
        if self.end < self.start:
            raise ValueError("window end precedes start")

    @property
    def n_days(self) -> int:
        return (self.end - self.start).days + 1

    def dates(self):
        for offset in range(self.n_days):
            yield self.start + datetime.timedelta(days=offset)


@dataclass(frozen=True)
class ExposureTriple:
    """Window averages of the mean, low, and high components."""

    mean_avg: float
    low_avg: float
    high_avg: float
    days_covered: int
    days_missing: int


def resolve_window(subject: Subject, kind: WindowKind) -> ExposureWindow:
    """Gestational-day range of a window, as calendar dates.

    Gestational day g is ``conception + g`` so the full window of length
    ``gestation_days`` ends on the birth date.
    """
    g = subject.gestation_days
    if kind == WindowKind.LAST_30_DAYS:
        start_day = g - 29
    else:
        start_day = _WINDOW_START[kind]
    end_day = min(_WINDOW_END.get(kind, g), g)
    if start_day > g:
        raise ValueError(
            f"subject {subject.id}: window {kind.value} starts at gestational day "
            f"{start_day} but gestation is only {g} days"
        )
    conception = subject.conception
    return ExposureWindow(
        kind,
        conception + datetime.timedelta(days=start_day),
        conception + datetime.timedelta(days=end_day),
    )


def nearest_cells(
    locations: np.ndarray,
    grid: np.ndarray,
    max_distance: float = np.inf,
) -> np.ndarray:
    """Exact nearest grid index for each location, ties to the lowest index."""
    grid = np.asarray(grid, dtype=float)
    locations = np.atleast_2d(np.asarray(locations, dtype=float))
    if grid.ndim != 2 or grid.shape[1] != 2 or len(grid) == 0:
        raise ValueError("grid must be a nonempty (n, 2) array")
    tree = cKDTree(grid)
    k = min(len(grid), 4)
    out = np.empty(len(locations), dtype=np.int64)
    for i, loc in enumerate(locations):
        kk = k
        while True:
            dist, idx = tree.query(loc, k=kk)
            dist = np.atleast_1d(dist)
            idx = np.atleast_1d(idx)
            ties = idx[dist == dist[0]]
            # if every returned neighbor ties, there may be more beyond k
            if len(ties) == len(idx) and kk < len(grid):
                kk = min(2 * kk, len(grid))
                continue
            break
        if dist[0] > max_distance:
            raise UnassignableSubjectError(
                f"nearest grid cell is {dist[0]:.3f} away, beyond {max_distance:.3f}"
            )
        out[i] = ties.min()
    return out


def nearest_cell(location, grid: np.ndarray, max_distance: float = np.inf) -> int:
    return int(nearest_cells(np.asarray(location, dtype=float)[None, :], grid, max_distance)[0])


class ExposureField:
    """Date- and cell-indexed decomposed components with fast window sums.

    Components are stored as (n_days, n_cells) arrays with prefix sums over
    the day axis, so any contiguous date range averages in O(1) per cell.
    """

    def __init__(
        self,
        grid: np.ndarray,
        dates: list[datetime.date],
        mean: np.ndarray,
        components: dict[str, np.ndarray],
    ):
        self.grid = np.asarray(grid, dtype=float)
        order = np.argsort([d.toordinal() for d in dates])
        self.dates = [dates[i] for i in order]
        self._ordinals = np.array([d.toordinal() for d in self.dates], dtype=np.int64)
        if len(np.unique(self._ordinals)) != len(self._ordinals):
            raise ValueError("duplicate dates in exposure field")
        self.mean = np.asarray(mean, dtype=float)[order]
        self.components = {
            name: np.asarray(arr, dtype=float)[order] for name, arr in components.items()
        }
        n_days, n_cells = len(self.dates), len(self.grid)
        if self.mean.shape != (n_days,):
            raise ValueError("mean series length does not match dates")
        for name, arr in self.components.items():
            if arr.shape != (n_days, n_cells):
                raise ValueError(f"component {name!r} shape mismatch")
        self._cs_mean = np.concatenate(([0.0], np.cumsum(self.mean)))
        self._cs = {
            name: np.vstack([np.zeros((1, n_cells)), np.cumsum(arr, axis=0)])
            for name, arr in self.components.items()
        }

    @classmethod
    def from_decompositions(
        cls,
        decomposed: list[DecomposedSurface],
        extra: dict[str, np.ndarray] | None = None,
    ) -> "ExposureField":
        """Stack per-day decompositions that share one grid.

        ``extra`` adds named (n_days, n_cells) component arrays aligned to
        the input order, e.g. level-filtered surfaces.
        """
        if not decomposed:
            raise ValueError("no decompositions supplied")
        grid = decomposed[0].points
        for d in decomposed[1:]:
            if not np.array_equal(d.points, grid):
                raise ValueError(f"day {d.date} has a different grid")
        comps = {
            "low": np.vstack([d.low_values for d in decomposed]),
            "high": np.vstack([d.high_values for d in decomposed]),
        }
        if extra:
            comps.update({k: np.asarray(v, dtype=float) for k, v in extra.items()})
        return cls(
            grid,
            [d.date for d in decomposed],
            np.array([d.mean for d in decomposed]),
            comps,
        )

    def _window_rows(self, window: ExposureWindow) -> tuple[int, int]:
        lo = int(np.searchsorted(self._ordinals, window.start.toordinal(), side="left"))
        hi = int(np.searchsorted(self._ordinals, window.end.toordinal(), side="right"))
        return lo, hi

    def missing_dates(self, window: ExposureWindow) -> list[datetime.date]:
        present = set(self._ordinals.tolist())
        return [d for d in window.dates() if d.toordinal() not in present]


def window_averages(
    field: ExposureField,
    cell: int,
    window: ExposureWindow,
    coverage_threshold: float = DEFAULT_COVERAGE,
) -> tuple[dict[str, float], int, int]:
    """Average each component over the window days present in the field.

    Returns (averages keyed by 'mean' and component names, days covered,
    days missing); raises ``CoverageError`` when coverage falls below the
    threshold.
    """
    lo, hi = field._window_rows(window)
    covered = hi - lo
    missing = window.n_days - covered
    if covered == 0 or covered < coverage_threshold * window.n_days:
        missing_list = field.missing_dates(window)
        raise CoverageError(
            f"window {window.start}..{window.end} covers {covered}/{window.n_days} "
            f"days, below the {coverage_threshold:.0%} threshold; missing "
            + ", ".join(str(d) for d in missing_list[:10])
            + ("..." if len(missing_list) > 10 else ""),
            missing_dates=missing_list,
        )
    averages = {"mean": float((field._cs_mean[hi] - field._cs_mean[lo]) / covered)}
    for name, cs in field._cs.items():
        averages[name] = float((cs[hi, cell] - cs[lo, cell]) / covered)
    return averages, covered, missing


def aggregate(
    subject: Subject,
    window: ExposureWindow,
    field: ExposureField,
    coverage_threshold: float = DEFAULT_COVERAGE,
    max_distance: float = np.inf,
    cell: int | None = None,
) -> ExposureTriple:
    """Window-averaged (mean, low, high) exposure at the subject's cell."""
    if cell is None:
        cell = nearest_cell(subject.location, field.grid, max_distance)
    averages, covered, missing = window_averages(field, cell, window, coverage_threshold)
    return ExposureTriple(
        averages["mean"], averages["low"], averages["high"], covered, missing
    )


def aggregate_cohort(
    subjects: list[Subject],
    kind: WindowKind,
    field: ExposureField,
    coverage_threshold: float = DEFAULT_COVERAGE,
    max_distance: float = np.inf,
    components: tuple[str, ...] = ("low", "high"),
) -> pd.DataFrame:
    """Exposure table for a cohort: one row per assignable subject.

    Columns are ``id, window, mean_avg, <component>_avg..., days_covered,
    days_missing``. Subjects failing coverage or assignment raise; filter
    beforehand if partial cohorts are acceptable.
    """
    locations = np.array([s.location for s in subjects], dtype=float)
    cells = nearest_cells(locations, field.grid, max_distance)
    rows = []
    for subject, cell in zip(subjects, cells):
        window = resolve_window(subject, kind)
        averages, covered, missing = window_averages(
            field, int(cell), window, coverage_threshold
        )
        row = {"id": subject.id, "window": kind.value, "mean_avg": averages["mean"]}
        for name in components:
            row[f"{name}_avg"] = averages[name]
        row["days_covered"] = covered
        row["days_missing"] = missing
        rows.append(row)
    return pd.DataFrame(rows)
