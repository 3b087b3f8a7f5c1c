"""Tensor-product wavelet design matrices over irregular planar points.

Maps coordinates to the unit square with a per-direction affine rescale,
evaluates the periodized 1D basis in each direction, and assembles the
sparse two-dimensional design whose columns are all tensor pairs except
constant x constant (that one is the model intercept).
"""

from __future__ import annotations

import datetime
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .errors import DegenerateDomainError, OutOfDomainError, ResourceLimitError
from .wavelets import PeriodizedBasis, evaluate, evaluate_direction, index_level_shift

__all__ = [
    "DailySurface",
    "AffineMap",
    "ColumnIndex",
    "Scale",
    "SparseDesign",
    "fit_affine_map",
    "scale_coordinate",
    "scale_coordinates",
    "tensor_value",
    "build_design",
    "classify_column",
    "low_column_mask",
]

SPARSE_THRESHOLD = 1e-12
DEFAULT_MEMORY_CAP = 8 << 30  # bytes


class Scale(Enum):
    LOW = "low"
    HIGH = "high"


@dataclass(frozen=True)
class DailySurface:
    """One day's observations: values at irregular planar points."""

    date: datetime.date
    points: np.ndarray  # (n, 2) columns x1, x2
    values: np.ndarray  # (n,)

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=float))
        vals = np.asarray(self.values, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("points must be an (n, 2) array")
        if vals.shape != (pts.shape[0],):
            raise ValueError("values length does not match points")
        if pts.shape[0] < 1:
            raise ValueError("surface needs at least one point")
        if not np.isfinite(pts).all():
            raise ValueError("points contain non-finite coordinates")
        if not np.isfinite(vals).all():
            raise ValueError("values contain non-finite entries")
        if len(np.unique(pts, axis=0)) != len(pts):
            raise ValueError(f"duplicate points in surface for {self.date}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class AffineMap:
    """Per-direction [min, max] ranges mapping the plane onto [0, 1)^2."""

    a1: float
    b1: float
    a2: float
    b2: float

    def __post_init__(self):
        if not (self.b1 > self.a1 and self.b2 > self.a2):
            raise DegenerateDomainError(
                f"degenerate ranges: x1 [{self.a1}, {self.b1}], x2 [{self.a2}, {self.b2}]"
            )


@dataclass(frozen=True)
class ColumnIndex:
    """Identity of one tensor-product column.

    ``l`` and ``m`` are the 1-based per-direction basis indices; level 0
    denotes the constant (scaling) function.
    """

    l: int
    m: int
    level_x1: int
    level_x2: int
    shift_x1: int
    shift_x2: int


@dataclass(frozen=True)
class SparseDesign:
    """Row-compressed tensor design with per-column index metadata."""

    matrix: sp.csr_matrix = field(repr=False)
    levels: int
    col_l: np.ndarray = field(repr=False)
    col_m: np.ndarray = field(repr=False)
    col_level_x1: np.ndarray = field(repr=False)
    col_level_x2: np.ndarray = field(repr=False)
    col_shift_x1: np.ndarray = field(repr=False)
    col_shift_x2: np.ndarray = field(repr=False)

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_cols(self) -> int:
        return self.matrix.shape[1]

    def column(self, j: int) -> ColumnIndex:
        return ColumnIndex(
            int(self.col_l[j]),
            int(self.col_m[j]),
            int(self.col_level_x1[j]),
            int(self.col_level_x2[j]),
            int(self.col_shift_x1[j]),
            int(self.col_shift_x2[j]),
        )

    def columns(self) -> list[ColumnIndex]:
        return [self.column(j) for j in range(self.n_cols)]


def fit_affine_map(points: np.ndarray) -> AffineMap:
    """Fit per-direction min/max ranges from the observed points."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise ValueError("need at least two (x1, x2) points")
    a1, a2 = pts.min(axis=0)
    b1, b2 = pts.max(axis=0)
    if b1 <= a1 or b2 <= a2:
        raise DegenerateDomainError(
            "points have zero range in "
            + ("x1" if b1 <= a1 else "x2")
            + "; cannot map to the unit square"
        )
    return AffineMap(float(a1), float(b1), float(a2), float(b2))


_BELOW_ONE = np.nextafter(1.0, 0.0)


def scale_coordinates(amap: AffineMap, points: np.ndarray) -> np.ndarray:
    """Map points inside the closed bounding box to [0, 1)^2.

    The maximum coordinate lands on the largest double below 1 so the
    half-open periodic domain is preserved.
    """
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    if single:
        pts = pts[None, :]
    x1, x2 = pts[:, 0], pts[:, 1]
    if (x1 < amap.a1).any() or (x1 > amap.b1).any() or (x2 < amap.a2).any() or (x2 > amap.b2).any():
        bad = np.flatnonzero(
            (x1 < amap.a1) | (x1 > amap.b1) | (x2 < amap.a2) | (x2 > amap.b2)
        )
        raise OutOfDomainError(
            f"{len(bad)} point(s) outside bounding box (first offender index {bad[0]})"
        )
    u = np.empty_like(pts)
    u[:, 0] = (x1 - amap.a1) / (amap.b1 - amap.a1)
    u[:, 1] = (x2 - amap.a2) / (amap.b2 - amap.a2)
    np.clip(u, 0.0, _BELOW_ONE, out=u)
    return u[0] if single else u


def scale_coordinate(amap: AffineMap, point) -> tuple[float, float]:
    u = scale_coordinates(amap, np.asarray(point, dtype=float))
    return float(u[0]), float(u[1])


def tensor_value(basis: PeriodizedBasis, col: ColumnIndex, u1: float, u2: float) -> float:
    """Value of one 2D tensor column at a point of the unit square."""
    return evaluate(basis, col.l, u1) * evaluate(basis, col.m, u2)


def _column_metadata(levels: int):
    k = 1 << levels
    idx = np.arange(k)
    lev = np.zeros(k, dtype=np.int64)
    shift = np.zeros(k, dtype=np.int64)
    for i in range(2, k + 1):
        lev[i - 1], shift[i - 1] = index_level_shift(i, levels)
    l_of_col = np.repeat(idx, k)
    m_of_col = np.tile(idx, k)
    keep = ~((l_of_col == 0) & (m_of_col == 0))
    l_of_col, m_of_col = l_of_col[keep], m_of_col[keep]
    return (
        l_of_col + 1,
        m_of_col + 1,
        lev[l_of_col],
        lev[m_of_col],
        shift[l_of_col],
        shift[m_of_col],
    )


def build_design(
    surface: DailySurface,
    basis: PeriodizedBasis,
    amap: AffineMap | None = None,
    threshold: float = SPARSE_THRESHOLD,
    memory_cap_bytes: int = DEFAULT_MEMORY_CAP,
) -> SparseDesign:
    """Assemble the n x (2**(2L) - 1) sparse tensor design for one surface.

    Entries with magnitude at or below ``threshold`` are not stored. Raises
    ``ResourceLimitError`` before allocation when the estimate (sparse
    storage plus one solver-side copy) exceeds ``memory_cap_bytes``.
    """
    if amap is None:
        amap = fit_affine_map(surface.points)
    u = scale_coordinates(amap, surface.points)
    z1 = evaluate_direction(basis, u[:, 0])
    z2 = evaluate_direction(basis, u[:, 1])

    counts = _kernels.count_row_products(z1, z2, float(threshold))
    nnz = int(counts.sum())
    estimated = 2 * (nnz * 12 + (surface.n + 1) * 8)  # CSR plus a CSC working copy
    if estimated > memory_cap_bytes:
        raise ResourceLimitError(
            f"design for {surface.date} needs about {estimated / 2**30:.2f} GiB "
            f"({nnz} stored entries), above the {memory_cap_bytes / 2**30:.2f} GiB cap",
            estimated_bytes=estimated,
            cap_bytes=memory_cap_bytes,
        )
    if nnz >= np.iinfo(np.int32).max:
        raise ResourceLimitError("design exceeds 32-bit sparse index space", nnz * 12)

    indptr = np.zeros(surface.n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    indices = np.empty(nnz, dtype=np.int32)
    data = np.empty(nnz, dtype=np.float64)
    _kernels.fill_row_products(z1, z2, float(threshold), indptr, indices, data)

    k = 1 << basis.levels
    matrix = sp.csr_matrix((data, indices, indptr), shape=(surface.n, k * k - 1))
    meta = _column_metadata(basis.levels)
    return SparseDesign(matrix, basis.levels, *meta)


def classify_column(col: ColumnIndex, cutoff: int) -> Scale:
    """LOW when both direction levels are at or below the cutoff, else HIGH.

    The constant (level 0) counts as low; a single fine direction makes the
    whole tensor column high-frequency.
    """
    if cutoff < 0:
        raise ValueError("cutoff must be nonnegative")
    if col.level_x1 <= cutoff and col.level_x2 <= cutoff:
        return Scale.LOW
    return Scale.HIGH


def low_column_mask(design: SparseDesign, cutoff: int) -> np.ndarray:
    """Vectorized LOW classification over all design columns."""
    if cutoff < 0:
        raise ValueError("cutoff must be nonnegative")
    return (design.col_level_x1 <= cutoff) & (design.col_level_x2 <= cutoff)


def sparsity_bound(levels: int, order: int) -> int:
    """Upper bound on stored entries per design row.

    Each point meets at most min(2**(l-1), 2p-1) wavelets per level per
    direction, plus the constant.
    """
    per_dir = 1 + sum(min(1 << (l - 1), 2 * order - 1) for l in range(1, levels + 1))
    return per_dir * per_dir
