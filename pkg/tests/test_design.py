import datetime

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scalesep.design import (
    AffineMap,
    ColumnIndex,
    DailySurface,
    Scale,
    build_design,
    classify_column,
    fit_affine_map,
    low_column_mask,
    scale_coordinate,
    scale_coordinates,
    sparsity_bound,
    tensor_value,
)
from scalesep.errors import DegenerateDomainError, OutOfDomainError, ResourceLimitError
from scalesep.wavelets import build_basis, evaluate

DAY = datetime.date(2006, 7, 1)


@pytest.fixture(scope="module")
def basis4():
    return build_basis(order=5, levels=4, depth=12)


def random_surface(n, rng, lo=0.0, hi=10.0):
    pts = rng.uniform(lo, hi, (n, 2))
    return DailySurface(DAY, pts, rng.normal(size=n))


class TestAffineMap:
    def test_min_max(self):
        pts = np.array([[0.0, 3.0], [10.0, 5.0], [4.0, -1.0]])
        amap = fit_affine_map(pts)
        assert (amap.a1, amap.b1, amap.a2, amap.b2) == (0.0, 10.0, -1.0, 5.0)

    def test_degenerate_direction(self):
        pts = np.array([[0.0, 2.0], [1.0, 2.0], [3.0, 2.0]])
        with pytest.raises(DegenerateDomainError):
            fit_affine_map(pts)

    def test_lonlat_extent(self):
        rng = np.random.default_rng(0)
        lon = rng.uniform(-73.5, -69.9, 500)
        lat = rng.uniform(41.2, 43.5, 500)
        amap = fit_affine_map(np.column_stack([lon, lat]))
        assert amap.a1 == lon.min() and amap.b1 == lon.max()
        assert amap.a2 == lat.min() and amap.b2 == lat.max()

    def test_scale_endpoints(self):
        amap = AffineMap(0.0, 10.0, 0.0, 4.0)
        assert scale_coordinate(amap, (0.0, 0.0)) == (0.0, 0.0)
        u1, u2 = scale_coordinate(amap, (5.0, 2.0))
        assert u1 == 0.5 and u2 == 0.5
        u1, u2 = scale_coordinate(amap, (10.0, 4.0))
        assert u1 == np.nextafter(1.0, 0.0) and u1 < 1.0
        assert u2 == np.nextafter(1.0, 0.0)

    def test_out_of_box(self):
        amap = AffineMap(0.0, 10.0, 0.0, 4.0)
        with pytest.raises(OutOfDomainError):
            scale_coordinate(amap, (10.5, 2.0))

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.01, 1e6), st.floats(-1e6, 1e6), st.floats(0.0, 1.0))
    def test_clamp_property(self, width, origin, frac):
        amap = AffineMap(origin, origin + width, 0.0, 1.0)
        x = origin + frac * width
        if x > origin + width:  # floating overshoot of the box is out of domain
            return
        u1, _ = scale_coordinate(amap, (x, 0.5))
        assert 0.0 <= u1 < 1.0


class TestTensorAndClassify:
    def test_constant_pair_value(self, basis4):
        col = ColumnIndex(1, 1, 0, 0, 0, 0)
        assert tensor_value(basis4, col, 0.3, 0.9) == 1.0

    def test_one_constant_factor(self, basis4):
        col = ColumnIndex(1, 7, 0, 3, 0, 2)
        assert tensor_value(basis4, col, 0.41, 0.73) == evaluate(basis4, 7, 0.73)

    def test_product_matches_fine_oracle(self):
        coarse = build_basis(5, 4, 10)
        fine = build_basis(5, 4, 14)
        col = ColumnIndex(6, 11, 3, 4, 1, 2)
        u1, u2 = 0.3, 0.7
        got = tensor_value(coarse, col, u1, u2)
        want = evaluate(fine, 6, u1) * evaluate(fine, 11, u2)
        assert abs(got - want) < 2e-3

    def test_classification_rules(self):
        assert classify_column(ColumnIndex(3, 5, 2, 3, 0, 0), 3) is Scale.LOW
        assert classify_column(ColumnIndex(2, 17, 1, 5, 0, 0), 3) is Scale.HIGH
        assert classify_column(ColumnIndex(1, 2, 0, 1, 0, 0), 0) is Scale.HIGH
        assert classify_column(ColumnIndex(1, 1, 0, 0, 0, 0), 0) is Scale.LOW
        # cutoff = L makes everything low
        for lx1 in range(5):
            for lx2 in range(5):
                col = ColumnIndex(1, 1, lx1, lx2, 0, 0)
                assert classify_column(col, 4) is Scale.LOW


class TestBuildDesign:
    def test_column_count_formula(self):
        rng = np.random.default_rng(1)
        for levels in range(1, 9):
            basis = build_basis(5, levels, levels + 7)
            surf = random_surface(4, rng)
            design = build_design(surf, basis)
            assert design.n_cols + 1 == 1 << (2 * levels)

    def test_l7_column_count(self):
        # seven levels per direction: 16,383 penalized columns + intercept
        # is the full 2^14 tensor count
        basis = build_basis(5, 7, 14)
        rng = np.random.default_rng(2)
        design = build_design(random_surface(8, rng), basis)
        assert design.n_cols == 16_383
        assert design.n_cols + 1 == 2**14

    def test_entries_match_tensor_oracle(self, basis4):
        rng = np.random.default_rng(3)
        surf = random_surface(40, rng)
        amap = fit_affine_map(surf.points)
        design = build_design(surf, basis4, amap)
        u = scale_coordinates(amap, surf.points)
        dense = design.matrix.toarray()
        for i in (0, 13, 39):
            for j in (0, 7, 100, design.n_cols - 1):
                want = tensor_value(basis4, design.column(j), u[i, 0], u[i, 1])
                assert dense[i, j] == pytest.approx(want, abs=1e-12)

    def test_l1_unit_square_corners(self):
        basis = build_basis(5, 1, 12)
        eps = 1e-9
        pts = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        surf = DailySurface(DAY, pts, np.zeros(4))
        amap = AffineMap(0.0, 1.0, 0.0, 1.0)
        design = build_design(surf, basis, amap)
        assert design.n_cols == 3
        u = scale_coordinates(amap, pts)
        dense = design.matrix.toarray()
        for i in range(4):
            for j in range(3):
                col = design.column(j)
                want = evaluate(basis, col.l, u[i, 0]) * evaluate(basis, col.m, u[i, 1])
                assert dense[i, j] == pytest.approx(want, abs=1e-12)

    def test_deterministic(self, basis4):
        rng = np.random.default_rng(4)
        surf = random_surface(100, rng)
        d1 = build_design(surf, basis4)
        d2 = build_design(surf, basis4)
        assert np.array_equal(d1.matrix.data, d2.matrix.data)
        assert np.array_equal(d1.matrix.indices, d2.matrix.indices)
        assert np.array_equal(d1.matrix.indptr, d2.matrix.indptr)

    def test_row_sparsity_bound(self):
        basis = build_basis(5, 6, 13)
        rng = np.random.default_rng(5)
        surf = random_surface(300, rng)
        design = build_design(surf, basis)
        per_row = np.diff(design.matrix.indptr)
        assert per_row.max() <= sparsity_bound(6, 5)

    def test_memory_cap(self, basis4):
        rng = np.random.default_rng(6)
        surf = random_surface(500, rng)
        with pytest.raises(ResourceLimitError) as err:
            build_design(surf, basis4, memory_cap_bytes=1024)
        assert err.value.estimated_bytes > 1024

    def test_low_mask_matches_scalar_classification(self, basis4):
        rng = np.random.default_rng(7)
        design = build_design(random_surface(10, rng), basis4)
        mask = low_column_mask(design, 2)
        for j in range(design.n_cols):
            want = classify_column(design.column(j), 2) is Scale.LOW
            assert mask[j] == want

    def test_duplicate_points_rejected(self):
        pts = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 0.0]])
        with pytest.raises(ValueError, match="duplicate"):
            DailySurface(DAY, pts, np.zeros(3))


class TestGramOracle:
    def test_2d_gram_at_tabulation_aligned_points(self, basis4):
        # tensor structure: the 2D Gram is the Kronecker square of the 1D
        # Gram, computed here at a tabulation-aligned oversampled grid
        from scalesep.wavelets import evaluate_direction

        n = 1 << 10
        u = np.arange(n) / n
        z = evaluate_direction(basis4, u)
        g1 = z.T @ z / n
        g2 = np.kron(g1, g1)
        # drop the constant x constant row/column, as build_design does
        g2 = g2[1:, 1:]
        assert np.abs(g2 - np.eye(g2.shape[0])).max() < 1e-3

    def test_dyadic_grid_design_spans(self):
        # on the 16x16 dyadic grid with L=4 the 255-column design plus
        # intercept spans the grid exactly
        basis = build_basis(5, 4, 12)
        n = 16
        u = (np.arange(n) + 0.0) / n
        pts = np.column_stack(
            [np.repeat(u, n), np.tile(u, n)]
        )
        surf = DailySurface(DAY, pts, np.zeros(n * n))
        amap = AffineMap(0.0, 1.0, 0.0, 1.0)
        design = build_design(surf, basis, amap)
        full = np.column_stack([np.ones(n * n), design.matrix.toarray()])
        sv = np.linalg.svd(full, compute_uv=False)
        assert sv[-1] > 1e-3
