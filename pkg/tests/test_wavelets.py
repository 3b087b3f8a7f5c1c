import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scalesep.errors import NumericalError
from scalesep.wavelets import (
    PeriodizedBasis,
    build_basis,
    cascade,
    daubechies_filter,
    evaluate,
    evaluate_direction,
    index_level_shift,
    mother_wavelet,
)

SQRT2 = math.sqrt(2.0)


def spectral_factorization_taps(p: int) -> np.ndarray:
    """Independent construction of the order-p filter from the Daubechies
    polynomial: root-find in the y domain, map each root to its inside-unit
    z root, and expand (1+z)^p times the minimum-phase factor."""
    if p == 1:
        return np.array([1.0, 1.0]) / SQRT2
    binom = [math.comb(p - 1 + k, k) for k in range(p)]
    yroots = np.roots(list(reversed(binom)))
    poly = np.array([1.0 + 0j])
    for _ in range(p):
        poly = np.convolve(poly, [1.0, 1.0])  # (z + 1) factors
    for y in yroots:
        b = 4.0 * y - 2.0
        disc = np.sqrt(complex(b * b - 4.0))
        z = (-b + disc) / 2.0
        if abs(z) >= 1.0:
            z = (-b - disc) / 2.0
        poly = np.convolve(poly, [1.0, -z])
    taps = np.real(poly)
    taps *= SQRT2 / taps.sum()
    front, back = (taps[:p] ** 2).sum(), (taps[p:] ** 2).sum()
    if back > front:
        taps = taps[::-1]
    return taps


class TestDaubechiesFilter:
    def test_haar_taps(self):
        filt = daubechies_filter(1)
        assert np.allclose(filt.taps, [1 / SQRT2, 1 / SQRT2], atol=1e-15)

    @pytest.mark.parametrize("p", range(1, 11))
    def test_qmf_invariants(self, p):
        filt = daubechies_filter(p)
        assert len(filt.taps) == 2 * p
        assert abs(filt.taps.sum() - SQRT2) < 1e-12
        assert abs(filt.taps @ filt.taps - 1.0) < 1e-12
        for m in range(1, p):
            shifted = filt.taps[: -2 * m] @ filt.taps[2 * m :]
            assert abs(shifted) < 1e-12, f"shift {m} autocorrelation {shifted}"

    def test_db5_matches_spectral_factorization_oracle(self):
        embedded = daubechies_filter(5).taps
        oracle = spectral_factorization_taps(5)
        assert np.abs(embedded - oracle).max() < 1e-10

    @pytest.mark.parametrize("p", [2, 3, 4, 6, 7, 8, 9, 10])
    def test_all_orders_match_oracle(self, p):
        assert np.abs(daubechies_filter(p).taps - spectral_factorization_taps(p)).max() < 1e-9

    @pytest.mark.parametrize("bad", [0, 11, -3])
    def test_out_of_range_order(self, bad):
        with pytest.raises(ValueError):
            daubechies_filter(bad)


class TestCascade:
    def test_haar_is_indicator(self):
        phi = cascade(daubechies_filter(1), 8)
        assert phi.values[-1] == 0.0
        assert (phi.values[:-1] == 1.0).all()

    @pytest.mark.parametrize("p", [1, 2, 5, 10])
    def test_unit_integral(self, p):
        phi = cascade(daubechies_filter(p), 11)
        assert abs(phi.step * phi.values.sum() - 1.0) < 1e-6

    @pytest.mark.parametrize("p", [1, 2, 5, 10])
    def test_partition_of_unity(self, p):
        phi = cascade(daubechies_filter(p), 10)
        n = 1 << 10
        x = np.arange(n) / n
        total = np.zeros(n)
        for k in range(-(2 * p - 1), 2):
            total += phi(x - k)
        assert np.abs(total - 1.0).max() < 1e-6

    def test_compact_support_endpoints(self):
        phi = cascade(daubechies_filter(5), 10)
        assert phi.values[0] == pytest.approx(0.0, abs=1e-9)
        assert phi.values[-1] == pytest.approx(0.0, abs=1e-9)
        assert np.isfinite(phi.values).all()

    def test_nonconvergence_raises(self):
        with pytest.raises(NumericalError):
            cascade(daubechies_filter(2), 10, tol=1e-16, max_refinements=3)

    def test_depth_floor(self):
        with pytest.raises(ValueError):
            cascade(daubechies_filter(2), 4)


class TestMotherWavelet:
    def test_haar_square_wave(self):
        filt = daubechies_filter(1)
        psi = mother_wavelet(filt, cascade(filt, 8))
        x = psi.step * np.arange(len(psi.values))
        interior = (x > 0) & (x < 0.5)
        assert np.allclose(psi.values[interior], 1.0)
        interior = (x > 0.5) & (x < 1.0)
        assert np.allclose(psi.values[interior], -1.0)

    @pytest.mark.parametrize("p", [1, 2, 5, 8])
    def test_zero_mean(self, p):
        filt = daubechies_filter(p)
        psi = mother_wavelet(filt, cascade(filt, 11))
        assert abs(psi.step * psi.values.sum()) < 1e-6

    def test_unit_norm_riemann_oracle(self):
        filt = daubechies_filter(5)
        psi = mother_wavelet(filt, cascade(filt, 12))
        norm_sq = psi.step * (psi.values**2).sum()
        assert abs(norm_sq - 1.0) < 1e-4

    def test_resolution_mismatch(self):
        phi = cascade(daubechies_filter(5), 10)
        with pytest.raises(ValueError):
            mother_wavelet(daubechies_filter(3), phi)


@pytest.fixture(scope="module")
def basis():
    return build_basis(order=5, levels=4, depth=12)


class TestEvaluate:
    def test_constant_function(self, basis):
        for u in (0.0, 0.27, 0.5, 0.993):
            assert evaluate(basis, 1, u) == 1.0

    def test_index_layout(self):
        assert index_level_shift(1, 4) == (0, 0)
        assert index_level_shift(2, 4) == (1, 0)
        assert index_level_shift(3, 4) == (2, 0)
        assert index_level_shift(4, 4) == (2, 1)
        assert index_level_shift(5, 4) == (3, 0)
        assert index_level_shift(16, 4) == (4, 7)
        with pytest.raises(IndexError):
            index_level_shift(17, 4)

    def test_domain_errors(self, basis):
        with pytest.raises(ValueError):
            evaluate(basis, 2, 1.0)
        with pytest.raises(ValueError):
            evaluate(basis, 2, -0.01)
        with pytest.raises(IndexError):
            evaluate(basis, 17, 0.5)

    def test_knot_value_is_exact_wrapped_sum(self, basis):
        # on-knot evaluation must reproduce the tabulated values, no
        # interpolation error
        tab = basis.wavelet
        level, shift = 3, 1
        k = (1 << (level - 1)) + shift + 1
        u = 37 / 256  # 2^(l-1) u lands on a knot for depth 12
        period = 1 << (level - 1)
        t = period * u - shift
        expected = 0.0
        m = 0
        while t + m * period <= tab.support_end:
            if t + m * period >= 0:
                idx = round((t + m * period) / tab.step)
                expected += tab.values[idx]
            m += 1
        expected *= math.sqrt(period)
        assert evaluate(basis, k, u) == pytest.approx(expected, abs=1e-14)

    def test_fine_tabulation_oracle(self):
        # value at depth J must agree with a 16x finer tabulation
        coarse = build_basis(5, 4, 10)
        fine = build_basis(5, 4, 14)
        k = (1 << 2) + 1 + 1  # level 3, shift 1
        for u in (0.3, 0.05, 0.77):
            assert abs(evaluate(coarse, k, u) - evaluate(fine, k, u)) < 1e-3

    def test_periodization_wraps(self, basis):
        # level-1 wavelet has support 9 wrapped onto [0,1): the value at u
        # must equal the full wrapped sum, which differs from psi(u) alone
        tab = basis.wavelet
        u = 0.4
        direct = float(tab(np.array([u]))[0])
        wrapped = evaluate(basis, 2, u)
        total = sum(float(tab(np.array([u + m]))[0]) for m in range(0, 10))
        assert wrapped == pytest.approx(total, abs=1e-12)
        assert abs(wrapped - direct) > 1e-3

    @settings(max_examples=50, deadline=None)
    @given(st.floats(min_value=0.0, max_value=0.999999, allow_nan=False))
    def test_deterministic(self, u):
        basis = _cached_basis()
        k = 11
        assert evaluate(basis, k, u) == evaluate(basis, k, u)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(min_value=0, max_value=(1 << 15) - 2), st.integers(2, 16))
    def test_interpolation_linearity(self, knot, k):
        # between adjacent knots of the level's effective grid (tabulation
        # step divided by the dilation) evaluation is an exact linear blend
        basis = _cached_basis()
        level, _ = index_level_shift(k, basis.levels)
        cells = 1 << (basis.resolution + level - 1)
        step = 1.0 / cells
        a = (knot % (cells - 1)) * step
        b = a + step
        mid = a + 0.5 * (b - a)
        va, vb = evaluate(basis, k, a), evaluate(basis, k, b)
        assert evaluate(basis, k, mid) == pytest.approx(0.5 * (va + vb), abs=1e-11)


_BASIS_CACHE = {}


def _cached_basis():
    if "b" not in _BASIS_CACHE:
        _BASIS_CACHE["b"] = build_basis(5, 4, 12)
    return _BASIS_CACHE["b"]


class TestDiscreteOrthonormality:
    def test_haar_exact_at_critical_sampling(self):
        basis = build_basis(1, 4, 12)
        u = np.arange(16) / 16
        z = evaluate_direction(basis, u)
        gram = z.T @ z / 16
        assert np.abs(gram - np.eye(16)).max() < 1e-12

    def test_db5_gram_at_tabulation_aligned_points(self, basis):
        # J >> L: the empirical Gram collapses onto the identity
        n = 1 << 11
        u = np.arange(n) / n
        z = evaluate_direction(basis, u)
        gram = z.T @ z / n
        assert np.abs(gram - np.eye(1 << 4)).max() < 1e-3

    def test_db5_critical_sampling_spans(self, basis):
        # at 2^L points the sampled system is no longer near-orthonormal,
        # but it must stay well-conditioned so the basis spans the grid
        u = np.arange(16) / 16
        z = evaluate_direction(basis, u)
        sv = np.linalg.svd(z, compute_uv=False)
        assert sv[-1] > 1e-2
        assert sv[0] / sv[-1] < 1e3

    def test_basis_counts(self):
        for levels in (1, 3, 5):
            b = build_basis(5, levels, levels + 7)
            assert b.functions_per_direction == 1 << levels
            # cumulative wavelets through level l: 2^l - 1
            for l in range(1, levels + 1):
                count = sum(
                    1
                    for k in range(2, (1 << levels) + 1)
                    if index_level_shift(k, levels)[0] <= l
                )
                assert count == (1 << l) - 1

    def test_depth_guard(self):
        filt = daubechies_filter(5)
        phi = cascade(filt, 8)
        psi = mother_wavelet(filt, phi)
        with pytest.raises(ValueError):
            PeriodizedBasis(4, phi, psi, 8, 5)
