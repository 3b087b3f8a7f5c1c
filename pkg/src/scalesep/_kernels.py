"""Compiled inner loops for design assembly and coordinate descent.

Everything here operates on plain arrays so the kernels can be cached and
run without the GIL; the public modules own validation and orchestration.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

_F = "float64"
_I = "int64"


@njit(f"{_I}[:]({_F}[:, :], {_F}[:, :], {_F})", parallel=True, cache=True, nogil=True)
def count_row_products(z1, z2, threshold):
    """Per-row count of tensor products above threshold, (0,0) pair excluded."""
    n = z1.shape[0]
    k1 = z1.shape[1]
    k2 = z2.shape[1]
    counts = np.zeros(n, dtype=np.int64)
    for i in prange(n):
        c = 0
        for a in range(k1):
            va = z1[i, a]
            if abs(va) <= threshold:
                continue
            for b in range(k2):
                if a == 0 and b == 0:
                    continue
                v = va * z2[i, b]
                if abs(v) > threshold:
                    c += 1
        counts[i] = c
    return counts


@njit(
    f"void({_F}[:, :], {_F}[:, :], {_F}, {_I}[:], int32[:], {_F}[:])",
    parallel=True,
    cache=True,
    nogil=True,
)
def fill_row_products(z1, z2, threshold, indptr, indices, data):
    """Fill CSR arrays with tensor products in row-major (a, b) column order."""
    n = z1.shape[0]
    k1 = z1.shape[1]
    k2 = z2.shape[1]
    for i in prange(n):
        pos = indptr[i]
        for a in range(k1):
            va = z1[i, a]
            if abs(va) <= threshold:
                continue
            for b in range(k2):
                if a == 0 and b == 0:
                    continue
                v = va * z2[i, b]
                if abs(v) > threshold:
                    indices[pos] = a * k2 + b - 1
                    data[pos] = v
                    pos += 1


@njit(
    f"{_F}({_F}[:], int32[:], {_I}[:], {_F}[:], {_F}[:], {_F}[:], {_F}[:], "
    f"{_F}, {_F}, {_I}[:])",
    cache=True,
    nogil=True,
)
def cd_sweep(csc_data, csc_indices, csc_indptr, coef, col_mean, col_scale, z, lam, n_inv, order):
    """One cyclic coordinate-descent sweep over the columns listed in ``order``.

    Solves (1/2n)||y - b0 - X~ theta||^2 + lam * ||theta||_1 on implicitly
    standardized columns X~ = (X - mean) / scale. ``z`` is the working
    residual y - X theta / scale, whose mean carries the intercept. Returns
    the largest absolute coefficient change of the sweep.
    """
    zsum = 0.0
    for i in range(len(z)):
        zsum += z[i]
    n = len(z)
    max_delta = 0.0
    for oi in range(len(order)):
        j = order[oi]
        start = csc_indptr[j]
        end = csc_indptr[j + 1]
        dot = 0.0
        for p in range(start, end):
            dot += csc_data[p] * z[csc_indices[p]]
        corr = (dot - col_mean[j] * zsum) / col_scale[j]
        u = corr * n_inv + coef[j]
        if u > lam:
            new = u - lam
        elif u < -lam:
            new = u + lam
        else:
            new = 0.0
        delta = new - coef[j]
        if delta != 0.0:
            coef[j] = new
            scale_inv = delta / col_scale[j]
            for p in range(start, end):
                z[csc_indices[p]] -= scale_inv * csc_data[p]
            zsum -= scale_inv * col_mean[j] * n
            if abs(delta) > max_delta:
                max_delta = abs(delta)
    return max_delta


@njit(
    f"{_F}[:]({_F}[:], int32[:], {_I}[:], {_F}[:], {_F}[:], {_F}[:])",
    parallel=True,
    cache=True,
    nogil=True,
)
def column_correlations(csc_data, csc_indices, csc_indptr, col_mean, col_scale, z):
    """Gradient pass: <x~_j, z - mean(z)> for every column, standardized."""
    n_cols = len(csc_indptr) - 1
    zsum = 0.0
    for i in range(len(z)):
        zsum += z[i]
    out = np.empty(n_cols, dtype=np.float64)
    for j in prange(n_cols):
        dot = 0.0
        for p in range(csc_indptr[j], csc_indptr[j + 1]):
            dot += csc_data[p] * z[csc_indices[p]]
        out[j] = (dot - col_mean[j] * zsum) / col_scale[j]
    return out


@njit(f"{_F}[:, :]({_F}[:], int32[:], {_I}[:], {_I})", parallel=True, cache=True, nogil=True)
def column_moments(csc_data, csc_indices, csc_indptr, n_rows):
    """Column means and population standard deviations from sparse storage."""
    n_cols = len(csc_indptr) - 1
    out = np.empty((2, n_cols), dtype=np.float64)
    for j in prange(n_cols):
        s = 0.0
        sq = 0.0
        for p in range(csc_indptr[j], csc_indptr[j + 1]):
            v = csc_data[p]
            s += v
            sq += v * v
        mean = s / n_rows
        var = sq / n_rows - mean * mean
        if var < 0.0:
            var = 0.0
        out[0, j] = mean
        out[1, j] = np.sqrt(var)
    return out


def warm_up():
    """Force compilation of all kernels on tiny inputs."""
    z1 = np.ones((2, 2))
    z2 = np.ones((2, 2))
    counts = count_row_products(z1, z2, 1e-12)
    indptr = np.concatenate(([0], np.cumsum(counts)))
    indices = np.zeros(int(indptr[-1]), dtype=np.int32)
    data = np.zeros(int(indptr[-1]))
    fill_row_products(z1, z2, 1e-12, indptr, indices, data)
    csc_data = np.array([1.0, 1.0])
    csc_indices = np.array([0, 1], dtype=np.int32)
    csc_indptr = np.array([0, 2], dtype=np.int64)
    coef = np.zeros(1)
    moments = column_moments(csc_data, csc_indices, csc_indptr, 2)
    z = np.array([1.0, -1.0])
    cd_sweep(csc_data, csc_indices, csc_indptr, coef, moments[0], np.ones(1), z, 0.1, 0.5,
             np.array([0], dtype=np.int64))
    column_correlations(csc_data, csc_indices, csc_indptr, moments[0], np.ones(1), z)
