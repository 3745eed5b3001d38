# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. Each function has a numpy twin in ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport sin, cos, sqrt

cnp.import_array()


cdef inline double _sinc(double x) noexcept nogil:
    cdef double x2
    if x < 1e-4 and x > -1e-4:
        x2 = x * x
        return 1.0 - x2 / 6.0 + x2 * x2 / 120.0
    return sin(x) / x


def radial_transform(const double[::1] t, const double[::1] r, const double[::1] wg, int nthreads=1):
    """out[k] = sum_j wg[j] * sinc(t[k] * r[j])."""
    cdef Py_ssize_t nk = t.shape[0], nr = r.shape[0], k, j
    out = np.zeros(nk, dtype=np.float64)
    cdef double[::1] o = out
    cdef double acc, tk
    if nthreads < 1:
        nthreads = 1
    for k in prange(nk, nogil=True, num_threads=nthreads, schedule="static"):
        tk = t[k]
        acc = 0.0
        for j in range(nr):
            acc = acc + wg[j] * _sinc(tk * r[j])
        o[k] = acc
    return out


def cube_shell_sums(int mmax, const double[::1] omegas, int nthreads=1):
    """Sums over integer n != 0 grouped by max-norm m = max|n_i|.

    Returns an array of shape (mmax + 1, len(omegas), 3) holding, for each
    shell and frequency, sum cos(w r)/r^2, sum cos(w r)/r^4 and
    sum sin(w r)/r^5 with r = |n|.
    """
    cdef Py_ssize_t nw = omegas.shape[0]
    out = np.zeros((mmax + 1, nw, 3), dtype=np.float64)
    cdef double[:, :, ::1] o = out
    cdef int c, a, b, mult
    cdef Py_ssize_t q
    cdef double r2, r, wr, inv2
    if nthreads < 1:
        nthreads = 1
    for c in prange(1, mmax + 1, nogil=True, num_threads=nthreads, schedule="dynamic"):
        for b in range(0, c + 1):
            for a in range(0, b + 1):
                mult = _orbit(a, b, c)
                r2 = <double>(a * a + b * b + c * c)
                r = sqrt(r2)
                inv2 = mult / r2
                for q in range(nw):
                    wr = omegas[q] * r
                    o[c, q, 0] += inv2 * cos(wr)
                    o[c, q, 1] += inv2 / r2 * cos(wr)
                    o[c, q, 2] += mult * sin(wr) / (r2 * r2 * r)
    return out


cdef inline int _orbit(int a, int b, int c) noexcept nogil:
    # number of signed permutations of (a, b, c) with 0 <= a <= b <= c
    cdef int zeros = (a == 0) + (b == 0) + (c == 0)
    cdef int signs = 1 << (3 - zeros)
    cdef int perms
    if a == b and b == c:
        perms = 1
    elif a == b or b == c:
        perms = 3
    else:
        perms = 6
    return signs * perms


def table_matvec(const long[:, ::1] ni, const long[:, ::1] nj, const double[::1] b,
                 const double[::1] table, int nthreads=1):
    """out[i] = sum_j table[|ni[i] - nj[j]|^2] * b[j]."""
    cdef Py_ssize_t n = ni.shape[0], m = nj.shape[0], i, j
    cdef long d0, d1, d2, idx, size = table.shape[0]
    cdef int bad = 0
    out = np.zeros(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef double acc
    if nthreads < 1:
        nthreads = 1
    for i in prange(n, nogil=True, num_threads=nthreads, schedule="static"):
        acc = 0.0
        for j in range(m):
            d0 = ni[i, 0] - nj[j, 0]
            d1 = ni[i, 1] - nj[j, 1]
            d2 = ni[i, 2] - nj[j, 2]
            idx = d0 * d0 + d1 * d1 + d2 * d2
            if idx < size:
                acc = acc + table[idx] * b[j]
            else:
                bad += 1
        o[i] = acc
    if bad:
        raise ValueError("squared distance exceeds the table length")
    return out
