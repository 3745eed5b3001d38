"""Pure numpy versions of the compiled kernels.

Used when the extension module is not built. Results agree with the
compiled versions to rounding; summation order differs.
"""

import numpy as np

_CHUNK = 2048


def _sinc(x):
    out = np.empty_like(x)
    small = np.abs(x) < 1e-4
    xs = x[small]
    x2 = xs * xs
    out[small] = 1.0 - x2 / 6.0 + x2 * x2 / 120.0
    xl = x[~small]
    out[~small] = np.sin(xl) / xl
    return out


def radial_transform(t, r, wg, nthreads=1):
    t = np.ascontiguousarray(t, dtype=np.float64)
    r = np.ascontiguousarray(r, dtype=np.float64)
    wg = np.ascontiguousarray(wg, dtype=np.float64)
    out = np.empty(t.shape[0])
    step = max(1, _CHUNK * 64 // max(1, r.shape[0]))
    for lo in range(0, t.shape[0], step):
        tk = t[lo:lo + step]
        out[lo:lo + step] = _sinc(np.outer(tk, r)) @ wg
    return out


def _orbit(a, b, c):
    zeros = (a == 0).astype(np.int64) + (b == 0) + (c == 0)
    signs = 2 ** (3 - zeros)
    perms = np.where((a == b) & (b == c), 1,
                     np.where((a == b) | (b == c), 3, 6))
    return signs * perms


def cube_shell_sums(mmax, omegas, nthreads=1):
    omegas = np.ascontiguousarray(omegas, dtype=np.float64)
    out = np.zeros((mmax + 1, omegas.shape[0], 3))
    for c in range(1, mmax + 1):
        b, a = np.tril_indices(c + 1)
        cc = np.full_like(a, c)
        mult = _orbit(a, b, cc).astype(np.float64)
        r2 = (a * a + b * b + c * c).astype(np.float64)
        r = np.sqrt(r2)
        wr = np.outer(omegas, r)
        cw = np.cos(wr)
        out[c, :, 0] = cw @ (mult / r2)
        out[c, :, 1] = cw @ (mult / (r2 * r2))
        out[c, :, 2] = np.sin(wr) @ (mult / (r2 * r2 * r))
    return out


def table_matvec(ni, nj, b, table, nthreads=1):
    ni = np.ascontiguousarray(ni, dtype=np.int64)
    nj = np.ascontiguousarray(nj, dtype=np.int64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    table = np.ascontiguousarray(table, dtype=np.float64)
    out = np.empty(ni.shape[0])
    step = max(1, _CHUNK * 64 // max(1, nj.shape[0]))
    for lo in range(0, ni.shape[0], step):
        d = ni[lo:lo + step, None, :] - nj[None, :, :]
        m = np.einsum("ijk,ijk->ij", d, d)
        if m.size and m.max() >= table.shape[0]:
            raise ValueError("squared distance exceeds the table length")
        out[lo:lo + step] = table[m] @ b
    return out
