"""Kernel dispatch.

The compiled extension is used when importable; otherwise the numpy
versions are used. Set ``DILUTEBOSE_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("DILUTEBOSE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "compiled"

_threads = 1


def set_threads(n):
    """Set the worker count used by the kernels (results do not depend on it)."""
    global _threads
    _threads = max(1, int(n))


def get_threads():
    return _threads


def radial_transform(t, r, wg):
    return _impl.radial_transform(t, r, wg, _threads)


def cube_shell_sums(mmax, omegas):
    return _impl.cube_shell_sums(int(mmax), omegas, _threads)


def table_matvec(ni, nj, b, table):
    return _impl.table_matvec(ni, nj, b, table, _threads)
