import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dilutebose import _pykernels, kernels

compiled = pytest.importorskip("dilutebose._ckernels")


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 40), st.integers(3, 300), st.integers(0, 2 ** 31))
def test_radial_transform_backends_agree(nt, nr, seed):
    rng = np.random.default_rng(seed)
    t = np.ascontiguousarray(rng.uniform(0, 50, nt))
    t[0] = 0.0
    r = np.ascontiguousarray(np.sort(rng.uniform(0, 3, nr)))
    wg = np.ascontiguousarray(rng.normal(size=nr))
    a = compiled.radial_transform(t, r, wg, 1)
    b = _pykernels.radial_transform(t, r, wg, 1)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12 * np.abs(wg).sum())


@pytest.mark.parametrize("mmax", [1, 5, 24])
def test_cube_shell_sums_backends_agree(mmax):
    om = np.array([1.0, 0.3, 2.7])
    np.testing.assert_allclose(compiled.cube_shell_sums(mmax, om, 1),
                               _pykernels.cube_shell_sums(mmax, om, 1), rtol=1e-13, atol=1e-16)


def test_table_matvec_backends_agree_and_match_loop():
    rng = np.random.default_rng(7)
    ni = rng.integers(-4, 5, size=(40, 3))
    nj = rng.integers(-4, 5, size=(30, 3))
    b = rng.normal(size=30)
    table = rng.normal(size=4 * 48 + 1)
    ref = np.array([sum(table[int(np.sum((x - y) ** 2))] * bb for y, bb in zip(nj, b)) for x in ni])
    for impl in (compiled, _pykernels):
        np.testing.assert_allclose(impl.table_matvec(ni, nj, b, table, 1), ref, rtol=1e-12)


@pytest.mark.parametrize("threads", [2, 4])
def test_compiled_results_do_not_depend_on_threads(threads):
    rng = np.random.default_rng(0)
    t = rng.uniform(0, 10, 500)
    r = np.linspace(0, 1, 257)
    wg = rng.normal(size=257)
    assert np.array_equal(compiled.radial_transform(t, r, wg, 1),
                          compiled.radial_transform(t, r, wg, threads))
    om = np.array([1.0])
    assert np.array_equal(compiled.cube_shell_sums(20, om, 1), compiled.cube_shell_sums(20, om, threads))
    ni = rng.integers(-5, 6, size=(300, 3))
    b = rng.normal(size=300)
    tab = rng.normal(size=401)
    assert np.array_equal(compiled.table_matvec(ni, ni, b, tab, 1),
                          compiled.table_matvec(ni, ni, b, tab, threads))


def test_dispatch_uses_compiled_backend():
    assert kernels.BACKEND == "compiled"
    kernels.set_threads(3)
    assert kernels.get_threads() == 3
    kernels.set_threads(0)
    assert kernels.get_threads() == 1


def test_pure_python_fallback_is_selected_by_environment():
    code = ("from dilutebose import kernels, scattering, potential;"
            "print(kernels.BACKEND, repr(scattering.scattering_length(potential.Potential())))")
    env = dict(os.environ, DILUTEBOSE_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True).stdout.split()
    assert out[0] == "python"
    assert float(out[1]) == pytest.approx(0.23840584404423582, rel=1e-15)


@pytest.mark.parametrize("impl", [compiled, _pykernels])
def test_table_matvec_rejects_short_table(impl):
    ni = np.array([[0, 0, 0], [3, 0, 0]], dtype=np.int64)
    with pytest.raises(ValueError, match="table length"):
        impl.table_matvec(ni, ni, np.ones(2), np.ones(9), 2)
    np.testing.assert_array_equal(impl.table_matvec(ni, ni, np.ones(2), np.ones(10), 2), [2.0, 2.0])
