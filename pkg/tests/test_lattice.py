import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dilutebose.lattice import (
    TWO_PI, LatticeSizeError, Window, build_lattice, k_nodes, radial_lattice_sum, shell_counts,
    window_for)


@pytest.mark.parametrize("m,count", [(1, 6), (2, 18), (3, 26), (4, 32), (5, 56)])
def test_ball_point_counts(m, count):
    assert len(build_lattice(TWO_PI * math.sqrt(m))) == count


def test_lattice_ordering_and_shells():
    lat = build_lattice(TWO_PI * 3.2)
    assert np.all(np.diff(lat.n2) >= 0)
    for s in range(lat.shell_n2.size):
        block = lat.n[lat.shell_start[s]:lat.shell_start[s + 1]]
        assert np.all(np.sum(block ** 2, axis=1) == lat.shell_n2[s])
        keys = [tuple(v) for v in block]
        assert keys == sorted(keys)
    assert lat.shell_start[-1] == len(lat)
    np.testing.assert_allclose(lat.norms, np.linalg.norm(lat.points, axis=1), rtol=1e-15)
    assert lat.shell_index[-1] == lat.shell_n2.size - 1


def test_lattice_is_closed_under_negation():
    lat = build_lattice(TWO_PI * 4)
    pts = {tuple(v) for v in lat.n}
    assert all(tuple(-v) in pts for v in lat.n)
    assert (0, 0, 0) not in pts


@settings(max_examples=100)
@given(st.tuples(*[st.integers(-5, 5)] * 3))
def test_index_of_round_trip(n):
    lat = build_lattice(TWO_PI * math.sqrt(75))
    if n == (0, 0, 0):
        with pytest.raises(KeyError):
            lat.index_of(n)
    else:
        assert tuple(lat.n[lat.index_of(n)]) == n


def test_high_low_masks():
    lat = build_lattice(TWO_PI * 3)
    N, alpha, beta = 10_000, 0.3, 0.1
    assert np.array_equal(lat.high(N, alpha), lat.norms >= N ** alpha)
    assert np.array_equal(lat.low(N, beta), lat.norms < N ** beta)


def test_lattice_bounds():
    with pytest.raises(ValueError):
        build_lattice(1.0)
    with pytest.raises(LatticeSizeError):
        build_lattice(TWO_PI * 200, max_points=10_000)


def test_shell_counts_brute_force():
    n2max = 60
    ref = {}
    r = range(-8, 9)
    for v in itertools.product(r, r, r):
        s = sum(x * x for x in v)
        if 0 < s <= n2max:
            ref[s] = ref.get(s, 0) + 1
    values, counts = shell_counts(n2max)
    assert dict(zip(values.tolist(), counts.tolist())) == ref
    assert 7 not in values and 28 not in values


def test_shell_counts_total_matches_lattice():
    lat = build_lattice(TWO_PI * 9)
    values, counts = shell_counts(81)
    np.testing.assert_array_equal(values, lat.shell_n2)
    np.testing.assert_array_equal(counts, lat.multiplicities)


@pytest.mark.parametrize("sigma", [150.0, 400.0, 900.0])
def test_radial_sum_of_gaussian_against_theta_product(sigma):
    # sum over 2 pi Z^3 of exp(-|p|^2/sigma^2) factorises into three 1D sums
    n = np.arange(-int(4 * sigma), int(4 * sigma) + 1)
    one_d = math.fsum(np.exp(-(TWO_PI * n) ** 2 / sigma ** 2))
    ref = one_d ** 3 - 1.0
    win = window_for(0.25, minimum_center=0.5 * sigma)
    res = radial_lattice_sum(lambda k: np.exp(-(k / sigma) ** 2), win, kmax_integral=12 * sigma)
    assert res.value == pytest.approx(ref, rel=1e-12)


def test_window_partition_of_unity():
    win = Window(300.0, 50.0)
    k = np.linspace(0, 1000, 101)
    np.testing.assert_allclose(win.inside(k) + win.outside(k), 1.0, rtol=0, atol=1e-15)
    assert win.inside(win.kmax) < 1e-21


@pytest.mark.parametrize("ell", [0.1, 0.25, 0.4, 0.49])
def test_window_widths(ell):
    w = window_for(ell)
    assert w.width == pytest.approx(max(40.0, 20.0 / (1 - 2 * ell)))
    assert w.center == pytest.approx(6 * w.width)
    assert window_for(ell, minimum_center=1e4).center == 1e4


def test_k_nodes_integrate_polynomials_and_oscillations():
    k, w = k_nodes(0.0, 5000.0, oscillation=8.0, switch=1000.0)
    assert np.dot(w, k ** 3) == pytest.approx(5000.0 ** 4 / 4, rel=1e-13)
    ku, wu = k_nodes(0.0, 5000.0, oscillation=4.0, switch=5000.0)
    assert np.dot(wu, np.cos(ku)) == pytest.approx(math.sin(5000.0), abs=1e-10)
    assert np.all(np.diff(k) > 0) and k[0] > 0 and k[-1] < 5000.0
