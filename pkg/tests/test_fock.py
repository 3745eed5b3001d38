import itertools
import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from oracles import potential_matrix_bruteforce
from dilutebose.fock import (
    DimensionError, FockError, SparseOperator, basis_dimension, bogoliubov_check,
    bogoliubov_levels, bogoliubov_sweep, build_basis, ccr_check, ccr_check_all, diagonalize,
    kinetic_op, number_op, op_a, op_adag, op_b, op_bdag, potential_op, quadratic_hamiltonian,
    shell_modes, theta_state, unoccupied_annihilation, vn_expectation, vn_kn_constant)
from dilutebose.potential import ModelParams, Potential

UNIT = shell_modes(1)
PAIR = np.array([[1, 0, 0], [-1, 0, 0]])
PARAMS = ModelParams(N=10)


def test_two_mode_basis_order():
    b = build_basis(PAIR, 2)
    assert b.states.tolist() == [[0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2]]


@pytest.mark.parametrize("m,ncap", [(2, 5), (6, 3), (6, 4), (4, 6)])
def test_dimension_against_brute_force(m, ncap):
    count = sum(1 for occ in itertools.product(range(ncap + 1), repeat=m) if sum(occ) <= ncap)
    assert basis_dimension(m, ncap) == math.comb(m + ncap, m) == count
    modes = shell_modes(1)[:m] if m == 6 else np.vstack([[[i + 1, 0, 0], [-i - 1, 0, 0]]
                                                         for i in range(m // 2)])
    assert build_basis(modes, ncap).dimension == count


def test_shell_modes():
    assert UNIT.tolist() == [[1, 0, 0], [0, 1, 0], [0, 0, 1], [0, 0, -1], [0, -1, 0], [-1, 0, 0]]
    two = shell_modes(2)
    assert two.shape == (18, 3)
    assert {tuple(-v) for v in two} == {tuple(v) for v in two}


@pytest.mark.parametrize("modes,ncap,kw", [
    (np.zeros((0, 3)), 2, {}), ([[0, 0, 0], [1, 0, 0]], 2, {}), ([[1, 0, 0]], 2, {}),
    ([[1, 0, 0], [-1, 0, 0], [1, 0, 0]], 2, {}), (PAIR, 3, {"Nparam": 2}), (PAIR, -1, {}),
])
def test_basis_validation(modes, ncap, kw):
    with pytest.raises(FockError):
        build_basis(modes, ncap, **kw)


def test_dimension_cap():
    with pytest.raises(DimensionError):
        build_basis(shell_modes(2), 6, dimension_cap=1000)


@settings(max_examples=60)
@given(st.lists(st.integers(0, 2), min_size=6, max_size=6))
def test_lookup_round_trip(occ):
    b = build_basis(UNIT, 4)
    if sum(occ) > 4:
        with pytest.raises(FockError):
            b.lookup(np.array([occ]))
    else:
        i = b.index(occ)
        assert b.states[i].tolist() == occ


def test_lookup_rejects_aliasing_digits():
    b = build_basis(UNIT, 4)
    with pytest.raises(FockError):
        b.index([5, 0, 0, 0, 0, 0])
    with pytest.raises(FockError):
        b.index([-1, 1, 0, 0, 0, 0])


def _vec(b, occ):
    v = np.zeros(b.dimension)
    v[b.index(occ)] = 1.0
    return v


def test_ladder_actions():
    b = build_basis(PAIR, 3)
    a0 = op_a(b, 0).matrix
    np.testing.assert_allclose(a0 @ _vec(b, [2, 1]), math.sqrt(2) * _vec(b, [1, 1]))
    assert np.all(a0 @ _vec(b, [0, 2]) == 0)
    ad = op_adag(b, [-1, 0, 0]).matrix
    np.testing.assert_allclose(ad @ _vec(b, [1, 1]), math.sqrt(2) * _vec(b, [1, 2]))
    assert np.all(ad @ _vec(b, [1, 2]) == 0)  # truncated at the cap
    np.testing.assert_array_equal(number_op(b).matrix.diagonal(), b.totals)


def test_b_operator_amplitude():
    b = build_basis(PAIR, 3, Nparam=10)
    out = op_b(b, 0).matrix @ _vec(b, [2, 1])
    # a_p gives sqrt(2); the factor sqrt(1 - N_+/N) acts on the lowered state (N_+ = 2)
    np.testing.assert_allclose(out, math.sqrt(2) * math.sqrt(8 / 10) * _vec(b, [1, 1]))
    np.testing.assert_array_equal(op_bdag(b, 0).matrix.toarray(), op_b(b, 0).matrix.T.toarray())


def test_ccr_on_headroom_subspace():
    b = build_basis(UNIT, 4, Nparam=10)
    worst = ccr_check_all(b)
    assert max(worst.values()) <= 1e-13


def test_ccr_check_detects_wrong_normalisation():
    b = build_basis(PAIR, 4, Nparam=10)
    # the plain a-operators satisfy [a, a^*] = 1, which differs from the b relation
    a, ad = op_a(b, 0).matrix, op_adag(b, 0).matrix
    comm = (a @ ad - ad @ a).toarray()
    ok = ccr_check(b, 0, 0)["b_bdag"]
    rhs = np.diag(1 - b.totals / 10.0) - (ad @ a).toarray() / 10.0
    head = b.totals <= 3
    assert ok < 1e-14
    assert np.max(np.abs((comm - rhs)[np.ix_(head, head)])) > 0.1


def test_kinetic_operator():
    b = build_basis(shell_modes(2), 2)
    K = kinetic_op(b).matrix
    assert (K - sp.diags(K.diagonal())).nnz == 0
    np.testing.assert_allclose(K.diagonal(), b.states @ ((2 * math.pi) ** 2 * np.sum(
        b.modes ** 2, axis=1)), rtol=1e-15)


@pytest.mark.parametrize("modes,ncap", [(UNIT, 3), (shell_modes(2)[6:], 2)])
def test_potential_against_dictionary_second_quantisation(modes, ncap):
    pot = Potential(V0=2.0, R=1.0)
    b = build_basis(modes, ncap)
    V = potential_op(b, pot, PARAMS)

    def vhat(d):
        return float(pot.fourier(np.array([2 * math.pi * np.linalg.norm(d) / PARAMS.scale]))[0])

    ref = potential_matrix_bruteforce(b.states.tolist(), b.modes, vhat,
                                      PARAMS.nk / (2 * PARAMS.N))
    ref = 0.5 * (ref + ref.T)  # truncation at the cap breaks exact symmetry
    np.testing.assert_allclose(V.dense(), ref, rtol=0, atol=1e-13 * np.abs(ref).max())


def test_potential_structure():
    b = build_basis(UNIT, 4)
    V = potential_op(b, Potential(), PARAMS)
    assert V.is_symmetric()
    N = number_op(b).matrix
    assert abs(V.matrix @ N - N @ V.matrix).max() == 0.0
    P = sp.diags(b.states @ b.modes[:, 0].astype(float))
    assert abs(V.matrix @ P - P @ V.matrix).max() < 1e-14
    ev = np.linalg.eigvalsh(V.dense())
    assert ev.min() >= -1e-10 * ev.max()


def test_quadratic_hamiltonian_single_pair_matrix():
    b = build_basis(PAIR, 2)
    H = quadratic_hamiltonian(b, [2.0, 2.0], [1.0, 1.0]).dense()
    i00, i11 = b.index([0, 0]), b.index([1, 1])
    assert H[i00, i11] == pytest.approx(1.0)  # G/2 from p and from -p
    assert H[i11, i11] == pytest.approx(4.0)
    with pytest.raises(FockError):
        quadratic_hamiltonian(b, [2.0, 2.0], [2.0, 2.0])
    with pytest.raises(FockError):
        quadratic_hamiltonian(b, [2.0, 3.0], [1.0, 1.0])


def test_pair_levels_converge():
    F, G = np.array([2.0, 2.0]), np.array([1.0, 1.0])
    e = math.sqrt(3.0)
    expect = -(2 - e) + e * np.array([0, 1, 1, 2, 2, 2])
    rep = bogoliubov_check(build_basis(PAIR, 40), F, G, 6)
    np.testing.assert_allclose(rep.exact, expect, atol=1e-6)
    np.testing.assert_allclose(rep.analytic, expect, atol=1e-14)
    sweep = bogoliubov_sweep(PAIR, F, G, [10, 20, 40], 6)
    gaps = [r.max_gap for r in sweep]
    assert gaps[0] > gaps[1] > gaps[2]


def test_bogoliubov_levels_zero_coupling_is_exact():
    b = build_basis(UNIT, 3)
    F = np.full(6, 5.0)
    rep = bogoliubov_check(b, F, np.zeros(6), 8)
    np.testing.assert_allclose(rep.exact, rep.analytic, atol=1e-13)
    np.testing.assert_allclose(bogoliubov_levels(b, F, np.zeros(6), 3), [0, 5, 5])


def test_lanczos_matches_dense_on_random_matrix():
    rng = np.random.default_rng(4)
    A = sp.random(500, 500, density=0.02, random_state=rng)
    A = (A + A.T) * 0.5 + sp.diags(rng.normal(size=500))
    dense = diagonalize(A.tocsr(), 6, method="dense")
    lanc = diagonalize(A.tocsr(), 6, method="lanczos")
    np.testing.assert_allclose(lanc, dense, atol=1e-9)


def test_lanczos_resolves_degenerate_levels():
    d = np.repeat(np.arange(50.0), 4)
    lanc = diagonalize(sp.diags(d).tocsr(), 10, method="lanczos")
    np.testing.assert_allclose(lanc, [0, 0, 0, 0, 1, 1, 1, 1, 2, 2], atol=1e-10)


def test_lanczos_on_fock_hamiltonian():
    b = build_basis(UNIT, 6)
    H = kinetic_op(b) + potential_op(b, Potential(V0=50.0), ModelParams(N=10)) * 100.0
    np.testing.assert_allclose(diagonalize(H, 5, method="lanczos"),
                               diagonalize(H, 5, method="dense"), atol=1e-9)


def test_diagonalize_input_checks():
    with pytest.raises(FockError):
        diagonalize(sp.eye(4).tocsr(), 5)
    with pytest.raises(FockError):
        diagonalize(sp.eye(4).tocsr(), 2, method="qr")


def test_operator_dump_round_trip(tmp_path):
    b = build_basis(UNIT, 3)
    V = potential_op(b, Potential(), PARAMS)
    path = tmp_path / "v.bin"
    V.dump(path)
    back = SparseOperator.load(path)
    for x, y in zip(back.entries(), V.entries()):
        np.testing.assert_array_equal(x, y)
    assert path.stat().st_size == 16 + 24 * V.nnz


def test_vn_kn_constant_stable_and_linear():
    pot1, pot2 = Potential(V0=2.0), Potential(V0=4.0)
    cs = [vn_kn_constant(build_basis(UNIT, nc), pot1, PARAMS) for nc in (2, 3, 4)]
    assert (max(cs) - min(cs)) / min(cs) < 0.2
    b = build_basis(UNIT, 3)
    assert vn_kn_constant(b, pot2, PARAMS) / vn_kn_constant(b, pot1, PARAMS) == pytest.approx(
        2.0, rel=1e-12)
    assert vn_kn_constant(b, Potential(V0=0.0), PARAMS) == 0.0


def test_theta_states():
    b = build_basis(UNIT, 4)
    V = potential_op(b, Potential(), PARAMS)
    th = theta_state(b, {(1, 0, 0): 1, (-1, 0, 0): 1})
    assert np.linalg.norm(th) == pytest.approx(1.0)
    assert unoccupied_annihilation(b, th) == 0.0
    assert np.count_nonzero(th) == 1
    ref = potential_matrix_bruteforce(b.states.tolist(), b.modes, lambda d: float(
        Potential().fourier(np.array([2 * math.pi * np.linalg.norm(d) / PARAMS.scale]))[0]),
        PARAMS.nk / (2 * PARAMS.N))
    assert vn_expectation(b, th, V) == pytest.approx(th @ ref @ th, rel=1e-12)
    dbl = theta_state(b, [2, 0, 0, 0, 0, 0])
    assert dbl[b.index([2, 0, 0, 0, 0, 0])] == pytest.approx(1.0)
    with pytest.raises(FockError):
        theta_state(b, [5, 0, 0, 0, 0, 0])
