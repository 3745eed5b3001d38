import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import constant_term_direct
from dilutebose.coefficients import build_coefficients
from dilutebose.constant_term import _sinh_minus, constant_term_cmn, radial_integrals
from dilutebose.lattice import build_lattice
from dilutebose.potential import ModelParams, Potential
from dilutebose.scattering import eta_radial, solve_neumann
from dilutebose.spectral import e_lambda


@pytest.fixture(scope="module")
def elambda():
    return e_lambda(128)


def _table(sol, pot, pr):
    lat = build_lattice(1.01 * max(2 * math.pi, pr.N ** pr.alpha))
    return build_coefficients(sol, pot, pr, lat)


@settings(max_examples=100)
@given(st.floats(min_value=-3.0, max_value=3.0, allow_nan=False))
def test_sinh_minus_against_high_precision(x):
    digits = 40 + 3 * max(0, int(-math.log10(abs(x)))) if x else 40
    with mpmath.workdps(digits):
        xm = mpmath.mpf(x)
        ref = mpmath.sinh(2 * xm) / 2 - xm
    got = float(_sinh_minus(np.array([x]))[0])
    assert got == pytest.approx(float(ref), rel=1e-13, abs=1e-300)


def test_radial_integrals_weak_coupling_limit():
    # as V0 -> 0, f -> 1 and the integrals reduce to those of a uniform ball
    V0, R = 1e-9, 0.8
    pr = ModelParams(N=1000)
    ri = radial_integrals(solve_neumann(Potential(V0=V0, R=R), pr))
    Q = 4 * math.pi * V0 * R ** 3 / 3
    assert ri.V0hat == pytest.approx(Q, rel=1e-12)
    assert ri.Vf == pytest.approx(Q, rel=1e-8)
    assert ri.coulomb_vf == pytest.approx(1.2 * Q * Q / (4 * math.pi * R), rel=1e-6)
    assert ri.m2_vf == pytest.approx(4 * math.pi * V0 * R ** 5 / 5, rel=1e-6)
    assert abs(ri.Vw2) < 1e-15


def test_radial_integrals_gradient_against_grid(sol_k0):
    ri = radial_integrals(sol_k0)
    r, df = sol_k0.r, sol_k0.df
    ref = 4 * math.pi * np.trapezoid(df * df * r * r, r)
    assert ri.grad_w2 == pytest.approx(ref, rel=1e-4)


def test_trivial_potential_gives_zero(elambda):
    pr = ModelParams(N=1000, kappa=0.01)
    zero = Potential(V0=0.0)
    sol = solve_neumann(zero, pr)
    ct = constant_term_cmn(_table(sol, zero, pr), sol, zero, pr, elambda=elambda)
    assert ct.value == 0.0 and ct.closed_form == 0.0
    assert all(v == 0.0 for v in ct.components.values())


def test_against_direct_cube_summation(elambda):
    """Small system where the six sums can be done directly on a cube by FFT."""
    pot = Potential()
    pr = ModelParams(N=27, kappa=0.0, alpha=0.6)
    sol = solve_neumann(pot, pr)
    ct = constant_term_cmn(_table(sol, pot, pr), sol, pot, pr, elambda=elambda)
    d32 = constant_term_direct(sol, pot, pr, 32, eta_radial)
    d40 = constant_term_direct(sol, pot, pr, 40, eta_radial)
    # the cube truncation error falls like M^-3
    limit = d40 - (d32 - d40) * 32 ** 3 / (40 ** 3 - 32 ** 3)
    assert abs(ct.value - limit) < 5e-3
    assert abs(ct.value - limit) < 0.2 * abs(d40 - limit)


def test_components_and_closed_form(sol_k001, soft, params_k001, table_k001, elambda):
    ct = constant_term_cmn(table_k001, sol_k001, soft, params_k001, elambda=elambda)
    assert ct.value == pytest.approx(sum(ct.components.values()), rel=1e-14)
    g = sol_k001.a0 * params_k001.nk
    N = params_k001.N
    assert ct.closed_form == pytest.approx(
        4 * math.pi * g * (N - 1) + elambda.value * g * g + ct.e_bog.value, rel=1e-14)
    # the order-N pieces cancel, leaving an O(1) difference
    assert abs(ct.difference) < 1.0
    assert ct.components["T0"] > 1e3 * abs(ct.difference)
    doc = ct.to_dict()
    assert doc["value"] == ct.value and "components" in doc


def test_requires_low_momentum_coverage(sol_k001, soft, params_k001, elambda):
    lat = build_lattice(2 * math.pi)
    from dilutebose.coefficients import CoefficientError
    with pytest.raises((ValueError, CoefficientError)):
        tab = build_coefficients(sol_k001, soft, params_k001, lat)
        constant_term_cmn(tab, sol_k001, soft, params_k001, elambda=elambda)
