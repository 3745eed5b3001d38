"""Explicit constant term of the diagonalised quadratic Hamiltonian.

The six grouped sums contain pieces of size N^(1+kappa) and larger that
cancel to leave an O(N^kappa) result, and their summands decay only on the
scale |p| ~ N^(1-kappa). Direct shell summation is therefore useless. The
evaluation instead regroups them exactly:

* sums over all of 2 pi Z^3 of products of functions that are local in
  position space are replaced by position-space integrals (Parseval on the
  torus), with the finitely many low momenta |p| < N^alpha subtracted
  pointwise;
* sum_p c_p^2 / p^2 uses the periodic Green's function
  G(x) = 1/(4 pi |x|) + |x|^2/6 + C0 + (harmonic, cubic), whose regular part
  C0 = -e_Lambda / (16 pi^2) comes from the cube-sum constant;
* the remaining absolutely convergent sums are smooth-window lattice sums
  plus a radial integral of the complement;
* the double sums involving cosh/sinh corrections of eta use the compiled
  pair kernel on a lattice ball.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson

from . import kernels
from .coefficients import CoefficientTable, vhat_table
from .lattice import TWO_PI, k_nodes, radial_lattice_sum, window_for
from .potential import ModelParams, Potential
from .scattering import ScatteringSolution, _exterior_poly, conv_vf_radial, eta_radial
from .spectral import SumResult, bogoliubov_summand, e_bog, e_lambda

FOUR_PI = 4 * math.pi


def _sinh_minus(x):
    """sinh(2x)/2 - x without cancellation."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    small = np.abs(x) < 0.25
    xs = x[small]
    z = (2 * xs) ** 2
    # sum_{j>=1} (2x)^(2j+1) / (2 (2j+1)!)
    term = 2 * xs * z / 6.0 / 2.0
    acc = term.copy()
    for j in range(2, 12):
        term = term * z / ((2 * j) * (2 * j + 1))
        acc += term
    out[small] = acc
    xl = x[~small]
    out[~small] = 0.5 * np.sinh(2 * xl) - xl
    return out


@dataclass
class RadialIntegrals:
    """Position-space integrals of the scattering profile (rescaled units)."""

    V0hat: float
    Vf: float
    Vw2: float
    grad_w2: float
    coulomb_vf: float
    m2_vf: float


def radial_integrals(sol: ScatteringSolution) -> RadialIntegrals:
    pot = sol.potential
    n = sol.grid.n_inner
    r = sol.r[: n + 1]
    f = sol.f[: n + 1]
    w = 1.0 - f
    V = pot(r)
    V0hat = float(pot.fourier(np.array([0.0]))[0])
    Vf = sol.interior_integral(V * f)
    Vw2 = sol.interior_integral(V * w * w)
    m2 = sol.interior_integral(V * f * r * r)
    grad_in = sol.interior_integral(sol.df[: n + 1] ** 2)
    grad_out = _exterior_grad(sol)
    # enclosed charge Q(r) = 4 pi int_0^r V f t^2 dt
    Q = cumulative_simpson(FOUR_PI * V * f * r * r, x=r, initial=0.0)
    integrand = np.zeros_like(r)
    integrand[1:] = Q[1:] ** 2 / (FOUR_PI * r[1:] ** 2)
    h = pot.R / n
    wts = np.full(n + 1, 2.0)
    wts[1::2] = 4.0
    wts[0] = wts[-1] = 1.0
    coul = float(np.dot(wts * h / 3.0, integrand)) + Q[-1] ** 2 / (FOUR_PI * pot.R)
    return RadialIntegrals(V0hat, Vf, Vw2, grad_in + grad_out, coul, m2)


def _exterior_grad(sol):
    """4 pi int_R^Rb w'(r)^2 r^2 dr from the closed-form exterior."""
    R, Rb = sol.R, sol.Rb
    if Rb <= R or sol.lambda_ell == 0.0:
        return 0.0
    c = _exterior_poly(sol.lambda_ell, Rb, Rb - R)
    dc = np.polynomial.polynomial.polyder(c)
    x, wq = np.polynomial.legendre.leggauss(16)
    edges = np.linspace(math.log(R), math.log(Rb), 129)
    tot = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        u = 0.5 * (b - a) * x + 0.5 * (a + b)
        rr = np.exp(u)
        e = rr - Rb
        P = np.polynomial.polynomial.polyval(e, c)
        dP = np.polynomial.polynomial.polyval(e, dc)
        wp = dP / rr - P / rr ** 2
        tot += float(np.dot(0.5 * (b - a) * wq, wp * wp * rr ** 3))
    return FOUR_PI * tot


@dataclass
class ConstantTerm:
    value: float
    closed_form: float
    components: dict
    e_lambda: SumResult
    e_bog: SumResult
    diagnostics: dict = field(default_factory=dict)

    @property
    def difference(self):
        return self.value - self.closed_form

    def to_dict(self):
        return {"value": self.value, "closed_form": self.closed_form,
                "difference": self.difference, "components": self.components,
                "e_lambda": self.e_lambda.to_dict(), "e_bog": self.e_bog.to_dict(),
                "diagnostics": self.diagnostics}


class _Radial:
    """Radial momentum functions of the scattering solution, memoised per k-array."""

    def __init__(self, sol, pot, params):
        self.sol, self.pot, self.params = sol, pot, params
        self._memo = {}

    def values(self, k):
        key = np.ascontiguousarray(k, dtype=np.float64).tobytes()
        if key not in self._memo:
            nk = self.params.nk
            s = self.params.scale
            eta = eta_radial(self.sol, self.params, k)
            c = nk * conv_vf_radial(self.sol, self.params, k)
            v = nk * self.pot.fourier(k / s)
            self._memo[key] = (eta, c, c - v)
        return self._memo[key]


def constant_term_cmn(table: CoefficientTable, sol: ScatteringSolution, pot: Potential,
                      params: ModelParams, pmax: float | None = None, Mmax: int = 128,
                      elambda: SumResult | None = None, ball_shells: int = 144) -> ConstantTerm:
    """Constant term C_MN and the closed form it is compared with.

    Parameters
    ----------
    table : CoefficientTable
        Supplies the low-momentum points; must cover |p| < N^alpha.
    pmax : float, optional
        Minimum centre of the smooth lattice window. The window is widened
        automatically so aliasing from position-space images is negligible.
    ball_shells : int
        Number of |n|^2 values used for the lattice double sums of the
        cosh/sinh corrections, whose tails are below 1e-6.
    """
    N = params.N
    Nf = float(N)
    nk, s = params.nk, params.scale
    cut = Nf ** params.alpha
    if table.lattice.pmax < cut:
        raise ValueError("table does not cover the low-momentum region |p| < N^alpha")
    el = elambda or e_lambda(Mmax)
    eb = e_bog(sol.a0, N, params.kappa)
    g = sol.a0 * nk
    closed = 4 * math.pi * g * (N - 1) + el.value * g * g + eb.value
    if pot.is_zero:
        comps = {k: 0.0 for k in ("T0", "sqrt_terms", "high_eta", "double_sum", "sigma_sq_W0")}
        return ConstantTerm(0.0, closed, comps, el, eb)

    ri = radial_integrals(sol)
    rad = _Radial(sol, pot, params)
    C0 = -el.value / (16 * math.pi ** 2)

    # low set L' = {|p| < N^alpha} including p = 0, taken from the table lattice
    lat = table.lattice
    low = lat.norms < cut
    n_low = np.vstack([np.zeros((1, 3), dtype=np.int64), lat.n[low]])
    k_low = TWO_PI * np.sqrt(np.sum(n_low * n_low, axis=1).astype(np.float64))
    eta_L, c_L, W_L = rad.values(k_low)
    p2_L = k_low * k_low
    vconv_L = (Nf / nk) * W_L  # (V^ * eta)_p = N [conv_Vf - V^]

    # ---- T0
    T0 = 0.5 * (N - 1) * nk * ri.V0hat

    # ---- sqrt terms: sum A_p = 1/2 sum e_{p,N} - 1/4 sum c^2/p^2
    win = window_for(params.ell, minimum_center=pmax or 0.0)
    kmax_int = 40.0 * s / pot.R + win.kmax
    nodes = k_nodes(max(0.0, win.center - 7 * win.width), kmax_int,
                    oscillation=min(8.0, 1.0 / params.ell), switch=20000.0)

    def e_pN(k):
        _, c, _ = rad.values(k)
        return bogoliubov_summand(k * k, 2.0 * c)

    S_e = radial_lattice_sum(e_pN, win, kmax_int, integral_nodes=nodes)
    U = nk * ri.Vf
    M2 = nk * ri.m2_vf / s ** 2
    S_c2 = nk * nk * s * ri.coulomb_vf + U * M2 / 3.0 + C0 * U * U
    sqrt_terms = 0.5 * S_e.value - 0.25 * S_c2

    # ---- terms linear and quadratic in eta over P_H
    sum_W_eta_all = Nf * nk * ri.Vw2
    sum_p2eta2_all = (Nf * Nf / s) * ri.grad_w2
    sum_W_eta_H = sum_W_eta_all - float(np.dot(W_L, eta_L))
    sum_p2eta2_H = sum_p2eta2_all - float(np.dot(p2_L, eta_L * eta_L))

    def W_delta(k):
        eta, _, W = rad.values(k)
        return W * (np.sinh(eta) ** 2 + _sinh_minus(eta))

    def sinh_sq(k):
        eta, _, _ = rad.values(k)
        return np.sinh(eta) ** 2

    S_Wd = radial_lattice_sum(W_delta, win, kmax_int, integral_nodes=nodes)
    S_s2 = radial_lattice_sum(sinh_sq, win, kmax_int, integral_nodes=nodes)
    eta_Lp, W_Lp = eta_L[1:], W_L[1:]
    low_Wd = float(np.dot(W_Lp, np.sinh(eta_Lp) ** 2 + _sinh_minus(eta_Lp)))
    low_s2 = float(np.dot(np.sinh(eta_Lp) ** 2, np.ones_like(eta_Lp)))
    high_eta = (-(1.0 - 0.5 / Nf) * sum_W_eta_H + sum_p2eta2_H / Nf
                - (S_Wd.value - low_Wd))

    # ---- double sum over P_H x P_H of V^((p-q)/s) (gamma sigma)_p (gamma sigma)_q
    ball = _high_ball(cut, ball_shells)
    # |n_p - n_q|^2 <= 2 |n_p|^2 + 2 |n_q|^2 over ball and low points
    n2_top = max(int(np.max(np.sum(ball * ball, axis=1))), int(np.max(np.sum(n_low * n_low, axis=1))))
    vt = vhat_table(pot, params, 4 * n2_top)
    k_ball = TWO_PI * np.sqrt(np.sum(ball * ball, axis=1).astype(np.float64))
    eta_B, _, W_B = rad.values(k_ball)
    eps_B = _sinh_minus(eta_B)  # gamma sigma - eta
    low_conv_B = kernels.table_matvec(np.ascontiguousarray(ball), np.ascontiguousarray(n_low),
                                      np.ascontiguousarray(eta_L), vt)
    low_conv_L = kernels.table_matvec(np.ascontiguousarray(n_low), np.ascontiguousarray(n_low),
                                      np.ascontiguousarray(eta_L), vt)
    S_LL = float(np.dot(eta_L, low_conv_L))
    S_Lconv = float(np.dot(eta_L, vconv_L))

    def eps_vconv(k):
        eta, _, W = rad.values(k)
        return _sinh_minus(eta) * (Nf / nk) * W

    S_ev = radial_lattice_sum(eps_vconv, win, kmax_int, integral_nodes=nodes)
    low_ev = float(np.dot(_sinh_minus(eta_Lp), (Nf / nk) * W_Lp))
    S_eta_eps = (S_ev.value - low_ev) - float(np.dot(eps_B, low_conv_B))
    eps_conv_B = kernels.table_matvec(np.ascontiguousarray(ball), np.ascontiguousarray(ball),
                                      np.ascontiguousarray(eps_B), vt)
    S_eps_eps = float(np.dot(eps_B, eps_conv_B))
    S_eta_eta = Nf * Nf * ri.Vw2 - 2.0 * S_Lconv + S_LL
    double_sum = (nk / (2.0 * Nf)) * (S_eta_eta + 2.0 * S_eta_eps + S_eps_eps)

    # ---- -W_0 sum_H sigma^2, with W_0 = (Nk/N)(V^ * eta)_0
    W0 = float(W_L[0])
    sigma_sq_W0 = -W0 * (S_s2.value - low_s2)

    value = T0 + sqrt_terms + high_eta + double_sum + sigma_sq_W0
    comps = {"T0": T0, "sqrt_terms": sqrt_terms, "high_eta": high_eta,
             "double_sum": double_sum, "sigma_sq_W0": sigma_sq_W0}
    diag = {
        "sum_e_pN": S_e.value, "sum_c2_over_p2": S_c2, "C0": C0,
        "window_center": win.center, "window_width": win.width,
        "ball_points": int(ball.shape[0]), "low_points": int(n_low.shape[0]),
        "S_eps_eps": S_eps_eps, "S_eta_eps": S_eta_eps,
        "leading_cancellation": T0 - 0.5 * Nf * nk * ri.Vw2 - 0.25 * nk * nk * s * ri.coulomb_vf,
    }
    return ConstantTerm(value, closed, comps, el, eb, diag)


def _high_ball(cut, shells):
    """Integer vectors with |p| >= cut and |n|^2 among the first ``shells`` values above it."""
    n2min = math.ceil((cut / TWO_PI) ** 2 - 1e-9)
    n2max = n2min + shells
    m = int(math.isqrt(n2max))
    ax = np.arange(-m, m + 1, dtype=np.int64)
    g = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1).reshape(-1, 3)
    n2 = np.einsum("ij,ij->i", g, g)
    keep = (TWO_PI * np.sqrt(n2.astype(np.float64)) >= cut) & (n2 <= n2max)
    g, n2 = g[keep], n2[keep]
    order = np.lexsort((g[:, 2], g[:, 1], g[:, 0], n2))
    return np.ascontiguousarray(g[order])
