"""Per-momentum renormalisation coefficients on a lattice ball."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .lattice import MomentumLattice
from .potential import ModelParams, Potential
from .scattering import (ScatteringSolution, chi_hat, conv_chi_f_radial, conv_vf_radial,
                         eta_radial)

CSV_COLUMNS = ("p2", "multiplicity", "eta_H", "sigma", "gamma", "Phi", "Gamma",
               "F", "G", "tau", "eps")

FULL = "full"
HIGH = "high"


class CoefficientError(ValueError):
    """Inconsistent input for the coefficient families."""


def vhat_table(pot: Potential, params: ModelParams, m_max: int) -> np.ndarray:
    """V^(|p - q|/N^(1-kappa)) indexed by the integer |n_p - n_q|^2."""
    k = 2 * math.pi * np.sqrt(np.arange(m_max + 1, dtype=np.float64)) / params.scale
    return pot.fourier(k)


@dataclass(frozen=True, eq=False)
class CoefficientTable:
    """Coefficient families evaluated on every point of ``lattice``.

    Radial quantities are computed once per shell; ``shell(name)`` returns
    the per-shell view. With ``convolution="high"`` the potential
    convolution in Phi and Gamma uses eta restricted to P_H, which breaks
    exact radial symmetry only through the subtracted low-momentum points.
    """

    lattice: MomentumLattice
    a0: float
    N: int
    kappa: float
    alpha: float
    beta: float
    convolution: str
    eta: np.ndarray
    eta_H: np.ndarray
    sigma: np.ndarray
    gamma: np.ndarray
    vhat: np.ndarray
    conv_vf: np.ndarray
    W: np.ndarray
    W0: float
    Phi: np.ndarray
    Gamma_od: np.ndarray
    F: np.ndarray
    G: np.ndarray
    tau: np.ndarray
    eps: np.ndarray
    extras: dict = field(default_factory=dict)

    @property
    def p2(self):
        return (2 * math.pi) ** 2 * self.lattice.n2.astype(np.float64)

    @property
    def in_high(self):
        return self.lattice.norms >= float(self.N) ** self.alpha

    @property
    def sigma_tilde(self):
        return np.sinh(self.tau)

    @property
    def gamma_tilde(self):
        return np.cosh(self.tau)

    @property
    def tau_norms(self):
        t = self.tau
        return {"linf": float(np.max(np.abs(t))), "l2_sq": float(np.sum(t * t)),
                "l1": float(np.sum(np.abs(t))), "h1_sq": float(np.sum(self.p2 * t * t))}

    def shell(self, name):
        arr = getattr(self, name)
        return arr[self.lattice.shell_start[:-1]]

    def field(self, name):
        return getattr(self, name)


def _pointwise(lattice, per_shell):
    return per_shell[lattice.shell_index]


def build_coefficients(sol: ScatteringSolution, pot: Potential, params: ModelParams,
                       lattice: MomentumLattice, convolution: str = FULL) -> CoefficientTable:
    """Evaluate eta_H, sigma, gamma, Phi, Gamma, F, G, tau and eps on ``lattice``.

    Raises
    ------
    CoefficientError
        If P_H has no point in the table, or if |G| >= F anywhere.
    """
    if convolution not in (FULL, HIGH):
        raise ValueError(f"convolution must be {FULL!r} or {HIGH!r}")
    if pot != sol.potential:
        raise CoefficientError("solution was computed for a different potential")
    N, nk, s = params.N, params.nk, params.scale
    cut = float(N) ** params.alpha
    if lattice.pmax < cut:
        raise CoefficientError(f"no momenta with |p| >= N^alpha = {cut:.4g} inside pmax = {lattice.pmax:.4g}")

    k = lattice.shell_norms
    p2 = k * k
    eta = eta_radial(sol, params, k)
    high = k >= cut
    eta_H = np.where(high, eta, 0.0)
    sigma = np.where(high, np.sinh(eta_H), 0.0)
    gamma = np.where(high, np.cosh(eta_H), 1.0)
    vhat = pot.fourier(k / s)
    cvf = conv_vf_radial(sol, params, k)
    vhat0 = float(pot.fourier(np.array([0.0]))[0])
    cvf0 = float(conv_vf_radial(sol, params, np.array([0.0]))[0])
    # (Nk/N) (V^ * eta)_p = Nk [conv_Vf(p) - V^(p/s)]
    W_shell = nk * (cvf - vhat)
    W0 = nk * (cvf0 - vhat0)

    c = nk * cvf
    gs2 = gamma ** 2 + sigma ** 2
    gps = (gamma + sigma) ** 2
    F = gs2 * p2 + gps * c
    G = 2 * p2 * sigma * gamma + gps * c
    eps = np.sqrt(p2 * p2 + 16 * math.pi * sol.a0 * nk * p2)

    ratio = G / F
    if np.any(F <= 0) or np.any(np.abs(ratio) >= 1):
        raise CoefficientError("|G_p| >= F_p at some momentum: inputs are inconsistent")
    tau = 0.25 * (np.log1p(-ratio) - np.log1p(ratio))

    pw = lambda a: _pointwise(lattice, a)  # noqa: E731
    sig_p, gam_p = pw(sigma), pw(gamma)
    v_p = nk * pw(vhat)
    W_p = pw(W_shell)
    W0_used = W0
    extras = {}
    if convolution == HIGH:
        # drop the low-momentum points (including p = 0) from the convolution
        low_mask = lattice.norms < cut
        n_low = np.vstack([np.zeros((1, 3), dtype=np.int64), lattice.n[low_mask]])
        eta_low = np.concatenate([[float(eta_radial(sol, params, np.array([0.0]))[0])],
                                  pw(eta)[low_mask]])
        n_all = np.vstack([np.zeros((1, 3), dtype=np.int64), lattice.n])
        # |n_p - n_q|^2 <= (|n_p| + |n_q|)^2 <= 4 max|n|^2
        m_max = 4 * int(lattice.shell_n2[-1])
        table = vhat_table(pot, params, m_max)
        corr = kernels.table_matvec(np.ascontiguousarray(n_all), np.ascontiguousarray(n_low),
                                    np.ascontiguousarray(eta_low), table)
        corr = nk / N * corr
        W_p = W_p - corr[1:]
        W0_used = W0 - corr[0]
        extras["low_points"] = int(n_low.shape[0])
    Phi = 2 * pw(p2 * sigma ** 2) + v_p * pw(gps) + 2 * gam_p * sig_p * W_p - pw(gs2) * W0_used
    Gam = 2 * pw(p2 * sigma * gamma) + v_p * pw(gps) + pw(gs2) * W_p - 2 * gam_p * sig_p * W0_used

    arrays = dict(eta=pw(eta), eta_H=pw(eta_H), sigma=sig_p, gamma=gam_p, vhat=pw(vhat),
                  conv_vf=pw(cvf), W=W_p, Phi=Phi, Gamma_od=Gam, F=pw(F), G=pw(G),
                  tau=pw(tau), eps=pw(eps))
    for a in arrays.values():
        a.setflags(write=False)
    return CoefficientTable(lattice=lattice, a0=sol.a0, N=N, kappa=params.kappa,
                            alpha=params.alpha, beta=params.beta, convolution=convolution,
                            W0=float(W0_used), extras=extras, **arrays)


def scattering_residual(table: CoefficientTable, sol: ScatteringSolution, pot: Potential,
                        params: ModelParams, p) -> np.ndarray | float:
    """|LHS - RHS| of the momentum-space scattering equation at lattice momenta ``p``.

    The left side is p^2 eta_p + (1/2) N^kappa (V^ * f^_N)_p; the right side
    is N^(3-2 kappa) lam chi^(p) + N^(2-2 kappa) lam (chi^ * eta)_p with the
    ball-restricted convolution computed as a radial integral.
    """
    del table  # coefficients are recomputed from the solution
    from .scattering import _momentum_norm

    k = np.atleast_1d(_momentum_norm(p))
    N, nk = float(params.N), params.nk
    lam = sol.lambda_ell
    eta = eta_radial(sol, params, k)
    lhs = k * k * eta + 0.5 * nk * conv_vf_radial(sol, params, k)
    # (chi^ * eta)_p = -N (4 pi / s^3) int_0^Rb w sinc r^2 dr, which equals eta_p
    s = params.scale
    chi_eta = -N * sol.transform("w", k / s) / s ** 3
    rhs = N ** (3 - 2 * params.kappa) * lam * chi_hat(params.ell, k) \
        + N ** (2 - 2 * params.kappa) * lam * chi_eta
    out = np.abs(lhs - rhs)
    return float(out[0]) if np.ndim(p) == 1 else out


def chi_f_check(sol, params, k):
    """Convenience: N^(3-2 kappa) lam (chi^ * f^_N) from the f-profile transform."""
    return float(params.N) ** (3 - 2 * params.kappa) * sol.lambda_ell * conv_chi_f_radial(sol, params, k)


# ---------------------------------------------------------------------------
# bound report

DEFAULT_CEILING = 1000.0

_UPPER = ("F_upper", "G_low_sup", "G_high_sup", "sigma_sup", "tau_linf_excess",
          "tau_l2", "tau_l1", "tau_h1", "Gamma_premise", "Phi_premise")
_LOWER = ("F_lower", "gap_lower")


@dataclass
class BoundReport:
    """Empirical constants for the coefficient bounds with pass/fail flags."""

    constants: dict
    passed: dict
    ceiling: float

    @property
    def ok(self):
        return all(self.passed.values())

    def to_dict(self):
        return {"constants": self.constants, "passed": self.passed, "ceiling": self.ceiling,
                "ok": self.ok}


def bound_report(table: CoefficientTable, params: ModelParams,
                 ceiling: float = DEFAULT_CEILING) -> BoundReport:
    """Empirical constants of the F, G, sigma and tau bounds over the table.

    Upper-type constants pass when at most ``ceiling``; lower-type constants
    (``F_lower``, ``gap_lower``) pass when at least ``1/ceiling``.
    """
    nk = params.nk
    p2 = table.p2
    high = table.in_high
    F, G = table.F, table.G
    norms = table.tau_norms
    k = np.sqrt(p2)

    def sup(x):
        return float(np.max(x)) if x.size else 0.0

    denom = p2 + nk
    gap = (1.0 - np.abs(G) / F) / np.minimum(1.0, p2 / nk)
    gam_env = nk * ((k <= float(table.N) ** table.alpha).astype(float) + 1.0 / p2)
    consts = {
        "F_upper": sup(F / denom),
        "F_lower": float(np.min(F / denom)),
        "G_low_sup": sup(np.abs(G[~high]) / nk),
        "G_high_sup": sup(np.abs(G[high]) * p2[high] / nk ** 2),
        "sigma_sup": sup(np.abs(table.sigma) * p2 / nk),
        "tau_linf_excess": norms["linf"] - math.log(nk ** 0.25),
        "tau_l2": norms["l2_sq"] / nk ** 1.5,
        "tau_l1": norms["l1"] / (float(table.N) ** table.alpha * nk),
        "tau_h1": norms["h1_sq"] / (float(table.N) ** table.alpha * nk ** 2),
        "gap_lower": float(np.min(gap)),
        "Gamma_premise": sup(np.abs(table.Gamma_od) / gam_env),
        "Phi_premise": sup(np.abs(table.Phi) / nk),
    }
    passed = {}
    for key in _UPPER:
        passed[key] = bool(consts[key] <= ceiling)
    for key in _LOWER:
        passed[key] = bool(consts[key] >= 1.0 / ceiling)
    return BoundReport(consts, passed, ceiling)


# ---------------------------------------------------------------------------
# export


def _fmt(x):
    return format(float(x), ".17g") if not isinstance(x, (int, np.integer)) else str(int(x))


def table_rows(table: CoefficientTable):
    """One row per shell in ``CSV_COLUMNS`` order (first point of the shell)."""
    lat = table.lattice
    first = lat.shell_start[:-1]
    p2 = (2 * math.pi) ** 2 * lat.shell_n2.astype(np.float64)
    cols = [p2, lat.multiplicities, table.eta_H[first], table.sigma[first], table.gamma[first],
            table.Phi[first], table.Gamma_od[first], table.F[first], table.G[first],
            table.tau[first], table.eps[first]]
    return [list(row) for row in zip(*cols)]


def write_table_csv(table: CoefficientTable, path):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(CSV_COLUMNS)
        for row in table_rows(table):
            wr.writerow([_fmt(v) for v in row])


def write_bound_report(report: BoundReport, path, extra=None):
    doc = report.to_dict()
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
