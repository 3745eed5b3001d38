"""Radial zero-energy and Neumann scattering solutions.

Inside the support of V the radial function u = r f is integrated with a
fixed-step RK4 scheme on a uniform grid. Rather than shooting once per trial
eigenvalue, u is expanded as a power series in the eigenvalue,
u = sum_j lam^j u_j, and all coefficients u_j are integrated together. The
matching condition is then a cheap closed-form function of lam.

Outside the support u solves u'' = -lam u exactly. Normalising u(Rb) = Rb and
u'(Rb) = 1 (so f(Rb) = 1, f'(Rb) = 0) and writing e = r - Rb gives

    r w(r) = Rb (1 - cos(k e)) + e - sin(k e)/k,      k = sqrt(lam),

which is expanded in powers of e. Radial integrals over the exterior are
evaluated from that polynomial in closed form, so no oscillatory quadrature
is needed at large momenta.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.optimize import brentq

from . import kernels
from .potential import ModelParams, ParameterError, Potential, _simpson_weights, ball_kernel

FOUR_PI = 4.0 * math.pi

# number of eigenvalue-series terms carried through the interior integration
_LAMBDA_TERMS = 24
# quadrature switch for the exterior polynomial transforms
_GL_NODES = 128
_GL_SWITCH = 60.0


class ScatteringError(RuntimeError):
    """Numerical failure of a scattering solve."""


@dataclass(frozen=True)
class GridSpec:
    """Radial quadrature layout.

    ``n_inner`` uniform intervals on [0, R] and ``n_outer`` geometric
    intervals on [R, Rb]. With ``exterior="analytic"`` exterior integrals
    use the closed-form exterior solution; ``"simpson"`` integrates the
    sampled grid in log r instead.
    """

    n_inner: int = 4096
    n_outer: int = 4096
    exterior: str = "analytic"

    def __post_init__(self):
        for name in ("n_inner", "n_outer"):
            n = getattr(self, name)
            if int(n) != n or n < 2 or n % 2:
                raise ParameterError(f"{name} must be an even integer >= 2, got {n!r}")
            object.__setattr__(self, name, int(n))
        if self.exterior not in ("analytic", "simpson"):
            raise ParameterError(f"unknown exterior mode {self.exterior!r}")

    def to_dict(self):
        return {"n_inner": self.n_inner, "n_outer": self.n_outer, "exterior": self.exterior}


# ---------------------------------------------------------------------------
# interior integration


def _interior_series(pot: Potential, n: int, nterms: int = _LAMBDA_TERMS):
    """RK4 integration of the eigenvalue-series coefficients on [0, R].

    Returns (r, U, Up) with U[j], Up[j] the j-th coefficient of u and u'.
    """
    R = pot.R
    h = R / n
    r = np.linspace(0.0, R, n + 1)
    half = pot(r[:-1] + 0.5 * h) * 0.5
    full = pot(r) * 0.5
    U = np.zeros((n + 1, nterms))
    Up = np.zeros((n + 1, nterms))
    u = np.zeros(nterms)
    up = np.zeros(nterms)
    up[0] = 1.0
    U[0] = u
    Up[0] = up

    def acc(q, y):
        # u_j'' = q u_j - u_{j-1}
        out = q * y
        out[1:] -= y[:-1]
        return out

    for i in range(n):
        q0, qh, q1 = full[i], half[i], full[i + 1]
        k1u, k1p = up, acc(q0, u)
        u2, p2 = u + 0.5 * h * k1u, up + 0.5 * h * k1p
        k2u, k2p = p2, acc(qh, u2)
        u3, p3 = u + 0.5 * h * k2u, up + 0.5 * h * k2p
        k3u, k3p = p3, acc(qh, u3)
        u4, p4 = u + h * k3u, up + h * k3p
        k4u, k4p = p4, acc(q1, u4)
        u = u + (h / 6.0) * (k1u + 2 * k2u + 2 * k3u + k4u)
        up = up + (h / 6.0) * (k1p + 2 * k2p + 2 * k3p + k4p)
        U[i + 1] = u
        Up[i + 1] = up
    return r, U, Up


def _series_eval(coeffs, lam):
    """Evaluate sum_j coeffs[..., j] lam^j by Horner's rule."""
    out = np.zeros(coeffs.shape[:-1])
    for j in range(coeffs.shape[-1] - 1, -1, -1):
        out = out * lam + coeffs[..., j]
    return out


def scattering_length(pot: Potential, grid: GridSpec | None = None) -> float:
    """Scattering length of ``pot``.

    The zero-energy solution is integrated across the support and matched
    to the exact exterior form u = r - a0 at r = R.

    Examples
    --------
    >>> round(scattering_length(Potential(V0=2.0, R=1.0)), 7)
    0.2384058
    """
    grid = grid or GridSpec()
    if pot.is_zero:
        return 0.0
    _, U, Up = _interior_series(pot, grid.n_inner, nterms=1)
    uR, upR = U[-1, 0], Up[-1, 0]
    if not (np.isfinite(uR) and np.isfinite(upR)) or upR <= 0:
        raise ScatteringError("outer match failed: non-finite or non-positive slope at R")
    a0 = pot.R - uR / upR
    if a0 < 0:
        raise ScatteringError(f"negative scattering length {a0:.3e}; potential input is invalid")
    return float(a0)


# ---------------------------------------------------------------------------
# exterior closed form


def _exterior_poly(lam: float, Rb: float, D: float):
    """Power-series coefficients in e = r - Rb of r*w(r) on [R, Rb]."""
    coeffs = [0.0, 0.0]
    if lam == 0.0:
        return np.zeros(2)
    scale = max(D, 1e-300)
    lead = None
    j = 1
    fact_even = 1.0  # (2j)!
    while True:
        fact_even *= (2 * j - 1) * (2 * j)
        sign = 1.0 if j % 2 else -1.0
        c_even = sign * lam ** j * Rb / fact_even
        c_odd = sign * lam ** j / (fact_even * (2 * j + 1))
        coeffs.extend([c_even, c_odd])
        size = abs(c_even) * scale ** (2 * j) + abs(c_odd) * scale ** (2 * j + 1)
        if lead is None:
            lead = size
        if size <= 1e-18 * lead or j >= 40:
            break
        j += 1
    return np.array(coeffs)


def _poly_times_r(c, Rb):
    """Coefficients of (Rb + e) * c(e)."""
    out = np.zeros(len(c) + 1)
    out[:-1] += Rb * c
    out[1:] += c
    return out


def _exterior_transform(c, Rb, D, t):
    """4 pi int_{-D}^{0} c(e) r sinc(t r) de with r = Rb + e, vectorised in t.

    ``c`` holds the coefficients of r*g(r) as a polynomial in e.
    """
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros_like(t)
    if D == 0.0 or not np.any(c):
        return out
    zero = t == 0.0
    if np.any(zero):
        cr = npoly.polyint(_poly_times_r(c, Rb))
        out[zero] = FOUR_PI * (npoly.polyval(0.0, cr) - npoly.polyval(-D, cr))
    small = (~zero) & (t * D <= _GL_SWITCH)
    if np.any(small):
        x, wq = np.polynomial.legendre.leggauss(_GL_NODES)
        e = 0.5 * D * (x - 1.0)
        wq = 0.5 * D * wq
        ts = t[small]
        ce = npoly.polyval(e, c)
        vals = np.sin(np.outer(ts, Rb + e)) @ (wq * ce)
        out[small] = FOUR_PI * vals / ts
    big = (~zero) & (t * D > _GL_SWITCH)
    if np.any(big):
        tb = t[big]
        it = 1j * tb
        acc0 = np.zeros(tb.shape, dtype=np.complex128)
        accD = np.zeros(tb.shape, dtype=np.complex128)
        d = np.array(c, dtype=np.float64)
        denom = it.copy()
        sign = 1.0
        while d.size and np.any(d):
            acc0 += sign * npoly.polyval(0.0, d) / denom
            accD += sign * npoly.polyval(-D, d) / denom
            d = npoly.polyder(d)
            denom = denom * it
            sign = -sign
        integral = acc0 - np.exp(-1j * tb * D) * accD
        out[big] = FOUR_PI * np.imag(np.exp(1j * tb * Rb) * integral) / tb
    return out


def _exterior_pair(lam, Rb, D):
    """Values P(-D), P'(-D) of r*w and its derivative at r = R."""
    c = _exterior_poly(lam, Rb, D)
    return npoly.polyval(-D, c), npoly.polyval(-D, npoly.polyder(c))


# ---------------------------------------------------------------------------
# solution object


@dataclass(frozen=True, eq=False)
class ScatteringSolution:
    """Ground state of the radial Neumann problem on the ball of radius Rb.

    Attributes
    ----------
    r, f, df : ndarray
        Grid, f and f' on [0, Rb]; the first ``grid.n_inner + 1`` nodes are
        the uniform interior grid ending at R.
    a0 : float
        Scattering length of the potential.
    lambda_ell : float
        Neumann eigenvalue.
    """

    potential: Potential
    params: ModelParams
    grid: GridSpec
    Rb: float
    lambda_ell: float
    a0: float
    r: np.ndarray
    f: np.ndarray
    df: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def R(self):
        return self.potential.R

    @property
    def w(self):
        return 1.0 - self.f

    @property
    def f_grid(self):
        return np.column_stack([self.r, self.f])

    @property
    def n_inner(self):
        return self.grid.n_inner

    # -- quadrature helpers ------------------------------------------------
    def _inner(self):
        if "inner" not in self._cache:
            n = self.grid.n_inner
            sl = slice(0, n + 1)
            r = self.r[sl]
            w = _simpson_weights(n, self.R / n) * r * r * FOUR_PI
            self._cache["inner"] = (r, w)
        return self._cache["inner"]

    def _outer(self):
        if "outer" not in self._cache:
            n = self.grid.n_outer
            r = self.r[self.grid.n_inner:]
            if self.Rb > self.R:
                h = math.log(self.Rb / self.R) / n
                w = _simpson_weights(n, h) * r ** 3 * FOUR_PI
            else:
                w = np.zeros_like(r)
            self._cache["outer"] = (r, w)
        return self._cache["outer"]

    def _poly_w(self):
        if "poly_w" not in self._cache:
            self._cache["poly_w"] = _exterior_poly(self.lambda_ell, self.Rb, self.Rb - self.R)
        return self._cache["poly_w"]

    def _poly_f(self):
        c = -self._poly_w()
        c = c.copy()
        c[0] += self.Rb
        c[1] += 1.0
        return c

    def transform(self, profile, t):
        """4 pi int g(r) sinc(t r) r^2 dr for g in {"w", "f"} over [0, Rb].

        Parameters
        ----------
        profile : {"w", "f"}
        t : array_like
            Radial wavenumbers in rescaled units.
        """
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        ri, wi = self._inner()
        n = self.grid.n_inner
        g_in = self.w[: n + 1] if profile == "w" else self.f[: n + 1]
        out = kernels.radial_transform(np.ascontiguousarray(t), ri, np.ascontiguousarray(wi * g_in))
        if self.grid.exterior == "analytic":
            c = self._poly_w() if profile == "w" else self._poly_f()
            out = out + _exterior_transform(c, self.Rb, self.Rb - self.R, t)
        else:
            ro, wo = self._outer()
            g_out = self.w[n:] if profile == "w" else self.f[n:]
            out = out + kernels.radial_transform(np.ascontiguousarray(t), ro, np.ascontiguousarray(wo * g_out))
        return out

    def transform_vf(self, t, power=1):
        """4 pi int V f^power sinc(t r) r^2 dr over the support."""
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        ri, wi = self._inner()
        n = self.grid.n_inner
        g = self.potential(ri) * self.f[: n + 1] ** power
        return kernels.radial_transform(np.ascontiguousarray(t), ri, np.ascontiguousarray(wi * g))

    def interior_integral(self, values):
        """4 pi int_0^R values(r) r^2 dr for values sampled on the interior grid."""
        _, wi = self._inner()
        return float(np.dot(wi, values))

    # -- serialisation -----------------------------------------------------
    def to_json_dict(self):
        return {
            "params": self.params.to_dict(),
            "potential": self.potential.to_dict(),
            "grid_spec": self.grid.to_dict(),
            "a0": self.a0,
            "lambda_ell": self.lambda_ell,
            "Rb": self.Rb,
            "grid": [{"r": float(r), "f": float(f), "df": float(d)}
                     for r, f, d in zip(self.r, self.f, self.df)],
        }

    @classmethod
    def from_json_dict(cls, d):
        params = ModelParams(**d["params"])
        pot = Potential.from_dict(d["potential"])
        grid = GridSpec(**d["grid_spec"])
        r = np.array([g["r"] for g in d["grid"]])
        f = np.array([g["f"] for g in d["grid"]])
        df = np.array([g["df"] for g in d["grid"]])
        return _freeze(cls(potential=pot, params=params, grid=grid, Rb=float(d["Rb"]),
                           lambda_ell=float(d["lambda_ell"]), a0=float(d["a0"]),
                           r=r, f=f, df=df))


def _freeze(sol):
    for a in (sol.r, sol.f, sol.df):
        a.setflags(write=False)
    return sol


# ---------------------------------------------------------------------------
# Neumann solve


def _match_residual(lam, UR, UpR, R, Rb):
    """Wronskian of interior and exterior solutions at r = R."""
    D = Rb - R
    uR = _series_eval(UR, lam)
    upR = _series_eval(UpR, lam)
    P, dP = _exterior_pair(lam, Rb, D)
    # exterior u = r - P(e), u' = 1 - P'(e)
    return float((uR - R * upR) + (upR * P - uR * dP))


def solve_neumann(pot: Potential, params: ModelParams, grid: GridSpec | None = None,
                  margin: float = 0.5) -> ScatteringSolution:
    """Lowest Neumann eigenpair of the radial problem on the ball of radius Rb.

    Parameters
    ----------
    pot : Potential
    params : ModelParams
        Supplies Rb = ell * N^(1-kappa).
    grid : GridSpec, optional
    margin : float
        Relative widening of the leading-order eigenvalue bracket.

    Raises
    ------
    ScatteringError
        If no sign change is found in the bracket or the solution has a node.
    """
    grid = grid or GridSpec()
    params.check_support(pot)
    Rb = params.Rb
    R = pot.R
    D = Rb - R
    a0 = scattering_length(pot, grid)

    r_in, U, Up = _interior_series(pot, grid.n_inner) if not pot.is_zero else (
        np.linspace(0.0, R, grid.n_inner + 1), None, None)

    if pot.is_zero or a0 == 0.0:
        lam = 0.0
        r_out = R * (Rb / R) ** (np.arange(grid.n_outer + 1) / grid.n_outer)
        r = np.concatenate([r_in, r_out[1:]])
        return _freeze(ScatteringSolution(pot, params, grid, Rb, 0.0, a0, r,
                                          np.ones_like(r), np.zeros_like(r)))

    UR, UpR = U[-1], Up[-1]
    lead = 3.0 * a0 / Rb ** 3
    hi = 2.0 * lead * (1.0 + margin)
    f_lo = _match_residual(0.0, UR, UpR, R, Rb)
    f_hi = _match_residual(hi, UR, UpR, R, Rb)
    tries = 0
    while f_lo * f_hi > 0 and tries < 8:
        hi *= 2.0
        f_hi = _match_residual(hi, UR, UpR, R, Rb)
        tries += 1
    if f_lo * f_hi > 0:
        raise ScatteringError("no sign change of the matching condition in the eigenvalue window")
    lam = brentq(_match_residual, 0.0, hi, args=(UR, UpR, R, Rb), xtol=1e-300,
                 rtol=4 * np.finfo(float).eps, maxiter=500)

    # interior profile
    u_in = _series_eval(U, lam)
    up_in = _series_eval(Up, lam)
    if np.any(u_in[1:] <= 0):
        raise ScatteringError("nodal solution detected: interior zero of u")
    P, dP = _exterior_pair(lam, Rb, D)
    scale = (R - P) / u_in[-1]
    f_in = np.empty_like(u_in)
    df_in = np.empty_like(u_in)
    f_in[0] = scale * up_in[0]
    df_in[0] = 0.0
    ri = r_in[1:]
    f_in[1:] = scale * u_in[1:] / ri
    df_in[1:] = scale * (up_in[1:] * ri - u_in[1:]) / ri ** 2

    # exterior profile from the closed form
    r_out = R * (Rb / R) ** (np.arange(grid.n_outer + 1) / grid.n_outer)
    r_out[-1] = Rb
    c = _exterior_poly(lam, Rb, D)
    e = r_out - Rb
    Pe = npoly.polyval(e, c)
    dPe = npoly.polyval(e, npoly.polyder(c))
    f_out = 1.0 - Pe / r_out
    df_out = Pe / r_out ** 2 - dPe / r_out
    f_out[-1] = 1.0
    df_out[-1] = 0.0

    r = np.concatenate([r_in, r_out[1:]])
    f = np.concatenate([f_in, f_out[1:]])
    df = np.concatenate([df_in, df_out[1:]])
    if np.any(f < 0) or np.any(np.diff(f) < -1e-14):
        raise ScatteringError("Neumann solution is not a nonnegative nondecreasing profile")
    return _freeze(ScatteringSolution(pot, params, grid, Rb, float(lam), a0, r, f, df))


def neumann_residual(sol: ScatteringSolution) -> np.ndarray:
    """Three-point residual of -u'' + (V/2 - lam) u, divided by r, on interior nodes.

    Endpoints and the node at r = R (where V may jump) are excluded.
    """
    r = sol.r
    u = r * sol.f
    hm = r[1:-1] - r[:-2]
    hp = r[2:] - r[1:-1]
    upp = 2.0 * (u[2:] * hm - u[1:-1] * (hm + hp) + u[:-2] * hp) / (hm * hp * (hm + hp))
    rc = r[1:-1]
    res = (-upp + (0.5 * sol.potential(rc) - sol.lambda_ell) * u[1:-1]) / rc
    keep = np.ones(res.shape, dtype=bool)
    keep[sol.grid.n_inner - 1] = False
    return np.abs(res[keep])


# ---------------------------------------------------------------------------
# derived integrals and momentum-space kernels


def integral_Vf(sol: ScatteringSolution, pot: Potential | None = None) -> float:
    """4 pi int V f r^2 dr."""
    _check_pot(sol, pot)
    return float(sol.transform_vf([0.0])[0])


def integral_w(sol: ScatteringSolution) -> float:
    """4 pi int_0^Rb w r^2 dr."""
    return float(sol.transform("w", [0.0])[0])


def _check_pot(sol, pot):
    if pot is not None and pot != sol.potential:
        raise ParameterError("solution was computed for a different potential")


def _momentum_norm(p):
    """|p| for lattice vectors in 2 pi Z^3 (shape (3,) or (n, 3))."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim == 0:
        raise ParameterError("expected a lattice vector, got a scalar")
    n = p / (2 * math.pi)
    if not np.allclose(n, np.round(n), atol=1e-9, rtol=0):
        raise ParameterError("momentum is not in 2 pi Z^3")
    n = np.round(n)
    return 2 * math.pi * np.sqrt(np.sum(n * n, axis=-1))


def eta_radial(sol, params, k):
    """eta as a function of |p| (array)."""
    k = np.asarray(k, dtype=np.float64)
    pref = -params.nk / float(params.N) ** (2.0 - 2.0 * params.kappa)
    return pref * sol.transform("w", np.ravel(k) / params.scale).reshape(k.shape)


def conv_vf_radial(sol, params, k):
    k = np.asarray(k, dtype=np.float64)
    return sol.transform_vf(np.ravel(k) / params.scale).reshape(k.shape)


def conv_chi_f_radial(sol, params, k):
    k = np.asarray(k, dtype=np.float64)
    s = params.scale
    return (sol.transform("f", np.ravel(k) / s) / s ** 3).reshape(k.shape)


def eta_p(sol: ScatteringSolution, params: ModelParams, p) -> np.ndarray | float:
    """eta_p = -N w_N^(p) for lattice momenta ``p``."""
    k = _momentum_norm(p)
    out = eta_radial(sol, params, k)
    return float(out) if out.ndim == 0 else out


def conv_Vf(sol, pot, params, p):
    """Convolution of the rescaled V^ with f^_N at lattice momenta ``p``."""
    _check_pot(sol, pot)
    out = conv_vf_radial(sol, params, _momentum_norm(p))
    return float(out) if out.ndim == 0 else out


def conv_chi_f(sol, params, p):
    """Convolution of chi^_ell with f^_N at lattice momenta ``p``."""
    out = conv_chi_f_radial(sol, params, _momentum_norm(p))
    return float(out) if out.ndim == 0 else out


def chi_hat(ell, k):
    """Fourier transform of the indicator of the ball of radius ``ell``."""
    k = np.asarray(k, dtype=np.float64)
    return FOUR_PI * ell ** 3 * ball_kernel(ell * k)


# ---------------------------------------------------------------------------
# disk cache


def cache_key(pot: Potential, params: ModelParams, grid: GridSpec) -> str:
    blob = json.dumps({"potential": pot.to_dict(), "N": params.N, "kappa": params.kappa,
                       "ell": params.ell, "grid": grid.to_dict()}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def default_cache_dir():
    return os.environ.get("DILUTEBOSE_CACHE_DIR",
                          os.path.join(os.path.expanduser("~"), ".cache", "dilutebose"))


def solve_neumann_cached(pot, params, grid=None, cache_dir=None):
    """``solve_neumann`` with a JSON cache keyed by a content hash.

    Returns (solution, hit) where ``hit`` says whether the cache was used.
    """
    grid = grid or GridSpec()
    cache_dir = cache_dir or default_cache_dir()
    path = os.path.join(cache_dir, f"scattering-{cache_key(pot, params, grid)}.json")
    if os.path.exists(path):
        try:
            with open(path) as fh:
                doc = json.load(fh)
            sol = ScatteringSolution.from_json_dict(doc)
            # params other than (N, kappa, ell) do not enter the solution
            object.__setattr__(sol, "params", params)
            return sol, True
        except (OSError, ValueError, KeyError):
            pass
    sol = solve_neumann(pot, params, grid)
    os.makedirs(cache_dir, exist_ok=True)
    tmp = path + f".tmp{os.getpid()}"
    with open(tmp, "w") as fh:
        json.dump(sol.to_json_dict(), fh)
    os.replace(tmp, path)
    return sol, False
