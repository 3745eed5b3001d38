"""Scalar spectral quantities: Bogoliubov sum, box constants, LHY integral,
ground-state energy and low-lying excitation levels."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import kernels
from .lattice import TWO_PI, Window, build_lattice, k_nodes, shell_counts, _n2_limit

DEFAULT_MMAX = 128
DEFAULT_ACCEL_CEILING = 0.05


class AccelerationError(RuntimeError):
    """Accelerated partial sums failed to settle."""


class SummationError(RuntimeError):
    """A shell summation violated its expected structure."""


@dataclass
class SumResult:
    """Limit of a lattice sum with a convergence certificate.

    ``diagnostics`` holds (cutoff, raw partial value, accelerated value)
    triples; the accelerated entry is ``None`` where it is undefined.
    """

    value: float
    tail_estimate: float
    cutoff_used: float
    extrapolation_order: int
    diagnostics: list = field(default_factory=list)

    def to_dict(self):
        return {"value": self.value, "tail_estimate": self.tail_estimate,
                "cutoff": self.cutoff_used, "extrapolation_order": self.extrapolation_order,
                "diagnostics": [list(d) for d in self.diagnostics]}


# ---------------------------------------------------------------------------
# Bogoliubov sum


def bogoliubov_summand(p2, b):
    """sqrt(p^4 + b p^2) - p^2 - b/2 + b^2/(8 p^2), evaluated without cancellation.

    With x = b/p^2 and y = sqrt(1 + x) the summand equals
    p^2 x^3 (y + 3) / (8 (1 + y)^3).
    """
    p2 = np.asarray(p2, dtype=np.float64)
    x = b / p2
    y = np.sqrt(1.0 + x)
    return p2 * x ** 3 * (y + 3.0) / (8.0 * (1.0 + y) ** 3)


def _bog_radial_tail(K, b):
    """int_K^inf k^2 e(k^2) dk from the large-k expansion of the summand."""
    return b ** 3 / (16 * K) - 5 * b ** 4 / (384 * K ** 3) + 7 * b ** 5 / (1280 * K ** 5)


def _bog_window(pmax):
    width = pmax / 13.0
    return Window(6.0 * width, width)


def e_bog(a0: float, N: float, kappa: float, pmax: float = 40 * math.pi,
          extrapolate: bool = True) -> SumResult:
    """Half the sum over 2 pi Z^3 \\ {0} of the renormalised Bogoliubov summand.

    With ``extrapolate`` the shells carry a smooth window vanishing at
    ``pmax`` and the complement is integrated radially; otherwise the raw
    ball sum up to ``pmax`` is returned with the p^-4 tail model as
    ``tail_estimate``.
    """
    if a0 < 0:
        raise ValueError("a0 must be nonnegative")
    if pmax < 4 * math.pi:
        raise ValueError("pmax must be at least 4 pi")
    g = a0 * float(N) ** kappa
    b = 16.0 * math.pi * g
    values, counts = shell_counts(_n2_limit(pmax))
    p2 = TWO_PI ** 2 * values.astype(np.float64)
    terms = counts * bogoliubov_summand(p2, b) if b > 0 else np.zeros_like(p2)
    if np.any(terms < 0):
        raise SummationError("negative Bogoliubov summand")
    partial = 0.5 * np.cumsum(terms)
    if np.any(np.diff(partial) < 0):
        raise SummationError("partial sums are not monotone; pmax is below the asymptotic regime")
    picks = np.unique(np.linspace(0, len(p2) - 1, 8).astype(int))
    raw = 0.5 * math.fsum(terms)
    tail_model = 0.5 * b ** 3 / (16.0 * 2 * math.pi ** 2 * math.sqrt(p2[-1])) if b > 0 else 0.0
    if b == 0:
        diag = [(float(math.sqrt(p2[i])), 0.0, None) for i in picks]
        return SumResult(0.0, 0.0, float(pmax), 1 if extrapolate else 0, diag)

    def windowed(P):
        win = _bog_window(P)
        vals, cnts = shell_counts(_n2_limit(win.kmax))
        k = TWO_PI * np.sqrt(vals.astype(np.float64))
        lat = math.fsum(cnts * win.inside(k) * bogoliubov_summand(k * k, b))
        K = 1e3 * P + 1e3 * math.sqrt(b)
        kn, wn = k_nodes(max(1e-12, win.center - 7 * win.width), K,
                         oscillation=P / 40.0, switch=4 * P)
        integ = float(np.dot(wn * win.outside(kn) * kn * kn, bogoliubov_summand(kn * kn, b)))
        integ += _bog_radial_tail(K, b)
        return 0.5 * (lat + integ / (2 * math.pi ** 2))

    if not extrapolate:
        diag = [(float(math.sqrt(p2[i])), float(partial[i]), None) for i in picks]
        return SumResult(raw, tail_model, float(pmax), 0, diag)
    full = windowed(pmax)
    coarse = windowed(0.75 * pmax)
    diag = [(float(math.sqrt(p2[i])), float(partial[i]), None) for i in picks]
    diag.append((0.75 * pmax, None, coarse))
    diag.append((float(pmax), raw, full))
    return SumResult(full, abs(full - coarse), float(pmax), 1, diag)


# ---------------------------------------------------------------------------
# conditionally convergent cube sums


def _bump_weights(n):
    t = (np.arange(1, n + 1) - 0.5) / n
    w = np.exp(-1.0 / (t * (1.0 - t)))
    return w / w.sum()


def smooth_cube_limit(partial):
    """Accelerated limit of cube partial sums ``partial[M]`` for M = 1..Mmax.

    The partial sums oscillate with amplitude ~1/M. They are averaged with
    a C-infinity bump weight over M in (Mmax/2, Mmax]; this Riesz-type mean
    suppresses the oscillation faster than any power of the window length.
    """
    mmax = len(partial) - 1
    lo = mmax // 2
    seg = np.asarray(partial[lo + 1: mmax + 1])
    return float(np.dot(_bump_weights(seg.size), seg))


def _accelerate(partial, ceiling, label):
    mmax = len(partial) - 1
    best = smooth_cube_limit(partial)
    half = smooth_cube_limit(partial[: mmax // 2 + 1])
    three = smooth_cube_limit(partial[: (3 * mmax) // 4 + 1])
    tail = 2.0 * max(abs(best - half), abs(best - three))
    if not math.isfinite(best) or tail > ceiling:
        raise AccelerationError(f"{label}: accelerated values differ by {tail:.3g} (ceiling {ceiling})")
    picks = sorted({1, 2, 4, max(1, mmax // 4), mmax // 2, (3 * mmax) // 4, mmax})
    diag = []
    for m in picks:
        acc = smooth_cube_limit(partial[: m + 1]) if m >= 8 and m in (mmax // 2, (3 * mmax) // 4, mmax) else None
        diag.append((m, float(partial[m]), acc))
    return best, tail, diag


def cube_partial_sums(mmax, omegas):
    """Cumulative cube sums over 0 < max|n_i| <= M for M = 0..mmax.

    Columns per frequency: sum cos(w|n|)/|n|^2, sum cos(w|n|)/|n|^4,
    sum sin(w|n|)/|n|^5.
    """
    shells = kernels.cube_shell_sums(int(mmax), np.ascontiguousarray(omegas, dtype=np.float64))
    return np.cumsum(shells, axis=0)


def e_lambda(Mmax: int = DEFAULT_MMAX, ceiling: float = DEFAULT_ACCEL_CEILING) -> SumResult:
    """e_Lambda = 2 - lim_M sum over 0 < max|n_i| <= M of 4 cos|n| / |n|^2."""
    if Mmax < 8:
        raise ValueError("Mmax must be at least 8")
    cums = cube_partial_sums(Mmax, [1.0])[:, 0, 0]
    partial = 2.0 - 4.0 * cums
    best, tail, diag = _accelerate(partial, ceiling, "e_lambda")
    return SumResult(best, tail, int(Mmax), 1, diag)


BRACKET = "bracket"
COSINE = "cosine"


def i_ell(ell: float, Mmax: int = DEFAULT_MMAX, form: str = BRACKET,
          ceiling: float = DEFAULT_ACCEL_CEILING) -> SumResult:
    """The box constant I_ell from cube-truncated sums over 2 pi Z^3 \\ {0}.

    ``form="bracket"`` uses the ball-indicator transform divided by p^2;
    ``form="cosine"`` uses the conditionally convergent cos(ell|p|)/p^2 sum.
    """
    if not 0 < ell < 0.5:
        raise ValueError("ell must lie in (0, 1/2)")
    if Mmax < 8:
        raise ValueError("Mmax must be at least 8")
    omega = TWO_PI * ell
    cums = cube_partial_sums(Mmax, [omega])[:, 0, :]
    if form == COSINE:
        s = cums[:, 0] / TWO_PI ** 2
        partial = 4 * math.pi * ell ** 2 / 3 - (8 * math.pi / 3) * s
    elif form == BRACKET:
        # chi^(p)/p^2 = 4 pi [sin(ell|p|)/|p|^5 - ell cos(ell|p|)/|p|^4]
        s = 4 * math.pi * (cums[:, 2] / TWO_PI ** 5 - ell * cums[:, 1] / TWO_PI ** 4)
        partial = 1.0 / ell + 4 * math.pi * ell ** 2 / 15 - (2.0 / ell ** 3) * s
    else:
        raise ValueError(f"unknown form {form!r}")
    best, tail, diag = _accelerate(partial, ceiling, f"i_ell({form})")
    return SumResult(best, tail, int(Mmax), 1, diag)


def ball_partial_sums(mmax, omega=1.0):
    """Ball-truncated analogue of the e_Lambda sequence, for comparison."""
    values, counts = shell_counts(mmax * mmax)
    r = np.sqrt(values.astype(np.float64))
    terms = counts * np.cos(omega * r) / values
    cum = np.cumsum(terms)
    out = np.empty(mmax + 1)
    out[0] = 2.0
    for m in range(1, mmax + 1):
        idx = np.searchsorted(values, m * m, side="right")
        out[m] = 2.0 - 4.0 * (cum[idx - 1] if idx else 0.0)
    return out


# ---------------------------------------------------------------------------
# LHY integral and ground-state energy


def lhy_integral(a0: float) -> float:
    """(1/(2 (2 pi)^3)) times the integral over R^3 of the Bogoliubov summand at density a0."""
    if a0 < 0:
        raise ValueError("a0 must be nonnegative")
    if a0 == 0:
        return 0.0
    b = 16 * math.pi * a0

    def radial(k):
        # k^2 times the summand tends to b^2/8 at the origin
        return float(bogoliubov_summand(k * k, b)) * k * k if k > 0 else b * b / 8.0

    scale = math.sqrt(b)
    pieces = [0.0, 0.5 * scale, scale, 4 * scale, 16 * scale, 64 * scale]
    total = 0.0
    for lo, hi in zip(pieces[:-1], pieces[1:]):
        val, err = integrate.quad(radial, lo, hi, epsabs=0, epsrel=1e-13, limit=200)
        total += val
    val, err = integrate.quad(radial, pieces[-1], np.inf, epsabs=0, epsrel=1e-12, limit=200)
    total += val
    return 4 * math.pi * total / (2 * (2 * math.pi) ** 3)


@dataclass
class GroundStateEnergy:
    total: float
    leading: float
    box: float
    bogoliubov: float
    e_lambda: SumResult
    e_bog: SumResult

    def to_dict(self):
        return {"total": self.total, "leading": self.leading, "box": self.box,
                "bogoliubov": self.bogoliubov, "e_lambda": self.e_lambda.to_dict(),
                "e_bog": self.e_bog.to_dict()}


def ground_state_energy(a0, N, kappa, pmax=40 * math.pi, Mmax=DEFAULT_MMAX,
                        elambda: SumResult | None = None) -> GroundStateEnergy:
    """4 pi a0 N^kappa (N - 1) + e_Lambda (a0 N^kappa)^2 + E_Bog, with breakdown."""
    el = elambda or e_lambda(Mmax)
    eb = e_bog(a0, N, kappa, pmax)
    g = a0 * float(N) ** kappa
    leading = 4 * math.pi * g * (N - 1)
    box = el.value * g * g
    return GroundStateEnergy(leading + box + eb.value, leading, box, eb.value, el, eb)


# ---------------------------------------------------------------------------
# excitation levels


@dataclass(frozen=True)
class ExcitationLevel:
    """Sum of mode energies for an occupation of the lattice modes.

    ``occupations`` maps integer vectors n (momentum 2 pi n) to positive
    occupation numbers; ``degeneracy_note`` records the multiset of shells.
    """

    nu: float
    occupations: tuple
    degeneracy_note: str = ""

    def recompute(self, a0, N, kappa):
        g = a0 * float(N) ** kappa
        tot = 0.0
        for n, k in self.occupations:
            p2 = TWO_PI ** 2 * float(sum(v * v for v in n))
            tot += k * math.sqrt(p2 * p2 + 16 * math.pi * g * p2)
        return tot

    def serialize(self):
        return ";".join(f"{n[0]},{n[1]},{n[2]}:{k}" for n, k in self.occupations)


class LevelList(list):
    """Sorted levels; ``truncated`` is set when ``max_count`` cut the output."""

    truncated = False
    threshold = 0.0


def excitation_threshold(N, kappa, mu):
    return float(N) ** (kappa / 2.0 + mu)


def _modes_below(a0, N, kappa, threshold):
    g = a0 * float(N) ** kappa
    # eps >= p^2, so all modes with eps <= T have |p| <= sqrt(T)
    pm = math.sqrt(max(threshold, 0.0))
    if pm < TWO_PI:
        return np.zeros((0, 3), dtype=np.int64), np.zeros(0)
    lat = build_lattice(pm)
    p2 = TWO_PI ** 2 * lat.n2.astype(np.float64)
    eps = np.sqrt(p2 * p2 + 16 * math.pi * g * p2)
    keep = eps <= threshold
    n, eps = lat.n[keep], eps[keep]
    order = np.lexsort((n[:, 2], n[:, 1], n[:, 0], eps))
    return n[order], eps[order]


def enumerate_excitations(a0, N, kappa, mu, max_count=200, threshold=None) -> LevelList:
    """All occupation energies sum n_p eps_p not exceeding N^(kappa/2 + mu).

    Best-first search over nondecreasing tuples of mode indices, where
    modes are ordered by energy and then lexicographically. Each tuple has
    two successors (repeat the last mode, or advance it), so energies are
    popped in nondecreasing order. ``threshold`` overrides the default.
    """
    T = excitation_threshold(N, kappa, mu) if threshold is None else float(threshold)
    modes, eps = _modes_below(a0, N, kappa, T)
    out = LevelList()
    out.threshold = T
    heap = [(0.0, ())]
    found = []
    slack = T * (1.0 + 1e-12)
    while heap:
        nu, tup = heapq.heappop(heap)
        if nu > slack:
            break
        found.append((nu, tup))
        if len(found) > max_count:
            out.truncated = True
            break
        if tup:
            last = tup[-1]
            heapq.heappush(heap, (nu + eps[last], tup + (last,)))
            if last + 1 < len(eps):
                heapq.heappush(heap, (nu - eps[last] + eps[last + 1], tup[:-1] + (last + 1,)))
        elif len(eps):
            heapq.heappush(heap, (float(eps[0]), (0,)))
    if out.truncated:
        found = found[:max_count]
    levels = []
    for _, tup in found:
        occ = {}
        for i in tup:
            occ[i] = occ.get(i, 0) + 1
        items = tuple(sorted(((tuple(int(v) for v in modes[i]), k) for i, k in occ.items())))
        nu = math.fsum(k * float(eps[i]) for i, k in occ.items())
        shells = {}
        for n, k in items:
            s = sum(v * v for v in n)
            shells[s] = shells.get(s, 0) + k
        note = ",".join(f"{s}x{k}" for s, k in sorted(shells.items()))
        if nu <= T:
            levels.append(ExcitationLevel(nu, items, note))
    levels.sort(key=lambda lv: (lv.nu, lv.occupations))
    out.extend(levels)
    return out
