"""Momentum lattice 2 pi Z^3 and radial lattice sums."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import erfc

TWO_PI = 2.0 * math.pi
DEFAULT_POINT_LIMIT = 4_000_000


class LatticeSizeError(MemoryError):
    """Requested lattice exceeds the configured point budget."""


@dataclass(frozen=True, eq=False)
class MomentumLattice:
    """Nonzero points of 2 pi Z^3 inside a closed ball.

    Points are ordered by |n|^2 and then lexicographically in n. ``shell_n2``
    lists the distinct |n|^2 values and ``shell_start`` the offset of each
    shell in the point arrays (with a final sentinel).
    """

    pmax: float
    n: np.ndarray
    n2: np.ndarray
    shell_n2: np.ndarray
    shell_start: np.ndarray

    @property
    def points(self):
        return TWO_PI * self.n

    @property
    def norms(self):
        return TWO_PI * np.sqrt(self.n2.astype(np.float64))

    @property
    def shell_norms(self):
        return TWO_PI * np.sqrt(self.shell_n2.astype(np.float64))

    @property
    def multiplicities(self):
        return np.diff(self.shell_start)

    @property
    def shell_index(self):
        """Shell number of every point."""
        return np.repeat(np.arange(self.shell_n2.size), self.multiplicities)

    def __len__(self):
        return int(self.n.shape[0])

    def high(self, N, alpha):
        """Mask of P_H = {|p| >= N^alpha}."""
        return self.norms >= float(N) ** alpha

    def low(self, N, beta):
        """Mask of P_L = {|p| < N^beta}."""
        return self.norms < float(N) ** beta

    def index_of(self, n):
        """Row of integer vector ``n`` (raises KeyError if absent)."""
        n = tuple(int(v) for v in n)
        n2 = sum(v * v for v in n)
        s = int(np.searchsorted(self.shell_n2, n2))
        if s >= self.shell_n2.size or self.shell_n2[s] != n2:
            raise KeyError(n)
        lo, hi = self.shell_start[s], self.shell_start[s + 1]
        block = self.n[lo:hi]
        hit = np.nonzero(np.all(block == np.array(n), axis=1))[0]
        if hit.size == 0:
            raise KeyError(n)
        return int(lo + hit[0])


def _n2_limit(pmax):
    x = (pmax / TWO_PI) ** 2
    # tolerate rounding when pmax is given as 2 pi sqrt(m)
    return int(math.floor(x + 1e-9 * max(1.0, x)))


def build_lattice(pmax: float, max_points: int = DEFAULT_POINT_LIMIT) -> MomentumLattice:
    """All points of 2 pi Z^3 minus the origin with |p| <= pmax.

    >>> len(build_lattice(2 * math.pi))
    6
    """
    if not math.isfinite(pmax) or pmax < TWO_PI * (1 - 1e-12):
        raise ValueError(f"pmax must be at least 2 pi, got {pmax}")
    n2max = _n2_limit(pmax)
    m = int(math.isqrt(n2max))
    est = 4.19 * (m + 1) ** 3
    if est > 4 * max_points:
        raise LatticeSizeError(f"about {int(est)} lattice points exceed the limit {max_points}")
    ax = np.arange(-m, m + 1, dtype=np.int64)
    g = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1).reshape(-1, 3)
    n2 = np.einsum("ij,ij->i", g, g)
    keep = (n2 > 0) & (n2 <= n2max)
    g, n2 = g[keep], n2[keep]
    if g.shape[0] > max_points:
        raise LatticeSizeError(f"{g.shape[0]} lattice points exceed the limit {max_points}")
    order = np.lexsort((g[:, 2], g[:, 1], g[:, 0], n2))
    g, n2 = g[order], n2[order]
    shell_n2, start = np.unique(n2, return_index=True)
    shell_start = np.append(start, n2.size).astype(np.int64)
    for a in (g, n2, shell_n2, shell_start):
        a.setflags(write=False)
    return MomentumLattice(float(pmax), g, n2, shell_n2, shell_start)


@lru_cache(maxsize=8)
def shell_counts(n2max: int):
    """Distinct values 0 < |n|^2 <= n2max and their representation counts."""
    m = int(math.isqrt(n2max))
    ax = np.arange(-m, m + 1, dtype=np.int64) ** 2
    counts = np.zeros(n2max + 1, dtype=np.int64)
    # accumulate plane by plane to bound memory
    yz = (ax[:, None] + ax[None, :]).ravel()
    yz = yz[yz <= n2max]
    for x2 in ax:
        tot = yz + x2
        tot = tot[tot <= n2max]
        counts += np.bincount(tot, minlength=n2max + 1)
    values = np.nonzero(counts)[0]
    values = values[values > 0]
    out = (values, counts[values])
    for a in out:
        a.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# smooth-window radial sums over 2 pi Z^3 \ {0}


@dataclass(frozen=True)
class Window:
    """Smooth partition chi(k) = erfc((k - center)/width)/2 splitting a sum.

    The lattice part carries chi, the remainder (1 - chi) is integrated.
    """

    center: float
    width: float

    @property
    def kmax(self):
        return self.center + 7.0 * self.width

    def inside(self, k):
        return 0.5 * erfc((np.asarray(k) - self.center) / self.width)

    def outside(self, k):
        return 0.5 * erfc((self.center - np.asarray(k)) / self.width)


def window_for(ell: float, minimum_center: float = 0.0) -> Window:
    """Window wide enough that aliasing from images of B_{2 ell} is negligible."""
    width = max(40.0, 20.0 / max(1e-3, 1.0 - 2.0 * ell))
    center = max(6.0 * width, minimum_center)
    return Window(center, width)


def k_nodes(kmin: float, kmax: float, oscillation: float = 8.0, ratio: float = 1.08,
            switch: float = 2000.0, order: int = 8):
    """Composite Gauss-Legendre nodes and weights on [kmin, kmax].

    Uniform panels of width ``oscillation`` up to ``switch`` and geometric
    panels beyond.
    """
    edges = [kmin]
    k = kmin
    while k < min(switch, kmax):
        k = min(k + oscillation, kmax)
        edges.append(k)
    while k < kmax:
        k = min(max(k * ratio, k + oscillation), kmax)
        edges.append(k)
    edges = np.array(edges)
    x, w = np.polynomial.legendre.leggauss(order)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = (0.5 * (b - a) * x + 0.5 * (b + a)).ravel()
    weights = (0.5 * (b - a) * w).ravel()
    return nodes, weights


@dataclass
class RadialSum:
    """Split of a radial lattice sum into lattice and integral parts."""

    lattice_part: float
    integral_part: float

    @property
    def value(self):
        return self.lattice_part + self.integral_part


def radial_lattice_sum(g, window: Window, kmax_integral: float, kmin_integral: float | None = None,
                       integral_nodes=None) -> RadialSum:
    """Sum of g(|p|) over 2 pi Z^3 \\ {0} for a smooth, decaying radial g.

    ``g`` is a vectorised callable of |p|. The lattice part sums chi*g over
    shells up to the window edge; the remainder (1-chi)*g is integrated
    radially, (1/2 pi^2) int (1-chi) g k^2 dk.
    """
    n2max = _n2_limit(window.kmax)
    values, counts = shell_counts(n2max)
    k = TWO_PI * np.sqrt(values.astype(np.float64))
    lat = float(np.dot(counts * window.inside(k), g(k)))
    if integral_nodes is None:
        kmin = kmin_integral if kmin_integral is not None else max(0.0, window.center - 7.0 * window.width)
        integral_nodes = k_nodes(kmin, kmax_integral)
    kn, wn = integral_nodes
    integ = float(np.dot(wn * window.outside(kn) * kn * kn, g(kn))) / (2.0 * math.pi ** 2)
    return RadialSum(lat, integ)
