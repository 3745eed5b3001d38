"""Exact second-quantised algebra on truncated occupation-number bases.

States are occupation vectors over a finite, negation-closed set of lattice
modes with bounded total occupancy. Operators are real sparse matrices in
that basis. Creation operators drop amplitudes that would leave the cap, so
identities are only exact on states with enough headroom below it.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from itertools import product

import numpy as np
import scipy.sparse as sp

from .potential import ModelParams, Potential

TWO_PI = 2.0 * math.pi
DEFAULT_DIMENSION_CAP = 200_000
DENSE_LIMIT = 3000


class FockError(ValueError):
    """Invalid basis or operator request."""


class DimensionError(FockError):
    """Basis dimension above the configured cap."""


class ConvergenceError(RuntimeError):
    """Iterative eigensolver did not converge within its budget."""


# ---------------------------------------------------------------------------
# basis


def _compositions(total, parts):
    """All length-``parts`` tuples of nonnegative ints summing to ``total``, descending lexicographic."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def basis_dimension(n_modes: int, ncap: int) -> int:
    """Number of occupation vectors with total at most ``ncap``."""
    return math.comb(ncap + n_modes, n_modes)


def shell_modes(shells: int) -> np.ndarray:
    """Integer mode vectors of the first ``shells`` nonempty shells of Z^3 \\ {0}.

    Ordered by |n|^2, then descending lexicographic, so that each vector is
    followed later by its negation within the same shell.
    """
    if shells < 1:
        raise FockError("need at least one shell")
    m = int(math.isqrt(3 * shells * shells)) + 1
    ax = np.arange(-m, m + 1)
    g = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), -1).reshape(-1, 3)
    n2 = np.einsum("ij,ij->i", g, g)
    vals = np.unique(n2[n2 > 0])[:shells]
    keep = np.isin(n2, vals)
    g, n2 = g[keep], n2[keep]
    order = np.lexsort((-g[:, 2], -g[:, 1], -g[:, 0], n2))
    return np.ascontiguousarray(g[order], dtype=np.int64)


@dataclass(frozen=True, eq=False)
class FockBasis:
    """Occupation basis over ``modes`` (integer vectors n, momentum 2 pi n).

    ``states[i]`` is the i-th occupation vector; states are graded by total
    occupancy and descending lexicographic within a grade, so the vacuum is
    index 0.
    """

    modes: np.ndarray
    ncap: int
    Nparam: int
    states: np.ndarray
    _keys: np.ndarray = field(repr=False)
    _order: np.ndarray = field(repr=False)

    @property
    def dimension(self):
        return int(self.states.shape[0])

    @property
    def n_modes(self):
        return int(self.modes.shape[0])

    @property
    def totals(self):
        return self.states.sum(axis=1)

    @property
    def momenta_sq(self):
        return TWO_PI ** 2 * np.einsum("ij,ij->i", self.modes, self.modes).astype(np.float64)

    def mode_index(self, p) -> int:
        """Row of mode ``p`` given as an integer vector."""
        p = np.asarray(p, dtype=np.int64).reshape(3)
        hit = np.nonzero(np.all(self.modes == p, axis=1))[0]
        if hit.size == 0:
            raise FockError(f"mode {tuple(int(v) for v in p)} not in basis")
        return int(hit[0])

    def negation(self) -> np.ndarray:
        """Index of -p for every mode p."""
        return np.array([self.mode_index(-m) for m in self.modes], dtype=np.int64)

    def _encode(self, rows):
        base = self.ncap + 1
        w = base ** np.arange(self.n_modes, dtype=np.int64)
        return rows.astype(np.int64) @ w

    def lookup(self, rows) -> np.ndarray:
        """Indices of occupation vectors ``rows`` (all must be in the basis)."""
        rows = np.atleast_2d(rows)
        if rows.shape[-1] != self.n_modes:
            raise FockError("occupation vector has the wrong length")
        # out-of-range digits would alias onto valid keys
        if np.any(rows < 0) or np.any(rows.sum(axis=1) > self.ncap):
            raise FockError("occupation vector outside the basis")
        keys = self._encode(rows)
        pos = np.searchsorted(self._keys, keys)
        pos = np.minimum(pos, self._keys.size - 1)
        if not np.all(self._keys[pos] == keys):
            raise FockError("occupation vector outside the basis")
        return self._order[pos]

    def index(self, occupation) -> int:
        return int(self.lookup(np.asarray(occupation, dtype=np.int64))[0])

    def spec(self):
        return {"modes": self.modes.tolist(), "ncap": self.ncap, "Nparam": self.Nparam,
                "dimension": self.dimension}


def build_basis(modes, ncap: int, Nparam: int | None = None,
                dimension_cap: int = DEFAULT_DIMENSION_CAP) -> FockBasis:
    """Occupation basis with total occupancy at most ``ncap``.

    Parameters
    ----------
    modes : array_like of shape (m, 3)
        Integer lattice vectors, nonzero, distinct and closed under negation.
    ncap : int
        Total occupancy cap.
    Nparam : int, optional
        Particle number used by the b-operators; defaults to ``ncap``.
    """
    modes = np.asarray(modes, dtype=np.int64).reshape(-1, 3)
    if modes.shape[0] == 0:
        raise FockError("mode set is empty")
    if np.any(np.all(modes == 0, axis=1)):
        raise FockError("the zero momentum is not an excitation mode")
    as_set = {tuple(m) for m in modes.tolist()}
    if len(as_set) != modes.shape[0]:
        raise FockError("duplicate modes")
    if any(tuple(-v for v in m) not in as_set for m in as_set):
        raise FockError("mode set is not closed under negation")
    ncap = int(ncap)
    if ncap < 0:
        raise FockError("ncap must be nonnegative")
    Nparam = ncap if Nparam is None else int(Nparam)
    if Nparam < ncap or Nparam < 1:
        raise FockError("Nparam must be at least ncap (and positive)")
    m = modes.shape[0]
    dim = basis_dimension(m, ncap)
    if dim > dimension_cap:
        raise DimensionError(f"basis dimension {dim} exceeds cap {dimension_cap}")
    if (ncap + 1) ** m >= 2 ** 62:
        raise DimensionError("too many modes for the occupation encoding")
    states = np.empty((dim, m), dtype=np.int64)
    i = 0
    for t in range(ncap + 1):
        for c in _compositions(t, m):
            states[i] = c
            i += 1
    w = (ncap + 1) ** np.arange(m, dtype=np.int64)
    keys = states @ w
    order = np.argsort(keys, kind="stable")
    for a in (modes, states):
        a.setflags(write=False)
    return FockBasis(modes, ncap, Nparam, states, keys[order], order)


# ---------------------------------------------------------------------------
# operators


@dataclass(frozen=True, eq=False)
class SparseOperator:
    """Real operator in canonical CSR form (sorted indices, no duplicates)."""

    matrix: sp.csr_matrix
    symmetric: bool = False

    @classmethod
    def from_coo(cls, rows, cols, vals, dim, symmetric=False):
        m = sp.coo_matrix((vals, (rows, cols)), shape=(dim, dim)).tocsr()
        m.sum_duplicates()
        m.sort_indices()
        m.eliminate_zeros()
        return cls(m, symmetric)

    @classmethod
    def wrap(cls, m, symmetric=False):
        m = sp.csr_matrix(m)
        m.sum_duplicates()
        m.sort_indices()
        m.eliminate_zeros()
        return cls(m, symmetric)

    @property
    def dimension(self):
        return int(self.matrix.shape[0])

    @property
    def nnz(self):
        return int(self.matrix.nnz)

    @property
    def T(self):
        return SparseOperator.wrap(self.matrix.T, self.symmetric)

    def __matmul__(self, other):
        if isinstance(other, SparseOperator):
            return SparseOperator.wrap(self.matrix @ other.matrix)
        return self.matrix @ other

    def __add__(self, other):
        return SparseOperator.wrap(self.matrix + other.matrix, self.symmetric and other.symmetric)

    def __sub__(self, other):
        return SparseOperator.wrap(self.matrix - other.matrix, self.symmetric and other.symmetric)

    def __mul__(self, c):
        return SparseOperator.wrap(self.matrix * float(c), self.symmetric)

    __rmul__ = __mul__

    def dense(self):
        return self.matrix.toarray()

    def entries(self):
        """(row, col, value) arrays in canonical row-major order."""
        c = self.matrix.tocoo()
        order = np.lexsort((c.col, c.row))
        return c.row[order].astype(np.int64), c.col[order].astype(np.int64), c.data[order]

    def is_symmetric(self) -> bool:
        """Exact entry-for-entry equality with the transpose."""
        d = self.matrix - self.matrix.T
        return d.count_nonzero() == 0

    def restrict(self, rows_mask, cols_mask=None):
        cols_mask = rows_mask if cols_mask is None else cols_mask
        return self.matrix[np.nonzero(rows_mask)[0]][:, np.nonzero(cols_mask)[0]]

    def dump(self, path):
        """Binary coordinate dump: int64 dimension, int64 count, then (int64, int64, float64) records."""
        r, c, v = self.entries()
        rec = np.empty(r.size, dtype=[("row", "<i8"), ("col", "<i8"), ("val", "<f8")])
        rec["row"], rec["col"], rec["val"] = r, c, v
        with open(path, "wb") as fh:
            fh.write(struct.pack("<qq", self.dimension, r.size))
            fh.write(rec.tobytes())

    @classmethod
    def load(cls, path, symmetric=False):
        with open(path, "rb") as fh:
            dim, nnz = struct.unpack("<qq", fh.read(16))
            rec = np.frombuffer(fh.read(), dtype=[("row", "<i8"), ("col", "<i8"), ("val", "<f8")], count=nnz)
        return cls.from_coo(rec["row"], rec["col"], rec["val"], dim, symmetric)


def _symmetrize(m):
    return SparseOperator.wrap(0.5 * (m + m.T), symmetric=True)


def op_a(basis: FockBasis, p) -> SparseOperator:
    """Annihilation operator a_p (p given as integer mode vector or mode row index)."""
    k = p if isinstance(p, (int, np.integer)) else basis.mode_index(p)
    occ = basis.states[:, k]
    cols = np.nonzero(occ > 0)[0]
    lowered = basis.states[cols].copy()
    lowered[:, k] -= 1
    rows = basis.lookup(lowered)
    return SparseOperator.from_coo(rows, cols, np.sqrt(occ[cols].astype(np.float64)), basis.dimension)


def op_adag(basis: FockBasis, p) -> SparseOperator:
    """Creation operator; amplitudes leaving the cap are dropped."""
    return op_a(basis, p).T


def number_op(basis: FockBasis) -> SparseOperator:
    tot = basis.totals.astype(np.float64)
    return SparseOperator.wrap(sp.diags(tot), symmetric=True)


def _b_factor(basis):
    return np.sqrt((basis.Nparam - basis.totals.astype(np.float64)) / basis.Nparam)


def op_b(basis: FockBasis, p) -> SparseOperator:
    """b_p = sqrt((N - N_+)/N) a_p, the multiplier acting after annihilation."""
    return SparseOperator.wrap(sp.diags(_b_factor(basis)) @ op_a(basis, p).matrix)


def op_bdag(basis: FockBasis, p) -> SparseOperator:
    return op_b(basis, p).T


def _commutator(x, y):
    return x.matrix @ y.matrix - y.matrix @ x.matrix


def _max_abs(m):
    m = sp.csr_matrix(m)
    return float(np.max(np.abs(m.data))) if m.nnz else 0.0


def ccr_check(basis: FockBasis, p, q) -> dict:
    """Deviations from the approximate CCR of the b-operators.

    Returns maximum absolute matrix-element deviations of
    [b_p, b_q^*] - (delta_pq (1 - N_+/N) - a_q^* a_p / N),
    [b_p, b_q] and [b_p^*, b_q^*], each restricted to states far enough
    below the cap that no intermediate state is truncated.
    """
    kp = p if isinstance(p, (int, np.integer)) else basis.mode_index(p)
    kq = q if isinstance(q, (int, np.integer)) else basis.mode_index(q)
    N = float(basis.Nparam)
    tot = basis.totals
    bp, bq = op_b(basis, kp), op_b(basis, kq)
    bqd = bq.T
    ap, aqd = op_a(basis, kp), op_adag(basis, kq)
    rhs = -(aqd.matrix @ ap.matrix) / N
    if kp == kq:
        rhs = rhs + sp.diags(1.0 - tot / N)
    one = SparseOperator.wrap(_commutator(bp, bqd) - rhs)
    head1 = tot <= basis.ncap - 1
    dev_mixed = _max_abs(one.restrict(head1))
    dev_bb = _max_abs(SparseOperator.wrap(_commutator(bp, bq)).restrict(np.ones_like(head1)))
    head2 = tot <= basis.ncap - 2
    dev_bdbd = _max_abs(SparseOperator.wrap(_commutator(bp.T, bqd)).restrict(np.ones_like(head1), head2))
    return {"b_bdag": dev_mixed, "b_b": dev_bb, "bdag_bdag": dev_bdbd}


def ccr_check_all(basis: FockBasis) -> dict:
    """Maximum of every ccr_check deviation over all ordered mode pairs."""
    worst = {"b_bdag": 0.0, "b_b": 0.0, "bdag_bdag": 0.0}
    for i, j in product(range(basis.n_modes), repeat=2):
        d = ccr_check(basis, i, j)
        for k in worst:
            worst[k] = max(worst[k], d[k])
    return worst


def kinetic_op(basis: FockBasis) -> SparseOperator:
    """K = sum_p p^2 a_p^* a_p (diagonal)."""
    diag = basis.states.astype(np.float64) @ basis.momenta_sq
    return SparseOperator.wrap(sp.diags(diag), symmetric=True)


def _pair_table(basis):
    """Ordered mode pairs (k1, k2) grouped by total integer momentum."""
    groups = {}
    m = basis.modes
    for i in range(basis.n_modes):
        for j in range(basis.n_modes):
            groups.setdefault(tuple((m[i] + m[j]).tolist()), []).append((i, j))
    return groups


def _annihilate_pair(states, i, j):
    """Amplitude and result of a_i a_j on every state (a_j acts first)."""
    nj = states[:, j].astype(np.float64)
    ni = states[:, i].astype(np.float64) - (1.0 if i == j else 0.0)
    amp = np.sqrt(np.clip(nj, 0, None)) * np.sqrt(np.clip(ni, 0, None))
    out = states.copy()
    out[:, j] -= 1
    out[:, i] -= 1
    return amp, out


def potential_op(basis: FockBasis, pot: Potential, params: ModelParams) -> SparseOperator:
    """V_N = (N^kappa / 2N) sum V^(r / N^(1-kappa)) a_{p+r}^* a_q^* a_p a_{q+r}.

    All four momenta are restricted to the mode set, which is equivalent to
    summing over index quadruples with k1 + k2 = k3 + k4.
    """
    pref = params.nk / (2.0 * float(params.N))
    s = params.scale
    rows, cols, vals = [], [], []
    states = basis.states
    for _, pairs in sorted(_pair_table(basis).items()):
        ann = []
        for (k3, k4) in pairs:
            amp, low = _annihilate_pair(states, k3, k4)
            live = np.nonzero(amp > 0)[0]
            ann.append((k3, k4, live, amp[live], low[live]))
        for (k1, k2) in pairs:
            for (k3, k4, live, amp, low) in ann:
                if live.size == 0:
                    continue
                r = basis.modes[k1] - basis.modes[k3]
                coef = float(pot.fourier(np.array([TWO_PI * math.sqrt(float(r @ r)) / s]))[0])
                if coef == 0.0:
                    continue
                # a_{k1}^* a_{k2}^*: creation amplitudes on the lowered state (k2 acts first)
                c2 = low[:, k2].astype(np.float64) + 1.0
                c1 = low[:, k1].astype(np.float64) + 1.0 + (1.0 if k1 == k2 else 0.0)
                new = low.copy()
                new[:, k2] += 1
                new[:, k1] += 1
                rows.append(basis.lookup(new))
                cols.append(live)
                vals.append(pref * coef * amp * np.sqrt(c1 * c2))
    dim = basis.dimension
    if not rows:
        return SparseOperator.wrap(sp.csr_matrix((dim, dim)), symmetric=True)
    m = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(dim, dim)).tocsr()
    return _symmetrize(m)


def quadratic_hamiltonian(basis: FockBasis, F, G) -> SparseOperator:
    """H = sum_p [F_p a_p^* a_p + G_p/2 (a_p^* a_{-p}^* + a_p a_{-p})].

    ``F`` and ``G`` are arrays aligned with ``basis.modes``.
    """
    F = np.asarray(F, dtype=np.float64).reshape(-1)
    G = np.asarray(G, dtype=np.float64).reshape(-1)
    if F.size != basis.n_modes or G.size != basis.n_modes:
        raise FockError("F and G must have one entry per mode")
    neg = basis.negation()
    if not (np.array_equal(F, F[neg]) and np.array_equal(G, G[neg])):
        raise FockError("F and G must be symmetric under p -> -p")
    if np.any(np.abs(G) >= F):
        raise FockError("Bogoliubov stability |G_p| < F_p violated")
    dim = basis.dimension
    m = sp.diags(basis.states.astype(np.float64) @ F).tocsr()
    for k in range(basis.n_modes):
        if G[k] == 0.0:
            continue
        a1, a2 = op_a(basis, k).matrix, op_a(basis, int(neg[k])).matrix
        ann = a1 @ a2
        m = m + 0.5 * G[k] * (ann + ann.T)
    return _symmetrize(sp.csr_matrix(m, shape=(dim, dim)))


# ---------------------------------------------------------------------------
# eigenvalues


def _block_lanczos(matvec, dim, k, block, max_basis, tol, seed=0):
    rng = np.random.default_rng(seed)
    X = np.empty((dim, block))
    X[:, 0] = 1.0 / math.sqrt(dim)
    if block > 1:
        X[:, 1:] = rng.standard_normal((dim, block - 1))
    Q, _ = np.linalg.qr(X)
    basis = [Q]
    T_blocks = []
    prev_B = None
    Qprev = None
    anorm = 0.0
    ritz = None
    while True:
        Wm = matvec(Q)
        A = Q.T @ Wm
        A = 0.5 * (A + A.T)
        Wm = Wm - Q @ A
        if Qprev is not None:
            Wm = Wm - Qprev @ prev_B.T
        V = np.hstack(basis)
        for _ in range(2):
            Wm = Wm - V @ (V.T @ Wm)
        Qn, B = np.linalg.qr(Wm)
        anorm = max(anorm, float(np.max(np.abs(A))), 1e-300)
        bad = np.abs(np.diag(B)) < 1e-10 * anorm
        if np.any(bad):
            # deflated directions: decouple them and continue with fresh vectors
            B[bad, :] = 0.0
            good = Qn[:, ~bad]
            for i in np.nonzero(bad)[0]:
                x = rng.standard_normal(dim)
                for _ in range(2):
                    x -= V @ (V.T @ x)
                    x -= good @ (good.T @ x)
                x /= np.linalg.norm(x)
                Qn[:, i] = x
                good = np.column_stack([good, x])
        T_blocks.append((A, B))
        m = len(T_blocks) * block
        T = np.zeros((m, m))
        for i, (Ai, Bi) in enumerate(T_blocks):
            sl = slice(i * block, (i + 1) * block)
            T[sl, sl] = Ai
            if i + 1 < len(T_blocks):
                nx = slice((i + 1) * block, (i + 2) * block)
                T[nx, sl] = Bi
                T[sl, nx] = Bi.T
        evals, evecs = np.linalg.eigh(T)
        kk = min(k, m)
        res = np.linalg.norm(B @ evecs[-block:, :kk], axis=0)
        scale = max(1.0, float(np.max(np.abs(evals))))
        exhausted = m + block > dim
        if evals.size >= k and np.all(res < tol * scale):
            return evals[:k]
        if exhausted:
            if evals.size >= k:
                return evals[:k]
            raise ConvergenceError("Krylov space exhausted before k eigenvalues were found")
        if m + block > max_basis:
            raise ConvergenceError(f"Lanczos did not converge within a basis of {max_basis} vectors")
        ritz = evals
        Qprev, prev_B, Q = Q, B, Qn
        basis.append(Q)
    return ritz


def diagonalize(opr, k: int, method: str = "auto", tol: float = 1e-12,
                max_basis: int = 600, block: int | None = None) -> np.ndarray:
    """The ``k`` lowest eigenvalues of a symmetric operator, ascending.

    ``method`` is ``"dense"``, ``"lanczos"`` or ``"auto"`` (dense below
    dimension 3000). The iterative path is a block Lanczos with full
    reorthogonalisation whose first start vector is the normalised all-ones
    vector; the other block columns come from a fixed-seed generator so that
    degenerate levels are resolved and results are reproducible.
    """
    if isinstance(opr, SparseOperator):
        mat = opr.matrix
    else:
        mat = opr
    dim = mat.shape[0]
    if k < 1 or k > dim:
        raise FockError(f"k must be in [1, {dim}]")
    if method == "auto":
        method = "dense" if dim < DENSE_LIMIT else "lanczos"
    if method == "dense":
        d = mat.toarray() if sp.issparse(mat) else np.asarray(mat, dtype=np.float64)
        return np.linalg.eigvalsh(d)[:k]
    if method != "lanczos":
        raise FockError(f"unknown method {method!r}")
    b = block or min(max(k, 4), 16, dim)
    return _block_lanczos(lambda X: mat @ X, dim, k, b, min(max_basis, dim), tol)


# ---------------------------------------------------------------------------
# checks


@dataclass
class BogoliubovReport:
    ncap: int
    exact: np.ndarray
    analytic: np.ndarray

    @property
    def gaps(self):
        return np.abs(self.exact - self.analytic)

    @property
    def max_gap(self):
        return float(np.max(self.gaps))

    def to_dict(self):
        return {"ncap": self.ncap, "exact": self.exact.tolist(), "analytic": self.analytic.tolist(),
                "gaps": self.gaps.tolist(), "max_gap": self.max_gap}


def bogoliubov_levels(basis: FockBasis, F, G, k: int) -> np.ndarray:
    """Lowest ``k`` values of -1/2 sum (F - e) + sum n_p e_p, e = sqrt(F^2 - G^2)."""
    F = np.asarray(F, dtype=np.float64)
    G = np.asarray(G, dtype=np.float64)
    e = np.sqrt((F - G) * (F + G))
    shift = -0.5 * math.fsum(F - e)
    levels = shift + basis.states.astype(np.float64) @ e
    return np.sort(levels)[:k]


def bogoliubov_check(basis: FockBasis, F, G, k: int) -> BogoliubovReport:
    H = quadratic_hamiltonian(basis, F, G)
    exact = diagonalize(H, k)
    return BogoliubovReport(basis.ncap, exact, bogoliubov_levels(basis, F, G, k))


def bogoliubov_sweep(modes, F, G, ncaps, k: int) -> list:
    """bogoliubov_check over increasing caps on the same mode set."""
    out = []
    for nc in ncaps:
        out.append(bogoliubov_check(build_basis(modes, nc), F, G, k))
    return out


def vn_kn_constant(basis: FockBasis, pot: Potential, params: ModelParams,
                   V: SparseOperator | None = None) -> float:
    """Smallest C with C K N_+ - V_N positive semidefinite on the basis.

    K N_+ is diagonal in the occupation basis and vanishes only on the
    vacuum, where V_N also vanishes; the problem reduces to the largest
    eigenvalue of D^(-1/2) V_N D^(-1/2) on the remaining states.
    """
    V = V if V is not None else potential_op(basis, pot, params)
    d = (basis.states.astype(np.float64) @ basis.momenta_sq) * basis.totals
    live = d > 0
    if not np.any(live):
        raise FockError("basis has no state with positive occupancy")
    Vl = V.matrix[np.nonzero(live)[0]][:, np.nonzero(live)[0]]
    if Vl.nnz == 0:
        return 0.0
    s = 1.0 / np.sqrt(d[live])
    M = sp.diags(s) @ Vl @ sp.diags(s)
    M = 0.5 * (M + M.T)
    top = -diagonalize(-M, 1)[0]
    return max(0.0, float(top))


def theta_state(basis: FockBasis, occupations) -> np.ndarray:
    """Normalised product state prod_p (a_p^*)^{n_p} |0>.

    ``occupations`` maps mode vectors (tuples) or mode rows to counts, or is
    a full occupation vector aligned with ``basis.modes``.
    """
    if isinstance(occupations, dict):
        occ = np.zeros(basis.n_modes, dtype=np.int64)
        for key, n in occupations.items():
            k = key if isinstance(key, (int, np.integer)) else basis.mode_index(key)
            occ[k] += int(n)
    else:
        occ = np.asarray(occupations, dtype=np.int64).reshape(-1)
        if occ.size != basis.n_modes:
            raise FockError("occupation vector has the wrong length")
    if np.any(occ < 0):
        raise FockError("negative occupation")
    if occ.sum() > basis.ncap:
        raise FockError("occupation exceeds the basis cap")
    v = np.zeros(basis.dimension)
    v[0] = 1.0
    for k in range(basis.n_modes):
        if occ[k]:
            ad = op_adag(basis, k).matrix
            for _ in range(int(occ[k])):
                v = ad @ v
    return v / np.linalg.norm(v)


def vn_expectation(basis: FockBasis, state, V: SparseOperator) -> float:
    state = np.asarray(state, dtype=np.float64)
    return float(state @ (V.matrix @ state))


def unoccupied_annihilation(basis: FockBasis, state) -> float:
    """max_p ||a_p state|| over modes carrying no weight in ``state``."""
    state = np.asarray(state, dtype=np.float64)
    support = np.abs(state) > 0
    worst = 0.0
    for k in range(basis.n_modes):
        if np.any(basis.states[support, k] > 0):
            continue
        worst = max(worst, float(np.linalg.norm(op_a(basis, k).matrix @ state)))
    return worst
