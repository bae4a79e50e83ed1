"""Exact diagonalization of pseudo-potential Hamiltonians on fixed-momentum
lowest-Landau-level sectors.

Orbitals phi_m(z) = c_m z^m exp(-B|z|^2/4) with <phi_m|phi_m> = 1 and B = 1
throughout (projector spectra do not depend on B).  Basis states are orbital
multisets at fixed particle number N and total momentum L.  The m-th
pseudo-potential Hamiltonian sums, over pairs, the projector onto relative
momentum m; it is assembled in factorized form H = sum_M W_M^T W_M where W_M
annihilates a normalized pair with orbital sum M into the (N-2)-particle
basis, weighted by the pair's amplitude on the relative orbital m.
"""

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import permutations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DENSE_CAP = 2000
DIM_GUARD = 10_000_000

# The zero-range (delta) model acts by midpoint substitution with this
# prefactor; it equals PROJECTOR_TO_DELTA times the m = 0 projector sum.
PROJECTOR_TO_DELTA = 1.0 / (2.0 * math.pi)


class NonConvergenceError(RuntimeError):
    pass


@lru_cache(maxsize=None)
def partition_count(n, max_parts, max_part=None):
    """Partitions of n into at most max_parts parts, each <= max_part."""
    if n == 0:
        return 1
    if n < 0 or max_parts == 0:
        return 0
    if max_part is None:
        max_part = n
    total = 0
    for first in range(min(n, max_part), 0, -1):
        total += partition_count(n - first, max_parts - 1, first)
    return total


@dataclass(frozen=True)
class MomentumSector:
    N: int
    L: int
    statistics: str  # "bosonic" | "fermionic"
    m_max: int = None  # highest orbital; defaults to L

    def __post_init__(self):
        if self.statistics not in ("bosonic", "fermionic"):
            raise ValueError(f"unknown statistics {self.statistics!r}")
        if self.N < 1 or self.L < 0:
            raise ValueError("need N >= 1 and L >= 0")
        if self.statistics == "fermionic" and self.L < self.N * (self.N - 1) // 2:
            raise ValueError(
                f"fermionic sector needs L >= N(N-1)/2 = {self.N * (self.N - 1) // 2}")
        if self.m_max is None:
            object.__setattr__(self, "m_max", self.L)

    @property
    def l_min(self):
        return 0 if self.statistics == "bosonic" else self.N * (self.N - 1) // 2

    def dimension(self):
        if self.statistics == "bosonic":
            return partition_count(self.L, self.N, self.m_max)
        # strictly decreasing orbitals <-> partition after removing the staircase
        excess = self.L - self.l_min
        return partition_count(excess, self.N, self.m_max - (self.N - 1)) \
            if self.m_max - (self.N - 1) >= 0 or excess == 0 else 0


@lru_cache(maxsize=None)
def _states(n, total, m_max, fermionic):
    """Ascending orbital tuples of length n summing to total, orbitals <= m_max."""
    if n == 0:
        return ((),) if total == 0 else ()
    out = []

    def rec(remaining_n, remaining_total, lo, prefix):
        if remaining_n == 0:
            if remaining_total == 0:
                out.append(prefix)
            return
        # feasibility pruning
        min_sum = lo * remaining_n + (remaining_n * (remaining_n - 1) // 2 if fermionic else 0)
        if remaining_total < min_sum:
            return
        hi = min(m_max, remaining_total)
        for v in range(lo, hi + 1):
            rec(remaining_n - 1, remaining_total - v, v + 1 if fermionic else v,
                prefix + (v,))

    rec(n, total, 0, ())
    return tuple(out)


def enumerate_basis(sector):
    """Complete ordered basis of orbital tuples (ascending within a state)."""
    expected = sector.dimension()
    if expected > DIM_GUARD:
        raise ValueError(f"sector dimension {expected} exceeds guard {DIM_GUARD}")
    states = _states(sector.N, sector.L, sector.m_max,
                     sector.statistics == "fermionic")
    if len(states) != expected:
        raise AssertionError("basis enumeration disagrees with partition count")
    return states


@lru_cache(maxsize=None)
def _basis_index(n, total, m_max, fermionic):
    states = _states(n, total, m_max, fermionic)
    return {s: i for i, s in enumerate(states)}


def occupations(state, m_max):
    occ = np.zeros(m_max + 1, dtype=np.int64)
    for q in state:
        occ[q] += 1
    return occ


@lru_cache(maxsize=None)
def _u_coeff(p, q, m):
    """Product-state amplitude of |p, q> on |relative m, center-of-mass M - m>
    under z_r = (z1 - z2)/sqrt(2), z_R = (z1 + z2)/sqrt(2)."""
    big_m = p + q
    if m < 0 or m > big_m:
        return 0.0
    mc = big_m - m
    s = 0
    for a in range(0, min(p, mc) + 1):
        b = mc - a
        if 0 <= b <= q:
            s += math.comb(p, a) * math.comb(q, b) * (-1) ** (q - b)
    if s == 0:
        return 0.0
    ratio = Fraction(math.factorial(m) * math.factorial(mc),
                     math.factorial(p) * math.factorial(q) * 2 ** big_m)
    return s * math.sqrt(float(ratio))


def pair_amplitude(m, p, q, statistics):
    """Amplitude of the normalized (anti)symmetrized orbital pair (p, q),
    p <= q, on relative momentum m.  Vanishes for odd m (bosons) / even m
    (fermions); exchanging the pair flips the relative orbital by (-1)^m."""
    if statistics == "bosonic":
        if m % 2 == 1:
            return 0.0
        return _u_coeff(p, q, m) * 2.0 / math.sqrt(2.0 * (2.0 if p == q else 1.0))
    if p == q or m % 2 == 0:
        return 0.0
    return _u_coeff(p, q, m) * math.sqrt(2.0)


def two_body_element(m, pair_in, pair_out, statistics):
    """Matrix element of the relative-momentum-m projector between normalized
    (anti)symmetrized orbital pairs; zero unless the orbital sums agree."""
    p1, p2 = sorted(pair_in)
    q1, q2 = sorted(pair_out)
    if p1 + p2 != q1 + q2:
        return 0.0
    return pair_amplitude(m, q1, q2, statistics) * pair_amplitude(m, p1, p2, statistics)


@dataclass
class SparseOperator:
    """H = factor^T factor, kept in factorized form; the pair-annihilation
    factor is far sparser than H itself on large sectors."""

    sector: MomentumSector
    m: int
    factor: sp.csr_matrix  # (sum of reduced dims, dim)
    _matrix: sp.csr_matrix = None

    @property
    def dimension(self):
        return self.factor.shape[1]

    @property
    def matrix(self):
        """Explicit symmetric csr matrix (materialized on first use)."""
        if self._matrix is None:
            self._matrix = (self.factor.T @ self.factor).tocsr()
        return self._matrix

    def matvec(self, v):
        return self.factor.T @ (self.factor @ v)

    def linear_operator(self):
        return spla.LinearOperator((self.dimension, self.dimension),
                                   matvec=self.matvec, dtype=float)

    @property
    def norm_bound(self):
        """Sum of N(N-1)/2 projectors."""
        return self.sector.N * (self.sector.N - 1) / 2.0


def _remove_pair(state, p, q, fermionic):
    """(reduced state, amplitude) after annihilating the normalized pair (p, q)."""
    lst = list(state)
    ip = lst.index(p)
    lst.pop(ip)
    iq = lst.index(q)
    lst.pop(iq)
    if fermionic:
        amp = (-1.0) ** (ip + iq)
    else:
        np_ = state.count(p)
        if p == q:
            amp = math.sqrt(np_ * (np_ - 1)) / math.sqrt(2.0)
        else:
            amp = math.sqrt(np_ * state.count(q))
    return tuple(lst), amp


def build_hamiltonian(sector, m):
    """Sparse matrix of sum_{i<j} (projector onto relative momentum m)_{ij}.

    A parity mismatch between m and the statistics gives the zero operator
    (with a warning): only even (odd) m act on bosons (fermions).
    """
    basis = enumerate_basis(sector)
    dim = len(basis)
    odd = m % 2 == 1
    if (sector.statistics == "bosonic") == odd:
        warnings.warn(f"pseudo-potential m={m} acts trivially on "
                      f"{sector.statistics} states; returning the zero operator")
        return SparseOperator(sector, m, sp.csr_matrix((0, dim)))
    fermionic = sector.statistics == "fermionic"
    if sector.N < 2 or dim == 0:
        return SparseOperator(sector, m, sp.csr_matrix((0, dim)))

    # one pass over states; contributions bucketed by the pair orbital sum M,
    # where each bucket row space is the (N-2)-particle basis at L - M
    amp_cache = {}
    ridx_cache = {}
    buckets = {}
    for ci, state in enumerate(basis):
        seen = set()
        for a_i in range(sector.N):
            for b_i in range(a_i + 1, sector.N):
                pq = (state[a_i], state[b_i])
                if pq in seen:
                    continue
                seen.add(pq)
                s_amp = amp_cache.get(pq)
                if s_amp is None:
                    s_amp = amp_cache.setdefault(
                        pq, pair_amplitude(m, pq[0], pq[1], sector.statistics))
                if s_amp == 0.0:
                    continue
                big_m = pq[0] + pq[1]
                ridx = ridx_cache.get(big_m)
                if ridx is None:
                    red_mmax = min(sector.m_max, sector.L - big_m)
                    ridx = ridx_cache.setdefault(
                        big_m, _basis_index(sector.N - 2, sector.L - big_m,
                                            red_mmax, fermionic))
                red, r_amp = _remove_pair(state, pq[0], pq[1], fermionic)
                rows, cols, vals = buckets.setdefault(big_m, ([], [], []))
                rows.append(ridx[red])
                cols.append(ci)
                vals.append(s_amp * r_amp)

    blocks = []
    for big_m, (rows, cols, vals) in sorted(buckets.items()):
        n_red = len(ridx_cache[big_m])
        blocks.append(sp.coo_matrix((vals, (rows, cols)), shape=(n_red, dim)))
    if not blocks:
        return SparseOperator(sector, m, sp.csr_matrix((0, dim)))
    return SparseOperator(sector, m, sp.vstack(blocks).tocsr())


@dataclass
class SpectrumResult:
    sector_id: str
    eigenvalues: np.ndarray  # k lowest, ascending
    zero_mode_count: int
    lowest_nonzero: float  # nan when all computed eigenvalues are zero modes
    zero_tol: float
    method: str


def lowest_spectrum(op, k=6, zero_tol=None, method="auto", dense_cap=DENSE_CAP):
    """k lowest eigenvalues; Lanczos (ARPACK) with a dense fallback below
    dense_cap dimensions.  Zero modes are eigenvalues below zero_tol
    (default 1e-10 times the operator norm bound N(N-1)/2)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    dim = op.dimension
    if zero_tol is None:
        zero_tol = 1e-10 * max(op.norm_bound, 1.0)
    if method == "auto":
        method = "dense" if dim <= dense_cap else "lanczos"
    if method == "dense" or dim <= max(2 * k + 2, 24):
        evals = np.linalg.eigvalsh(op.matrix.toarray())
        evs = evals[:min(k, dim)]
        used = "dense"
    elif method == "lanczos":
        kk = min(k, dim - 1)
        ncv = min(dim, max(60, 6 * kk))
        try:
            evals, vecs = spla.eigsh(op.linear_operator(), k=kk, which="SA",
                                     ncv=ncv, maxiter=10_000, tol=1e-12)
        except spla.ArpackNoConvergence as exc:
            raise NonConvergenceError(
                f"Lanczos did not converge on {dim}-dim sector "
                f"(partial eigenvalues {getattr(exc, 'eigenvalues', None)})") from exc
        order = np.argsort(evals)
        evals, vecs = evals[order], vecs[:, order]
        resid = np.linalg.norm(
            np.column_stack([op.matvec(vecs[:, i]) for i in range(kk)])
            - vecs * evals[None, :], axis=0)
        if np.any(resid > 1e-10 * max(op.norm_bound, 1.0) + 1e-12):
            raise NonConvergenceError(
                f"eigenpair residual {resid.max():.2e} above tolerance")
        evs = evals
        used = "lanczos"
    else:
        raise ValueError(f"unknown method {method!r}")
    evs = np.sort(np.asarray(evs))
    zero_modes = int(np.sum(evs < zero_tol))
    nonzero = evs[evs >= zero_tol]
    lowest_nonzero = float(nonzero[0]) if nonzero.size else math.nan
    sid = f"N={op.sector.N},L={op.sector.L},{op.sector.statistics},m={op.m}"
    return SpectrumResult(sid, evs, zero_modes, lowest_nonzero, zero_tol, used)


# ---------------------------------------------------------------------------
# zero-range (delta) model: midpoint-substitution action on the polynomial part


def _state_norm_factor(state):
    """1/B_n: norm of the monomial-orbit polynomial attached to ``state``."""
    n = len(state)
    counts = {}
    for q in state:
        counts[q] = counts.get(q, 0) + 1
    multi = Fraction(math.factorial(n))
    for c in counts.values():
        multi /= math.factorial(c)
    prod = Fraction(1)
    for q in state:
        prod *= Fraction(2 ** q * math.factorial(q))
    return math.sqrt(float(multi * prod) * (2.0 * math.pi) ** n)


def delta_action(sector, vec):
    """Apply the zero-range model A -> (1/2pi) sum_{i<j} A(.., mid, .., mid, ..)
    to a coefficient vector over the bosonic occupation basis, via monomial
    expansion; equals PROJECTOR_TO_DELTA times the m = 0 matrix action."""
    if sector.statistics != "bosonic":
        raise ValueError("the zero-range model acts on bosonic states")
    basis = enumerate_basis(sector)
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (len(basis),):
        raise ValueError("coefficient vector does not match the sector basis")
    n = sector.N

    mono = {}
    for v, state in zip(vec, basis):
        if v == 0.0:
            continue
        c = v * (1.0 / _state_norm_factor(state))
        for assign in set(permutations(state)):
            mono[assign] = mono.get(assign, 0.0) + c

    out = {}
    for assign, c in mono.items():
        for i in range(n):
            for j in range(i + 1, n):
                t = assign[i] + assign[j]
                pref = c * PROJECTOR_TO_DELTA * 0.5 ** t
                base = list(assign)
                for s in range(t + 1):
                    base[i], base[j] = s, t - s
                    key = tuple(base)
                    out[key] = out.get(key, 0.0) + pref * math.comb(t, s)
                base[i], base[j] = assign[i], assign[j]

    result = np.zeros(len(basis))
    for idx, state in enumerate(basis):
        result[idx] = out.get(state, 0.0) * _state_norm_factor(state)
    return result


# ---------------------------------------------------------------------------
# spectral gap scan


@dataclass
class GapRow:
    N: int
    ell: int
    L: int
    dim: int
    zero_modes: int
    lowest_nonzero: float
    method: str


@dataclass
class GapReport:
    N: int
    ell: int
    rows: list
    sigma: float  # min over sectors of the lowest nonzero eigenvalue

    @property
    def laughlin_momentum(self):
        return self.ell * self.N * (self.N - 1) // 2


def spectral_gap(N, ell, k=6, l_max_factor=1.0, method="auto",
                 dense_cap=DENSE_CAP, zero_tol=None):
    """sigma(N, ell): smallest nonzero eigenvalue of H(ell-2, N) over momentum
    sectors up to (a multiple of) the Laughlin momentum ell N(N-1)/2."""
    if ell < 2:
        raise ValueError("need ell >= 2 so that m = ell - 2 >= 0")
    stat = "bosonic" if ell % 2 == 0 else "fermionic"
    m = ell - 2
    l_lau = ell * N * (N - 1) // 2
    l_min = 0 if stat == "bosonic" else N * (N - 1) // 2
    l_top = int(math.floor(l_max_factor * l_lau)) if N > 1 else l_min
    rows = []
    pool = []
    for L in range(l_min, l_top + 1):
        sector = MomentumSector(N, L, stat)
        op = build_hamiltonian(sector, m)
        extra = partition_count(L - l_lau, N) if L > l_lau else 1
        res = lowest_spectrum(op, k=min(k + extra, max(op.dimension, 1)),
                              method=method, dense_cap=dense_cap,
                              zero_tol=zero_tol)
        rows.append(GapRow(N, ell, L, op.dimension, res.zero_mode_count,
                           res.lowest_nonzero, res.method))
        if not math.isnan(res.lowest_nonzero):
            pool.append(res.lowest_nonzero)
    sigma = min(pool) if pool else math.nan
    return GapReport(N, ell, rows, sigma)
