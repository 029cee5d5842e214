"""Block Jacobi annihilators R_ij(U) and operators J_O on vectorized off-diagonal blocks.

An annihilator maps a = vec(A) (A symmetric with zero diagonal blocks) to
vec(N_ij(U^T A U)): the similarity by the elementary block matrix U followed
by zeroing the pivot blocks. Operators are products along a pivot sequence,
applied right to left: J_O = R_{T-1} ... R_1 R_0, so factor 0 acts first.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import AlignmentError, DimensionMismatch, UnsupportedSize
from .linalg import as_matrix, spectral_norm, spectral_radius
from .orderings import PivotSequence, apply_block_permutation, are_equivalent
from .partition import (
    BlockIndex,
    Partition,
    VecImage,
    induced_vec_permutation,
    pivot_order,
    split_pivot,
    vec,
    vec0_inverse,
)

MATERIALIZE_LIMIT = 2000


@dataclass(frozen=True)
class ShuffleMatrices:
    """S maps vec(Y) to vec(Y^T) for Y of shape n_r x n_i; S~ does it for n_j x n_r."""

    s: np.ndarray
    s_tilde: np.ndarray


def _unit(n: int, k: int) -> np.ndarray:
    e = np.zeros((n, 1))
    e[k, 0] = 1.0
    return e


def shuffle_matrices(n_i: int, n_r: int, n_j: int) -> ShuffleMatrices:
    """Row-stacked form: S = [I_{n_i} (x) e_k^T]_k, S~ = [I_{n_r} (x) e~_k^T]_k."""
    s = np.vstack([np.kron(np.eye(n_i), _unit(n_r, k).T) for k in range(n_r)])
    st = np.vstack([np.kron(np.eye(n_r), _unit(n_j, k).T) for k in range(n_j)])
    return ShuffleMatrices(s, st)


def shuffle_matrices_alt(n_i: int, n_r: int, n_j: int) -> ShuffleMatrices:
    """Column-blocked form: S = [I_{n_r} (x) e_1 ... I_{n_r} (x) e_{n_i}], likewise S~."""
    s = np.hstack([np.kron(np.eye(n_r), _unit(n_i, k)) for k in range(n_i)])
    st = np.hstack([np.kron(np.eye(n_j), _unit(n_r, k)) for k in range(n_r)])
    return ShuffleMatrices(s, st)


@dataclass
class Annihilator:
    partition: Partition
    pivot: BlockIndex
    hat_u: np.ndarray
    _dense: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.pivot = self.partition.check_pivot(self.pivot)
        self.hat_u = as_matrix(self.hat_u, "hatU")
        k = pivot_order(self.partition, self.pivot)
        if self.hat_u.shape != (k, k):
            raise DimensionMismatch(f"hatU must have order {k}, got {self.hat_u.shape}")

    def apply(self, a) -> VecImage:
        return apply_annihilator(self, a)

    def materialize(self) -> np.ndarray:
        if self._dense is None:
            self._dense = materialize_annihilator(self.partition, self.pivot, self.hat_u)
        return self._dense

    def transpose(self) -> "Annihilator":
        return annihilator_transpose(self)


def _as_vec(a, p: Partition) -> VecImage:
    if isinstance(a, VecImage):
        if a.partition != p:
            raise DimensionMismatch("vector carries a different partition")
        return a
    return VecImage(p, a)


def apply_annihilator(r: Annihilator, a) -> VecImage:
    """Block-wise action on vec0^{-1}(a), touching only block rows/cols i and j."""
    p = r.partition
    i, j = r.pivot
    mat = vec0_inverse(_as_vec(a, p))
    u_ii, u_ij, u_ji, u_jj = split_pivot(p, r.pivot, r.hat_u)
    bi, bj = p.block(i), p.block(j)
    for t in range(1, p.m + 1):
        if t in (i, j):
            continue
        bt = p.block(t)
        a_ti = mat[bt, bi].copy()
        a_tj = mat[bt, bj].copy()
        new_ti = a_ti @ u_ii + a_tj @ u_ji
        new_tj = a_ti @ u_ij + a_tj @ u_jj
        mat[bt, bi] = new_ti
        mat[bi, bt] = new_ti.T
        mat[bt, bj] = new_tj
        mat[bj, bt] = new_tj.T
    mat[bi, bj] = 0.0
    mat[bj, bi] = 0.0
    return vec(mat, p)


def materialize_annihilator(p: Partition, idx: BlockIndex, hat_u) -> np.ndarray:
    """Explicit K x K matrix assembled from Kronecker blocks.

    Identity except on the segments that share a block index with the
    pivot: segment (i, j) is zeroed and, for every other block r, the two
    segments coupling r with i and with j receive a 2 x 2 block operator.
    """
    if p.K > MATERIALIZE_LIMIT:
        raise UnsupportedSize(f"K={p.K} exceeds the materialization limit {MATERIALIZE_LIMIT}")
    i, j = p.check_pivot(idx)
    hat_u = as_matrix(hat_u, "hatU")
    if hat_u.shape != (pivot_order(p, (i, j)),) * 2:
        raise DimensionMismatch("hatU has the wrong order for this pivot")
    u_ii, u_ij, u_ji, u_jj = split_pivot(p, (i, j), hat_u)
    n_i, n_j = p.size(i), p.size(j)
    out = np.eye(p.K)
    sij = p.segment(i, j)
    out[sij, :] = 0.0
    out[:, sij] = 0.0
    for r in range(1, p.m + 1):
        if r in (i, j):
            continue
        n_r = p.size(r)
        ir, jr = np.eye(n_r), np.eye(n_r)
        if r < i:
            s1, s2 = p.segment(r, i), p.segment(r, j)
            blocks = (
                (np.kron(u_ii.T, ir), np.kron(u_ji.T, ir)),
                (np.kron(u_ij.T, ir), np.kron(u_jj.T, ir)),
            )
        elif r < j:
            s1, s2 = p.segment(i, r), p.segment(r, j)
            sh = shuffle_matrices(n_i, n_r, n_j)
            blocks = (
                (np.kron(ir, u_ii.T), sh.s @ np.kron(u_ji.T, ir)),
                (sh.s_tilde @ np.kron(ir, u_ij.T), np.kron(u_jj.T, jr)),
            )
        else:
            s1, s2 = p.segment(i, r), p.segment(j, r)
            blocks = (
                (np.kron(ir, u_ii.T), np.kron(ir, u_ji.T)),
                (np.kron(ir, u_ij.T), np.kron(ir, u_jj.T)),
            )
        out[s1, s1] = blocks[0][0]
        out[s1, s2] = blocks[0][1]
        out[s2, s1] = blocks[1][0]
        out[s2, s2] = blocks[1][1]
    return out


def assemble_by_columns(r: Annihilator) -> np.ndarray:
    """K x K matrix whose column k is the action on the k-th basis vector."""
    p = r.partition
    out = np.zeros((p.K, p.K))
    e = np.zeros(p.K)
    for k in range(p.K):
        e[k] = 1.0
        out[:, k] = apply_annihilator(r, e).data
        e[k] = 0.0
    return out


def annihilator_transpose(r: Annihilator) -> Annihilator:
    """R_ij(U)^T = R_ij(U^T)."""
    return Annihilator(r.partition, r.pivot, r.hat_u.T.copy())


# -- operators ---------------------------------------------------------------


@dataclass
class OperatorProduct:
    partition: Partition
    sequence: PivotSequence
    factors: List[Annihilator]
    _dense: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if len(self.factors) != self.sequence.T:
            raise AlignmentError(
                f"{len(self.factors)} factors for a sequence of length {self.sequence.T}"
            )
        for k, (pair, f) in enumerate(zip(self.sequence.pairs, self.factors)):
            if f.pivot != pair or f.partition != self.partition:
                raise AlignmentError(f"factor {k} has pivot {f.pivot}, sequence has {pair}")

    def apply(self, a) -> VecImage:
        out = _as_vec(a, self.partition)
        for f in self.factors:
            out = apply_annihilator(f, out)
        return out

    def materialize(self) -> np.ndarray:
        if self._dense is None:
            out = np.eye(self.partition.K)
            for f in self.factors:
                out = f.materialize() @ out
            self._dense = out
        return self._dense

    def transpose(self) -> "OperatorProduct":
        """J_O^T as the operator of the reversed sequence with transposed factors."""
        seq = PivotSequence(self.sequence.m, tuple(reversed(self.sequence.pairs)))
        return OperatorProduct(
            self.partition, seq, [annihilator_transpose(f) for f in reversed(self.factors)]
        )


def build_operator(p: Partition, o: PivotSequence, hat_us: Sequence[np.ndarray]) -> OperatorProduct:
    if o.m != p.m:
        raise AlignmentError(f"sequence over {o.m} blocks, partition has {p.m}")
    if len(hat_us) != o.T:
        raise AlignmentError(f"{len(hat_us)} factors for a sequence of length {o.T}")
    return OperatorProduct(p, o, [Annihilator(p, pair, u) for pair, u in zip(o.pairs, hat_us)])


def operator_norm(j, tol: float = 1e-12) -> float:
    """Spectral norm of an operator (or of a dense K x K array)."""
    mat = j.materialize() if hasattr(j, "materialize") else np.asarray(j, dtype=float)
    if mat.size == 0:
        return 0.0
    return spectral_norm(mat, tol)


def operator_spectral_radius(j, tol: float = 1e-10) -> float:
    """Power-iteration estimate; informational only for nonnormal products."""
    mat = j.materialize() if hasattr(j, "materialize") else np.asarray(j, dtype=float)
    return spectral_radius(mat, tol)


def product_of_operators(ops: Sequence[OperatorProduct]) -> np.ndarray:
    """Dense J_last ... J_first for operators applied in list order."""
    out = np.eye(ops[0].partition.K)
    for op in ops:
        out = op.materialize() @ out
    return out


# -- structure theorems as checks ---------------------------------------------


@dataclass
class EquivalenceReport:
    relation: str
    related: bool
    max_deviation: float

    @property
    def equal(self) -> bool:
        return self.related and self.max_deviation <= 1e-13


def carry_factors(o1: PivotSequence, o2: PivotSequence, hat_us: Sequence[np.ndarray]) -> List[np.ndarray]:
    """Re-align factors from o1 to o2: the k-th occurrence of a pair keeps its factor."""
    pool: Dict[Tuple[int, int], List[np.ndarray]] = {}
    for pair, u in zip(o1.pairs, hat_us):
        pool.setdefault(pair, []).append(u)
    used: Dict[Tuple[int, int], int] = {}
    out = []
    for pair in o2.pairs:
        k = used.get(pair, 0)
        if pair not in pool or k >= len(pool[pair]):
            raise AlignmentError(f"pair {pair} has no factor left to carry")
        out.append(pool[pair][k])
        used[pair] = k + 1
    return out


def check_equivalence_theorems(
    p: Partition, o1: PivotSequence, o2: PivotSequence, hat_us: Sequence[np.ndarray]
) -> EquivalenceReport:
    """Compare J_{o1} and J_{o2} built from the same factors (carried by pair)."""
    related = are_equivalent(o1, o2)
    j1 = build_operator(p, o1, hat_us).materialize()
    j2 = build_operator(p, o2, carry_factors(o1, o2, hat_us)).materialize()
    return EquivalenceReport("equiv", related, float(np.max(np.abs(j1 - j2))) if j1.size else 0.0)


def swap_pivot_blocks(hat_u: np.ndarray, n_first: int) -> np.ndarray:
    """Reorder the two block rows/cols of a pivot matrix (first group has n_first)."""
    k = hat_u.shape[0]
    order = np.r_[np.arange(n_first, k), np.arange(n_first)]
    return hat_u[np.ix_(order, order)]


def relabeled_factors(p_bar: Partition, o: PivotSequence, hat_us: Sequence[np.ndarray],
                      q: Sequence[int]) -> List[np.ndarray]:
    """Factors for O(q) on the original partition, given factors for O on p_bar."""
    out = []
    for (a, b), u in zip(o.pairs, hat_us):
        out.append(u if q[a - 1] < q[b - 1] else swap_pivot_blocks(u, p_bar.size(a)))
    return out


def check_permutation_conjugation(
    p: Partition, o: PivotSequence, hat_us: Sequence[np.ndarray], q: Sequence[int]
) -> EquivalenceReport:
    """J_{O(q)} on ``p`` against P^T J_O P with J_O on p.permuted(q)."""
    p_bar = p.permuted(q)
    j_bar = build_operator(p_bar, o, hat_us).materialize()
    oq = apply_block_permutation(o, q)
    j_tilde = build_operator(p, oq, relabeled_factors(p_bar, o, hat_us, q)).materialize()
    big_p = induced_vec_permutation(p, q)
    dev = float(np.max(np.abs(j_tilde - big_p.T @ j_bar @ big_p))) if j_bar.size else 0.0
    return EquivalenceReport("perm", True, dev)
