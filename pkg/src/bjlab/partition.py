"""Block partitions, block views, the embedding of pivot submatrices and the
double column-wise vectorization of the strict block upper triangle.

Block indices are 1-based everywhere in this module; element indices are
0-based numpy positions.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Iterator, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatch, InvalidPermutation, LengthMismatch, PartitionMismatch
from .linalg import as_matrix, off_norm

BlockIndex = Tuple[int, int]


@dataclass(frozen=True)
class Partition:
    sizes: Tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        if not sizes or any(s < 1 for s in sizes):
            raise ValueError(f"partition sizes must be positive, got {self.sizes}")
        object.__setattr__(self, "sizes", sizes)

    @classmethod
    def parse(cls, text: str) -> "Partition":
        """Parse ``"pi:2,2,2,2"`` or ``"2,2,2,2"``."""
        body = text.strip()
        if body.startswith("pi:"):
            body = body[3:]
        try:
            return cls(tuple(int(t) for t in body.split(",") if t.strip()))
        except ValueError as exc:
            raise ValueError(f"bad partition spec {text!r}") from exc

    def __str__(self) -> str:
        return "pi:" + ",".join(str(s) for s in self.sizes)

    @property
    def m(self) -> int:
        return len(self.sizes)

    @property
    def n(self) -> int:
        return sum(self.sizes)

    @property
    def M(self) -> int:
        return self.m * (self.m - 1) // 2

    @property
    def N(self) -> int:
        return self.n * (self.n - 1) // 2

    @property
    def K(self) -> int:
        return self.N - sum(s * (s - 1) // 2 for s in self.sizes)

    @cached_property
    def offsets(self) -> Tuple[int, ...]:
        """Cumulative sums s_1, ..., s_m."""
        return tuple(int(v) for v in np.cumsum(self.sizes))

    def size(self, i: int) -> int:
        return self.sizes[i - 1]

    def start(self, i: int) -> int:
        return self.offsets[i - 1] - self.sizes[i - 1]

    def block(self, i: int) -> slice:
        self._check_block(i)
        return slice(self.start(i), self.offsets[i - 1])

    def indices(self, i: int) -> np.ndarray:
        return np.arange(self.start(i), self.offsets[i - 1])

    def pivot_indices(self, idx: BlockIndex) -> np.ndarray:
        i, j = idx
        if i == j:
            return self.indices(i)
        return np.concatenate([self.indices(i), self.indices(j)])

    def prefix(self, l: int) -> "Partition":
        return Partition(self.sizes[:l])

    def permuted(self, q: Sequence[int]) -> "Partition":
        """The partition (n_{q(1)}, ..., n_{q(m)}) for a 1-based map q."""
        q = check_permutation(q, self.m)
        return Partition(tuple(self.sizes[q[a] - 1] for a in range(self.m)))

    def pairs(self) -> Iterator[BlockIndex]:
        for j in range(2, self.m + 1):
            for i in range(1, j):
                yield (i, j)

    @staticmethod
    def tau(i: int, j: int) -> int:
        """1-based segment number of block (i, j), i < j, in the vec layout."""
        return (j - 1) * (j - 2) // 2 + i

    @cached_property
    def segments(self) -> Dict[BlockIndex, slice]:
        out = {}
        pos = 0
        for i, j in self.pairs():
            length = self.sizes[i - 1] * self.sizes[j - 1]
            out[(i, j)] = slice(pos, pos + length)
            pos += length
        return out

    def segment(self, i: int, j: int) -> slice:
        if i > j:
            i, j = j, i
        return self.segments[(i, j)]

    def check_pivot(self, idx: BlockIndex, allow_diagonal: bool = False) -> BlockIndex:
        i, j = int(idx[0]), int(idx[1])
        self._check_block(i)
        self._check_block(j)
        if i > j or (i == j and not allow_diagonal):
            raise DimensionMismatch(f"pivot {idx} must satisfy i < j")
        return i, j

    def _check_block(self, i: int) -> None:
        if not 1 <= i <= self.m:
            raise DimensionMismatch(f"block index {i} outside 1..{self.m}")


def check_permutation(q: Sequence[int], m: int) -> Tuple[int, ...]:
    """Validate a 1-based bijection on {1..m} given as (q(1), ..., q(m))."""
    q = tuple(int(v) for v in q)
    if len(q) != m or sorted(q) != list(range(1, m + 1)):
        raise InvalidPermutation(f"{q} is not a permutation of 1..{m}")
    return q


def check_square(a: np.ndarray, p: Partition, name: str = "A") -> np.ndarray:
    a = as_matrix(a, name)
    if a.shape != (p.n, p.n):
        raise DimensionMismatch(f"{name} has shape {a.shape}, partition needs order {p.n}")
    return a


def block_view(a: np.ndarray, p: Partition, i: int, j: int) -> np.ndarray:
    return a[p.block(i), p.block(j)]


def diagonal_block_off_norms(a: np.ndarray, p: Partition) -> float:
    """sqrt of the sum of S^2(A_ii) over the diagonal blocks."""
    return float(np.sqrt(sum(off_norm(block_view(a, p, i, i)) ** 2 for i in range(1, p.m + 1))))


# -- elementary block matrices -----------------------------------------------


@dataclass
class ElementaryBlockMatrix:
    """Orthogonal n x n matrix equal to I outside the rows/columns of blocks i, j."""

    pivot: BlockIndex
    hat_u: np.ndarray
    partition: Partition

    def dense(self) -> np.ndarray:
        return embed(self.partition, self.pivot, self.hat_u)

    def blocks(self):
        """(U_ii, U_ij, U_ji, U_jj) for an off-diagonal pivot."""
        return split_pivot(self.partition, self.pivot, self.hat_u)


def split_pivot(p: Partition, idx: BlockIndex, hat_u: np.ndarray):
    ni = p.size(idx[0])
    return hat_u[:ni, :ni], hat_u[:ni, ni:], hat_u[ni:, :ni], hat_u[ni:, ni:]


def pivot_order(p: Partition, idx: BlockIndex) -> int:
    i, j = idx
    return p.size(i) if i == j else p.size(i) + p.size(j)


def embed(p: Partition, idx: BlockIndex, hat_u) -> np.ndarray:
    """Identity of order n with the pivot blocks taken from ``hat_u``."""
    i, j = p.check_pivot(idx, allow_diagonal=True)
    hat_u = as_matrix(hat_u, "hatU")
    k = pivot_order(p, (i, j))
    if hat_u.shape != (k, k):
        raise DimensionMismatch(f"hatU must have order {k}, got {hat_u.shape}")
    u = np.eye(p.n)
    ix = p.pivot_indices((i, j))
    u[np.ix_(ix, ix)] = hat_u
    return u


def extract_pivot_submatrix(a, p: Partition, idx: BlockIndex) -> np.ndarray:
    """[[A_ii, A_ij], [A_ji, A_jj]] (just A_ii when i == j)."""
    a = check_square(a, p)
    ix = p.pivot_indices(p.check_pivot(idx, allow_diagonal=True))
    return a[np.ix_(ix, ix)].copy()


def annihilate_pivot(a, p: Partition, idx: BlockIndex) -> np.ndarray:
    """Copy of A with A_ij, A_ji, A_ii and A_jj set to zero."""
    a = check_square(a, p)
    i, j = p.check_pivot(idx, allow_diagonal=True)
    out = a.copy()
    ix = p.pivot_indices((i, j))
    out[np.ix_(ix, ix)] = 0.0
    return out


# -- vectorization -----------------------------------------------------------


@dataclass
class VecImage:
    partition: Partition
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float).reshape(-1)
        if self.data.size != self.partition.K:
            raise LengthMismatch(
                f"vector of length {self.data.size} does not match K={self.partition.K}"
            )

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def segment(self, i: int, j: int) -> np.ndarray:
        return self.data[self.partition.segment(i, j)]


def vec(a, p: Partition) -> VecImage:
    """Stack col(A_1j), ..., col(A_{j-1,j}) for j = 2..m (column-major blocks)."""
    a = check_square(a, p)
    out = np.empty(p.K)
    for (i, j), sl in p.segments.items():
        out[sl] = block_view(a, p, i, j).reshape(-1, order="F")
    return VecImage(p, out)


def vec0_inverse(a: VecImage, p: Partition = None) -> np.ndarray:
    """Symmetric matrix with zero diagonal blocks whose vec is ``a``."""
    if not isinstance(a, VecImage):
        if p is None:
            raise PartitionMismatch("a raw vector needs an explicit partition")
        a = VecImage(p, a)
    elif p is not None and p != a.partition:
        raise PartitionMismatch("vector carries a different partition")
    p = a.partition
    out = np.zeros((p.n, p.n))
    for (i, j), sl in p.segments.items():
        blk = a.data[sl].reshape((p.size(i), p.size(j)), order="F")
        out[p.block(i), p.block(j)] = blk
        out[p.block(j), p.block(i)] = blk.T
    return out


def block_permutation_matrix(p: Partition, q: Sequence[int]) -> np.ndarray:
    """P = [E_{q(1)} ... E_{q(m)}], E_r the identity columns of block r of ``p``.

    For A partitioned by ``p``, the block (a, b) of P^T A P is A_{q(a) q(b)}
    and P^T A P carries the partition ``p.permuted(q)``.
    """
    q = check_permutation(q, p.m)
    cols = np.concatenate([p.indices(r) for r in q])
    return np.eye(p.n)[:, cols]


def relabel_matrix(a, p: Partition, q: Sequence[int]) -> np.ndarray:
    """P^T A P for the block permutation matrix of ``q``."""
    a = check_square(a, p)
    q = check_permutation(q, p.m)
    cols = np.concatenate([p.indices(r) for r in q])
    return a[np.ix_(cols, cols)].copy()


def induced_vec_permutation(p: Partition, q: Sequence[int]) -> np.ndarray:
    """K x K permutation with vec_{p.permuted(q)}(P^T A P) = Pvec @ vec_p(A).

    Built column by column from basis vectors, which is O(K^2) and meant for
    checks rather than production runs.
    """
    q = check_permutation(q, p.m)
    pq = p.permuted(q)
    out = np.zeros((p.K, p.K))
    e = np.zeros(p.K)
    for k in range(p.K):
        e[k] = 1.0
        out[:, k] = vec(relabel_matrix(vec0_inverse(VecImage(p, e)), p, q), pq).data
        e[k] = 0.0
    return out
