"""Pivot sequences over P_m = {(i, j) | 1 <= i < j <= m} and their algebra.

Covers admissible transpositions, reversal, block relabeling O(q), the
ordering matrix M_O, the equivalence relations (plain, shift, weak and
permutation equivalence), and generators/recognizers for the serial
strategy classes and their quasi-cyclic extensions.

Two sequences are equivalent under admissible transpositions exactly when,
for every pair of letters sharing a block index, both sequences list the
occurrences of those two letters in the same order. Weak equivalence
(transpositions plus rotations) is decided by solving for per-occurrence
push counts: rotating a prefix pushes each of its occurrences once to the
back, and a target is reachable iff a consistent set of counts exists. The
spread of those counts is the least number of rotations in a chain.
"""

from __future__ import annotations

import itertools
import re
from collections import Counter, deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidKind, NotAdmissible, NotCyclic, UnsupportedSize, WitnessInvalid
from .partition import check_permutation

Pair = Tuple[int, int]
Perm = Tuple[int, ...]

CYCLIC_KINDS = ("B_c", "B_r", "B_c_rev", "B_r_rev", "B_sp", "B_spg", "B_sg")
BAR_KINDS = ("barB_c", "barB_r", "barB_c_rev", "barB_r_rev", "barB_sp", "barB_spg", "barB_sg")
GENERATOR_KINDS = CYCLIC_KINDS + ("barB_c", "barB_sp", "barB_spg", "barB_sg")
SERIAL_BASES = ("B_c", "B_c_rev", "B_r", "B_r_rev")
SEARCH_LIMIT = 5
# key tables make the cyclic class searches cheap enough for one more block
CYCLIC_SEARCH_LIMIT = 6


@dataclass(frozen=True)
class PivotSequence:
    m: int
    pairs: Tuple[Pair, ...]

    def __post_init__(self):
        pairs = tuple((int(i), int(j)) for i, j in self.pairs)
        for i, j in pairs:
            if not 1 <= i < j <= self.m:
                raise ValueError(f"pair {(i, j)} is not in P_{self.m}")
        object.__setattr__(self, "pairs", pairs)

    @property
    def T(self) -> int:
        return len(self.pairs)

    @property
    def M(self) -> int:
        return self.m * (self.m - 1) // 2

    def covers(self) -> bool:
        return len(set(self.pairs)) == self.M

    @property
    def is_cyclic(self) -> bool:
        return self.T == self.M and self.covers()

    @property
    def is_quasi_cyclic(self) -> bool:
        return self.T >= self.M and self.covers()

    def __len__(self) -> int:
        return self.T

    def __iter__(self):
        return iter(self.pairs)

    def __str__(self) -> str:
        return "pairs:" + ",".join(f"({i},{j})" for i, j in self.pairs)

    @classmethod
    def parse(cls, text: str, m: Optional[int] = None) -> "PivotSequence":
        """Parse ``"pairs:(1,2),(1,3),..."`` (the prefix is optional)."""
        body = text.strip()
        if body.startswith("pairs:"):
            body = body[6:]
        found = re.findall(r"\(\s*(\d+)\s*,\s*(\d+)\s*\)", body)
        leftover = re.sub(r"\(\s*\d+\s*,\s*\d+\s*\)", "", body).replace(",", "").strip()
        if not found or leftover:
            raise ValueError(f"cannot parse pivot pairs from {text!r}")
        pairs = []
        for a, b in found:
            a, b = int(a), int(b)
            if a == b:
                raise ValueError(f"pair ({a},{b}) is on the diagonal")
            pairs.append((min(a, b), max(a, b)))
        if m is None:
            m = max(j for _, j in pairs)
        return cls(m, tuple(pairs))


def row_ordering(m: int) -> PivotSequence:
    return PivotSequence(m, tuple((i, j) for i in range(1, m) for j in range(i + 1, m + 1)))


def column_ordering(m: int) -> PivotSequence:
    return PivotSequence(m, tuple((i, j) for j in range(2, m + 1) for i in range(1, j)))


def all_cyclic_orderings(m: int) -> Iterable[PivotSequence]:
    letters = column_ordering(m).pairs
    for perm in itertools.permutations(letters):
        yield PivotSequence(m, perm)


def conflict(a: Pair, b: Pair) -> bool:
    """True when the index sets of two pairs intersect."""
    return a[0] in b or a[1] in b


# -- elementary operations ---------------------------------------------------


def admissible_positions(o: PivotSequence) -> List[int]:
    return [r for r in range(o.T - 1) if not conflict(o.pairs[r], o.pairs[r + 1])]


def admissible_transposition(o: PivotSequence, r: int) -> PivotSequence:
    """Swap positions r and r+1 (0-based) when their index sets are disjoint."""
    if not 0 <= r < o.T - 1:
        raise IndexError(f"position {r} outside 0..{o.T - 2}")
    a, b = o.pairs[r], o.pairs[r + 1]
    if conflict(a, b):
        raise NotAdmissible(f"{a} and {b} share an index")
    pairs = list(o.pairs)
    pairs[r], pairs[r + 1] = b, a
    return PivotSequence(o.m, tuple(pairs))


def reverse(o: PivotSequence) -> PivotSequence:
    return PivotSequence(o.m, tuple(reversed(o.pairs)))


def rotate(o: PivotSequence, r: int) -> PivotSequence:
    """Move the first r terms to the end."""
    if o.T == 0:
        return o
    r %= o.T
    return PivotSequence(o.m, o.pairs[r:] + o.pairs[:r])


def identity_permutation(m: int) -> Perm:
    return tuple(range(1, m + 1))


def reversal_permutation(m: int) -> Perm:
    """The map i -> m + 1 - i."""
    return tuple(range(m, 0, -1))


def compose(q2: Sequence[int], q1: Sequence[int]) -> Perm:
    """(q2 o q1)(i) = q2(q1(i))."""
    return tuple(q2[q1[i] - 1] for i in range(len(q1)))


def inverse_permutation(q: Sequence[int]) -> Perm:
    out = [0] * len(q)
    for i, v in enumerate(q):
        out[v - 1] = i + 1
    return tuple(out)


def apply_block_permutation(o: PivotSequence, q: Sequence[int]) -> PivotSequence:
    """O(q): each (i, j) becomes the sorted pair (q(i), q(j))."""
    q = check_permutation(q, o.m)
    pairs = []
    for i, j in o.pairs:
        a, b = q[i - 1], q[j - 1]
        pairs.append((a, b) if a < b else (b, a))
    return PivotSequence(o.m, tuple(pairs))


def ordering_matrix(o: PivotSequence) -> np.ndarray:
    """Symmetric matrix with entry k at (i_k, j_k) and -1 on the diagonal."""
    if not o.is_cyclic:
        raise NotCyclic("the ordering matrix is defined for cyclic orderings only")
    mat = np.full((o.m, o.m), -1, dtype=int)
    for k, (i, j) in enumerate(o.pairs):
        mat[i - 1, j - 1] = k
        mat[j - 1, i - 1] = k
    return mat


def from_ordering_matrix(mat, check_symmetry: bool = True) -> PivotSequence:
    """Inverse of :func:`ordering_matrix` (reads the strict upper triangle)."""
    mat = np.asarray(mat)
    m = mat.shape[0]
    slots: Dict[int, Pair] = {}
    for i in range(m):
        for j in range(i + 1, m):
            k = int(mat[i, j])
            if check_symmetry and int(mat[j, i]) != k:
                raise ValueError(f"ordering matrix is not symmetric at ({i + 1},{j + 1})")
            if k in slots:
                raise ValueError(f"step {k} appears twice")
            slots[k] = (i + 1, j + 1)
    if sorted(slots) != list(range(m * (m - 1) // 2)):
        raise ValueError("entries must be a permutation of 0..M-1")
    return PivotSequence(m, tuple(slots[k] for k in range(len(slots))))


def render_ordering_matrix(o: PivotSequence) -> str:
    mat = ordering_matrix(o)
    width = len(str(o.M - 1))
    lines = []
    for row in mat:
        cells = ["*".rjust(width) if v < 0 else str(v).rjust(width) for v in row]
        lines.append(" ".join(cells))
    return "\n".join(lines)


# -- plain equivalence -------------------------------------------------------


def _projection_agrees(p1: Sequence[Pair], p2: Sequence[Pair]) -> bool:
    letters = sorted(set(p1))
    for x, a in enumerate(letters):
        for b in letters[x + 1:]:
            if conflict(a, b):
                s1 = [t for t in p1 if t == a or t == b]
                s2 = [t for t in p2 if t == a or t == b]
                if s1 != s2:
                    return False
    return True


def are_equivalent(o1: PivotSequence, o2: PivotSequence) -> bool:
    """True iff o2 is reachable from o1 by admissible transpositions.

    Decided by comparing, for every pair of letters sharing an index, the
    order in which their occurrences appear. For cyclic orderings this is the
    relative-order criterion; it stays exact for sequences with repeats.
    """
    if o1.m != o2.m or o1.T != o2.T:
        return False
    if Counter(o1.pairs) != Counter(o2.pairs):
        return False
    return _projection_agrees(o1.pairs, o2.pairs)


def equivalence_bfs(o1: PivotSequence, o2: PivotSequence, max_states: int = 2_000_000) -> bool:
    """Breadth-first search over admissible transpositions (for m <= 5)."""
    if o1.m > SEARCH_LIMIT:
        raise UnsupportedSize(f"exhaustive search limited to m <= {SEARCH_LIMIT}")
    if o1.m != o2.m or o1.T != o2.T or Counter(o1.pairs) != Counter(o2.pairs):
        return False
    start, goal = o1.pairs, o2.pairs
    seen = {start}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        if cur == goal:
            return True
        for r in range(len(cur) - 1):
            if not conflict(cur[r], cur[r + 1]):
                nxt = cur[:r] + (cur[r + 1], cur[r]) + cur[r + 2:]
                if nxt not in seen:
                    if len(seen) >= max_states:
                        raise UnsupportedSize("state cap exceeded in equivalence search")
                    seen.add(nxt)
                    queue.append(nxt)
    return False


def are_shift_equivalent(o1: PivotSequence, o2: PivotSequence) -> Optional[int]:
    """Smallest r with o2 = rotate(o1, r), or None."""
    if o1.m != o2.m or o1.T != o2.T:
        return None
    for r in range(max(o1.T, 1)):
        if o1.pairs[r:] + o1.pairs[:r] == o2.pairs:
            return r
    return None


# -- weak equivalence --------------------------------------------------------


@dataclass
class WeakChain:
    """Alternating chain of ("equiv", seq) and ("shift", seq, r) links from o1 to o2."""

    links: List[tuple]
    d: int

    def verify(self, o1: PivotSequence, o2: PivotSequence) -> bool:
        cur = o1
        shifts = 0
        for link in self.links:
            if link[0] == "equiv":
                if not are_equivalent(cur, link[1]):
                    return False
            elif link[0] == "shift":
                if rotate(cur, link[2]) != link[1]:
                    return False
                shifts += 1
            else:
                return False
            cur = link[1]
        return cur == o2 and shifts == self.d


def _dependency_edges(pairs: Sequence[Pair]) -> List[Tuple[int, int]]:
    return [
        (s, t)
        for s in range(len(pairs))
        for t in range(s + 1, len(pairs))
        if conflict(pairs[s], pairs[t])
    ]


def _solve_push_counts(n: int, edges, flips) -> Optional[List[int]]:
    """Integer c with c[s] - c[t] = flips[e] on each edge e=(s, t), or None."""
    adj: List[List[Tuple[int, int]]] = [[] for _ in range(n)]
    for (s, t), f in zip(edges, flips):
        adj[s].append((t, -f))
        adj[t].append((s, f))
    c: List[Optional[int]] = [None] * n
    for root in range(n):
        if c[root] is not None:
            continue
        c[root] = 0
        stack = [root]
        while stack:
            u = stack.pop()
            for v, delta in adj[u]:
                want = c[u] + delta
                if c[v] is None:
                    c[v] = want
                    stack.append(v)
                elif c[v] != want:
                    return None
    return c  # type: ignore[return-value]


def _weak_potentials(o1: PivotSequence, o2: PivotSequence):
    """Best (d, counts, target positions) over all occurrence matchings, or None."""
    if o1.m != o2.m or o1.T != o2.T or Counter(o1.pairs) != Counter(o2.pairs):
        return None
    occ1: Dict[Pair, List[int]] = {}
    for t, a in enumerate(o1.pairs):
        occ1.setdefault(a, []).append(t)
    occ2: Dict[Pair, List[int]] = {}
    for t, a in enumerate(o2.pairs):
        occ2.setdefault(a, []).append(t)
    letters = sorted(occ1)
    edges = _dependency_edges(o1.pairs)
    best = None
    for shifts in itertools.product(*(range(len(occ1[a])) for a in letters)):
        target = [0] * o1.T
        for a, s in zip(letters, shifts):
            r = len(occ1[a])
            for i, t in enumerate(occ1[a]):
                target[t] = occ2[a][(i - s) % r]
        flips = [1 if target[s] > target[t] else 0 for s, t in edges]
        c = _solve_push_counts(o1.T, edges, flips)
        if c is None:
            continue
        lo = min(c)
        c = [v - lo for v in c]
        d = max(c) if c else 0
        if best is None or d < best[0]:
            best = (d, c, target)
            if d == 0:
                break
    return best


def are_weak_equivalent(o1: PivotSequence, o2: PivotSequence) -> Optional[WeakChain]:
    """Witness chain o1 ~ . s~ . ~ ... o2 with the least number of shifts, or None."""
    found = _weak_potentials(o1, o2)
    if found is None:
        return None
    d, c, target = found
    c = list(c)
    cur = list(range(o1.T))
    links: List[tuple] = []

    def seq(ids):
        return PivotSequence(o1.m, tuple(o1.pairs[t] for t in ids))

    while c and max(c) > 0:
        top = max(c)
        layer = [t for t in cur if c[t] == top]
        rest = [t for t in cur if c[t] != top]
        front = layer + rest
        if front != cur:
            links.append(("equiv", seq(front)))
        cur = rest + layer
        links.append(("shift", seq(cur), len(layer)))
        for t in layer:
            c[t] -= 1
    final = sorted(range(o1.T), key=lambda t: target[t])
    if seq(final) != seq(cur):
        links.append(("equiv", seq(final)))
    chain = WeakChain(links, d)
    if not chain.verify(o1, o2):
        raise WitnessInvalid("internal error: constructed weak chain does not verify")
    return chain


def weak_equivalence_bfs(o1: PivotSequence, o2: PivotSequence, max_states: int = 2_000_000) -> bool:
    """Breadth-first search over admissible transpositions and unit rotations."""
    if o1.m > SEARCH_LIMIT:
        raise UnsupportedSize(f"exhaustive search limited to m <= {SEARCH_LIMIT}")
    if o1.m != o2.m or o1.T != o2.T or Counter(o1.pairs) != Counter(o2.pairs):
        return False
    start, goal = o1.pairs, o2.pairs
    seen = {start}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        if cur == goal:
            return True
        moves = [cur[1:] + cur[:1]]
        for r in range(len(cur) - 1):
            if not conflict(cur[r], cur[r + 1]):
                moves.append(cur[:r] + (cur[r + 1], cur[r]) + cur[r + 2:])
        for nxt in moves:
            if nxt not in seen:
                if len(seen) >= max_states:
                    raise UnsupportedSize("state cap exceeded in weak-equivalence search")
                seen.add(nxt)
                queue.append(nxt)
    return False


def weak_windows(o: PivotSequence, max_states: int = 200_000) -> Iterable[Tuple[int, PivotSequence]]:
    """Every sequence weakly equivalent to ``o`` up to plain equivalence.

    Yields ``(d, seq)`` in breadth-first order of total pushes; ``d`` is the
    number of shifts in the chain leading to ``seq``.
    """
    edges = _dependency_edges(o.pairs)
    start = tuple([0] * o.T)
    seen = {start}
    queue = deque([start])
    while queue:
        c = queue.popleft()
        order = sorted(range(o.T), key=lambda t: c[t] * o.T + t)
        yield max(c) if c else 0, PivotSequence(o.m, tuple(o.pairs[t] for t in order))
        for t in range(o.T):
            nc = list(c)
            nc[t] += 1
            if all(0 <= nc[s] - nc[u] <= 1 for s, u in edges):
                lo = min(nc)
                key = tuple(v - lo for v in nc)
                if key not in seen:
                    if len(seen) >= max_states:
                        raise UnsupportedSize("state cap exceeded while enumerating shifts")
                    seen.add(key)
                    queue.append(key)


# -- class keys for the search-based recognizers ------------------------------


@lru_cache(maxsize=None)
def _conflict_structure(m: int):
    letters = column_ordering(m).pairs
    index = {a: k for k, a in enumerate(letters)}
    edges = [
        (x, y)
        for x in range(len(letters))
        for y in range(x + 1, len(letters))
        if conflict(letters[x], letters[y])
    ]
    # spanning tree by BFS, fundamental cycles as signed edge lists
    adj: Dict[int, List[int]] = {k: [] for k in range(len(letters))}
    for x, y in edges:
        adj[x].append(y)
        adj[y].append(x)
    parent = {0: None}
    depth = {0: 0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in parent:
                parent[v] = u
                depth[v] = depth[u] + 1
                queue.append(v)
    tree = {(min(v, p), max(v, p)) for v, p in parent.items() if p is not None}

    def path_to_root(v):
        out = [v]
        while parent[out[-1]] is not None:
            out.append(parent[out[-1]])
        return out

    cycles = []
    for x, y in edges:
        if (x, y) in tree:
            continue
        px, py = path_to_root(x), path_to_root(y)
        common = set(px) & set(py)
        lca = next(v for v in px if v in common)
        walk = px[: px.index(lca) + 1] + list(reversed(py[: py.index(lca)]))
        # closed walk x -> ... -> lca -> ... -> y -> x
        walk.append(x)
        cycles.append([(walk[k], walk[k + 1]) for k in range(len(walk) - 1)])
    return letters, index, edges, cycles


def _positions(o: PivotSequence) -> List[int]:
    _, index, _, _ = _conflict_structure(o.m)
    pos = [0] * len(index)
    for t, a in enumerate(o.pairs):
        pos[index[a]] = t
    return pos


def equivalence_key(o: PivotSequence) -> Tuple[bool, ...]:
    """Complete invariant of plain equivalence for cyclic orderings."""
    _, _, edges, _ = _conflict_structure(o.m)
    pos = _positions(o)
    return tuple(pos[x] < pos[y] for x, y in edges)


def weak_key(o: PivotSequence) -> Tuple[int, ...]:
    """Complete invariant of weak equivalence for cyclic orderings.

    Forward minus backward edges along each fundamental cycle of the
    conflict graph; rotating a prefix leaves every such count unchanged.
    """
    _, _, _, cycles = _conflict_structure(o.m)
    pos = _positions(o)
    return tuple(sum(1 if pos[u] < pos[v] else -1 for u, v in cyc) for cyc in cycles)


# -- serial classes ----------------------------------------------------------


def _column_structure(pairs: Sequence[Pair], m: int, commute: bool, bar: bool) -> bool:
    """Does ``pairs`` parse (up to equivalence when ``commute``) as a column-wise member?

    Column j must list (., j) for every index below j, each once. With
    ``bar`` a segment of distinct pairs inside the leading j x j block may
    follow column j for j >= 3. Greedy extraction is exact here because
    taking more of a prefix never blocks a later phase.
    """
    rest = list(pairs)

    def take(allowed) -> Optional[int]:
        seen_idx: set = set()
        for k, a in enumerate(rest):
            if a[0] not in seen_idx and a[1] not in seen_idx and allowed(a):
                return k
            if not commute:
                return None
            seen_idx.update(a)
        return None

    if m < 2:
        return not rest
    for j in range(2, m + 1):
        need = {(i, j) for i in range(1, j)}
        while need:
            k = take(lambda a: a in need)
            if k is None:
                return False
            need.discard(rest.pop(k))
        if bar and j >= 3:
            used: set = set()
            while True:
                k = take(lambda a: a[1] <= j and a not in used)
                if k is None:
                    break
                used.add(rest.pop(k))
    return not rest


def serial_base_kind(o: PivotSequence, commute: bool = False, bar: bool = False) -> Optional[str]:
    """Which of B_c, B_c_rev, B_r, B_r_rev (bar-variants with ``bar``) ``o`` belongs to."""
    e = reversal_permutation(o.m)
    tests = (
        ("B_c", o),
        ("B_c_rev", reverse(o)),
        ("B_r", apply_block_permutation(o, e)),
        ("B_r_rev", apply_block_permutation(reverse(o), e)),
    )
    for name, cand in tests:
        if _column_structure(cand.pairs, o.m, commute, bar):
            return ("bar" + name) if bar else name
    return None


def _base_relabel(base_kind: str, m: int) -> Perm:
    return reversal_permutation(m) if "B_r" in base_kind else identity_permutation(m)


@dataclass
class Witness:
    """Why a sequence belongs to a class.

    ``o = o'(q)`` with ``o'`` weakly equivalent to ``base`` through ``chain``
    using ``d`` shifts; ``base`` is a member of ``base_kind``. The one-sweep
    (or d+1 sweep) bound is evaluated on ``partition.permuted(bound_perm)``.
    """

    kind: str
    base_kind: str
    base: PivotSequence
    q: Perm
    d: int
    chain: List[tuple] = field(default_factory=list)
    shape: str = "relabel-first"

    @property
    def bound_perm(self) -> Perm:
        return compose(self.q, _base_relabel(self.base_kind, self.base.m))

    def verify(self, o: PivotSequence) -> bool:
        if base_membership(self.base_kind, self.base) is False:
            return False
        if self.shape == "relabel-first":
            start = apply_block_permutation(o, inverse_permutation(self.q))
            target = self.base
        else:
            start = o
            target = apply_block_permutation(self.base, self.q)
        if not self.chain:
            if self.d != 0:
                return False
            return are_equivalent(start, target)
        return WeakChain(list(self.chain), self.d).verify(start, target)

    def reshaped(self) -> "Witness":
        """Same membership argument with the relabeling applied last instead of first."""
        q = self.q
        if self.shape == "relabel-first":
            links = [(l[0], apply_block_permutation(l[1], q)) + tuple(l[2:]) for l in self.chain]
            return Witness(self.kind, self.base_kind, self.base, q, self.d, links, "relabel-last")
        qi = inverse_permutation(q)
        links = [(l[0], apply_block_permutation(l[1], qi)) + tuple(l[2:]) for l in self.chain]
        return Witness(self.kind, self.base_kind, self.base, q, self.d, links, "relabel-first")


def base_membership(base_kind: str, o: PivotSequence) -> bool:
    bar = base_kind.startswith("bar")
    return serial_base_kind(o, commute=False, bar=bar) is not None and _kind_matches(
        base_kind, o, bar
    )


def _kind_matches(base_kind: str, o: PivotSequence, bar: bool) -> bool:
    name = base_kind[3:] if bar else base_kind
    e = reversal_permutation(o.m)
    cand = {
        "B_c": o,
        "B_c_rev": reverse(o),
        "B_r": apply_block_permutation(o, e),
        "B_r_rev": apply_block_permutation(reverse(o), e),
    }[name]
    return _column_structure(cand.pairs, o.m, False, bar)


@lru_cache(maxsize=None)
def serial_members(m: int) -> Tuple[Tuple[str, PivotSequence], ...]:
    """All (kind, ordering) in B_c, B_c_rev, B_r, B_r_rev for this m."""
    if m > CYCLIC_SEARCH_LIMIT:
        raise UnsupportedSize(f"enumerating serial orderings limited to m <= {CYCLIC_SEARCH_LIMIT}")
    cols = [list(itertools.permutations(range(1, j))) for j in range(3, m + 1)]
    e = reversal_permutation(m)
    out = []
    for taus in itertools.product(*cols):
        pairs: List[Pair] = [(1, 2)] if m >= 2 else []
        for j, tau in zip(range(3, m + 1), taus):
            pairs.extend((i, j) for i in tau)
        o = PivotSequence(m, tuple(pairs))
        out.append(("B_c", o))
        out.append(("B_c_rev", reverse(o)))
        out.append(("B_r", apply_block_permutation(o, e)))
        out.append(("B_r_rev", apply_block_permutation(reverse(o), e)))
    return tuple(out)


@lru_cache(maxsize=None)
def _serial_key_tables(m: int):
    eq: Dict[tuple, Tuple[str, PivotSequence]] = {}
    weak: Dict[tuple, List[Tuple[str, PivotSequence]]] = {}
    for kind, o in serial_members(m):
        eq.setdefault(equivalence_key(o), (kind, o))
        weak.setdefault(weak_key(o), []).append((kind, o))
    return eq, weak


def _find_cyclic_witness(kind: str, o: PivotSequence) -> Optional[Witness]:
    m = o.m
    if kind in SERIAL_BASES:
        return Witness(kind, kind, o, identity_permutation(m), 0) if base_membership(kind, o) else None
    if kind == "B_sp":
        base = serial_base_kind(o)
        return Witness(kind, base, o, identity_permutation(m), 0) if base else None
    if m > CYCLIC_SEARCH_LIMIT:
        raise UnsupportedSize(
            f"{kind} recognition searches all relabelings; m <= {CYCLIC_SEARCH_LIMIT}"
        )
    eq, weak = _serial_key_tables(m)
    best: Optional[Witness] = None
    for s in itertools.permutations(range(1, m + 1)):
        cand = apply_block_permutation(o, s)
        q = inverse_permutation(s)
        hit = eq.get(equivalence_key(cand))
        if hit is not None:
            chain = [] if cand == hit[1] else [("equiv", hit[1])]
            return Witness(kind, hit[0], hit[1], q, 0, chain)
        if kind == "B_sg":
            for base_kind, base in weak.get(weak_key(cand), []):
                chain = are_weak_equivalent(cand, base)
                if chain is not None and (best is None or chain.d < best.d):
                    best = Witness(kind, base_kind, base, q, chain.d, chain.links)
    return best


def _find_bar_witness(kind: str, o: PivotSequence, max_states: int) -> Optional[Witness]:
    m = o.m
    if kind in ("barB_c", "barB_c_rev", "barB_r", "barB_r_rev"):
        if base_membership(kind, o):
            return Witness(kind, kind, o, identity_permutation(m), 0)
        return None
    if kind == "barB_sp":
        base = serial_base_kind(o, bar=True)
        return Witness(kind, base, o, identity_permutation(m), 0) if base else None
    if m > SEARCH_LIMIT:
        raise UnsupportedSize(f"{kind} recognition searches all relabelings; m <= {SEARCH_LIMIT}")
    perms = list(itertools.permutations(range(1, m + 1)))
    if kind == "barB_spg":
        windows: Iterable[Tuple[int, PivotSequence]] = [(0, o)]
    else:
        windows = weak_windows(o, max_states=max_states)
    for d, win in windows:
        for s in perms:
            cand = apply_block_permutation(win, s)
            base_kind = serial_base_kind(cand, commute=True, bar=True)
            if base_kind is None:
                continue
            q = inverse_permutation(s)
            base = _bar_representative(cand, base_kind)
            start = apply_block_permutation(o, s)
            if d == 0:
                chain = [] if start == base else [("equiv", base)]
                return Witness(kind, base_kind, base, q, 0, chain)
            wc = are_weak_equivalent(start, base)
            if wc is None:  # pragma: no cover - the window came from o itself
                continue
            return Witness(kind, base_kind, base, q, wc.d, wc.links)
    return None


def _bar_representative(cand: PivotSequence, base_kind: str) -> PivotSequence:
    """A structural member of ``base_kind`` equivalent to ``cand``."""
    m = cand.m
    e = reversal_permutation(m)
    name = base_kind[3:]
    view = {
        "B_c": cand,
        "B_c_rev": reverse(cand),
        "B_r": apply_block_permutation(cand, e),
        "B_r_rev": apply_block_permutation(reverse(cand), e),
    }[name]
    col = PivotSequence(m, tuple(_column_parse_order(view.pairs, m)))
    return {
        "B_c": col,
        "B_c_rev": reverse(col),
        "B_r": apply_block_permutation(col, e),
        "B_r_rev": reverse(apply_block_permutation(col, e)),
    }[name]


def _column_parse_order(pairs: Sequence[Pair], m: int) -> List[Pair]:
    rest = list(pairs)
    out: List[Pair] = []

    def take(allowed):
        seen_idx: set = set()
        for k, a in enumerate(rest):
            if a[0] not in seen_idx and a[1] not in seen_idx and allowed(a):
                return k
            seen_idx.update(a)
        return None

    for j in range(2, m + 1):
        need = {(i, j) for i in range(1, j)}
        while need:
            k = take(lambda a: a in need)
            a = rest.pop(k)
            need.discard(a)
            out.append(a)
        if j >= 3:
            used: set = set()
            while True:
                k = take(lambda a: a[1] <= j and a not in used)
                if k is None:
                    break
                a = rest.pop(k)
                used.add(a)
                out.append(a)
    return out


def find_witness(kind: str, o: PivotSequence, max_states: int = 200_000) -> Optional[Witness]:
    """Membership witness for ``o`` in ``kind``, or None."""
    if kind not in CYCLIC_KINDS + BAR_KINDS:
        raise InvalidKind(f"unknown class {kind!r}")
    if not o.covers():
        return None
    if kind in CYCLIC_KINDS:
        if not o.is_cyclic:
            return None
        return _find_cyclic_witness(kind, o)
    if 2 * o.M <= o.T and o.M > 0:
        return None
    return _find_bar_witness(kind, o, max_states)


def recognize_class(kind: str, o: PivotSequence) -> bool:
    return find_witness(kind, o) is not None


# -- generators --------------------------------------------------------------


def _random_bc(m: int, rng: np.random.Generator) -> PivotSequence:
    pairs: List[Pair] = [(1, 2)] if m >= 2 else []
    for j in range(3, m + 1):
        pairs.extend((int(i) + 1, j) for i in rng.permutation(j - 1))
    return PivotSequence(m, tuple(pairs))


def _random_bar_bc(m: int, rng: np.random.Generator, extra: Optional[int]) -> PivotSequence:
    M = m * (m - 1) // 2
    if m < 3:
        return _random_bc(m, rng)
    budget = int(rng.integers(0, M)) if extra is None else int(extra)
    if not 0 <= budget < M:
        raise ValueError(f"extra steps must lie in 0..{M - 1}")
    cap = {j: j * (j - 1) // 2 for j in range(3, m + 1)}
    if budget > sum(cap.values()):
        raise ValueError("too many extra steps for this m")
    # spread the budget over segments 3..m, respecting each segment's size
    sizes = {j: 0 for j in range(3, m + 1)}
    left = budget
    while left:
        j = int(rng.integers(3, m + 1))
        if sizes[j] < cap[j]:
            sizes[j] += 1
            left -= 1
    pairs: List[Pair] = [(1, 2)]
    for j in range(3, m + 1):
        pairs.extend((int(i) + 1, j) for i in rng.permutation(j - 1))
        pool = [(a, b) for b in range(2, j + 1) for a in range(1, b)]
        pick = rng.permutation(len(pool))[: sizes[j]]
        pairs.extend(pool[int(k)] for k in pick)
    return PivotSequence(m, tuple(pairs))


def _as_kind(base: PivotSequence, name: str) -> PivotSequence:
    e = reversal_permutation(base.m)
    return {
        "B_c": base,
        "B_c_rev": reverse(base),
        "B_r": apply_block_permutation(base, e),
        "B_r_rev": reverse(apply_block_permutation(base, e)),
    }[name]


def _random_equivalent(o: PivotSequence, rng: np.random.Generator, moves: int) -> PivotSequence:
    for _ in range(moves):
        spots = admissible_positions(o)
        if not spots:
            break
        o = admissible_transposition(o, int(spots[int(rng.integers(len(spots)))]))
    return o


def sample_member(
    kind: str,
    m: int,
    rng: np.random.Generator,
    shifts: Optional[int] = None,
    extra: Optional[int] = None,
) -> Tuple[PivotSequence, Witness]:
    """Random member of ``kind`` together with the witness used to build it.

    ``shifts`` fixes the number of rotations for B_sg / barB_sg (default:
    random in 0..2); ``extra`` fixes the number of repeated steps of the
    quasi-cyclic kinds (default: random, keeping length below 2M).
    """
    if kind not in GENERATOR_KINDS + ("barB_r", "barB_c_rev", "barB_r_rev"):
        raise InvalidKind(f"unknown class {kind!r}")
    if m < 2:
        raise ValueError("need m >= 2")
    bar = kind.startswith("bar")
    core = kind[3:] if bar else kind
    ident = identity_permutation(m)
    if core in SERIAL_BASES:
        name = core
    else:
        name = SERIAL_BASES[int(rng.integers(4))]
    col = _random_bar_bc(m, rng, extra) if bar else _random_bc(m, rng)
    base = _as_kind(col, name)
    base_kind = ("bar" + name) if bar else name
    if core in SERIAL_BASES or core == "B_sp":
        return base, Witness(kind, base_kind, base, ident, 0)
    moves = 2 * base.T
    links: List[tuple] = []
    cur = base
    d = 0
    if core == "B_sg":
        d = int(rng.integers(0, 3)) if shifts is None else int(shifts)
        for _ in range(d):
            nxt = _random_equivalent(cur, rng, moves)
            if nxt != cur:
                links.append(("equiv", nxt))
            r = int(rng.integers(1, max(cur.T, 2)))
            cur = rotate(nxt, r)
            links.append(("shift", cur, r))
    nxt = _random_equivalent(cur, rng, moves)
    if nxt != cur:
        links.append(("equiv", nxt))
    cur = nxt
    q = tuple(int(v) + 1 for v in rng.permutation(m))
    o = apply_block_permutation(cur, q)
    # the chain runs from o(q^-1) to base, so invert the construction
    chain = _reverse_chain(cur, base, links)
    return o, Witness(kind, base_kind, base, q, d, chain)


def _reverse_chain(start: PivotSequence, base: PivotSequence, links: List[tuple]) -> List[tuple]:
    """Turn a chain base -> ... -> start into start -> ... -> base."""
    seqs = [base] + [l[1] for l in links]
    out: List[tuple] = []
    for k in range(len(links) - 1, -1, -1):
        link = links[k]
        prev = seqs[k]
        if link[0] == "equiv":
            out.append(("equiv", prev))
        else:
            out.append(("shift", prev, (prev.T - link[2]) % prev.T))
    return out


def generate_class(kind: str, m: int, seed=None, shifts: Optional[int] = None,
                   extra: Optional[int] = None) -> PivotSequence:
    """Random member of a strategy class (see :func:`sample_member`)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return sample_member(kind, m, rng, shifts=shifts, extra=extra)[0]
