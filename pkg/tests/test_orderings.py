from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bjlab.errors import InvalidKind, NotAdmissible, NotCyclic, UnsupportedSize
from bjlab.orderings import (
    BAR_KINDS,
    CYCLIC_KINDS,
    GENERATOR_KINDS,
    PivotSequence,
    WeakChain,
    admissible_positions,
    admissible_transposition,
    all_cyclic_orderings,
    apply_block_permutation,
    are_equivalent,
    are_shift_equivalent,
    are_weak_equivalent,
    column_ordering,
    compose,
    equivalence_bfs,
    find_witness,
    from_ordering_matrix,
    generate_class,
    inverse_permutation,
    ordering_matrix,
    recognize_class,
    render_ordering_matrix,
    reversal_permutation,
    reverse,
    rotate,
    row_ordering,
    sample_member,
    weak_equivalence_bfs,
)

X = -1

# displays copied from the worked examples
ROW_REV_5 = [[X, 9, 8, 7, 6], [9, X, 5, 4, 3], [8, 5, X, 2, 1], [7, 4, 2, X, 0], [6, 3, 1, 0, X]]
COL_REV_5 = [[X, 9, 8, 6, 3], [9, X, 7, 5, 2], [8, 7, X, 4, 1], [6, 5, 4, X, 0], [3, 2, 1, 0, X]]
EX26_O = [[X, 0, 4, 5], [0, X, 1, 2], [4, 1, X, 3], [5, 2, 3, X]]
EX26_OT = [[X, 5, 3, 2], [5, X, 4, 0], [3, 4, X, 1], [2, 0, 1, X]]
BC6 = [[X, 0, 2, 4, 9, 12], [0, X, 1, 5, 8, 10], [2, 1, X, 3, 7, 13],
       [4, 5, 3, X, 6, 11], [9, 8, 7, 6, X, 14], [12, 10, 13, 11, 14, X]]
BC6_SCRAMBLE = [[X, 7, 9, 0, 2, 5], [7, X, 10, 13, 14, 6], [9, 10, X, 11, 12, 8],
                [0, 13, 11, X, 1, 4], [2, 14, 12, 1, X, 3], [5, 6, 8, 4, 3, X]]
BC6_REV = [[X, 14, 12, 10, 5, 2], [14, X, 13, 9, 6, 4], [12, 13, X, 11, 7, 1],
           [10, 9, 11, X, 8, 3], [5, 6, 7, 8, X, 0], [2, 4, 1, 3, 0, X]]
BR6_REV = [[X, 4, 3, 2, 1, 0], [4, X, 5, 8, 7, 6], [3, 5, X, 9, 11, 10],
           [2, 8, 9, X, 13, 12], [1, 7, 11, 13, X, 14], [0, 6, 10, 12, 14, X]]
# the printed B_r member has an inconsistent lower triangle; its upper triangle is used
BR6 = [[X, 11, 13, 12, 10, 14], [10, X, 9, 7, 6, 8], [11, 9, X, 5, 3, 4],
       [12, 6, 5, X, 1, 2], [13, 7, 3, 1, X, 0], [14, 8, 4, 2, 0, X]]
BR6_SCRAMBLE = [[X, 14, 1, 0, 11, 2], [14, X, 13, 10, 7, 12], [1, 13, X, 9, 6, 8],
                [0, 10, 9, X, 4, 5], [11, 7, 6, 4, X, 3], [2, 12, 8, 5, 3, X]]


def seq(*pairs, m=None) -> PivotSequence:
    return PivotSequence(m or max(j for _, j in pairs), tuple(pairs))


def random_cyclic(m: int, rng: np.random.Generator) -> PivotSequence:
    pairs = list(column_ordering(m).pairs)
    return PivotSequence(m, tuple(pairs[k] for k in rng.permutation(len(pairs))))


def random_perm(m: int, rng: np.random.Generator):
    return tuple(int(v) + 1 for v in rng.permutation(m))


class TestPivotSequence:
    def test_properties(self):
        o = row_ordering(4)
        assert (o.T, o.M) == (6, 6)
        assert o.is_cyclic and o.is_quasi_cyclic
        q = PivotSequence(3, ((1, 2), (1, 3), (2, 3), (1, 2)))
        assert not q.is_cyclic and q.is_quasi_cyclic
        assert not PivotSequence(3, ((1, 2), (1, 3))).covers()

    def test_rejects_bad_pairs(self):
        with pytest.raises(ValueError):
            PivotSequence(3, ((2, 1),))
        with pytest.raises(ValueError):
            PivotSequence(3, ((1, 4),))

    def test_parse_round_trip(self):
        o = row_ordering(4)
        assert PivotSequence.parse(str(o)) == o
        assert PivotSequence.parse("(2,1),(1,3),(2,3)") == seq((1, 2), (1, 3), (2, 3))
        with pytest.raises(ValueError):
            PivotSequence.parse("pairs:(1,1)")
        with pytest.raises(ValueError):
            PivotSequence.parse("pairs:(1,2) junk")


class TestAdmissibleTransposition:
    def test_disjoint_swap(self):
        o = seq((1, 3), (1, 2), (3, 4), (2, 4), (1, 4), (2, 3))
        assert admissible_transposition(o, 1).pairs[1:3] == ((3, 4), (1, 2))

    def test_shared_index(self):
        with pytest.raises(NotAdmissible):
            admissible_transposition(seq((1, 2), (1, 3), (2, 3)), 0)

    def test_positions_scan(self):
        o = row_ordering(5)
        scan = [r for r in range(o.T - 1) if not set(o.pairs[r]) & set(o.pairs[r + 1])]
        assert admissible_positions(o) == scan
        for r in range(o.T - 1):
            if r in scan:
                admissible_transposition(o, r)
            else:
                with pytest.raises(NotAdmissible):
                    admissible_transposition(o, r)

    def test_out_of_range(self):
        with pytest.raises((NotAdmissible, IndexError, ValueError)):
            admissible_transposition(row_ordering(3), 2)


class TestReverse:
    def test_single(self):
        assert reverse(seq((1, 2))) == seq((1, 2))

    def test_row_reverse_display(self):
        np.testing.assert_array_equal(ordering_matrix(reverse(row_ordering(5))), ROW_REV_5)

    def test_column_reverse_display(self):
        np.testing.assert_array_equal(ordering_matrix(reverse(column_ordering(5))), COL_REV_5)

    @given(st.integers(2, 6), st.integers(0, 2**32 - 1))
    def test_involution(self, m, s):
        o = random_cyclic(m, np.random.default_rng(s))
        assert reverse(reverse(o)) == o

    def test_reverse_is_not_relabeling(self):
        for mat in (BC6, BC6_REV, BR6_REV):
            o = from_ordering_matrix(mat)
            assert reverse(o) != apply_block_permutation(o, reversal_permutation(6))


class TestBlockPermutation:
    def test_identity(self):
        o = row_ordering(4)
        assert apply_block_permutation(o, (1, 2, 3, 4)) == o

    def test_relabel_display(self):
        o = seq((1, 2), (2, 3), (2, 4), (3, 4), (1, 3), (1, 4))
        expected = seq((2, 4), (3, 4), (1, 4), (1, 3), (2, 3), (1, 2))
        out = apply_block_permutation(o, (2, 4, 3, 1))
        assert out == expected
        np.testing.assert_array_equal(ordering_matrix(o), EX26_O)
        np.testing.assert_array_equal(ordering_matrix(out), EX26_OT)

    @settings(max_examples=40)
    @given(st.integers(2, 6), st.integers(0, 2**32 - 1))
    def test_group_action(self, m, s):
        rng = np.random.default_rng(s)
        o = random_cyclic(m, rng)
        q1, q2 = random_perm(m, rng), random_perm(m, rng)
        assert apply_block_permutation(apply_block_permutation(o, q1), q2) == apply_block_permutation(o, compose(q2, q1))
        assert apply_block_permutation(apply_block_permutation(o, q1), inverse_permutation(q1)) == o

    @settings(max_examples=40)
    @given(st.integers(2, 6), st.integers(0, 2**32 - 1))
    def test_ordering_matrix_conjugation(self, m, s):
        rng = np.random.default_rng(s)
        o = random_cyclic(m, rng)
        q = random_perm(m, rng)
        big_q = np.zeros((m, m), dtype=int)
        for a in range(m):
            big_q[q[a] - 1, a] = 1
        np.testing.assert_array_equal(ordering_matrix(apply_block_permutation(o, q)),
                                      big_q @ ordering_matrix(o) @ big_q.T)


class TestOrderingMatrix:
    def test_row_m3(self):
        np.testing.assert_array_equal(ordering_matrix(row_ordering(3)), [[X, 0, 1], [0, X, 2], [1, 2, X]])

    def test_render(self):
        assert render_ordering_matrix(row_ordering(3)).split() == ["*", "0", "1", "0", "*", "2", "1", "2", "*"]

    def test_not_cyclic(self):
        with pytest.raises(NotCyclic):
            ordering_matrix(PivotSequence(3, ((1, 2), (1, 3))))

    def test_bc6_display_member(self):
        o = from_ordering_matrix(BC6)
        np.testing.assert_array_equal(ordering_matrix(o), BC6)
        assert recognize_class("B_c", o)
        assert o.pairs[:3] == ((1, 2), (2, 3), (1, 3))

    def test_asymmetric_display_rejected_unless_upper_only(self):
        with pytest.raises(ValueError):
            from_ordering_matrix(BR6)
        assert recognize_class("B_r", from_ordering_matrix(BR6, check_symmetry=False))

    @given(st.integers(2, 6), st.integers(0, 2**32 - 1))
    def test_round_trip(self, m, s):
        o = random_cyclic(m, np.random.default_rng(s))
        assert from_ordering_matrix(ordering_matrix(o)) == o


class TestEquivalence:
    def test_reflexive(self):
        assert are_equivalent(row_ordering(4), row_ordering(4))

    def test_one_move(self):
        o = seq((1, 3), (1, 2), (3, 4), (2, 4), (1, 4), (2, 3))
        assert are_equivalent(o, admissible_transposition(o, 1))

    def test_criterion_matches_bfs_m4(self):
        base = row_ordering(4)
        for o in all_cyclic_orderings(4):
            assert are_equivalent(o, base) == equivalence_bfs(o, base)

    def test_quasi_cyclic_against_bfs(self, rng):
        o = PivotSequence(4, row_ordering(4).pairs + ((1, 2), (3, 4)))
        for _ in range(20):
            cand = PivotSequence(4, tuple(o.pairs[k] for k in rng.permutation(o.T)))
            assert are_equivalent(o, cand) == equivalence_bfs(o, cand)

    def test_bfs_size_limit(self):
        with pytest.raises(UnsupportedSize):
            equivalence_bfs(row_ordering(6), column_ordering(6))

    def test_reverse_preserves_equivalence_m4(self):
        base = column_ordering(4)
        for o in all_cyclic_orderings(4):
            assert are_equivalent(o, base) == are_equivalent(reverse(o), reverse(base))


class TestShiftEquivalence:
    def test_zero(self):
        assert are_shift_equivalent(row_ordering(4), row_ordering(4)) == 0

    def test_one(self):
        o = row_ordering(3)
        assert are_shift_equivalent(o, rotate(o, 1)) == 1

    @given(st.integers(2, 6), st.integers(0, 2**32 - 1))
    def test_recovers_shift(self, m, s):
        rng = np.random.default_rng(s)
        o = random_cyclic(m, rng)
        r = int(rng.integers(0, o.T))
        assert are_shift_equivalent(o, rotate(o, r)) == r

    def test_absent(self):
        assert are_shift_equivalent(row_ordering(4), column_ordering(4)) is None


class TestWeakEquivalence:
    def test_self(self):
        chain = are_weak_equivalent(row_ordering(4), row_ordering(4))
        assert chain is not None and chain.d == 0

    def test_rotation(self):
        o = row_ordering(5)
        chain = are_weak_equivalent(o, rotate(o, 3))
        assert chain.d == 1 and chain.verify(o, rotate(o, 3))

    def test_decision_matches_bfs_m4(self):
        base = row_ordering(4)
        for o in all_cyclic_orderings(4):
            chain = are_weak_equivalent(o, base)
            assert (chain is not None) == weak_equivalence_bfs(o, base)
            if chain is not None:
                assert chain.verify(o, base)

    def test_lemma_reverse_iff_m4(self):
        pool = list(all_cyclic_orderings(4))
        rng = np.random.default_rng(24)
        for k in rng.choice(len(pool), 60, replace=False):
            for base in (row_ordering(4), pool[int(k) // 2]):
                o = pool[int(k)]
                left = are_weak_equivalent(o, base) is not None
                right = are_weak_equivalent(reverse(o), reverse(base)) is not None
                assert left == right

    def test_chain_rejects_wrong_target(self):
        o = row_ordering(4)
        chain = WeakChain([("shift", rotate(o, 1), 1)], 1)
        assert chain.verify(o, rotate(o, 1))
        assert not chain.verify(o, rotate(o, 2))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(3, 5), st.integers(0, 2**32 - 1))
    def test_transitive_on_samples(self, m, s):
        rng = np.random.default_rng(s)
        o1 = random_cyclic(m, rng)
        o2 = rotate(admissible_transposition(o1, admissible_positions(o1)[0]) if admissible_positions(o1) else o1, 2)
        o3 = rotate(o2, 1)
        assert are_weak_equivalent(o1, o2) is not None
        assert are_weak_equivalent(o2, o3) is not None
        assert are_weak_equivalent(o1, o3) is not None
        assert are_weak_equivalent(o3, o1) is not None


class TestClasses:
    def test_bc_m3(self):
        allowed = {((1, 2), (1, 3), (2, 3)), ((1, 2), (2, 3), (1, 3))}
        for s in range(10):
            assert generate_class("B_c", 3, s).pairs in allowed

    def test_serial_orderings(self):
        # B_r members start with (m-1, m); the top-down row ordering is the
        # reverse of the e~-image of the column ordering
        for m in range(3, 7):
            e = reversal_permutation(m)
            assert recognize_class("B_c", column_ordering(m))
            assert recognize_class("B_r", apply_block_permutation(column_ordering(m), e))
            assert reverse(row_ordering(m)) == apply_block_permutation(column_ordering(m), e)
            assert recognize_class("B_r_rev", row_ordering(m))
            assert not recognize_class("B_r", row_ordering(m))
            assert recognize_class("B_sp", row_ordering(m))

    def test_scrambled_displays_in_bsg(self):
        for mat in (BC6_SCRAMBLE, BR6_SCRAMBLE):
            o = from_ordering_matrix(mat)
            w = find_witness("B_sg", o)
            assert w is not None and w.verify(o)

    def test_reverse_displays(self):
        assert recognize_class("B_c_rev", from_ordering_matrix(BC6_REV))
        assert recognize_class("B_r_rev", from_ordering_matrix(BR6_REV))

    def test_non_covering(self):
        o = PivotSequence(4, ((1, 2), (1, 3), (2, 3), (1, 4), (2, 4), (1, 2)))
        for kind in CYCLIC_KINDS + BAR_KINDS:
            assert not recognize_class(kind, o)

    def test_unknown_kind(self):
        with pytest.raises(InvalidKind):
            generate_class("B_x", 4, 0)
        with pytest.raises(InvalidKind):
            recognize_class("B_x", row_ordering(4))

    @pytest.mark.parametrize("kind", GENERATOR_KINDS)
    @pytest.mark.parametrize("m", [2, 3, 4, 5])
    def test_generated_members_recognized(self, kind, m):
        rng = np.random.default_rng(1000 * m + len(kind))
        for _ in range(8):
            o, w = sample_member(kind, m, rng)
            assert w.verify(o)
            assert w.reshaped().verify(o)
            assert w.reshaped().reshaped().verify(o)
            assert recognize_class(kind, o)

    def test_bar_structure(self, rng):
        # each column segment is complete before its repeats begin
        for _ in range(30):
            o = generate_class("barB_c", 4, rng, extra=3)
            assert o.T == 9
            seen = set()
            for (i, j) in o.pairs:
                if j > 2:
                    assert all((a, b) in seen or b == j for b in range(2, j) for a in range(1, b))
                if (i, j) in seen:
                    assert all((a, j) in seen for a in range(1, j))
                seen.add((i, j))
            assert recognize_class("barB_c", o)

    def test_bar_length_below_2m(self, rng):
        for kind in ("barB_c", "barB_sp", "barB_spg", "barB_sg"):
            for m in (3, 4, 5):
                o = generate_class(kind, m, rng)
                assert o.is_quasi_cyclic and o.T < 2 * o.M

    def test_class_inclusions(self, rng):
        for _ in range(10):
            o = generate_class("B_spg", 5, rng)
            assert recognize_class("B_sg", o)
            o = generate_class("B_sp", 5, rng)
            assert recognize_class("B_spg", o)

    def test_class_count_m4(self):
        members = [o for o in all_cyclic_orderings(4) if recognize_class("B_sg", o)]
        closure = _closure_m4()
        assert set(members) == closure


def _closure_m4():
    from bjlab.orderings import serial_members

    seen = {o for _, o in serial_members(4)}
    frontier = list(seen)
    perms = list(itertools.permutations(range(1, 5)))
    while frontier:
        nxt = []
        for o in frontier:
            nb = [admissible_transposition(o, k) for k in admissible_positions(o)]
            nb.append(rotate(o, 1))
            nb.extend(apply_block_permutation(o, q) for q in perms)
            for x in nb:
                if x not in seen:
                    seen.add(x)
                    nxt.append(x)
        frontier = nxt
    return seen
