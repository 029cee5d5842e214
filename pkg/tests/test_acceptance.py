"""Acceptance criteria 1-11, each at its stated tolerance and sample size.

Every criterion prints one ``criterion N: PASS`` or ``criterion N: FAIL``
line; the lines are also collected into the terminal summary.
"""

from __future__ import annotations

import functools
import itertools
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_RESULTS, random_symmetric

from bjlab.annihilators import (
    Annihilator,
    annihilator_transpose,
    assemble_by_columns,
    build_operator,
    carry_factors,
    check_permutation_conjugation,
    materialize_annihilator,
    operator_norm,
    product_of_operators,
)
from bjlab.block_jacobi import SolverConfig, enforce_ubc, is_monotone, solve, sweep_ratios
from bjlab.bounds import eta_elementwise_exact, eta_for_witness
from bjlab.jjacobi import JSignature, check_A_assumptions, jjacobi_solve, random_spd
from bjlab.linalg import jacobi_eigensolve, off_norm, random_orthogonal, spectral_norm
from bjlab.orderings import (
    GENERATOR_KINDS,
    admissible_positions,
    admissible_transposition,
    all_cyclic_orderings,
    apply_block_permutation,
    are_equivalent,
    find_witness,
    recognize_class,
    rotate,
    sample_member,
    serial_members,
)
from bjlab.partition import Partition

SLACK = 1e-12


def criterion(number: int, title: str, budget: float):
    """Record PASS/FAIL (with runtime against its budget) for one criterion test."""

    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            start = time.perf_counter()
            status, detail = "PASS", ""
            try:
                detail = fn(*args, **kwargs) or ""
            except BaseException as exc:
                status, detail = "FAIL", str(exc).splitlines()[0] if str(exc) else type(exc).__name__
                raise
            finally:
                elapsed = time.perf_counter() - start
                if status == "PASS" and elapsed > budget:
                    status, detail = "FAIL", f"runtime {elapsed:.1f}s over {budget:.0f}s; {detail}"
                line = f"criterion {number}: {status} {title} ({elapsed:.1f}s) {detail}".rstrip()
                ACCEPTANCE_RESULTS.setdefault((number, fn.__name__), []).append(line)
                print(line)
            assert elapsed <= budget, f"runtime {elapsed:.1f}s over budget {budget}s"

        return run

    return wrap


def ubc_factor(p: Partition, pair, rng) -> np.ndarray:
    i, j = pair
    return enforce_ubc(random_orthogonal(p.size(i) + p.size(j), rng), p.size(i), 1.0).hat_u


def worst_ratio(p: Partition, o, witness, matrices, sweeps: int = 1):
    cfg = SolverConfig(p, o, ubc_mode="always", rho=1.0)
    eta = eta_for_witness(p, 1.0, witness)
    worst = max(sweep_ratios(a, cfg, sweeps)[0] for a in matrices)
    return worst, eta


# -- 1 -----------------------------------------------------------------------


@criterion(1, "element-wise constants 3/4 and 27/28", 10)
def test_criterion_1_elementwise_constants():
    rng = np.random.default_rng(101)
    out = []
    for n, expected in ((3, 0.75), (4, 27 / 28)):
        assert float(eta_elementwise_exact(n)) == expected
        members = [o for o in all_cyclic_orderings(n) if recognize_class("B_c", o)]
        assert len(members) == {3: 2, 4: 12}[n]
        mats = [random_symmetric(n, rng) for _ in range(1000)]
        p = Partition((1,) * n)
        worst = 0.0
        for o in members:
            cfg = SolverConfig(p, o, ubc_mode="always", rho=1.0)
            worst = max(worst, max(sweep_ratios(a, cfg)[0] for a in mats))
        assert worst <= expected + SLACK, f"n={n}: ratio {worst} above {expected}"
        out.append(f"n={n} max ratio {worst:.4f} <= {expected:.4f}")
    return "; ".join(out)


# -- 2 -----------------------------------------------------------------------

CRIT2_PARTITIONS = [(1, 1, 1), (2, 1, 2), (3, 3, 4), (1, 4, 2), (1, 1, 1, 1), (2, 2, 2, 2),
                    (3, 2, 1, 2), (1, 3, 3, 3), (4, 1, 1, 2)]
CRIT2_KINDS = ("B_c", "B_r", "B_c_rev", "B_r_rev", "B_sp")


@criterion(2, "block one-sweep contraction", 60)
def test_criterion_2_one_sweep_bound():
    rng = np.random.default_rng(202)
    margin = np.inf
    cases = 0
    for sizes in CRIT2_PARTITIONS:
        p = Partition(sizes)
        mats = [random_symmetric(p.n, rng) for _ in range(100)]
        for kind in CRIT2_KINDS:
            o, w = sample_member(kind, p.m, rng)
            worst, eta = worst_ratio(p, o, w, mats)
            assert worst <= eta + SLACK, f"{kind} {sizes} {o}: {worst} > {eta}"
            margin = min(margin, eta - worst)
            cases += 1
    return f"{cases} strategy/partition cases x 100 matrices, min margin {margin:.3e}"


# -- 3 -----------------------------------------------------------------------


@criterion(3, "generalized serial (d+1)-sweep bound", 60)
def test_criterion_3_generalized_serial():
    rng = np.random.default_rng(303)
    sizes = [(2, 1, 2), (1, 2, 3), (2, 2, 2, 2), (3, 2, 1, 2), (1, 1, 2, 1)]
    specs = [("B_spg", None), ("B_sg", 1), ("B_sg", 2)]
    seen_d = set()
    for case in range(50):
        p = Partition(sizes[case % len(sizes)])
        kind, shifts = specs[case % 3]
        o, w = sample_member(kind, p.m, rng, shifts=shifts)
        assert w.d == (shifts or 0)
        seen_d.add(w.d)
        mats = [random_symmetric(p.n, rng) for _ in range(4)]
        worst, eta = worst_ratio(p, o, w, mats, sweeps=w.d + 1)
        assert worst <= eta + SLACK, f"{kind} d={w.d} {p.sizes}: {worst} > {eta}"
    assert seen_d == {0, 1, 2}
    return "50 cases with d in {0, 1, 2}"


# -- 4 -----------------------------------------------------------------------


@criterion(4, "quasi-cyclic one-quasi-sweep bound", 30)
def test_criterion_4_quasi_cyclic():
    rng = np.random.default_rng(404)
    sizes = [(1, 1, 1), (2, 1, 2), (2, 2, 2, 2), (1, 3, 1, 2), (2, 3)]
    for case in range(50):
        p = Partition(sizes[case % len(sizes)])
        o, w = sample_member("barB_c", p.m, rng)
        assert o.is_quasi_cyclic and o.T < 2 * o.M
        assert recognize_class("barB_c", o)
        mats = [random_symmetric(p.n, rng) for _ in range(4)]
        worst, eta = worst_ratio(p, o, w, mats)
        assert worst <= eta + SLACK, f"{p.sizes} {o}: {worst} > {eta}"
    return "50 cases"


# -- 5 / 6 -------------------------------------------------------------------

STRUCTURE_PARTITIONS = [(1, 1, 1), (2, 1, 2), (2, 2, 2, 2), (3, 2, 1, 2)]


def structure_samples():
    rng = np.random.default_rng(505)
    for sizes in STRUCTURE_PARTITIONS + [(2, 3)]:
        p = Partition(sizes)
        for pair in itertools.combinations(range(1, p.m + 1), 2):
            k = p.size(pair[0]) + p.size(pair[1])
            for _ in range(10):
                yield p, pair, random_orthogonal(k, rng)


def example_pattern(u: np.ndarray) -> np.ndarray:
    """Annihilator of pivot (1,2) on four 2x2 blocks, written out block by block."""
    u11, u12, u21, u22 = u[:2, :2], u[:2, 2:], u[2:, :2], u[2:, 2:]
    i2 = np.eye(2)
    out = np.zeros((24, 24))
    for lo in (4, 12):
        out[lo:lo + 4, lo:lo + 4] = np.kron(i2, u11.T)
        out[lo:lo + 4, lo + 4:lo + 8] = np.kron(i2, u21.T)
        out[lo + 4:lo + 8, lo:lo + 4] = np.kron(i2, u12.T)
        out[lo + 4:lo + 8, lo + 4:lo + 8] = np.kron(i2, u22.T)
    out[20:, 20:] = np.eye(4)
    return out


@criterion(5, "annihilator structure", 30)
def test_criterion_5_annihilator_structure():
    count = 0
    for p, pair, u in structure_samples():
        dense = materialize_annihilator(p, pair, u)
        cols = assemble_by_columns(Annihilator(p, pair, u))
        assert np.max(np.abs(dense - cols)) <= 1e-13
        if p.m == 2:
            assert not np.any(dense)
        else:
            assert abs(spectral_norm(dense) - 1.0) <= 1e-10
        count += 1
    p = Partition((2, 2, 2, 2))
    assert p.K == 24
    u = random_orthogonal(4, np.random.default_rng(9))
    got = materialize_annihilator(p, (1, 2), u)
    expected = example_pattern(u)
    assert np.array_equal(got != 0, expected != 0)
    np.testing.assert_allclose(got, expected, atol=1e-15)
    return f"{count} annihilators, K=24 mask exact"


@criterion(6, "transpose closure", 10)
def test_criterion_6_transpose_closure():
    worst = 0.0
    for p, pair, u in structure_samples():
        r = Annihilator(p, pair, u)
        lhs = materialize_annihilator(p, pair, u.T)
        worst = max(worst, float(np.max(np.abs(lhs - r.materialize().T))) if lhs.size else 0.0)
        worst = max(worst, float(np.max(np.abs(annihilator_transpose(r).materialize() - lhs)))
                    if lhs.size else 0.0)
    assert worst <= 1e-14, f"max deviation {worst}"
    return f"max deviation {worst:.1e}"


# -- 7 -----------------------------------------------------------------------

CRIT7_CASES = [((1, 1, 1), "B_c"), ((2, 3, 2), "B_r"), ((2, 1, 2), "B_c_rev"), ((3, 2, 2), "B_r_rev"),
               ((1, 1, 1, 1), "B_sp"), ((2, 2, 2, 2), "B_spg"), ((2, 1, 2, 1), "B_sg"),
               ((3, 2, 1, 2), "B_sp"), ((2, 2, 1, 1), "B_c")]


@criterion(7, "operator norms below mu", 120)
def test_criterion_7_operator_norms():
    rng = np.random.default_rng(707)
    tightest = np.inf
    for sizes, kind in CRIT7_CASES:
        p = Partition(sizes)
        assert p.K <= 200
        o, w = sample_member(kind, p.m, rng, shifts=1 if kind == "B_sg" else None)
        mu = float(np.sqrt(eta_for_witness(p, 1.0, w)))
        worst = 0.0
        for _ in range(200):
            ops = [build_operator(p, o, [ubc_factor(p, pair, rng) for pair in o.pairs])
                   for _ in range(w.d + 1)]
            worst = max(worst, operator_norm(product_of_operators(ops)))
        assert worst <= mu + 1e-9, f"{kind} {sizes}: {worst} > {mu}"
        assert worst < 1.0
        tightest = min(tightest, mu - worst)
    return f"{len(CRIT7_CASES)} classes x 200 samples, min margin {tightest:.3e}"


# -- 8 -----------------------------------------------------------------------


@criterion(8, "equivalence theorems, m=4 exhaustive", 60)
def test_criterion_8_equivalence():
    rng = np.random.default_rng(808)
    p = Partition((2, 1, 1, 2))
    a0 = random_symmetric(p.n, rng)
    op_dev = drv_dev = 0.0
    pairs = 0
    for o in all_cyclic_orderings(4):
        us = [ubc_factor(p, pair, rng) for pair in o.pairs]
        j1 = build_operator(p, o, us).materialize()
        _, end1 = sweep_ratios(a0, SolverConfig(p, o))
        for r in admissible_positions(o):
            o2 = admissible_transposition(o, r)
            assert are_equivalent(o, o2)
            j2 = build_operator(p, o2, carry_factors(o, o2, us)).materialize()
            op_dev = max(op_dev, float(np.max(np.abs(j1 - j2))))
            _, end2 = sweep_ratios(a0, SolverConfig(p, o2))
            drv_dev = max(drv_dev, float(np.max(np.abs(end1 - end2))))
            pairs += 1
    assert op_dev <= 1e-13 and drv_dev <= 1e-13, (op_dev, drv_dev)
    conj_dev = 0.0
    for o in itertools.islice(all_cyclic_orderings(4), 0, 720, 36):
        for q in itertools.permutations(range(1, 5)):
            p_bar = p.permuted(q)
            us = [ubc_factor(p_bar, pair, rng) for pair in o.pairs]
            conj_dev = max(conj_dev, check_permutation_conjugation(p, o, us, q).max_deviation)
    assert conj_dev <= 1e-13, conj_dev
    return f"{pairs} swap neighbours, operator {op_dev:.1e}, driver {drv_dev:.1e}, conjugation {conj_dev:.1e}"


# -- 9 -----------------------------------------------------------------------


@criterion(9, "global convergence against the element-wise oracle", 120)
def test_criterion_9_convergence():
    rng = np.random.default_rng(909)
    sizes = [(2, 3, 1, 4, 2), (4, 4, 4, 4), (1, 2, 3), (3, 3, 3, 3, 3), (5, 1, 2, 2), (2, 2, 2, 2, 2, 2)]
    for case in range(30):
        p = Partition(sizes[case % len(sizes)])
        kind = "B_sg" if case % 2 == 0 else "barB_sg"
        o = sample_member(kind, p.m, rng)[0]
        a = random_symmetric(p.n, rng)
        fro = float(np.linalg.norm(a))
        ref = jacobi_eigensolve(a).eigenvalues
        for ubc, order in (("always", "nonincreasing"), ("never", "nonincreasing"),
                           ("never", "nondecreasing")):
            res = solve(a, SolverConfig(p, o, ubc_mode=ubc, eig_order=order, sweep_cap=30))
            assert res.converged and res.sweeps <= 30
            assert off_norm(res.matrix) <= 1e-10 * fro
            np.testing.assert_allclose(np.sort(res.eigenvalues), np.sort(ref), rtol=0, atol=1e-9 * fro)
            if ubc == "never":
                assert is_monotone(res.diagonal, order), (case, order, res.diagonal)
    return "30 matrices, n <= 16, three modes each"


# -- 10 ----------------------------------------------------------------------


def refining_partition(n: int, nu: int, rng) -> Partition:
    def split(k):
        parts = []
        while k:
            s = int(rng.integers(1, min(3, k) + 1))
            parts.append(s)
            k -= s
        return parts

    return Partition(tuple(split(nu) + split(n - nu)))


@criterion(10, "J-Jacobi convergence and J-orthogonality", 120)
def test_criterion_10_jjacobi():
    rng = np.random.default_rng(1010)
    ns = [4, 8, 12, 8, 12]
    for case in range(20):
        n = ns[case % len(ns)]
        nu = n // 4 if case % 2 == 0 else n // 2
        p = refining_partition(n, nu, rng)
        sig = JSignature(n, nu)
        sig.check_refines(p)
        kind = "B_sg" if case % 4 < 2 else "barB_sg"
        o = sample_member(kind, p.m, rng)[0]
        a = random_spd(n, rng)
        res = jjacobi_solve(a, sig, SolverConfig(p, o, sweep_cap=40))
        assert res.converged and res.sweeps <= 40
        half = jacobi_eigensolve(a)
        root = half.eigenvectors @ np.diag(np.sqrt(half.eigenvalues)) @ half.eigenvectors.T
        ref = jacobi_eigensolve(root @ sig.matrix() @ root).eigenvalues
        np.testing.assert_allclose(np.sort(res.pencil_eigenvalues), np.sort(ref), rtol=1e-8)
        f = res.transform
        assert np.max(np.abs(f.T @ sig.matrix() @ f - sig.matrix())) <= 1e-9
        rep = check_A_assumptions(res.diagnostics, steps_per_sweep=o.T)
        assert res.diagnostics.sweep_off_ratio[-1] < 1e-8
        assert rep.pivot_ratio_trace[-1] < 1e-8
    return "20 matrices, n <= 12"


# -- 11 ----------------------------------------------------------------------


@criterion(11, "recognizer soundness at m=4", 60)
def test_criterion_11_recognizers():
    rng = np.random.default_rng(1111)
    for kind in GENERATOR_KINDS:
        for _ in range(10):
            o, w = sample_member(kind, 4, rng)
            assert w.verify(o) and recognize_class(kind, o), (kind, o)
    # full BFS over the admissible-swap graph on all 720 orderings
    orderings = list(all_cyclic_orderings(4))
    component = {}
    for start in orderings:
        if start in component:
            continue
        component[start] = start
        stack = [start]
        while stack:
            cur = stack.pop()
            for r in admissible_positions(cur):
                nb = admissible_transposition(cur, r)
                if nb not in component:
                    component[nb] = start
                    stack.append(nb)
    reps = sorted(set(component.values()), key=str)
    for o in orderings:
        for rep in reps:
            assert are_equivalent(o, rep) == (component[o] == rep)
    members = [o for o in orderings if find_witness("B_sg", o) is not None]
    return f"{len(reps)} equivalence classes match the criterion; {len(members)} of 720 in B_sg"


def serial_closure_m4():
    """All orderings reachable from the serial ones by swaps, rotations and relabelings."""
    seen = {o for _, o in serial_members(4)}
    frontier = list(seen)
    perms = list(itertools.permutations(range(1, 5)))
    while frontier:
        nxt = []
        for o in frontier:
            nb = [admissible_transposition(o, r) for r in admissible_positions(o)]
            nb.append(rotate(o, 1))
            nb.extend(apply_block_permutation(o, q) for q in perms)
            for x in nb:
                if x not in seen:
                    seen.add(x)
                    nxt.append(x)
        frontier = nxt
    return seen


@pytest.mark.xfail(strict=True, reason="the closure of the serial orderings at m=4 has 624 members, not 720")
@criterion(11, "all 720 orderings reachable from serial ones", 60)
def test_criterion_11_all_orderings_reachable():
    closure = serial_closure_m4()
    rng = np.random.default_rng(1112)
    p = Partition((2, 1, 1, 2))
    mats = [random_symmetric(p.n, rng) for _ in range(5)]
    reached = sorted(closure, key=str)
    for o in reached[:: max(1, len(reached) // 24)]:
        w = find_witness("B_sg", o)
        assert w is not None
        worst, eta = worst_ratio(p, o, w, mats, sweeps=w.d + 1)
        assert worst <= eta + SLACK
    missing = [o for o in all_cyclic_orderings(4) if o not in closure]
    assert not missing, f"{len(missing)} of 720 unreachable, e.g. {missing[0]}"
