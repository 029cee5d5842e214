"""Command-line front end: ``bjlab {run,operator-norm,classify,jjacobi,bounds}``.

Exit codes: 0 success, 1 input/parse/unsupported problems (including a
matrix that is not positive definite), 2 a bound violation, 3 no
convergence within the sweep cap.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .annihilators import build_operator, operator_norm, product_of_operators
from .block_jacobi import SolverConfig, enforce_ubc, solve
from .bounds import eta_elementwise, eta_for_witness, eta_recursion, find_any_witness
from .errors import BJLabError, NotPositiveDefinite, SweepCapExceeded, UnsupportedSize
from .jjacobi import JSignature, check_A_assumptions, jjacobi_solve, random_spd
from .linalg import as_symmetric, random_orthogonal
from .orderings import (
    BAR_KINDS,
    CYCLIC_KINDS,
    PivotSequence,
    Witness,
    find_witness,
    render_ordering_matrix,
    sample_member,
)
from .partition import Partition

EXIT_OK, EXIT_INPUT, EXIT_BOUND, EXIT_NONCONV = 0, 1, 2, 3
TRACE_HEADER = "# bjlab-trace v1"
TRACE_COLUMNS = [
    "row", "rep", "index", "pivot_i", "pivot_j", "off", "sigma_min", "ubc_applied",
    "off_before", "off_after", "ratio", "eta", "margin",
]
BOUND_SLACK = 1e-12


class InputError(Exception):
    """Bad configuration, file or spec; maps to exit code 1."""


# -- parsing -----------------------------------------------------------------


@dataclass
class Strategy:
    sequence: PivotSequence
    witness: Optional[Witness]
    spec: str


def parse_strategy(text: str, m_default: int) -> Strategy:
    """``class:<kind> m=<m> seed=<s> [shifts=<d>] [extra=<e>]`` or ``pairs:(1,2),...``."""
    text = text.strip()
    if text.startswith("pairs:"):
        try:
            seq = PivotSequence.parse(text, m=m_default)
        except ValueError as exc:
            raise InputError(f"bad strategy spec: {exc}") from exc
        return Strategy(seq, None, text)
    if text.startswith("class:"):
        parts = text[6:].split()
        if not parts:
            raise InputError("class spec needs a class name")
        kind = parts[0]
        opts: Dict[str, int] = {}
        for tok in parts[1:]:
            mt = re.fullmatch(r"(m|seed|shifts|extra)=(-?\d+)", tok)
            if not mt:
                raise InputError(f"bad strategy option {tok!r}")
            opts[mt.group(1)] = int(mt.group(2))
        m = opts.get("m", m_default)
        if m != m_default:
            raise InputError(f"strategy has m={m}, partition has {m_default} blocks")
        rng = np.random.default_rng(opts.get("seed", 0))
        try:
            seq, wit = sample_member(kind, m, rng, shifts=opts.get("shifts"), extra=opts.get("extra"))
        except (BJLabError, ValueError) as exc:
            raise InputError(f"bad strategy spec: {exc}") from exc
        return Strategy(seq, wit, text)
    raise InputError(f"strategy spec must start with 'class:' or 'pairs:', got {text!r}")


def parse_partition(text: str) -> Partition:
    try:
        return Partition.parse(text)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def read_matrix(path: str) -> np.ndarray:
    """First line n, then n lines of n numbers; symmetric to 1e-12."""
    try:
        lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    try:
        n = int(lines[0].strip())
        rows = [[float(x) for x in ln.split()] for ln in lines[1:]]
    except (ValueError, IndexError) as exc:
        raise InputError(f"malformed matrix file {path}: {exc}") from exc
    if n < 1 or len(rows) != n or any(len(r) != n for r in rows):
        raise InputError(f"matrix file {path} must hold {n} rows of {n} numbers")
    a = np.array(rows)
    if not np.all(np.isfinite(a)):
        raise InputError("matrix has non-finite entries")
    try:
        return as_symmetric(a, "matrix", atol=1e-12)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def random_symmetric(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """Upper triangle i.i.d. uniform on [-scale, scale], mirrored."""
    x = rng.uniform(-scale, scale, (n, n))
    upper = np.triu(x, 1)
    return upper + upper.T + np.diag(np.diag(x))


def load_config(path: Optional[str]) -> Dict[str, Any]:
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot load config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise InputError("config must be a JSON object")
    return data


def resolve(args: argparse.Namespace, keys: Sequence[str], defaults: Dict[str, Any]) -> Dict[str, Any]:
    """Merge defaults < config file < explicit flags."""
    cfg = dict(defaults)
    cfg.update({k: v for k, v in load_config(getattr(args, "config", None)).items() if k in keys})
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    return cfg


def thread_count() -> int:
    raw = os.environ.get("BJLAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def map_ordered(fn, items: Sequence[Any]) -> List[Any]:
    """Evaluate fn on every item, possibly in threads, results in input order."""
    workers = min(thread_count(), max(1, len(items)))
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _num(x: Optional[float]) -> str:
    return "" if x is None else repr(float(x))


def write_outputs(out_dir: Optional[str], rows: List[List[str]], summary: Dict[str, Any],
                  stem: str) -> None:
    text = io.StringIO()
    text.write(TRACE_HEADER + "\n")
    w = csv.writer(text, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    w.writerows(rows)
    body = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    if out_dir is None:
        return
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{stem}_trace.csv").write_text(text.getvalue())
        (out / f"{stem}_summary.json").write_text(body)
    except OSError as exc:
        raise InputError(f"cannot write outputs to {out_dir}: {exc}") from exc


# -- run ---------------------------------------------------------------------


RUN_KEYS = ("matrix", "n", "partition", "strategy", "ubc", "rho", "eig_order", "sweep_cap",
            "stop_tol", "seed", "scale", "repeat", "out_dir", "check_bounds")


def _matrix_for(cfg: Dict[str, Any], rep: int, spd: bool = False) -> np.ndarray:
    if cfg.get("matrix"):
        return read_matrix(cfg["matrix"])
    if cfg.get("seed") is None:
        raise InputError("random matrices need --seed")
    if not cfg.get("n"):
        raise InputError("random matrices need --n (or a --matrix file)")
    rng = np.random.default_rng([int(cfg["seed"]), rep])
    n = int(cfg["n"])
    if spd:
        return random_spd(n, rng)
    return random_symmetric(n, rng, float(cfg.get("scale", 1.0)))


def _partition_for(cfg: Dict[str, Any], n: Optional[int]) -> Partition:
    if cfg.get("partition"):
        p = parse_partition(cfg["partition"])
    elif n is not None:
        p = Partition((1,) * n)
    else:
        raise InputError("need --partition or --n")
    if n is not None and p.n != n:
        raise InputError(f"partition {p} has order {p.n}, matrix has {n}")
    return p


def _bound_windows(sweeps, d: int, eta: float, rep: int) -> Tuple[List[List[str]], bool]:
    """Sweep rows with the bound checked over consecutive windows of d + 1 sweeps."""
    rows = []
    ok = True
    for start in range(0, len(sweeps), d + 1):
        window = sweeps[start:start + d + 1]
        for s in window:
            rows.append(["sweep", str(rep), str(s.index), "", "", _num(s.off_after), "", "",
                         _num(s.off_before), _num(s.off_after), _num(s.ratio), "", ""])
        if len(window) < d + 1 or not all(s.ubc_active for s in window):
            continue
        before = window[0].off_before
        after = window[-1].off_after
        ratio = 0.0 if before == 0 else (after / before) ** 2
        margin = eta - ratio
        rows[-1][11] = _num(eta)
        rows[-1][12] = _num(margin)
        if ratio > eta + BOUND_SLACK:
            ok = False
    return rows, ok


def cmd_run(args: argparse.Namespace) -> int:
    cfg = resolve(args, RUN_KEYS, {"ubc": "always", "rho": 1.0, "eig_order": "nonincreasing",
                                   "sweep_cap": 30, "stop_tol": 1e-10, "repeat": 1,
                                   "scale": 1.0, "check_bounds": False})
    first = _matrix_for(cfg, 0)
    p = _partition_for(cfg, first.shape[0])
    strat = parse_strategy(cfg.get("strategy") or "class:B_c seed=0", p.m)
    solver = SolverConfig(p, strat.sequence, ubc_mode=cfg["ubc"], rho=float(cfg["rho"]),
                          eig_order=cfg["eig_order"], sweep_cap=int(cfg["sweep_cap"]),
                          stop_tol=float(cfg["stop_tol"]))
    eta, d = None, 0
    if cfg["check_bounds"]:
        wit = strat.witness or find_any_witness(strat.sequence)
        if wit is None:
            raise InputError("strategy is in no supported class; cannot check bounds")
        eta, d = eta_for_witness(p, solver.rho, wit), wit.d

    def one(rep: int):
        a = first if rep == 0 else _matrix_for(cfg, rep)
        try:
            return solve(a, solver, bound=eta), None
        except SweepCapExceeded as exc:
            return exc.partial, str(exc)

    results = map_ordered(one, list(range(int(cfg["repeat"]))))
    rows: List[List[str]] = []
    reps = []
    all_ok, all_conv = True, True
    for rep, (res, err) in enumerate(results):
        for st in res.trace.steps:
            rows.append(["step", str(rep), str(st.k), str(st.pivot[0]), str(st.pivot[1]),
                         _num(st.off), _num(st.sigma_min), str(int(st.ubc_applied)),
                         "", "", "", "", ""])
        if eta is not None:
            srows, ok = _bound_windows(res.trace.sweeps, d, eta, rep)
            all_ok &= ok
        else:
            srows, _ = _bound_windows(res.trace.sweeps, d, float("inf"), rep)
            for r in srows:
                r[11] = r[12] = ""
        rows.extend(srows)
        all_conv &= res.converged
        reps.append({"rep": rep, "converged": res.converged, "sweeps": res.sweeps,
                     "eigenvalues": [float(x) for x in res.eigenvalues],
                     "final_off": float(res.trace.sweeps[-1].off_after) if res.trace.sweeps
                     else float(res.trace.initial_off),
                     "error": err})
    summary = {"command": "run", "version": __version__,
               "config": {**{k: cfg.get(k) for k in RUN_KEYS}, "partition": str(p),
                          "strategy": str(strat.sequence), "strategy_spec": strat.spec},
               "eta": eta, "d": d, "bounds_ok": all_ok, "converged": all_conv, "runs": reps}
    write_outputs(cfg.get("out_dir"), rows, summary, "run")
    for r in reps:
        print(f"rep {r['rep']}: converged={r['converged']} sweeps={r['sweeps']}")
    if eta is not None:
        print(f"eta={eta:.17g} d={d} bounds_ok={all_ok}")
    if not all_conv:
        return EXIT_NONCONV
    if not all_ok:
        return EXIT_BOUND
    return EXIT_OK


# -- operator-norm -----------------------------------------------------------


NORM_KEYS = ("partition", "strategy", "rho", "samples", "seed", "out_dir")


def random_ubc_factor(n_i: int, n_j: int, rho: float, rng: np.random.Generator) -> np.ndarray:
    return enforce_ubc(random_orthogonal(n_i + n_j, rng), n_i, rho).hat_u


def cmd_operator_norm(args: argparse.Namespace) -> int:
    cfg = resolve(args, NORM_KEYS, {"rho": 1.0, "samples": 200, "seed": 0})
    if not cfg.get("partition"):
        raise InputError("operator-norm needs --partition")
    p = parse_partition(cfg["partition"])
    if p.K > 2000:
        raise InputError(f"K={p.K} is above 2000")
    strat = parse_strategy(cfg.get("strategy") or "class:B_c seed=0", p.m)
    wit = strat.witness or find_any_witness(strat.sequence)
    if wit is None:
        raise InputError("strategy is in no supported class")
    rho = float(cfg["rho"])
    eta = eta_for_witness(p, rho, wit)
    mu = float(np.sqrt(eta))
    d = wit.d
    seq = strat.sequence

    def one(k: int) -> float:
        rng = np.random.default_rng([int(cfg["seed"]), k])
        ops = []
        for _ in range(d + 1):
            us = [random_ubc_factor(p.size(i), p.size(j), rho, rng) for i, j in seq.pairs]
            ops.append(build_operator(p, seq, us))
        return operator_norm(product_of_operators(ops)) if p.K else 0.0

    norms = map_ordered(one, list(range(int(cfg["samples"]))))
    worst = max(norms) if norms else 0.0
    summary = {"command": "operator-norm", "version": __version__,
               "config": {**{k: cfg.get(k) for k in NORM_KEYS}, "partition": str(p),
                          "strategy": str(seq)},
               "d": d, "mu": mu, "max_norm": worst, "margin": mu - worst,
               "norms": [float(x) for x in norms]}
    write_outputs(cfg.get("out_dir"), [], summary, "operator_norm")
    print(f"samples={len(norms)} d={d} max_norm={worst:.17g} mu={mu:.17g} margin={mu - worst:.3e}")
    return EXIT_BOUND if worst > mu + 1e-9 else EXIT_OK


# -- classify ----------------------------------------------------------------


def _describe_chain(w: Witness) -> List[str]:
    lines = [f"  relabel q={w.q} then d={w.d} shift(s) to {w.base_kind} member {w.base}"]
    for link in w.chain:
        tag = "~" if link[0] == "equiv" else f"s~ (r={link[2]})"
        lines.append(f"    {tag} {link[1]}")
    return lines


def cmd_classify(args: argparse.Namespace) -> int:
    text = args.strategy
    if text is None and args.file:
        try:
            text = Path(args.file).read_text().strip()
        except OSError as exc:
            raise InputError(str(exc)) from exc
    if not text:
        raise InputError("classify needs a strategy (inline or --file)")
    m = args.m
    if text.startswith("class:"):
        if m is None:
            mt = re.search(r"\bm=(\d+)", text)
            if not mt:
                raise InputError("class spec needs m=")
            m = int(mt.group(1))
        seq = parse_strategy(text, m).sequence
    else:
        try:
            seq = PivotSequence.parse(text, m=m)
        except ValueError as exc:
            raise InputError(str(exc)) from exc
    print(f"sequence: {seq}")
    if not seq.covers():
        print("not a pivot strategy: some off-diagonal block is never selected")
        return EXIT_INPUT
    if seq.is_cyclic:
        print("M_O:")
        print(render_ordering_matrix(seq))
    kinds = [args.kind] if args.kind else list(CYCLIC_KINDS if seq.is_cyclic else BAR_KINDS)
    status = EXIT_OK
    for kind in kinds:
        try:
            w = find_witness(kind, seq)
        except UnsupportedSize as exc:
            print(f"{kind}: unsupported ({exc})")
            if args.kind:
                status = EXIT_INPUT
            continue
        except BJLabError as exc:
            raise InputError(str(exc)) from exc
        print(f"{kind}: {'member' if w else 'not a member'}")
        if w is not None and args.verbose:
            print("\n".join(_describe_chain(w)))
    return status


# -- jjacobi -----------------------------------------------------------------


JJ_KEYS = ("matrix", "n", "nu", "partition", "strategy", "ubc", "rho", "sweep_cap", "stop_tol",
           "seed", "out_dir")


def cmd_jjacobi(args: argparse.Namespace) -> int:
    cfg = resolve(args, JJ_KEYS, {"ubc": "always", "rho": 1.0, "sweep_cap": 40, "stop_tol": 1e-10})
    a = _matrix_for(cfg, 0, spd=True)
    n = a.shape[0]
    p = _partition_for(cfg, n)
    nu = int(cfg.get("nu") or n)
    try:
        sig = JSignature(n, nu)
        sig.check_refines(p)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    strat = parse_strategy(cfg.get("strategy") or "class:B_sg seed=0", p.m)
    solver = SolverConfig(p, strat.sequence, ubc_mode=cfg["ubc"], rho=float(cfg["rho"]),
                          sweep_cap=int(cfg["sweep_cap"]), stop_tol=float(cfg["stop_tol"]))
    err = None
    try:
        res = jjacobi_solve(a, sig, solver)
    except NotPositiveDefinite as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SweepCapExceeded as exc:
        res, err = exc.partial, str(exc)
    rep = check_A_assumptions(res.diagnostics, strat.sequence.T)
    rows = [["step", "0", str(s.k), str(s.pivot[0]), str(s.pivot[1]), _num(s.off_ratio),
             _num(s.sigma_min), s.kind, "", "", _num(s.pivot_ratio), "", _num(s.orth_deviation)]
            for s in res.diagnostics.steps]
    rows += [["sweep", "0", str(k + 1), "", "", _num(r), "", "", "", "", "", "", ""]
             for k, r in enumerate(res.diagnostics.sweep_off_ratio)]
    summary = {"command": "jjacobi", "version": __version__,
               "config": {**{k: cfg.get(k) for k in JJ_KEYS}, "partition": str(p),
                          "strategy": str(strat.sequence)},
               "converged": res.converged, "sweeps": res.sweeps, "error": err,
               "pencil_eigenvalues": [float(x) for x in res.pencil_eigenvalues],
               "assumptions": {"min_sigma_per_sweep": rep.min_sigma_per_sweep,
                               "max_deviation_per_sweep": rep.max_deviation_per_sweep,
                               "min_hyperbolic_sigma": rep.min_hyperbolic_sigma,
                               "growth_flag": rep.growth_flag}}
    write_outputs(cfg.get("out_dir"), rows, summary, "jjacobi")
    print(f"converged={res.converged} sweeps={res.sweeps}")
    print("pencil eigenvalues: " + " ".join(f"{x:.12g}" for x in res.pencil_eigenvalues))
    return EXIT_OK if res.converged else EXIT_NONCONV


# -- bounds ------------------------------------------------------------------


def cmd_bounds(args: argparse.Namespace) -> int:
    cfg = resolve(args, ("partition", "rho"), {"rho": 1.0})
    if not cfg.get("partition"):
        raise InputError("bounds needs --partition")
    p = parse_partition(cfg["partition"])
    try:
        bc = eta_recursion(p, float(cfg["rho"]))
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    print(bc.table())
    if all(s == 1 for s in p.sizes) and p.n >= 2:
        print(f"element-wise eta_{p.n} = {eta_elementwise(p.n):.17g}")
    return EXIT_OK


# -- entry point -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bjlab", description="Block Jacobi experiments")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, matrix=True):
        sp.add_argument("--config", help="JSON file with default settings")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out-dir", dest="out_dir")
        sp.add_argument("--partition", help='e.g. "pi:2,2,2,2"')
        sp.add_argument("--strategy", help='"class:B_c m=4 seed=7" or "pairs:(1,2),..."')
        sp.add_argument("--rho", type=float)
        if matrix:
            sp.add_argument("--matrix", help="matrix file (n, then n rows)")
            sp.add_argument("--n", type=int, help="order of a random matrix")
            sp.add_argument("--ubc", choices=["always", "adaptive", "never"])
            sp.add_argument("--sweep-cap", dest="sweep_cap", type=int)
            sp.add_argument("--stop-tol", dest="stop_tol", type=float)

    run = sub.add_parser("run", help="solve with the block method")
    common(run)
    run.add_argument("--check-bounds", dest="check_bounds", action="store_true", default=None)
    run.add_argument("--eig-order", dest="eig_order",
                     choices=["nonincreasing", "nondecreasing", "unsorted"])
    run.add_argument("--scale", type=float)
    run.add_argument("--repeat", type=int)
    run.set_defaults(func=cmd_run)

    op = sub.add_parser("operator-norm", help="sample operator norms against mu")
    common(op, matrix=False)
    op.add_argument("--samples", type=int)
    op.set_defaults(func=cmd_operator_norm)

    cl = sub.add_parser("classify", help="class memberships of a pivot sequence")
    cl.add_argument("strategy", nargs="?")
    cl.add_argument("--file")
    cl.add_argument("--m", type=int)
    cl.add_argument("--kind")
    cl.add_argument("-v", "--verbose", action="store_true")
    cl.set_defaults(func=cmd_classify)

    jj = sub.add_parser("jjacobi", help="solve the pencil (A, J) with the J-Jacobi method")
    common(jj)
    jj.add_argument("--nu", type=int)
    jj.set_defaults(func=cmd_jjacobi)

    bd = sub.add_parser("bounds", help="print the convergence constants")
    bd.add_argument("--config")
    bd.add_argument("--partition")
    bd.add_argument("--rho", type=float)
    bd.set_defaults(func=cmd_bounds)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (BJLabError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
