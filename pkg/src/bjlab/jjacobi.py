"""Block J-Jacobi method for a positive definite A and J = diag(I_nu, -I_{n-nu}).

Every step is a congruence A' = F^T A F with F^T J F = J. Pivots whose two
blocks carry the same sign use the orthogonal kernel (with UBC reordering);
mixed-sign pivots are diagonalized by element-wise sweeps that use plane
rotations between equal signs and hyperbolic rotations between opposite
signs. The pencil eigenvalues are diag(Lambda) * diag(J).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .block_jacobi import SolverConfig, _diagonalize, enforce_ubc
from .errors import HyperbolicBreakdown, NonConvergence, NotPositiveDefinite, SweepCapExceeded
from .linalg import KERNEL_TOL, as_symmetric, jacobi_rotation, off_norm, sigma_min, singular_values
from .partition import BlockIndex, Partition, check_square

GROWTH_FACTOR = 10.0


@dataclass(frozen=True)
class JSignature:
    n: int
    nu: int

    def __post_init__(self):
        if not 1 <= self.nu <= self.n:
            raise ValueError(f"nu must lie in 1..{self.n}, got {self.nu}")

    @property
    def signs(self) -> np.ndarray:
        return np.r_[np.ones(self.nu), -np.ones(self.n - self.nu)]

    def matrix(self) -> np.ndarray:
        return np.diag(self.signs)

    def check_refines(self, p: Partition) -> None:
        if p.n != self.n:
            raise ValueError(f"partition of {p.n} does not match signature order {self.n}")
        if self.nu < self.n and self.nu not in p.offsets:
            raise ValueError(f"partition {p} does not refine ({self.nu}, {self.n - self.nu})")


@dataclass
class JOrthogonalElementary:
    pivot: Optional[BlockIndex]
    hat_f: np.ndarray
    kind: str  # "orthogonal" or "hyperbolic"
    eigenvalues: np.ndarray
    residual_off: float = 0.0


def _hyperbolic(app: float, aqq: float, apq: float):
    """(ch, sh) with tanh(2 theta) = 2 apq / (app + aqq)."""
    tau = 2.0 * apq / (app + aqq)
    if not abs(tau) < 1.0:
        raise HyperbolicBreakdown(f"tanh(2 theta) = {tau:.6g} is not below 1 in magnitude")
    t = tau / (1.0 + math.sqrt((1.0 - tau) * (1.0 + tau)))
    ch = 1.0 / math.sqrt((1.0 - t) * (1.0 + t))
    return ch, t * ch


def jjacobi_kernel(a_hat, signs, tol: float = KERNEL_TOL, max_sweeps: int = 100,
                   pivot: Optional[BlockIndex] = None) -> JOrthogonalElementary:
    """Diagonalize ``a_hat`` by a congruence that preserves diag(signs)."""
    a = as_symmetric(a_hat)
    signs = np.asarray(signs, dtype=float)
    k = a.shape[0]
    f = np.eye(k)
    mixed = bool(np.any(signs > 0) and np.any(signs < 0))
    sweeps = 0
    while True:
        fro = float(np.linalg.norm(a))
        off = off_norm(a)
        if off <= tol * fro:
            break
        if sweeps >= max_sweeps:
            raise NonConvergence(f"J-kernel stalled at off-norm {off:.3e}")
        sweeps += 1
        for p in range(k - 1):
            for q in range(p + 1, k):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                if signs[p] == signs[q]:
                    c, s, _ = jacobi_rotation(a[p, p], a[q, q], apq)
                    g = np.array([[c, s], [-s, c]])
                else:
                    ch, sh = _hyperbolic(a[p, p], a[q, q], apq)
                    g = np.array([[ch, -sh], [-sh, ch]])
                cols = [p, q]
                a[:, cols] = a[:, cols] @ g
                a[cols, :] = g.T @ a[cols, :]
                a[p, q] = a[q, p] = 0.0
                f[:, cols] = f[:, cols] @ g
    return JOrthogonalElementary(pivot, f, "hyperbolic" if mixed else "orthogonal",
                                 np.diag(a).copy(), off)


@dataclass
class JStepRecord:
    k: int
    pivot: BlockIndex
    kind: str
    pivot_ratio: float  # S(F^T A_hat F) / ||A^(k)||_F
    off_ratio: float  # S(A^(k)) / ||A^(k)||_F
    orth_deviation: float  # max |sigma_i(F_hat) - 1|
    sigma_min: float  # sigma_min(F_ii)
    frobenius: float


@dataclass
class ProcessDiagnostics:
    steps: List[JStepRecord] = field(default_factory=list)
    sweep_off_ratio: List[float] = field(default_factory=list)
    initial_frobenius: float = 0.0
    growth_flag: bool = False


@dataclass
class AssumptionReport:
    min_sigma_per_sweep: List[float]
    max_deviation_per_sweep: List[float]
    pivot_ratio_trace: List[float]
    off_ratio_trace: List[float]
    min_hyperbolic_sigma: Optional[float]
    growth_flag: bool


@dataclass
class JJacobiResult:
    pencil_eigenvalues: np.ndarray
    diagonal: np.ndarray
    transform: np.ndarray
    matrix: np.ndarray
    diagnostics: ProcessDiagnostics
    converged: bool
    sweeps: int


def check_positive_definite(a: np.ndarray) -> None:
    """Cholesky attempt; raises NotPositiveDefinite on a nonpositive pivot."""
    n = a.shape[0]
    l = np.zeros_like(a)
    for j in range(n):
        d = a[j, j] - float(np.dot(l[j, :j], l[j, :j]))
        if not d > 0.0:
            raise NotPositiveDefinite(f"matrix is not positive definite (pivot {j + 1})")
        l[j, j] = math.sqrt(d)
        if j + 1 < n:
            l[j + 1:, j] = (a[j + 1:, j] - l[j + 1:, :j] @ l[j, :j]) / l[j, j]


def _apply_congruence(a, ix, hat_f, lam, f_total):
    c = a[:, ix] @ hat_f
    a[:, ix] = c
    a[ix, :] = c.T
    a[np.ix_(ix, ix)] = np.diag(lam)
    f_total[:, ix] = f_total[:, ix] @ hat_f


def jjacobi_solve(a, sig: JSignature, cfg: SolverConfig) -> JJacobiResult:
    """Run the J-Jacobi process until S(A^(k)) <= stop_tol * ||A^(k)||_F."""
    p = cfg.partition
    sig.check_refines(p)
    a = check_square(as_symmetric(a), p)
    check_positive_definite(a)
    signs = sig.signs
    f_total = np.eye(p.n)
    diag = ProcessDiagnostics(initial_frobenius=float(np.linalg.norm(a)))
    # diagonal blocks have a single sign, so plain orthogonal diagonalization is J-orthogonal
    for i in range(1, p.m + 1):
        ix = p.indices(i)
        lam, u = _diagonalize(a, ix, cfg)
        _apply_congruence(a, ix, u, lam, f_total)
    sweeps = 0
    k = 0
    while True:
        fro = float(np.linalg.norm(a))
        if off_norm(a) <= cfg.stop_tol * fro:
            break
        if sweeps >= cfg.sweep_cap:
            partial = _result(a, f_total, signs, diag, False, sweeps)
            raise SweepCapExceeded(f"no convergence within {sweeps} sweeps", partial)
        sweeps += 1
        for idx in cfg.strategy.pairs:
            k += 1
            fro = float(np.linalg.norm(a))
            off_before = off_norm(a)
            i, j = idx
            ix = p.pivot_indices(idx)
            sub_signs = signs[ix]
            n_i = p.size(i)
            if sub_signs[0] == sub_signs[-1]:
                lam, u = _diagonalize(a, ix, cfg)
                if cfg.ubc_mode != "never":
                    res = enforce_ubc(u, n_i, cfg.rho)
                    u, lam = res.hat_u, lam[res.permutation]
                step = JOrthogonalElementary(idx, u, "orthogonal", lam, 0.0)
            else:
                step = jjacobi_kernel(a[np.ix_(ix, ix)], sub_signs, cfg.kernel_tol, pivot=idx)
            sv = singular_values(step.hat_f)
            diag.steps.append(JStepRecord(
                k=k,
                pivot=idx,
                kind=step.kind,
                pivot_ratio=step.residual_off / fro if fro > 0 else 0.0,
                off_ratio=off_before / fro if fro > 0 else 0.0,
                orth_deviation=float(np.max(np.abs(sv - 1.0))),
                sigma_min=sigma_min(step.hat_f[:n_i, :n_i]),
                frobenius=fro,
            ))
            _apply_congruence(a, ix, step.hat_f, step.eigenvalues, f_total)
            if fro > GROWTH_FACTOR * diag.initial_frobenius:
                diag.growth_flag = True
        fro = float(np.linalg.norm(a))
        diag.sweep_off_ratio.append(off_norm(a) / fro)
    return _result(a, f_total, signs, diag, True, sweeps)


def _result(a, f_total, signs, diag, converged, sweeps) -> JJacobiResult:
    d = np.diag(a).copy()
    return JJacobiResult(np.sort(d * signs)[::-1], d, f_total, a, diag, converged, sweeps)


def check_A_assumptions(diag: ProcessDiagnostics, steps_per_sweep: Optional[int] = None) -> AssumptionReport:
    """Summarize the A2/A3 traces and the two ratio traces per sweep."""
    steps = diag.steps
    per = steps_per_sweep or max(len(steps), 1)
    sig, dev = [], []
    for start in range(0, len(steps), per):
        chunk = steps[start:start + per]
        sig.append(min(s.sigma_min for s in chunk))
        dev.append(max(s.orth_deviation for s in chunk))
    hyper = [s.sigma_min for s in steps if s.kind == "hyperbolic"]
    return AssumptionReport(
        min_sigma_per_sweep=sig,
        max_deviation_per_sweep=dev,
        pivot_ratio_trace=[s.pivot_ratio for s in steps],
        off_ratio_trace=[s.off_ratio for s in steps],
        min_hyperbolic_sigma=min(hyper) if hyper else None,
        growth_flag=diag.growth_flag,
    )


def random_spd(n: int, rng: np.random.Generator, lo: float = 1e-3, hi: float = 1.0) -> np.ndarray:
    """Q^T D Q with D log-uniform on [lo, hi] and Q a product of random plane rotations."""
    q = np.eye(n)
    for _ in range(3):
        for p in range(n - 1):
            for r in range(p + 1, n):
                th = rng.uniform(0, 2 * math.pi)
                c, s = math.cos(th), math.sin(th)
                cols = q[:, [p, r]] @ np.array([[c, s], [-s, c]])
                q[:, [p, r]] = cols
    d = np.exp(rng.uniform(math.log(lo), math.log(hi), n))
    a = q.T @ np.diag(d) @ q
    return (a + a.T) / 2
