"""Convergence constants for one sweep of the block method.

The recursion is carried out on the gap ``delta = 1 - eta`` in log-space, so
constants extremely close to 1 are still strictly below 1 as stored in
``log_gap``; the float ``eta`` may round to 1.0 once the gap drops under
machine epsilon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Tuple

from .errors import NoWitness
from .partition import Partition

LOG2 = math.log(2.0)


def _log_four_pow_plus(k: int, c: int) -> float:
    """log(4**k + c) without overflow (exact integers, then log)."""
    return math.log(4 ** k + c)


def gamma_ij(n_i: int, n_j: int) -> float:
    """3 / sqrt((4^{n_i} + 6 n_j - 1)(n_j + 1))."""
    if n_i < 1 or n_j < 1:
        raise ValueError("block sizes must be positive")
    return math.exp(log_gamma_ij(n_i, n_j))


def log_gamma_ij(n_i: int, n_j: int) -> float:
    return math.log(3.0) - 0.5 * (_log_four_pow_plus(n_i, 6 * n_j - 1) + math.log(n_j + 1))


def gamma_tilde(n: int) -> float:
    """3 sqrt(2) / sqrt(4^n + 26), a lower bound for gamma_ij with n_i + n_j <= n."""
    return math.exp(log_gamma_tilde(n))


def log_gamma_tilde(n: int) -> float:
    if n < 1:
        raise ValueError("n must be positive")
    return math.log(3.0 * math.sqrt(2.0)) - 0.5 * _log_four_pow_plus(n, 26)


@dataclass(frozen=True)
class ZetaFloor:
    level: int
    gamma_floor: float  # rho * min_{i<j<=l} gamma(n_i, n_j)
    crude_floor: float  # 3 sqrt(2) rho / sqrt(4^{s_l} + 26)
    log_gamma_floor: float
    log_crude_floor: float


def zeta_floor(p: Partition, l: int, rho: float = 1.0) -> ZetaFloor:
    """Both analytic lower bounds for zeta_l at level l of ``p``."""
    _check_rho(rho)
    if not 2 <= l <= p.m:
        raise ValueError(f"level {l} outside 2..{p.m}")
    sizes = p.sizes[:l]
    lg = min(log_gamma_ij(sizes[i], sizes[j]) for i in range(l) for j in range(i + 1, l))
    lg += math.log(rho)
    s_l = sum(sizes)
    lc = math.log(rho) + log_gamma_tilde(s_l)
    return ZetaFloor(l, math.exp(lg), math.exp(lc), lg, lc)


def _check_rho(rho: float) -> None:
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"rho must lie in (0, 1], got {rho}")


def _logaddexp(a: float, b: float) -> float:
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    hi, lo = (a, b) if a >= b else (b, a)
    return hi + math.log1p(math.exp(lo - hi))


def _eta_from_log_gap(log_gap: float) -> float:
    # adding 0.0 turns the -0.0 of a zero gap into 0.0
    return -math.expm1(log_gap) + 0.0 if log_gap > -745 else 1.0


def _log_gap_tilde(s: int, rho: float) -> float:
    """log(1 - eta_tilde) at level size s, with the exponent 2(s - 1)."""
    if s <= 2:
        return 0.0
    log_z = 2 * (s - 1) * (math.log(rho) + log_gamma_tilde(s))
    gap1 = log_z - LOG2
    gap2 = log_z - _logaddexp(log_z, math.log(s - 2))
    return min(gap1, gap2)


def eta_tilde(n: int, rho: float = 1.0) -> float:
    """max(eta', eta''): a constant depending on n and rho only."""
    _check_rho(rho)
    return _eta_from_log_gap(_log_gap_tilde(n, rho))


@dataclass
class BoundConstants:
    partition: Partition
    rho: float
    eta_per_level: List[float]
    log_gap_per_level: List[float]
    zeta_floor_per_level: List[ZetaFloor]
    eta_tilde: float
    log_gap_tilde: float
    eta_tilde_per_level: List[float]

    @property
    def eta(self) -> float:
        return self.eta_per_level[-1]

    @property
    def log_gap(self) -> float:
        return self.log_gap_per_level[-1]

    @property
    def mu(self) -> float:
        return math.sqrt(self.eta)

    def table(self) -> str:
        lines = [f"partition {self.partition}  rho={self.rho:g}",
                 f"{'l':>3} {'s_l':>4} {'zeta floor':>12} {'crude floor':>12} {'eta':>20} {'eta_tilde':>20}"]
        for k, eta in enumerate(self.eta_per_level):
            l = k + 2
            z = self.zeta_floor_per_level[k]
            lines.append(
                f"{l:>3} {sum(self.partition.sizes[:l]):>4} {z.gamma_floor:>12.5e} "
                f"{z.crude_floor:>12.5e} {eta:>20.17f} {self.eta_tilde_per_level[k]:>20.17f}"
            )
        lines.append(f"eta={self.eta:.17g} mu={self.mu:.17g} eta_tilde={self.eta_tilde:.17g}")
        return "\n".join(lines)


def eta_recursion(p: Partition, rho: float = 1.0) -> BoundConstants:
    """eta_{pi_l} for l = 2..m with zeta_l replaced by its gamma floor.

    For m = 1 there is nothing to annihilate and the single level is 0.
    """
    _check_rho(rho)
    if p.m == 1:
        return BoundConstants(p, rho, [0.0], [0.0], [], 0.0, 0.0, [0.0])
    etas = [0.0]
    gaps = [0.0]
    floors = [zeta_floor(p, 2, rho)]
    tildes = [eta_tilde(sum(p.sizes[:2]), rho)]
    for l in range(3, p.m + 1):
        z = zeta_floor(p, l, rho)
        floors.append(z)
        log_z = 2 * (l - 1) * z.log_gamma_floor
        prev_gap = gaps[-1]
        prev_eta = _eta_from_log_gap(prev_gap)
        g0 = log_z - LOG2
        # 1 - g(eps) = (1 - eta_prev) z / (z + 2 (l - 2) eta_prev)
        c = 2 * (l - 2) * prev_eta
        denom = _logaddexp(log_z, math.log(c) if c > 0 else -math.inf)
        g_eps = prev_gap + log_z - denom
        gap = min(g0, g_eps)
        gaps.append(gap)
        etas.append(_eta_from_log_gap(gap))
        tildes.append(eta_tilde(sum(p.sizes[:l]), rho))
    return BoundConstants(
        partition=p,
        rho=rho,
        eta_per_level=etas,
        log_gap_per_level=gaps,
        zeta_floor_per_level=floors,
        eta_tilde=eta_tilde(p.n, rho),
        log_gap_tilde=_log_gap_tilde(p.n, rho),
        eta_tilde_per_level=tildes,
    )


def eta_elementwise_exact(n: int) -> Fraction:
    """The element-wise constant as an exact rational."""
    if n < 2:
        raise ValueError("n must be at least 2")
    eta = Fraction(0)
    for k in range(3, n + 1):
        t = Fraction(1, 2 ** (k - 2))
        eta = max(1 - t / 2, 1 - t * (1 - eta) / (t + (k - 2) * eta))
    return eta


def eta_elementwise(n: int) -> float:
    """max{1 - 2^{1-n}, 1 - 2^{2-n}(1 - eta_{n-1}) / (2^{2-n} + (n-2) eta_{n-1})}."""
    return float(eta_elementwise_exact(n))


def bound_partition(p: Partition, witness) -> Partition:
    """Partition on which the class theorem applies for this witness."""
    return p.permuted(witness.bound_perm)


def eta_for_witness(p: Partition, rho: float, witness) -> float:
    if all(s == 1 for s in p.sizes):
        return eta_elementwise(p.n) if p.n >= 2 else 0.0
    return eta_recursion(bound_partition(p, witness), rho).eta


def mu_for_sequence(o, p: Partition, rho: float = 1.0, witness=None) -> Tuple[float, int]:
    """(mu, d): the operator-norm bound and the shift count of the witness.

    The bound covers the product of d + 1 consecutive sweep operators.
    Without a witness, the classes are searched from the narrowest one up.
    """
    if witness is None:
        witness = find_any_witness(o)
    if witness is None:
        raise NoWitness("sequence is not in any supported class")
    return math.sqrt(eta_for_witness(p, rho, witness)), int(witness.d)


def find_any_witness(o):
    from .orderings import find_witness

    kinds = ("B_sp", "B_spg", "B_sg") if o.is_cyclic else ("barB_sp", "barB_spg", "barB_sg")
    for kind in kinds:
        w: Optional[object] = find_witness(kind, o)
        if w is not None:
            return w
    return None
