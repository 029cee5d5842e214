"""Dense symmetric kernels: off-norm, the element-wise cyclic Jacobi eigensolver,
QR with column pivoting and singular-value / spectral-radius estimators.

numpy arrays are used for storage and vector arithmetic only; every
factorization here is written out explicitly.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .errors import DimensionMismatch, NonConvergence

ORDERINGS = ("nonincreasing", "nondecreasing", "unsorted")

KERNEL_TOL = 1e-13
NORM_TOL = 1e-10


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    """Return ``x`` as a finite 2-D float array (copy)."""
    a = np.array(x, dtype=float)
    if a.ndim == 1 and a.size == 1:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise DimensionMismatch(f"{name} must be a non-empty 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def as_symmetric(x, name: str = "matrix", atol: Optional[float] = None) -> np.ndarray:
    """Return an exactly symmetric copy of ``x``.

    The strict upper triangle is mirrored into the lower one. If ``atol`` is
    given, asymmetry larger than that raises ``ValueError`` first.
    """
    a = as_matrix(x, name)
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {a.shape}")
    if atol is not None:
        dev = float(np.max(np.abs(a - a.T))) if a.size else 0.0
        if dev > atol:
            raise ValueError(f"{name} is not symmetric (max deviation {dev:.3e})")
    upper = np.triu(a, 1)
    return upper + upper.T + np.diag(np.diag(a))


@functools.lru_cache(maxsize=64)
def _upper_indices(n: int) -> Tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(n, 1)


def off_norm(a) -> float:
    """sqrt of the sum of squares of the strictly upper-triangular entries."""
    a = np.asarray(a, dtype=float)
    if a.shape[0] < 2:
        return 0.0
    u = a[_upper_indices(a.shape[0])]
    big = float(np.max(np.abs(u))) if u.size else 0.0
    if big == 0.0:
        return 0.0
    if 1e-150 < big < 1e150:
        return float(math.sqrt(float(np.dot(u, u))))
    # rescale so tiny or huge entries neither underflow nor overflow when squared
    u = u / big
    return big * float(math.sqrt(float(np.dot(u, u))))


@dataclass(frozen=True)
class GivensRotation:
    p: int
    q: int
    c: float
    s: float

    def matrix(self, n: int) -> np.ndarray:
        g = np.eye(n)
        g[self.p, self.p] = self.c
        g[self.q, self.q] = self.c
        g[self.p, self.q] = self.s
        g[self.q, self.p] = -self.s
        return g


@dataclass
class EigenResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    ordering: str
    sweeps: int
    rotations: int
    min_cos: float = 1.0
    final_off: float = 0.0
    trace: Optional[List[float]] = None


def jacobi_rotation(app: float, aqq: float, apq: float) -> Tuple[float, float, float]:
    """(c, s, t) annihilating ``apq`` with |angle| <= pi/4."""
    theta = (aqq - app) / (2.0 * apq)
    if abs(theta) > 1e150:
        t = 1.0 / (2.0 * theta)
    else:
        t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(1.0 + theta * theta))
    c = 1.0 / math.sqrt(1.0 + t * t)
    return c, t * c, t


def sort_eigenpairs(w: np.ndarray, v: np.ndarray, ordering: str) -> Tuple[np.ndarray, np.ndarray]:
    if ordering == "unsorted":
        return w, v
    if ordering == "nonincreasing":
        idx = np.argsort(-w, kind="stable")
    elif ordering == "nondecreasing":
        idx = np.argsort(w, kind="stable")
    else:
        raise ValueError(f"unknown ordering {ordering!r}")
    return w[idx], v[:, idx]


def jacobi_eigensolve(
    a,
    tol: float = KERNEL_TOL,
    ordering: str = "nonincreasing",
    max_sweeps: int = 60,
    record_trace: bool = False,
) -> EigenResult:
    """Row-cyclic element-wise Jacobi method.

    Stops once ``off_norm <= tol * ||A||_F``. Eigenvalues are reordered after
    convergence by a stable sort, with ``V``'s columns permuted alongside.
    ``record_trace`` keeps the off-norm at the start of every sweep.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_sweeps < 1:
        raise ValueError("max_sweeps must be at least 1")
    if ordering not in ORDERINGS:
        raise ValueError(f"unknown ordering {ordering!r}")
    a = as_symmetric(a)
    n = a.shape[0]
    v = np.eye(n)
    fro = float(np.linalg.norm(a))
    thresh = tol * fro
    trace: List[float] = []
    rotations = 0
    min_cos = 1.0
    sweeps = 0
    while True:
        off = off_norm(a)
        if record_trace:
            trace.append(off)
        if off <= thresh:
            break
        if sweeps >= max_sweeps:
            raise NonConvergence(
                f"off-norm {off:.3e} above {thresh:.3e} after {max_sweeps} sweeps"
            )
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                c, s, t = jacobi_rotation(app, aqq, apq)
                if c < min_cos:
                    min_cos = c
                rotations += 1
                cp = a[:, p].copy()
                cq = a[:, q]
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                rp = a[p, :].copy()
                rq = a[q, :]
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q]
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    w, v = sort_eigenpairs(np.diag(a).copy(), v, ordering)
    return EigenResult(
        eigenvalues=w,
        eigenvectors=v,
        ordering=ordering,
        sweeps=sweeps,
        rotations=rotations,
        min_cos=min_cos,
        final_off=off,
        trace=trace if record_trace else None,
    )


# -- QR with column pivoting -------------------------------------------------


def qr_column_pivoting(x, return_factors: bool = False):
    """Householder QR with Businger-Golub column pivoting.

    At step k the remaining column with the largest residual norm is moved to
    position k (first one wins ties). Returns ``(perm, rdiag)`` where
    ``perm[k]`` is the original index of the column in position k, and
    ``rdiag`` holds the nonincreasing ``|r_kk|``. With ``return_factors`` the
    tuple is extended by ``Q`` and ``R`` such that ``X[:, perm] = Q R``.
    """
    r = as_matrix(x, "X")
    rows, cols = r.shape
    perm = list(range(cols))
    q = np.eye(rows)
    steps = min(rows, cols)
    rdiag = []
    for k in range(steps):
        norms = np.sum(r[k:, k:] ** 2, axis=0)
        piv = k + int(np.argmax(norms))
        if piv != k:
            r[:, [k, piv]] = r[:, [piv, k]]
            perm[k], perm[piv] = perm[piv], perm[k]
        col = r[k:, k]
        alpha = float(np.linalg.norm(col))
        if alpha > 0.0:
            u = col.copy()
            sgn = 1.0 if u[0] >= 0 else -1.0
            u[0] += sgn * alpha
            un = float(np.dot(u, u))
            if un > 0.0:
                r[k:, k:] -= np.outer(u, (2.0 / un) * (u @ r[k:, k:]))
                q[:, k:] -= np.outer(q[:, k:] @ u, (2.0 / un) * u)
            r[k + 1:, k] = 0.0
        rdiag.append(abs(float(r[k, k])))
    rdiag = np.array(rdiag)
    if return_factors:
        return perm, rdiag, q, np.triu(r)
    return perm, rdiag


# -- norm estimators ---------------------------------------------------------


def _gram_eigenvalues(x: np.ndarray, tol: float) -> np.ndarray:
    # the smaller Gram matrix carries the same nonzero spectrum
    g = x.T @ x if x.shape[0] >= x.shape[1] else x @ x.T
    res = jacobi_eigensolve(g, tol=min(tol, 1e-14), ordering="nondecreasing", max_sweeps=100)
    return np.maximum(res.eigenvalues, 0.0)


def spectral_norm(x, tol: float = NORM_TOL) -> float:
    """Largest singular value, from the kernel applied to the Gram matrix."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = as_matrix(x, "X")
    if not np.any(x):
        return 0.0
    return float(math.sqrt(_gram_eigenvalues(x, tol)[-1]))


def singular_values(x, tol: float = NORM_TOL) -> np.ndarray:
    """The min(rows, cols) singular values, nonincreasing."""
    x = as_matrix(x, "X")
    if not np.any(x):
        return np.zeros(min(x.shape))
    return np.sqrt(_gram_eigenvalues(x, tol))[::-1]


def sigma_min(x, tol: float = NORM_TOL) -> float:
    """Smallest of the min(rows, cols) singular values."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = as_matrix(x, "X")
    if not np.any(x):
        return 0.0
    if min(x.shape) == 1:
        # a single row or column has one singular value, its Euclidean norm
        return float(np.linalg.norm(x))
    return float(math.sqrt(_gram_eigenvalues(x, tol)[0]))


def spectral_radius(x, tol: float = NORM_TOL, max_iter: int = 20000, seed: int = 0,
                    restarts: int = 3) -> float:
    """Power-iteration estimate of max |lambda|.

    Uses the two-step ratio sqrt(||X^2 y|| / ||y||), which also settles when
    the dominant eigenvalues come as a +/- pair. For nonnormal input with
    complex dominant eigenvalues this is only an estimate.
    """
    x = as_matrix(x, "X")
    if x.shape[0] != x.shape[1]:
        raise DimensionMismatch("spectral_radius needs a square matrix")
    if not np.any(x):
        return 0.0
    rng = np.random.default_rng(seed)
    for _ in range(restarts):
        y = rng.standard_normal(x.shape[0])
        y /= np.linalg.norm(y)
        prev = -1.0
        for _ in range(max_iter):
            z = x @ (x @ y)
            nz = float(np.linalg.norm(z))
            if nz == 0.0:
                break
            est = math.sqrt(nz)
            if prev >= 0 and abs(est - prev) <= tol * est:
                return est
            prev = est
            y = z / nz
        else:
            raise NonConvergence(f"power iteration did not settle in {max_iter} steps")
    return 0.0


def random_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix via modified Gram-Schmidt."""
    g = rng.standard_normal((n, n))
    q = np.zeros((n, n))
    for k in range(n):
        w = g[:, k].copy()
        for _ in range(2):
            for j in range(k):
                w -= np.dot(q[:, j], w) * q[:, j]
        q[:, k] = w / np.linalg.norm(w)
    return q
