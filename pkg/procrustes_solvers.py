"""
Procrustes Solvers Module
Orthogonality-constrained W-subproblem: min tr(W^T G W) + 2 tr(A^T W) s.t. W^T W = I

Balanced case (d = n) is a closed-form SVD; the unbalanced case (d < n) is
solved by majorization, one thin SVD per step.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from bench_errors import DimensionError, NumericalError

logger = logging.getLogger(__name__)

Seed = Union[int, Sequence[int]]

DOMINANT_MARGIN = 1e-6
POWER_TOL = 1e-10
POWER_MAX_ITER = 10000


@dataclass(frozen=True)
class WSubproblem:
    g: np.ndarray   # n x n symmetric positive definite
    a: np.ndarray   # n x d

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        a = np.asarray(self.a, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise DimensionError(f"G must be square, got shape {g.shape}")
        if a.ndim != 2 or a.shape[0] != g.shape[0]:
            raise DimensionError(f"A has shape {a.shape}, expected ({g.shape[0]}, d)")
        if a.shape[1] > g.shape[0]:
            raise DimensionError(f"d={a.shape[1]} exceeds n={g.shape[0]}")
        if np.max(np.abs(g - g.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(g), initial=0.0)):
            raise DimensionError("G must be symmetric")
        object.__setattr__(self, 'g', g)
        object.__setattr__(self, 'a', a)

    @property
    def n(self) -> int:
        return self.g.shape[0]

    @property
    def d(self) -> int:
        return self.a.shape[1]


def w_objective(p: WSubproblem, w: np.ndarray) -> float:
    """tr(W^T G W) + 2 tr(A^T W)"""
    return float(np.sum(w * (p.g @ w)) + 2.0 * np.sum(p.a * w))


def _check_finite(p: WSubproblem) -> None:
    if not (np.all(np.isfinite(p.g)) and np.all(np.isfinite(p.a))):
        raise NumericalError("non-finite entries in the W-subproblem")


def orthonormal_init(n: int, d: int, seed: Seed) -> np.ndarray:
    """
    Seeded random n x d matrix with orthonormal columns.

    QR of a Gaussian matrix with the signs of R's diagonal folded into Q,
    so the result is unique per seed.
    """
    if not 1 <= d <= n:
        raise DimensionError(f"cannot build {n}x{d} orthonormal matrix")
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((n, d)))
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def dominant_eigenvalue(g: np.ndarray, tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER) -> float:
    """
    Largest eigenvalue of a symmetric positive semidefinite matrix by power iteration.

    Stops when ||G v - lambda v|| <= tol * max(lambda, 1). Falls back to a
    dense eigensolver if the iteration does not settle.

    Example:
        >>> round(dominant_eigenvalue(np.diag([3.0, 1.0])), 6)
        3.0
    """
    n = g.shape[0]
    v = np.random.default_rng(n).standard_normal(n)
    v /= np.linalg.norm(v)
    value = 0.0
    for _ in range(max_iter):
        gv = g @ v
        value = float(v @ gv)
        if np.linalg.norm(gv - value * v) <= tol * max(abs(value), 1.0):
            return value
        norm = np.linalg.norm(gv)
        if norm == 0.0:
            return 0.0
        v = gv / norm
    logger.debug("power iteration did not settle after %d steps, using eigvalsh", max_iter)
    return float(linalg.eigvalsh(g)[-1])


def polar_factor(m: np.ndarray) -> np.ndarray:
    """U V^T from the thin SVD of M: the orthonormal W maximizing tr(W^T M)"""
    u, _, vt = linalg.svd(m, full_matrices=False)
    return u @ vt


def solve_balanced(p: WSubproblem) -> np.ndarray:
    """
    Closed form for d = n.

    tr(W^T G W) = tr(G) for square orthogonal W, so only the linear term
    matters: W = U V^T with -A = U S V^T. Both +/- U V^T are scored and the
    lower objective wins.

    Raises:
        DimensionError: If d != n
    """
    if p.d != p.n:
        raise DimensionError(f"balanced Procrustes needs d = n, got d={p.d}, n={p.n}")
    _check_finite(p)
    w = polar_factor(-p.a)
    return w if w_objective(p, w) <= w_objective(p, -w) else -w


def majorization_steps(p: WSubproblem, w0: np.ndarray,
                       shift: Optional[float] = None) -> Iterator[Tuple[np.ndarray, float]]:
    """
    Endless stream of majorization iterates (W, objective).

    With a >= lambda_max(G) the objective is bounded above by a linear
    function of W touching it at the current iterate; each step maximizes
    tr(W^T M) with M = 2 (aI - G) W - 2 A. The objective never increases.
    """
    if shift is None:
        shift = dominant_eigenvalue(p.g) * (1.0 + DOMINANT_MARGIN)
    h = shift * np.eye(p.n) - p.g
    w = w0
    while True:
        m = 2.0 * (h @ w) - 2.0 * p.a
        if not np.all(np.isfinite(m)):
            raise NumericalError("non-finite majorization matrix")
        w = polar_factor(m)
        yield w, w_objective(p, w)


def solve_unbalanced(p: WSubproblem, inner_tol: float = 1e-8, inner_max: int = 200,
                     seed: Seed = 0, init: Optional[np.ndarray] = None,
                     shift: Optional[float] = None,
                     on_step: Optional[Callable[[np.ndarray, float], None]] = None) -> np.ndarray:
    """
    Majorization solver for d < n.

    Args:
        p: Subproblem with d < n
        inner_tol: Stop when the relative objective decrease falls below this
        inner_max: Maximum number of majorization steps
        seed: Seed of the random orthonormal start (ignored when init is given)
        init: Warm start, an n x d orthonormal matrix
        shift: Majorization constant a >= lambda_max(G); computed when omitted
        on_step: Called with (W, objective) after every majorization step

    Returns:
        n x d orthonormal matrix

    Raises:
        DimensionError: If d >= n
        NumericalError: On non-finite input
    """
    if p.d >= p.n:
        raise DimensionError(f"unbalanced Procrustes needs d < n, got d={p.d}, n={p.n}")
    _check_finite(p)
    w = init if init is not None else orthonormal_init(p.n, p.d, seed)
    previous = w_objective(p, w)
    steps = 0
    for steps, (w, current) in enumerate(majorization_steps(p, w, shift), start=1):
        if on_step is not None:
            on_step(w, current)
        if previous - current <= inner_tol * max(abs(previous), 1.0) or steps >= inner_max:
            break
        previous = current
    logger.debug("majorization stopped after %d steps", steps)
    return w
