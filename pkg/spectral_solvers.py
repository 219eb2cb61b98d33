"""
Spectral Solvers Module
Eigendecomposition-based projections: L2BLDA, classical LDA and PCA
"""

import logging
from dataclasses import dataclass
from typing import Literal, Optional, Tuple

import numpy as np
from scipy import linalg

from bench_errors import DimensionError
from scatter_stats import ScatterSet

logger = logging.getLogger(__name__)

Method = Literal['pca', 'lda', 'l2blda', 'l1blda']
METHODS: Tuple[str, ...] = ('pca', 'lda', 'l2blda', 'l1blda')

# relative cut-off for the pseudo-inverse of a singular S_w
PINV_RTOL = 1e-10


@dataclass(frozen=True)
class ProjectionMatrix:
    """
    Column-orthonormal n x d transform produced by every solver.

    spectrum holds the full eigenvalue list (solver order) for the spectral
    methods and is None for L1BLDA.
    """
    w: np.ndarray
    method: str
    objective: float
    spectrum: Optional[np.ndarray] = None
    seed: Optional[int] = None

    @property
    def n(self) -> int:
        return self.w.shape[0]

    @property
    def d(self) -> int:
        return self.w.shape[1]

    def transform(self, features: np.ndarray) -> np.ndarray:
        """Projects an n x N feature matrix to d x N"""
        return self.w.T @ features


def check_dimension(d: int, n: int) -> None:
    """
    Raises:
        DimensionError: Unless 1 <= d <= n
    """
    if not 1 <= d <= n:
        raise DimensionError(f"target dimension d={d} must satisfy 1 <= d <= n={n}")


def orthonormality_error(w: np.ndarray) -> float:
    """||W^T W - I||_F"""
    return float(np.linalg.norm(w.T @ w - np.eye(w.shape[1])))


def canonicalize_signs(w: np.ndarray) -> np.ndarray:
    """Flips each column so its largest-magnitude entry is positive"""
    w = np.array(w, dtype=float)
    for k in range(w.shape[1]):
        pivot = np.argmax(np.abs(w[:, k]))
        if w[pivot, k] < 0:
            w[:, k] = -w[:, k]
    return w


def orthonormalize(vectors: np.ndarray) -> np.ndarray:
    """
    Modified Gram-Schmidt with one reorthogonalization pass.

    Column k of the result depends only on input columns 0..k, so prefixes of
    the input give prefixes of the output. A column that is (numerically)
    inside the span of the previous ones is replaced by the first basis
    vector of the orthogonal complement.
    """
    n, d = vectors.shape
    q = np.zeros((n, d))
    for k in range(d):
        v = np.array(vectors[:, k], dtype=float)
        for _ in range(2):
            for j in range(k):
                v -= (q[:, j] @ v) * q[:, j]
        norm = np.linalg.norm(v)
        if norm <= 1e-10 * np.linalg.norm(vectors[:, k]):
            v = linalg.null_space(q[:, :k].T)[:, 0] if k else np.eye(n)[:, 0]
            norm = np.linalg.norm(v)
        q[:, k] = v / norm
    return q


def solve_l2blda(s: np.ndarray, d: int) -> ProjectionMatrix:
    """
    Minimizes tr(W^T S W) subject to W^T W = I.

    Args:
        s: Symmetric n x n matrix from scatter_stats.l2blda_matrix
        d: Target dimension, 1 <= d <= n

    Returns:
        Eigenvectors of the d algebraically smallest eigenvalues, ascending

    Example:
        >>> solve_l2blda(np.diag([5.0, -2.0, 1.0]), 1).objective
        -2.0
    """
    check_dimension(d, s.shape[0])
    values, vectors = linalg.eigh(s)
    w = canonicalize_signs(vectors[:, :d])
    objective = float(np.trace(w.T @ s @ w))
    logger.debug("l2blda: d=%d smallest eigenvalues %s", d, values[:d])
    return ProjectionMatrix(w=w, method='l2blda', objective=objective, spectrum=values)


def lda_directions(scatters: ScatterSet) -> Tuple[np.ndarray, np.ndarray, bool]:
    """
    Generalized eigenpairs of (S_b, S_w), eigenvalues descending.

    With a nonsingular S_w the pencil is solved directly and the vectors are
    S_w-orthonormal. Otherwise S_b is whitened with the pseudo-inverse square
    root of S_w and the pairs live on the range of S_w.

    Returns:
        (eigenvalues, eigenvectors as columns, whether S_w was singular)
    """
    w_values, w_vectors = linalg.eigh(scatters.s_w)
    top = max(float(w_values[-1]), 0.0)
    cutoff = PINV_RTOL * top
    singular = top == 0.0 or float(w_values[0]) <= cutoff

    if not singular:
        values, vectors = linalg.eigh(scatters.s_b, scatters.s_w)
    else:
        inv_root = np.where(w_values > cutoff, 1.0 / np.sqrt(np.where(w_values > cutoff, w_values, 1.0)), 0.0)
        whitener = (w_vectors * inv_root) @ w_vectors.T
        values, rotated = linalg.eigh(whitener @ scatters.s_b @ whitener)
        vectors = whitener @ rotated
    return values[::-1], vectors[:, ::-1], singular


def solve_lda(scatters: ScatterSet, d: int) -> ProjectionMatrix:
    """
    Classical LDA: top-d generalized eigenvectors of (S_b, S_w), orthonormalized.

    At most c-1 directions carry information; requesting more is allowed and
    the extra columns come from the remaining (zero-eigenvalue) directions.

    Raises:
        DimensionError: If d > n
    """
    n = scatters.s_b.shape[0]
    check_dimension(d, n)
    values, vectors, singular = lda_directions(scatters)
    if singular:
        logger.debug("lda: singular within-class scatter, using pseudo-inverse")
    w = canonicalize_signs(orthonormalize(vectors[:, :d]))
    return ProjectionMatrix(w=w, method='lda', objective=float(np.sum(values[:d])), spectrum=values)


def solve_pca(scatters: ScatterSet, d: int) -> ProjectionMatrix:
    """Top-d eigenvectors of the total scatter S_t, eigenvalues descending"""
    s_t = scatters.s_t
    check_dimension(d, s_t.shape[0])
    values, vectors = linalg.eigh(s_t)
    values, vectors = values[::-1], vectors[:, ::-1]
    w = canonicalize_signs(vectors[:, :d])
    return ProjectionMatrix(w=w, method='pca', objective=float(np.trace(w.T @ s_t @ w)), spectrum=values)
