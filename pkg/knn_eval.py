"""
Evaluation Module
1-NN accuracy in projected space, dimension sweeps and robustness angles
"""

import logging
import math
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field
from scipy.spatial.distance import cdist

from bench_errors import DataError, DimensionError, UsageError
from dataset_loader import LabeledDataset
from l1blda_admm import AdmmConfig, IterationRecord, solve_l1blda
from scatter_stats import adaptive_weights, class_stats, l2blda_matrix, scatter_matrices
from spectral_solvers import (
    METHODS,
    ProjectionMatrix,
    check_dimension,
    solve_l2blda,
    solve_lda,
    solve_pca,
)

logger = logging.getLogger(__name__)

# methods whose d-dim solution is the prefix of the d_max solution
NESTED_METHODS = ('pca', 'lda', 'l2blda')

# test rows per distance block
KNN_CHUNK = 2048

TraceCallback = Callable[[int, List[IterationRecord]], None]


class ExperimentReport(BaseModel):
    method: str
    dataset: str
    seed: int = 0
    noise: Optional[str] = None
    per_dim: List[Tuple[int, float]] = Field(default_factory=list)
    best_accuracy: float = 0.0
    best_dim: int = 1

    @property
    def best(self) -> Tuple[float, int]:
        return self.best_accuracy, self.best_dim


def _matrix(w: Union[ProjectionMatrix, np.ndarray]) -> np.ndarray:
    return w.w if isinstance(w, ProjectionMatrix) else np.asarray(w, dtype=float)


def best_of_curve(per_dim: List[Tuple[int, float]]) -> Tuple[float, int]:
    """Highest accuracy and its dimension, ties to the smaller dimension"""
    best_dim, best_accuracy = per_dim[0]
    for d, accuracy in per_dim[1:]:
        if accuracy > best_accuracy:
            best_dim, best_accuracy = d, accuracy
    return best_accuracy, best_dim


def project(data: LabeledDataset, w: Union[ProjectionMatrix, np.ndarray]) -> np.ndarray:
    """d x N projected samples W^T X"""
    matrix = _matrix(w)
    if matrix.shape[0] != data.n:
        raise DimensionError(f"projection has {matrix.shape[0]} rows, {data.name} has n={data.n}")
    return matrix.T @ data.features


def knn1_accuracy(train: LabeledDataset, test: LabeledDataset,
                  w: Union[ProjectionMatrix, np.ndarray]) -> float:
    """
    Nearest-neighbor accuracy (percent) of test samples against train in projected space.

    Distance ties go to the lowest training index.

    Raises:
        DataError: Empty train or test set
        DimensionError: Feature counts do not match the projection
    """
    if train.N == 0 or test.N == 0:
        raise DataError("1-NN needs nonempty train and test sets")
    reference = project(train, w).T
    queries = project(test, w).T
    correct = 0
    for start in range(0, test.N, KNN_CHUNK):
        block = cdist(queries[start:start + KNN_CHUNK], reference, 'sqeuclidean')
        nearest = np.argmin(block, axis=1)
        correct += int(np.sum(train.labels[nearest] == test.labels[start:start + KNN_CHUNK]))
    return 100.0 * correct / test.N


def knn1_loo_accuracy(data: LabeledDataset, w: Union[ProjectionMatrix, np.ndarray]) -> float:
    """Leave-one-out 1-NN accuracy (percent) within a single partition"""
    if data.N < 2:
        raise DataError("leave-one-out 1-NN needs at least two samples")
    points = project(data, w).T
    distances = cdist(points, points, 'sqeuclidean')
    np.fill_diagonal(distances, np.inf)
    nearest = np.argmin(distances, axis=1)
    return 100.0 * int(np.sum(data.labels[nearest] == data.labels)) / data.N


def fit_projection(train: LabeledDataset, method: str, d: int,
                   admm: Optional[AdmmConfig] = None) -> ProjectionMatrix:
    """
    Fits one of pca, lda, l2blda, l1blda at dimension d.

    Raises:
        UsageError: Unknown method
        DimensionError: d out of range
    """
    if method not in METHODS:
        raise UsageError(f"unknown method {method!r}, expected one of {', '.join(METHODS)}")
    check_dimension(d, train.n)
    if method == 'l1blda':
        projection, _ = solve_l1blda(train, d, admm)
        return projection
    stats = class_stats(train)
    if method == 'pca':
        return solve_pca(scatter_matrices(train, stats), d)
    if method == 'lda':
        return solve_lda(scatter_matrices(train, stats), d)
    return solve_l2blda(l2blda_matrix(train, stats, adaptive_weights(stats)), d)


def dim_sweep(train: LabeledDataset, test: LabeledDataset, method: str, d_max: int,
              admm: Optional[AdmmConfig] = None, seed: int = 0, noise: Optional[str] = None,
              on_trace: Optional[TraceCallback] = None) -> ExperimentReport:
    """
    1-NN accuracy at every dimension 1..d_max.

    Nested methods are fitted once at d_max and evaluated on column prefixes;
    L1BLDA is refitted for every d. The best entry is the highest accuracy,
    ties going to the smaller dimension.

    Args:
        train: Training partition
        test: Test partition
        method: pca, lda, l2blda or l1blda
        d_max: Largest dimension, at most n
        admm: L1BLDA controls
        seed: Split seed recorded in the report
        noise: Noise label recorded in the report
        on_trace: Receives (d, trace) after every L1BLDA fit

    Returns:
        ExperimentReport with the full curve and the best (accuracy, dim)
    """
    if method not in METHODS:
        raise UsageError(f"unknown method {method!r}, expected one of {', '.join(METHODS)}")
    check_dimension(d_max, train.n)
    if test.n != train.n:
        raise DimensionError(f"train has n={train.n}, test has n={test.n}")

    per_dim = []
    if method in NESTED_METHODS:
        full = fit_projection(train, method, d_max)
        for d in range(1, d_max + 1):
            per_dim.append((d, knn1_accuracy(train, test, full.w[:, :d])))
    else:
        for d in range(1, d_max + 1):
            projection, trace = solve_l1blda(train, d, admm)
            if on_trace is not None:
                on_trace(d, trace)
            per_dim.append((d, knn1_accuracy(train, test, projection)))

    best_accuracy, best_dim = best_of_curve(per_dim)
    logger.debug("%s on %s seed %d: best %.2f (%d)", method, train.name, seed, best_accuracy, best_dim)
    return ExperimentReport(
        method=method,
        dataset=train.name,
        seed=seed,
        noise=noise,
        per_dim=per_dim,
        best_accuracy=best_accuracy,
        best_dim=best_dim,
    )


def direction_angle(u: np.ndarray, v: np.ndarray) -> float:
    """Acute angle in degrees between two lines through the origin"""
    u = np.ravel(u)
    v = np.ravel(v)
    cosine = abs(float(u @ v)) / (np.linalg.norm(u) * np.linalg.norm(v))
    return math.degrees(math.acos(min(1.0, cosine)))


def robustness_angle(clean: LabeledDataset, dirty: LabeledDataset, method: str, seed: int = 0,
                     admm: Optional[AdmmConfig] = None) -> float:
    """
    Angle in [0, 90] degrees between the 1-D directions fitted on clean and
    on corrupted 2-D data.

    Raises:
        DimensionError: If either dataset is not 2-D
    """
    if clean.n != 2 or dirty.n != 2:
        raise DimensionError(f"robustness angle needs 2-D data, got n={clean.n} and n={dirty.n}")
    cfg = (admm or AdmmConfig()).model_copy(update={'seed': seed})
    first = fit_projection(clean, method, 1, cfg)
    second = fit_projection(dirty, method, 1, cfg)
    return direction_angle(first.w[:, 0], second.w[:, 0])
