"""
Scatter Module
Class statistics, scatter matrices, adaptive weights and the solver matrices
"""

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, List, Tuple

import numpy as np

from bench_errors import DimensionError
from dataset_loader import LabeledDataset

if TYPE_CHECKING:
    from l1blda_admm import AdmmState

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClassStats:
    global_mean: np.ndarray   # (n,)
    class_means: np.ndarray   # (n, c), column i is the mean of class i+1
    counts: np.ndarray        # (c,)
    priors: np.ndarray        # (c,)

    @property
    def n(self) -> int:
        return self.class_means.shape[0]

    @property
    def c(self) -> int:
        return self.class_means.shape[1]

    @property
    def N(self) -> int:
        return int(self.counts.sum())

    @property
    def pairs(self) -> List[Tuple[int, int]]:
        return class_pairs(self.c)


@dataclass(frozen=True)
class ScatterSet:
    s_b: np.ndarray
    s_w: np.ndarray
    s_t: np.ndarray


@dataclass(frozen=True)
class AdaptiveWeights:
    delta: float
    omega: float


def class_pairs(c: int) -> List[Tuple[int, int]]:
    """0-based class pairs i<j in lexicographic order"""
    return [(i, j) for i in range(c) for j in range(i + 1, c)]


def _symmetric(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def class_stats(data: LabeledDataset) -> ClassStats:
    """
    Class means, global mean, counts and priors P_i = N_i / N.

    Raises:
        DataError: If the dataset has an empty class or fewer than 2 classes
    """
    data.check_invariants()
    means = np.column_stack([data.features[:, idx].mean(axis=1) for idx in data.class_index])
    counts = data.class_counts.astype(int)
    return ClassStats(
        global_mean=data.features.mean(axis=1),
        class_means=means,
        counts=counts,
        priors=counts / data.N,
    )


def pair_differences(stats: ClassStats) -> np.ndarray:
    """n x P matrix whose columns are the mean differences x̄_i - x̄_j, pairs in lexicographic order"""
    pairs = stats.pairs
    if not pairs:
        return np.zeros((stats.n, 0))
    first = [i for i, _ in pairs]
    second = [j for _, j in pairs]
    return stats.class_means[:, first] - stats.class_means[:, second]


def pair_weights(stats: ClassStats) -> np.ndarray:
    """Per-pair coefficients sqrt(N_i N_j) / N"""
    return np.array([np.sqrt(stats.counts[i] * stats.counts[j]) / stats.N for i, j in stats.pairs])


def deviations(data: LabeledDataset, stats: ClassStats) -> np.ndarray:
    """n x N matrix of x_s - x̄_{class(s)}, one column per sample"""
    return data.features - stats.class_means[:, data.labels - 1]


def scatter_matrices(data: LabeledDataset, stats: ClassStats) -> ScatterSet:
    """
    Between, within and total scatter, all with 1/N scaling.

    S_b = sum_i P_i (x̄_i - x̄)(x̄_i - x̄)^T
    S_w = (1/N) sum_s (x_s - x̄_{class(s)})(...)^T
    S_t = (1/N) sum_s (x_s - x̄)(x_s - x̄)^T
    """
    centered_means = stats.class_means - stats.global_mean[:, None]
    s_b = (centered_means * stats.priors) @ centered_means.T
    dev = deviations(data, stats)
    s_w = dev @ dev.T / data.N
    centered = data.features - stats.global_mean[:, None]
    s_t = centered @ centered.T / data.N
    return ScatterSet(s_b=_symmetric(s_b), s_w=_symmetric(s_w), s_t=_symmetric(s_t))


def adaptive_weights(stats: ClassStats) -> AdaptiveWeights:
    """
    Delta = 1/4 sum_{i<j} sqrt(P_i P_j) ||x̄_i - x̄_j||_2^2
    Omega = sqrt(n)/4 sum_{i<j} sqrt(P_i P_j) ||x̄_i - x̄_j||_1
    """
    diffs = pair_differences(stats)
    root_priors = np.array([np.sqrt(stats.priors[i] * stats.priors[j]) for i, j in stats.pairs])
    delta = 0.25 * float(np.sum(root_priors * np.sum(diffs ** 2, axis=0)))
    omega = float(np.sqrt(stats.n) / 4.0 * np.sum(root_priors * np.sum(np.abs(diffs), axis=0)))
    return AdaptiveWeights(delta=delta, omega=omega)


def l2blda_matrix(data: LabeledDataset, stats: ClassStats, weights: AdaptiveWeights) -> np.ndarray:
    """
    S = -(1/N) sum_{i<j} sqrt(N_i N_j) d_ij d_ij^T + Delta sum_s dev_s dev_s^T

    The within-class sum carries no 1/N.
    """
    diffs = pair_differences(stats)
    between = (diffs * pair_weights(stats)) @ diffs.T
    dev = deviations(data, stats)
    within = dev @ dev.T
    return _symmetric(-between + weights.delta * within)


def admm_w_matrices(data: LabeledDataset, stats: ClassStats,
                    current: 'AdmmState') -> Tuple[np.ndarray, np.ndarray]:
    """
    Quadratic and linear terms of the ADMM W-subproblem.

    G = sum_{i<j} (N_i N_j / N^2) d_ij d_ij^T + sum_s dev_s dev_s^T + I
    A = sum_{i<j} c_ij d_ij (B_ij - alpha_ij)^T + sum_s dev_s (Z_s - beta_s)^T + (D + Gamma)

    with c_ij = sqrt(N_i N_j) / N. Minimizing the scaled Lagrangian over W
    is min tr(W^T G W) - 2 tr(A^T W).

    Raises:
        DimensionError: If the state blocks do not fit the data
    """
    d = current.w.shape[1]
    n_pairs = len(stats.pairs)
    expected = {
        'w': (current.w.shape, (data.n, d)),
        'dmat': (current.dmat.shape, (data.n, d)),
        'gamma': (current.gamma.shape, (data.n, d)),
        'b_blocks': (current.b_blocks.shape, (n_pairs, d)),
        'alpha': (current.alpha.shape, (n_pairs, d)),
        'z_blocks': (current.z_blocks.shape, (data.N, d)),
        'beta': (current.beta.shape, (data.N, d)),
    }
    for name, (got, want) in expected.items():
        if got != want:
            raise DimensionError(f"state block {name} has shape {got}, expected {want}")

    diffs = pair_differences(stats)
    coef = pair_weights(stats)
    dev = deviations(data, stats)

    g = (diffs * coef ** 2) @ diffs.T + dev @ dev.T + np.eye(data.n)
    a = (diffs * coef) @ (current.b_blocks - current.alpha) \
        + dev @ (current.z_blocks - current.beta) \
        + current.dmat + current.gamma
    return _symmetric(g), a
