import math
from dataclasses import replace

import numpy as np
import pytest

from bench_errors import DataError, DimensionError
from conftest import random_dataset
from dataset_loader import LabeledDataset
from l1blda_admm import AdmmState
from scatter_stats import (
    adaptive_weights,
    admm_w_matrices,
    class_pairs,
    class_stats,
    l2blda_matrix,
    pair_differences,
    scatter_matrices,
)


def two_points():
    return LabeledDataset(features=[[0.0, 2.0], [0.0, 0.0]], labels=[1, 2], n_classes=2)


def test_class_means_and_priors():
    data = LabeledDataset(features=[[0.0, 2.0, 5.0, 5.0], [0.0, 0.0, 1.0, 1.0]],
                          labels=[1, 1, 2, 2], n_classes=2)
    stats = class_stats(data)
    assert stats.class_means[:, 0].tolist() == [1.0, 0.0]

    skewed = LabeledDataset(features=[[0.0, 1.0, 2.0, 3.0]], labels=[1, 2, 2, 2], n_classes=2)
    assert class_stats(skewed).priors.tolist() == [0.25, 0.75]


def test_class_stats_iris(iris):
    stats = class_stats(iris)
    assert (stats.c, stats.N, stats.n) == (3, 150, 4)
    assert stats.pairs == [(0, 1), (0, 2), (1, 2)]


def test_class_stats_rejects_empty_class():
    data = LabeledDataset(features=[[0.0, 1.0]], labels=[1, 1], n_classes=2)
    with pytest.raises(DataError):
        class_stats(data)


def test_class_pairs_order():
    assert class_pairs(4) == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    assert class_pairs(1) == []


def test_scatter_zero_spread():
    data = LabeledDataset(features=np.ones((3, 6)), labels=[1, 2, 1, 2, 1, 2], n_classes=2)
    s = scatter_matrices(data, class_stats(data))
    for m in (s.s_b, s.s_w, s.s_t):
        assert np.allclose(m, 0.0)


def test_scatter_one_sample_per_class(rng):
    data = LabeledDataset(features=rng.normal(size=(3, 4)), labels=[1, 2, 3, 4], n_classes=4)
    s = scatter_matrices(data, class_stats(data))
    assert np.allclose(s.s_w, 0.0)
    assert np.allclose(s.s_b, s.s_t, atol=1e-12)


def test_total_scatter_decomposes(rng):
    data = random_dataset(rng, n=6, N=40, c=5)
    s = scatter_matrices(data, class_stats(data))
    assert np.max(np.abs(s.s_t - s.s_b - s.s_w)) < 1e-10


def test_adaptive_weights_two_points():
    weights = adaptive_weights(class_stats(two_points()))
    assert weights.delta == pytest.approx(0.5)
    assert weights.omega == pytest.approx(math.sqrt(2) / 4)
    assert type(weights.omega) is float


def test_adaptive_weights_vanish_for_coincident_means():
    data = LabeledDataset(features=[[1.0, -1.0, 1.0, -1.0]], labels=[1, 1, 2, 2], n_classes=2)
    weights = adaptive_weights(class_stats(data))
    assert weights.delta == 0.0
    assert weights.omega == 0.0


def test_adaptive_weights_scale_with_features(rng):
    data = random_dataset(rng, n=3, N=30, c=3)
    base = adaptive_weights(class_stats(data))
    scaled = adaptive_weights(class_stats(data.with_features(3.0 * data.features)))
    assert scaled.delta == pytest.approx(9.0 * base.delta)
    assert scaled.omega == pytest.approx(3.0 * base.omega)


def test_l2blda_matrix_two_points():
    data = two_points()
    stats = class_stats(data)
    s = l2blda_matrix(data, stats, adaptive_weights(stats))
    assert np.allclose(s, [[-2.0, 0.0], [0.0, 0.0]])


def test_l2blda_matrix_psd_for_equal_means():
    data = LabeledDataset(features=[[1.0, -1.0, 2.0, -2.0], [0.5, -0.5, 0.0, 0.0]],
                          labels=[1, 1, 2, 2], n_classes=2)
    stats = class_stats(data)
    s = l2blda_matrix(data, stats, adaptive_weights(stats))
    assert np.min(np.linalg.eigvalsh(s)) >= -1e-12


def test_l2blda_matrix_matches_loop(rng):
    data = random_dataset(rng, n=4, N=25, c=3)
    stats = class_stats(data)
    weights = adaptive_weights(stats)

    expected = np.zeros((4, 4))
    counts = data.class_counts
    means = [data.features[:, idx].mean(axis=1) for idx in data.class_index]
    for i in range(3):
        for j in range(i + 1, 3):
            diff = means[i] - means[j]
            expected -= math.sqrt(counts[i] * counts[j]) / data.N * np.outer(diff, diff)
    for s in range(data.N):
        dev = data.features[:, s] - means[data.labels[s] - 1]
        expected += weights.delta * np.outer(dev, dev)

    assert np.max(np.abs(l2blda_matrix(data, stats, weights) - expected)) < 1e-10


def test_pair_differences_columns(rng):
    data = random_dataset(rng, n=2, N=12, c=3)
    stats = class_stats(data)
    diffs = pair_differences(stats)
    assert diffs.shape == (2, 3)
    assert np.allclose(diffs[:, 2], stats.class_means[:, 1] - stats.class_means[:, 2])


def _state(data, d, seed=0):
    stats = class_stats(data)
    return stats, AdmmState.initial(data.n, d, len(stats.pairs), data.N, seed)


def test_w_matrices_initial_state_keeps_only_copy_term(rng):
    data = random_dataset(rng, n=4, N=20, c=3)
    stats, state = _state(data, 2)
    _, a = admm_w_matrices(data, stats, state)
    assert np.allclose(a, state.w)


def test_w_matrices_single_sample_classes(rng):
    data = LabeledDataset(features=rng.normal(size=(3, 3)), labels=[1, 2, 3], n_classes=3)
    stats, state = _state(data, 2)
    g, _ = admm_w_matrices(data, stats, state)

    pairwise = np.zeros((3, 3))
    for i, j in stats.pairs:
        diff = data.features[:, i] - data.features[:, j]
        pairwise += (1.0 / 9.0) * np.outer(diff, diff)
    assert np.allclose(g, pairwise + np.eye(3))


def test_w_matrices_g_dominates_identity(rng):
    data = random_dataset(rng, n=5, N=30, c=4)
    stats, state = _state(data, 3)
    g, _ = admm_w_matrices(data, stats, state)
    assert np.allclose(g, g.T)
    assert np.min(np.linalg.eigvalsh(g)) >= 1.0 - 1e-10


def test_w_matrices_reject_mismatched_state(rng):
    data = random_dataset(rng, n=4, N=20, c=3)
    stats = class_stats(data)
    wrong = AdmmState.initial(4, 2, len(stats.pairs), data.N + 1, 0)
    with pytest.raises(DimensionError, match="z_blocks"):
        admm_w_matrices(data, stats, wrong)


def test_statistics_ignore_sample_order(rng):
    data = random_dataset(rng, n=4, N=40, c=3)
    order = rng.permutation(data.N)
    shuffled = LabeledDataset(features=data.features[:, order], labels=data.labels[order], n_classes=3)
    stats, state = _state(data, 2)
    shuffled_stats = class_stats(shuffled)

    assert np.allclose(shuffled_stats.class_means, stats.class_means, rtol=0.0, atol=1e-12)
    assert shuffled_stats.priors.tolist() == stats.priors.tolist()
    for name in ('s_b', 's_w', 's_t'):
        assert np.allclose(getattr(scatter_matrices(shuffled, shuffled_stats), name),
                           getattr(scatter_matrices(data, stats), name), rtol=0.0, atol=1e-12)

    weights = adaptive_weights(stats)
    shuffled_weights = adaptive_weights(shuffled_stats)
    assert shuffled_weights.delta == pytest.approx(weights.delta, rel=1e-13)
    assert shuffled_weights.omega == pytest.approx(weights.omega, rel=1e-13)
    assert np.allclose(l2blda_matrix(shuffled, shuffled_stats, shuffled_weights),
                       l2blda_matrix(data, stats, weights), rtol=0.0, atol=1e-12)

    # sample blocks travel with their samples
    z = rng.normal(size=state.z_blocks.shape)
    beta = rng.normal(size=state.beta.shape)
    moved = replace(state, z_blocks=z[order], beta=beta[order])
    kept = replace(state, z_blocks=z, beta=beta)
    g, a = admm_w_matrices(data, stats, kept)
    shuffled_g, shuffled_a = admm_w_matrices(shuffled, shuffled_stats, moved)
    assert np.allclose(shuffled_g, g, rtol=0.0, atol=1e-12)
    assert np.allclose(shuffled_a, a, rtol=0.0, atol=1e-12)
