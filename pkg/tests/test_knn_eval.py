import numpy as np
import pytest

from bench_errors import DataError, DimensionError, UsageError
from conftest import random_dataset
from dataset_loader import LabeledDataset, split
from knn_eval import (
    best_of_curve,
    dim_sweep,
    direction_angle,
    fit_projection,
    knn1_accuracy,
    knn1_loo_accuracy,
    robustness_angle,
)
from l1blda_admm import AdmmConfig
from procrustes_solvers import orthonormal_init


def points(coords, labels, c=2):
    return LabeledDataset(features=np.array(coords, dtype=float).T, labels=labels, n_classes=c)


# ==================== 1-NN ====================

def test_nearer_training_point_wins():
    train = points([(0.0, 0.0), (1.0, 0.0)], [1, 2])
    assert knn1_accuracy(train, points([(0.4, 0.0)], [1]), np.eye(2)) == 100.0
    assert knn1_accuracy(train, points([(0.4, 0.0)], [2]), np.eye(2)) == 0.0


def test_exact_match_and_single_training_sample():
    train = points([(0.0, 0.0), (5.0, 5.0), (2.0, 1.0)], [1, 2, 1])
    assert knn1_accuracy(train, points([(5.0, 5.0)], [2]), np.eye(2)) == 100.0

    single = points([(3.0, 3.0)], [2])
    test = points([(0.0, 0.0), (9.0, -1.0), (3.0, 2.0)], [2, 2, 1])
    assert knn1_accuracy(single, test, np.eye(2)) == pytest.approx(200.0 / 3.0)


def test_distance_tie_goes_to_lowest_index():
    train = points([(-1.0, 0.0), (1.0, 0.0)], [2, 1])
    assert knn1_accuracy(train, points([(0.0, 0.0)], [2]), np.eye(2)) == 100.0


def test_accuracy_invariant_under_rotation_and_relabeling(rng):
    data = random_dataset(rng, n=5, N=60, c=3, spread=1.0)
    train, test = split(data, 0.7, seed=3)
    w = orthonormal_init(5, 3, 1)
    base = knn1_accuracy(train, test, w)

    assert knn1_accuracy(train, test, w @ orthonormal_init(3, 3, 9)) == base

    relabel = np.array([0, 3, 1, 2])

    def renamed(part):
        return LabeledDataset(features=part.features, labels=relabel[part.labels], n_classes=3)

    assert knn1_accuracy(renamed(train), renamed(test), w) == base


def test_self_classification_is_perfect(rng):
    data = random_dataset(rng, n=4, N=30, c=3)
    assert knn1_accuracy(data, data, np.eye(4)) == 100.0


def test_empty_sets_and_shape_mismatch(rng):
    data = random_dataset(rng, n=3, N=10, c=2)
    empty = data.take([])
    with pytest.raises(DataError):
        knn1_accuracy(data, empty, np.eye(3))
    with pytest.raises(DimensionError):
        knn1_accuracy(data, data, np.eye(4))


def test_leave_one_out():
    data = points([(0.0, 0.0), (0.1, 0.0), (5.0, 0.0), (5.1, 0.0), (0.3, 0.0)], [1, 1, 2, 2, 2])
    assert knn1_loo_accuracy(data, np.eye(2)) == pytest.approx(80.0)
    with pytest.raises(DataError):
        knn1_loo_accuracy(data.take([0]), np.eye(2))


# ==================== Sweeps ====================

def test_best_of_curve_prefers_smaller_dimension():
    assert best_of_curve([(1, 80.0), (2, 95.0), (3, 95.0), (4, 90.0)]) == (95.0, 2)


def test_sweep_structure_on_iris(iris):
    train, test = split(iris, 0.7, seed=0)
    report = dim_sweep(train, test, 'l2blda', 4, seed=0)
    assert [d for d, _ in report.per_dim] == [1, 2, 3, 4]
    assert 1 <= report.best_dim <= 4
    assert report.best == best_of_curve(report.per_dim)
    assert report.method == 'l2blda' and report.noise is None


def test_nested_sweep_matches_individual_fits(iris):
    train, test = split(iris, 0.7, seed=2)
    report = dim_sweep(train, test, 'lda', 3)
    for d, accuracy in report.per_dim:
        assert accuracy == knn1_accuracy(train, test, fit_projection(train, 'lda', d))


def test_l1blda_sweep_refits_and_reports_traces(rng):
    data = random_dataset(rng, n=3, N=40, c=2)
    train, test = split(data, 0.7, seed=1)
    traces = {}
    report = dim_sweep(train, test, 'l1blda', 3, admm=AdmmConfig(it_max=10),
                       on_trace=lambda d, trace: traces.update({d: trace}))
    assert sorted(traces) == [1, 2, 3]
    assert all(0 < len(trace) <= 10 for trace in traces.values())
    assert len(report.per_dim) == 3


def test_constant_labels_give_flat_curve(rng):
    train = LabeledDataset(features=rng.normal(size=(4, 20)), labels=np.ones(20, dtype=int), n_classes=2)
    test = LabeledDataset(features=rng.normal(size=(4, 10)), labels=np.ones(10, dtype=int), n_classes=2)
    report = dim_sweep(train, test, 'pca', 4)
    assert [accuracy for _, accuracy in report.per_dim] == [100.0] * 4
    assert report.best == (100.0, 1)


def test_sweep_validation(iris):
    train, test = split(iris, 0.7, seed=0)
    with pytest.raises(UsageError):
        dim_sweep(train, test, 'svm', 2)
    with pytest.raises(DimensionError):
        dim_sweep(train, test, 'pca', 5)
    with pytest.raises(UsageError):
        fit_projection(train, 'kernel-lda', 1)


# ==================== Angles ====================

def test_direction_angle():
    assert direction_angle(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == pytest.approx(90.0)
    assert direction_angle(np.array([1.0, 1.0]), np.array([-2.0, -2.0])) == pytest.approx(0.0, abs=1e-5)
    assert direction_angle(np.array([1.0, 0.0]), np.array([1.0, 1.0])) == pytest.approx(45.0)


def test_robustness_angle_identical_data_is_zero(rng):
    data = random_dataset(rng, n=2, N=30, c=3)
    for method in ('l2blda', 'lda', 'l1blda'):
        assert robustness_angle(data, data, method, admm=AdmmConfig(it_max=20)) == pytest.approx(0.0, abs=1e-5)


def test_robustness_angle_needs_plane(rng):
    data = random_dataset(rng, n=3, N=30, c=3)
    with pytest.raises(DimensionError):
        robustness_angle(data, data, 'l2blda')
