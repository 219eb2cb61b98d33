import os
import sys

import numpy as np
import pytest

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

from dataset_loader import LabeledDataset, load_csv, normalize_minmax  # noqa: E402

IRIS_PATH = os.path.join(ROOT, 'data', 'iris.csv')


def random_dataset(rng: np.random.Generator, n: int, N: int, c: int, spread: float = 2.0) -> LabeledDataset:
    """Gaussian classes around random centers; every class has at least one sample"""
    labels = np.concatenate([np.arange(1, c + 1), rng.integers(1, c + 1, size=N - c)])
    centers = spread * rng.standard_normal((n, c))
    features = centers[:, labels - 1] + rng.standard_normal((n, N))
    return LabeledDataset(features=features, labels=labels, n_classes=c, name='random')


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope='session')
def iris():
    return normalize_minmax(load_csv(IRIS_PATH, label_column='label'))


@pytest.fixture(scope='session')
def iris_path():
    return IRIS_PATH
