"""
Dataset Module
Loading, normalization, splitting, noise injection and synthetic data
for the discriminant benchmarks
"""

import csv
import gzip
import logging
import math
import os
import struct
from dataclasses import dataclass
from typing import List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field
from scipy import ndimage

from bench_errors import DataError, UsageError

logger = logging.getLogger(__name__)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

# Demo set: four blobs on the x axis, elongated along y
FIG1_CENTERS = np.array([[-3.0, 0.0], [-1.0, 0.0], [1.0, 0.0], [3.0, 0.0]])
FIG1_SIZES = (120, 30, 30, 30)
FIG1_STD = np.array([0.2, 1.0])
FIG1_OUTLIER_SCALE = 10.0
# outlier distances along +y, in units of FIG1_OUTLIER_SCALE * center spread
FIG1_OUTLIER_RADII = (1.0, 0.9)


@dataclass(frozen=True)
class LabeledDataset:
    """
    Feature matrix (n features x N samples) with labels in 1..n_classes.

    Arrays are copied on construction and made read-only so a dataset can be
    shared between concurrent runs.
    """
    features: np.ndarray
    labels: np.ndarray
    n_classes: int
    name: str = "dataset"
    image_shape: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        features = np.array(self.features, dtype=float)
        labels = np.array(self.labels, dtype=int)
        if features.ndim != 2:
            raise DataError(f"{self.name}: features must be a matrix, got shape {features.shape}")
        if labels.shape != (features.shape[1],):
            raise DataError(
                f"{self.name}: {labels.size} labels for {features.shape[1]} samples"
            )
        if labels.size and (labels.min() < 1 or labels.max() > self.n_classes):
            raise DataError(f"{self.name}: labels must lie in 1..{self.n_classes}")
        if self.image_shape is not None:
            h, w = self.image_shape
            if h * w != features.shape[0]:
                raise DataError(
                    f"{self.name}: image shape {h}x{w} does not match {features.shape[0]} features"
                )
            object.__setattr__(self, 'image_shape', (int(h), int(w)))
        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, 'features', features)
        object.__setattr__(self, 'labels', labels)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def N(self) -> int:
        return self.features.shape[1]

    @property
    def c(self) -> int:
        return self.n_classes

    @property
    def class_index(self) -> List[np.ndarray]:
        """Ordered sample column indices of each class 1..c"""
        return [np.flatnonzero(self.labels == i) for i in range(1, self.n_classes + 1)]

    @property
    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes + 1)[1:]

    def check_invariants(self) -> None:
        """
        Checks the training-set invariants: N >= c >= 2 and no empty class.

        Raises:
            DataError: If any invariant is violated
        """
        if self.n_classes < 2:
            raise DataError(f"{self.name}: need at least 2 classes, got {self.n_classes}")
        if self.N < self.n_classes:
            raise DataError(f"{self.name}: {self.N} samples for {self.n_classes} classes")
        empty = [i + 1 for i, count in enumerate(self.class_counts) if count == 0]
        if empty:
            raise DataError(f"{self.name}: empty class(es) {empty}")

    def take(self, columns: Sequence[int], name: Optional[str] = None) -> 'LabeledDataset':
        """Subset of samples, keeping the label alphabet"""
        columns = np.asarray(columns, dtype=int)
        return LabeledDataset(
            features=self.features[:, columns],
            labels=self.labels[columns],
            n_classes=self.n_classes,
            name=name or self.name,
            image_shape=self.image_shape,
        )

    def with_features(self, features: np.ndarray, name: Optional[str] = None,
                      image_shape: Optional[Tuple[int, int]] = None) -> 'LabeledDataset':
        """Same samples and labels, new feature matrix"""
        features = np.asarray(features, dtype=float)
        shape = image_shape if image_shape is not None else (
            self.image_shape if features.shape[0] == self.n else None
        )
        return LabeledDataset(
            features=features,
            labels=self.labels,
            n_classes=self.n_classes,
            name=name or self.name,
            image_shape=shape,
        )


class NoiseSpec(BaseModel):
    """Training-set corruption recipe"""
    kind: Literal['feature-gaussian', 'image-gaussian-block', 'image-black-block']
    fraction: float = Field(gt=0.0, le=1.0)
    variance: float = Field(default=0.1, ge=0.0)
    image_shape: Optional[Tuple[int, int]] = None
    seed: int = Field(default=0, ge=0)

    def label(self) -> str:
        """Short tag used in report files, e.g. feature-gaussian-30"""
        return f"{self.kind}-{int(round(self.fraction * 100))}"


def _remap_labels(raw: Sequence[int]) -> Tuple[np.ndarray, int]:
    """Maps arbitrary integer labels to 1..c in first-appearance order"""
    mapping = {}
    for value in raw:
        if value not in mapping:
            mapping[value] = len(mapping) + 1
    return np.array([mapping[v] for v in raw], dtype=int), len(mapping)


def _is_number(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def _parse_label(cell: str, line: int, column: int) -> int:
    text = cell.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        value = float(text)
    except ValueError:
        value = math.nan
    if math.isfinite(value) and value.is_integer():
        return int(value)
    raise DataError(f"row {line}, column {column + 1}: label {cell!r} is not an integer")


def load_csv(path: str, label_column: Union[int, str] = -1, name: Optional[str] = None) -> LabeledDataset:
    """
    Loads a comma-separated dataset with one sample per row.

    A first row containing a non-numeric cell is treated as a header.

    Args:
        path: CSV file path
        label_column: Column index (negative counts from the end) or header name
        name: Dataset name (default: file stem)

    Returns:
        LabeledDataset with labels remapped to 1..c in first-appearance order

    Raises:
        DataError: Empty file, ragged row, non-numeric cell, fewer than 2 classes
        UsageError: Label column out of range or unknown

    Example:
        >>> iris = load_csv("data/iris.csv", label_column="label")
        >>> iris.n, iris.N, iris.c
        (4, 150, 3)
    """
    name = name or os.path.splitext(os.path.basename(path))[0]
    try:
        with open(path, newline='') as fh:
            reader = csv.reader(fh)
            rows = [(reader.line_num, row) for row in reader if row]
    except OSError as e:
        raise DataError(f"Cannot read {path}: {e}")

    if not rows:
        raise DataError(f"{path}: empty file")

    header = None
    first_line, first_row = rows[0]
    if not all(_is_number(cell) for cell in first_row):
        header = [cell.strip() for cell in first_row]
        rows = rows[1:]
        if not rows:
            raise DataError(f"{path}: header row but no data rows")

    width = len(first_row)
    if isinstance(label_column, str):
        if header is None:
            raise UsageError(f"{path}: label column {label_column!r} given by name but the file has no header")
        if label_column not in header:
            raise UsageError(f"{path}: no column named {label_column!r} (columns: {header})")
        label_idx = header.index(label_column)
    else:
        label_idx = label_column + width if label_column < 0 else label_column
        if not 0 <= label_idx < width:
            raise UsageError(f"{path}: label column {label_column} out of range for {width} columns")

    if width < 2:
        raise DataError(f"{path}: need at least one feature column and a label column")

    feature_rows = []
    raw_labels = []
    for line, row in rows:
        if len(row) != width:
            raise DataError(f"{path}: row {line} has {len(row)} cells, expected {width}")
        values = []
        for col, cell in enumerate(row):
            if col == label_idx:
                continue
            try:
                values.append(float(cell))
            except ValueError:
                raise DataError(f"{path}: row {line}, column {col + 1}: non-numeric value {cell!r}")
        feature_rows.append(values)
        raw_labels.append(_parse_label(row[label_idx], line, label_idx))

    labels, c = _remap_labels(raw_labels)
    if c < 2:
        raise DataError(f"{path}: fewer than 2 classes")

    data = LabeledDataset(
        features=np.array(feature_rows, dtype=float).T,
        labels=labels,
        n_classes=c,
        name=name,
    )
    logger.debug("Loaded %s: n=%d N=%d c=%d", path, data.n, data.N, data.c)
    return data


def save_csv(data: LabeledDataset, path: str) -> None:
    """
    Writes a dataset as CSV: header f1..fn,label then one row per sample.

    Values are written with repr() so load_csv reads them back bit-for-bit.
    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{i + 1}" for i in range(data.n)] + ['label'])
        for s in range(data.N):
            writer.writerow([repr(float(v)) for v in data.features[:, s]] + [int(data.labels[s])])


def _read_binary(path: str) -> bytes:
    opener = gzip.open if path.endswith('.gz') else open
    try:
        with opener(path, 'rb') as fh:
            return fh.read()
    except OSError as e:
        raise DataError(f"Cannot read {path}: {e}")


def load_idx(images_path: str, labels_path: str, name: str = "mnist") -> LabeledDataset:
    """
    Loads an IDX image/label pair (MNIST layout, optionally gzipped).

    Args:
        images_path: idx3-ubyte file, magic 0x00000803
        labels_path: idx1-ubyte file, magic 0x00000801

    Returns:
        LabeledDataset with pixels scaled to [0,1], digits 0-9 mapped to 1-10

    Raises:
        DataError: Magic mismatch, count mismatch, truncated payload
    """
    raw = _read_binary(images_path)
    if len(raw) < 16:
        raise DataError(f"{images_path}: truncated header")
    magic, count, rows, cols = struct.unpack('>IIII', raw[:16])
    if magic != IDX_IMAGES_MAGIC:
        raise DataError(f"{images_path}: magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}")
    size = count * rows * cols
    if len(raw) - 16 < size:
        raise DataError(f"{images_path}: truncated payload ({len(raw) - 16} of {size} bytes)")
    pixels = np.frombuffer(raw, dtype=np.uint8, count=size, offset=16).reshape(count, rows * cols)

    raw_labels = _read_binary(labels_path)
    if len(raw_labels) < 8:
        raise DataError(f"{labels_path}: truncated header")
    magic, label_count = struct.unpack('>II', raw_labels[:8])
    if magic != IDX_LABELS_MAGIC:
        raise DataError(f"{labels_path}: magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}")
    if label_count != count:
        raise DataError(f"{labels_path}: {label_count} labels for {count} images")
    if len(raw_labels) - 8 < count:
        raise DataError(f"{labels_path}: truncated payload ({len(raw_labels) - 8} of {count} bytes)")
    digits = np.frombuffer(raw_labels, dtype=np.uint8, count=count, offset=8).astype(int)
    if digits.size and digits.max() > 9:
        raise DataError(f"{labels_path}: label {digits.max()} outside 0-9")

    return LabeledDataset(
        features=pixels.T.astype(float) / 255.0,
        labels=digits + 1,
        n_classes=10,
        name=name,
        image_shape=(rows, cols),
    )


def normalize_minmax(data: LabeledDataset) -> LabeledDataset:
    """
    Maps every feature row to [0,1] by (x - min) / (max - min).

    Constant features become 0.
    """
    x = data.features
    lo = x.min(axis=1, keepdims=True)
    span = x.max(axis=1, keepdims=True) - lo
    scaled = np.where(span > 0, (x - lo) / np.where(span > 0, span, 1.0), 0.0)
    return data.with_features(scaled)


def split(data: LabeledDataset, train_fraction: float, seed: int,
          stratified: bool = True) -> Tuple[LabeledDataset, LabeledDataset]:
    """
    Random train/test partition.

    Stratified mode puts ceil(train_fraction * N_i) samples of every class in
    the training part. Both parts keep the label alphabet of the input.

    Args:
        data: Dataset to split
        train_fraction: Fraction in (0,1)
        seed: Random seed
        stratified: Per-class sampling (default) or plain random

    Returns:
        (train, test)

    Raises:
        DataError: If a class ends up empty in the training part
    """
    if not 0.0 < train_fraction < 1.0:
        raise UsageError(f"train_fraction must lie in (0,1), got {train_fraction}")

    rng = np.random.default_rng(seed)
    if stratified:
        chosen = []
        for members in data.class_index:
            k = math.ceil(train_fraction * members.size - 1e-9)
            chosen.append(rng.permutation(members)[:k])
        train_idx = np.sort(np.concatenate(chosen))
    else:
        k = math.ceil(train_fraction * data.N - 1e-9)
        train_idx = np.sort(rng.permutation(data.N)[:k])

    in_train = np.zeros(data.N, dtype=bool)
    in_train[train_idx] = True
    train_counts = np.bincount(data.labels[in_train], minlength=data.n_classes + 1)[1:]
    empty = [i + 1 for i, count in enumerate(train_counts) if count == 0]
    if empty:
        raise DataError(f"{data.name}: class(es) {empty} empty in the training part (seed {seed})")

    train = data.take(train_idx, name=f"{data.name}-train")
    test = data.take(np.flatnonzero(~in_train), name=f"{data.name}-test")
    return train, test


def subsample(data: LabeledDataset, count: int, seed: int) -> LabeledDataset:
    """
    Stratified random subset of roughly `count` samples.

    Per-class quotas follow the class proportions (largest remainder rounding,
    at least one sample per nonempty class).
    """
    if count >= data.N:
        return data
    rng = np.random.default_rng(seed)
    sizes = data.class_counts
    exact = count * sizes / data.N
    quota = np.floor(exact).astype(int)
    for i in np.argsort(-(exact - quota), kind='stable')[: count - quota.sum()]:
        quota[i] += 1
    quota = np.where(sizes > 0, np.maximum(quota, 1), 0)
    chosen = [rng.permutation(members)[:k] for members, k in zip(data.class_index, quota)]
    return data.take(np.sort(np.concatenate(chosen)), name=f"{data.name}-sub{count}")


def resample_images(data: LabeledDataset, shape: Tuple[int, int]) -> LabeledDataset:
    """
    Bilinear resampling of every image sample to `shape` (e.g. 28x28 -> 16x16).

    Raises:
        UsageError: If the dataset carries no image shape
    """
    if data.image_shape is None:
        raise UsageError(f"{data.name}: resampling needs an image shape")
    h, w = data.image_shape
    th, tw = shape
    if (h, w) == (th, tw):
        return data
    stack = data.features.T.reshape(data.N, h, w)
    zoomed = ndimage.zoom(stack, (1.0, th / h, tw / w), order=1)
    if zoomed.shape[1:] != (th, tw):
        raise DataError(f"{data.name}: resampling produced {zoomed.shape[1:]}, expected {shape}")
    return data.with_features(zoomed.reshape(data.N, th * tw).T, image_shape=(th, tw))


def block_size(image_shape: Tuple[int, int], fraction: float) -> Tuple[int, int]:
    """Side lengths of a near-square block covering `fraction` of the image"""
    h, w = image_shape
    area = fraction * h * w
    bh = min(h, max(1, int(math.floor(math.sqrt(area) + 0.5))))
    bw = min(w, max(1, int(math.floor(area / bh + 0.5))))
    return bh, bw


def inject_noise(data: LabeledDataset, spec: NoiseSpec) -> LabeledDataset:
    """
    Corrupts a dataset according to `spec`; values are not clamped.

    feature-gaussian draws floor(fraction * n) feature rows once and adds
    N(0, variance) to them in every sample. The block kinds pick a random
    rectangle of about fraction * h * w pixels per sample and either add
    Gaussian noise there or set it to 0.

    Raises:
        UsageError: Block kind without an image shape
        DataError: Image shape that does not match n
    """
    rng = np.random.default_rng(spec.seed)
    x = np.array(data.features)
    n, N = x.shape
    sigma = math.sqrt(spec.variance)

    if spec.kind == 'feature-gaussian':
        k = int(math.floor(spec.fraction * n + 1e-9))
        if k > 0:
            rows = np.sort(rng.choice(n, size=k, replace=False))
            x[rows, :] += rng.normal(0.0, sigma, size=(k, N))
        return data.with_features(x, name=f"{data.name}+{spec.label()}")

    shape = spec.image_shape or data.image_shape
    if shape is None:
        raise UsageError(f"{spec.kind} noise needs an image shape")
    h, w = shape
    if h * w != n:
        raise DataError(f"image shape {h}x{w} does not match {n} features")

    bh, bw = block_size((h, w), spec.fraction)
    images = x.T.reshape(N, h, w).copy()
    for s in range(N):
        top = int(rng.integers(0, h - bh + 1))
        left = int(rng.integers(0, w - bw + 1))
        if spec.kind == 'image-black-block':
            images[s, top:top + bh, left:left + bw] = 0.0
        else:
            images[s, top:top + bh, left:left + bw] += rng.normal(0.0, sigma, size=(bh, bw))
    return data.with_features(images.reshape(N, n).T, name=f"{data.name}+{spec.label()}",
                              image_shape=(h, w))


def make_synthetic_fig1(seed: int, with_outliers: bool = False) -> LabeledDataset:
    """
    Four-class 2-D demo set: 120, 30, 30, 30 samples.

    Blobs sit on the x axis (the discriminant direction) and are elongated
    along y. With outliers, two far points are appended to class 1 on the y
    axis, the direction orthogonal to the discriminant one, at ten and nine
    times the center spread.

    Example:
        >>> make_synthetic_fig1(0).N
        210
        >>> make_synthetic_fig1(0, with_outliers=True).N
        212
    """
    rng = np.random.default_rng(seed)
    blocks = []
    labels = []
    for label, (center, size) in enumerate(zip(FIG1_CENTERS, FIG1_SIZES), start=1):
        blocks.append(center[:, None] + FIG1_STD[:, None] * rng.standard_normal((2, size)))
        labels.extend([label] * size)

    if with_outliers:
        middle = FIG1_CENTERS.mean(axis=0)
        spread = np.max(np.linalg.norm(FIG1_CENTERS - middle, axis=1))
        radius = FIG1_OUTLIER_SCALE * spread
        offsets = radius * np.array(FIG1_OUTLIER_RADII)
        blocks.append(middle[:, None] + np.vstack([np.zeros_like(offsets), offsets]))
        labels.extend([1] * len(offsets))

    return LabeledDataset(
        features=np.hstack(blocks),
        labels=np.array(labels),
        n_classes=len(FIG1_SIZES),
        name="fig1-outliers" if with_outliers else "fig1",
    )


def make_two_gaussians(seed: int, per_class: int = 10, separation: float = 4.0,
                       std: float = 0.1) -> LabeledDataset:
    """Two spherical 2-D Gaussian classes centered at (0,0) and (separation,0)"""
    rng = np.random.default_rng(seed)
    first = std * rng.standard_normal((2, per_class))
    second = np.array([[separation], [0.0]]) + std * rng.standard_normal((2, per_class))
    return LabeledDataset(
        features=np.hstack([first, second]),
        labels=np.repeat([1, 2], per_class),
        n_classes=2,
        name="two-gaussians",
    )
