"""Datasets (IDX files or synthetic Gaussian classes) and non-IID device shards."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, PartitionError

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features must be (n, dim) with one label per row")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError("labels outside [0, num_classes)")

    def __len__(self):
        return self.labels.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.num_classes)


def _read_header(raw: bytes, magic: int, ndims: int, what: str) -> tuple[int, ...]:
    header_len = 4 + 4 * ndims
    if len(raw) < 4:
        raise FormatError(f"{what}: file too short for magic number", len(raw) if raw else 0)
    got = int.from_bytes(raw[:4], "big")
    if got != magic:
        raise FormatError(f"{what}: bad magic 0x{got:08x}, expected 0x{magic:08x}", 0)
    if len(raw) < header_len:
        raise FormatError(f"{what}: truncated header", len(raw))
    return tuple(int.from_bytes(raw[4 + 4 * k: 8 + 4 * k], "big") for k in range(ndims))


def load_idx(images_path, labels_path, num_classes: int = 10) -> Dataset:
    """Read an IDX image/label pair; pixels are scaled to ``[0, 1]``."""
    img_raw = Path(images_path).read_bytes()
    lbl_raw = Path(labels_path).read_bytes()

    count, rows, cols = _read_header(img_raw, IMAGES_MAGIC, 3, "images")
    need = 16 + count * rows * cols
    if len(img_raw) < need:
        raise FormatError(f"images: expected {need} bytes, file has {len(img_raw)}", len(img_raw))
    (n_labels,) = _read_header(lbl_raw, LABELS_MAGIC, 1, "labels")
    if n_labels != count:
        raise FormatError(f"count mismatch: {count} images vs {n_labels} labels", 4)
    if len(lbl_raw) < 8 + n_labels:
        raise FormatError(f"labels: expected {8 + n_labels} bytes, file has {len(lbl_raw)}",
                          len(lbl_raw))

    pixels = np.frombuffer(img_raw, dtype=np.uint8, count=count * rows * cols, offset=16)
    labels = np.frombuffer(lbl_raw, dtype=np.uint8, count=n_labels, offset=8).astype(np.int64)
    if labels.size and labels.max() >= num_classes:
        bad = int(np.argmax(labels >= num_classes))
        raise FormatError(f"label {labels[bad]} >= {num_classes}", 8 + bad)
    features = pixels.reshape(count, rows * cols).astype(float) / 255.0
    return Dataset(features, labels, num_classes)


def write_idx(dataset_pixels: np.ndarray, labels: np.ndarray, images_path, labels_path) -> None:
    """Write uint8 images ``(n, rows, cols)`` and labels in IDX format."""
    pixels = np.asarray(dataset_pixels, dtype=np.uint8)
    n, rows, cols = pixels.shape
    header = b"".join(int(v).to_bytes(4, "big") for v in (IMAGES_MAGIC, n, rows, cols))
    Path(images_path).write_bytes(header + pixels.tobytes())
    lab = np.asarray(labels, dtype=np.uint8)
    header = b"".join(int(v).to_bytes(4, "big") for v in (LABELS_MAGIC, lab.size))
    Path(labels_path).write_bytes(header + lab.tobytes())


def class_centroids(seed, num_classes: int, dim: int, spread: float) -> np.ndarray:
    """Random centroids rescaled so the closest pair sits ``4 * spread`` apart."""
    rng = np.random.default_rng([int(seed), 0xC0])
    centroids = rng.standard_normal((num_classes, dim))
    diff = centroids[:, None, :] - centroids[None, :, :]
    dist = np.sqrt((diff ** 2).sum(-1))
    closest = dist[np.triu_indices(num_classes, 1)].min()
    target = 4.0 * (spread if spread > 0 else 1.0)
    return centroids * (target / closest)


def synth_dataset(seed, num_classes: int = 10, dim: int = 20, n_per_class: int = 200,
                  spread: float = 1.0, *, sample_seed=None) -> Dataset:
    """Isotropic Gaussian classes around well-separated centroids.

    Centroids depend only on ``seed``; ``sample_seed`` (default ``seed``)
    picks the samples, so train and test sets can share one geometry.
    """
    if num_classes < 2:
        raise ValueError("need at least two classes")
    centroids = class_centroids(seed, num_classes, dim, spread)
    rng = np.random.default_rng([int(seed if sample_seed is None else sample_seed), 0xDA7A])
    labels = np.repeat(np.arange(num_classes), n_per_class)
    features = centroids[labels] + spread * rng.standard_normal((labels.size, dim))
    return Dataset(features, labels, num_classes)


@dataclass(frozen=True)
class PartitionSpec:
    excluded: tuple[frozenset, ...]
    indices: tuple[np.ndarray, ...]

    def shard(self, data: Dataset, device: int) -> Dataset:
        return data.subset(self.indices[device])


def partition_noniid(seed, data: Dataset, K: int, samples_per_device: int = 2000,
                     min_excluded: int = 2, max_excluded: int = 4) -> PartitionSpec:
    """Per-device shards that each miss 2 to 4 random classes.

    The budget is split evenly over the remaining classes, with the
    remainder handed out one sample at a time in class-index order. Draws are
    without replacement inside a device and independent across devices.
    """
    C = data.num_classes
    rng = np.random.default_rng([int(seed), 0x9A87])
    by_class = [np.flatnonzero(data.labels == c) for c in range(C)]
    excluded, indices = [], []
    for _ in range(K):
        n_ex = int(rng.integers(min_excluded, max_excluded + 1))
        ex = frozenset(int(c) for c in rng.choice(C, size=n_ex, replace=False))
        included = [c for c in range(C) if c not in ex]
        base, extra = divmod(samples_per_device, len(included))
        picks = []
        for rank, c in enumerate(included):
            want = base + (1 if rank < extra else 0)
            if want > by_class[c].size:
                raise PartitionError(
                    f"class {c} has {by_class[c].size} samples, a device needs {want}",
                    starved_class=c)
            picks.append(rng.choice(by_class[c], size=want, replace=False))
        excluded.append(ex)
        indices.append(np.sort(np.concatenate(picks)) if picks else np.empty(0, np.int64))
    return PartitionSpec(tuple(excluded), tuple(indices))
