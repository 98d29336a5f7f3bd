"""Datasets: IDX (MNIST) ingestion, seeded class-balanced subsets, synthetic digits."""

from __future__ import annotations

import gzip
import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .network import InputImage

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


class IDXFormatError(ValueError):
    pass


@dataclass
class Dataset:
    X: np.ndarray  # (N, n_input) float64 in [0, 1]
    y: np.ndarray  # (N,) int64
    split: str = ""
    ids: np.ndarray | None = None  # positions in the source dataset
    source_hash: str = ""
    n_classes: int = 10
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X must be (N, d) with one label per row")
        if self.X.size and (self.X.min() < 0 or self.X.max() > 1):
            raise ValueError("pixel values must lie in [0, 1]")
        if self.ids is None:
            self.ids = np.arange(self.y.shape[0])
        self.ids = np.asarray(self.ids, dtype=np.int64)

    def __len__(self):
        return self.y.shape[0]

    def __getitem__(self, i) -> InputImage:
        return InputImage(self.X[i], int(self.y[i]))

    @property
    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=self.n_classes)

    @property
    def hash(self) -> str:
        """Content hash over pixels, labels and source ids."""
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.X).tobytes())
        h.update(self.y.tobytes())
        h.update(self.ids.tobytes())
        return h.hexdigest()[:16]


def _open(path):
    path = Path(path)
    data = path.read_bytes()
    if data[:2] == b"\x1f\x8b":
        data = gzip.decompress(data)
    return data


def read_idx_images(path) -> np.ndarray:
    data = _open(path)
    if len(data) < 16:
        raise IDXFormatError(f"{path}: truncated header (need 16 bytes at offset 0, got {len(data)})")
    magic, n, rows, cols = struct.unpack(">IIII", data[:16])
    if magic != IMAGE_MAGIC:
        raise IDXFormatError(f"{path}: bad magic 0x{magic:08x} at offset 0, expected 0x{IMAGE_MAGIC:08x}")
    need = 16 + n * rows * cols
    if len(data) < need:
        raise IDXFormatError(f"{path}: truncated pixel data, expected {need} bytes, file ends at offset {len(data)}")
    return np.frombuffer(data, dtype=np.uint8, count=n * rows * cols, offset=16).reshape(n, rows * cols)


def read_idx_labels(path) -> np.ndarray:
    data = _open(path)
    if len(data) < 8:
        raise IDXFormatError(f"{path}: truncated header (need 8 bytes at offset 0, got {len(data)})")
    magic, n = struct.unpack(">II", data[:8])
    if magic != LABEL_MAGIC:
        raise IDXFormatError(f"{path}: bad magic 0x{magic:08x} at offset 0, expected 0x{LABEL_MAGIC:08x}")
    if len(data) < 8 + n:
        raise IDXFormatError(f"{path}: truncated labels, expected {8 + n} bytes, file ends at offset {len(data)}")
    labels = np.frombuffer(data, dtype=np.uint8, count=n, offset=8)
    bad = np.flatnonzero(labels > 9)
    if bad.size:
        raise IDXFormatError(f"{path}: label {labels[bad[0]]} > 9 at offset {8 + bad[0]}")
    return labels


def write_idx(images: np.ndarray, labels: np.ndarray, image_path, label_path):
    """Write uint8 images (N, rows, cols) or (N, rows*cols) and labels as IDX."""
    images = np.asarray(images, dtype=np.uint8)
    if images.ndim == 2:
        side = int(round(np.sqrt(images.shape[1])))
        images = images.reshape(-1, side, side)
    n, rows, cols = images.shape
    Path(image_path).write_bytes(struct.pack(">IIII", IMAGE_MAGIC, n, rows, cols) + images.tobytes())
    labels = np.asarray(labels, dtype=np.uint8)
    Path(label_path).write_bytes(struct.pack(">II", LABEL_MAGIC, labels.shape[0]) + labels.tobytes())


def load_mnist(image_path, label_path) -> Dataset:
    """Load an IDX image/label pair, scaling raw bytes by 1/255."""
    raw = read_idx_images(image_path)
    labels = read_idx_labels(label_path)
    if raw.shape[0] != labels.shape[0]:
        raise IDXFormatError(f"count mismatch: {raw.shape[0]} images vs {labels.shape[0]} labels "
                             "(header offset 4)")
    h = hashlib.sha256(raw.tobytes() + labels.tobytes()).hexdigest()[:16]
    return Dataset(raw / 255.0, labels.astype(np.int64), split="source", source_hash=h)


def make_subset(dataset: Dataset, per_class: int, seed: int, *, exclude=None,
                split: str = "") -> Dataset:
    """Seeded draw of exactly ``per_class`` images per class.

    ``exclude`` is a Dataset (or iterable of source ids) whose members are never
    drawn, which keeps train and test subsets disjoint.
    """
    excluded = np.zeros(len(dataset), dtype=bool)
    if exclude is not None:
        ex_ids = exclude.ids if isinstance(exclude, Dataset) else np.asarray(list(exclude))
        pos = {int(v): k for k, v in enumerate(dataset.ids)}
        for v in ex_ids:
            if int(v) in pos:
                excluded[pos[int(v)]] = True
    rng = np.random.default_rng(seed)
    chosen = []
    for c in range(dataset.n_classes):
        pool = np.flatnonzero((dataset.y == c) & ~excluded)
        if pool.shape[0] < per_class:
            raise ValueError(f"class {c} has only {pool.shape[0]} available images, "
                             f"need {per_class}")
        chosen.append(rng.choice(pool, size=per_class, replace=False))
    idx = np.sort(np.concatenate(chosen))
    return Dataset(dataset.X[idx], dataset.y[idx], split=split, ids=dataset.ids[idx],
                   source_hash=dataset.source_hash, n_classes=dataset.n_classes)


def make_splits(dataset: Dataset, train_per_class: int, test_per_class: int,
                seed: int) -> tuple[Dataset, Dataset]:
    """Disjoint train and test subsets drawn from one seed lineage."""
    train = make_subset(dataset, train_per_class, seed, split="train")
    test = make_subset(dataset, test_per_class, seed + 1, exclude=train, split="test")
    return train, test


def synthetic_digits(per_class: int, seed: int, *, n_classes: int = 10, side: int = 8,
                     flip_prob: float = 0.1, prototype_seed: int = 12345,
                     split: str = "") -> Dataset:
    """Binary class prototypes on a ``side`` x ``side`` grid with bit-flip noise.

    Prototypes depend only on ``prototype_seed`` so train and test sets drawn
    with different ``seed`` share the same classes.
    """
    d = side * side
    proto_rng = np.random.default_rng(prototype_seed)
    prototypes = (proto_rng.random((n_classes, d)) < 0.5).astype(np.float64)
    rng = np.random.default_rng(seed)
    y = np.repeat(np.arange(n_classes), per_class)
    X = prototypes[y].copy()
    flips = rng.random(X.shape) < flip_prob
    X[flips] = 1.0 - X[flips]
    h = hashlib.sha256(f"synthetic:{n_classes}:{side}:{flip_prob}:{prototype_seed}".encode()).hexdigest()[:16]
    return Dataset(X, y, split=split, ids=np.arange(len(y)) + seed * 10_000_000,
                   source_hash=h, n_classes=n_classes,
                   meta={"generator": "synthetic_digits", "seed": seed})


def idx_from_csv(csv_path, image_path, label_path, *, label_column: int = -1):
    """Convert a CSV of raw 0-255 pixels plus one label column to an IDX pair.

    Gzipped input is accepted. Returns the number of images written.
    """
    raw = np.loadtxt(csv_path, delimiter=",", dtype=np.int64)
    labels = raw[:, label_column]
    pixels = np.delete(raw, label_column % raw.shape[1], axis=1)
    if pixels.min() < 0 or pixels.max() > 255:
        raise IDXFormatError(f"{csv_path}: pixel values outside 0..255")
    write_idx(pixels.astype(np.uint8), labels.astype(np.uint8), image_path, label_path)
    return labels.shape[0]
