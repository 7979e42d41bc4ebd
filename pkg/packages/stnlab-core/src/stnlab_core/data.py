"""Dataset ingestion (MNIST IDX) and deterministic rotation/translation augmentation"""

from __future__ import annotations

import gzip
import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np

from stnlab_common.errors import (
    BadMagicError,
    CountMismatchError,
    IdxFormatError,
    RejectedInputError,
    TruncatedPayloadError,
)
from stnlab_common.models import AppliedTransform
from stnlab_common.seeding import stream
from stnlab_core.tensor import Tensor
from stnlab_core.transformer import AffineParams, warp, wrap_angle

logger = logging.getLogger(__name__)

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}

PathLike = Union[str, Path]


@dataclass
class LabeledDataset:
    """Images [N, 1, H, W] in [0, 1], integer labels and per-example transform records"""

    images: Tensor
    labels: np.ndarray
    transforms: List[AppliedTransform] = field(default_factory=list)
    num_classes: int = 10

    def __post_init__(self) -> None:
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4:
            raise RejectedInputError(f"images must be [N, C, H, W], got {self.images.shape}")
        if self.labels.shape != (self.images.shape[0],):
            raise RejectedInputError(
                f"{self.labels.shape[0]} labels for {self.images.shape[0]} images"
            )
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise RejectedInputError(f"labels outside [0, {self.num_classes})")
        if not self.transforms:
            self.transforms = [AppliedTransform()] * len(self.labels)
        if len(self.transforms) != len(self.labels):
            raise RejectedInputError("one transform record per example is required")

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def image_shape(self) -> Tuple[int, int, int]:
        return tuple(self.images.shape[1:])

    def subset(self, indices: Sequence[int]) -> "LabeledDataset":
        indices = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(
            images=Tensor(self.images.data[indices]),
            labels=self.labels[indices],
            transforms=[self.transforms[i] for i in indices],
            num_classes=self.num_classes,
        )

    def head(self, limit: int) -> "LabeledDataset":
        return self if limit >= len(self) else self.subset(np.arange(limit))

    def batches(self, batch_size: int, order: Optional[np.ndarray] = None) -> Iterator[Tuple[Tensor, np.ndarray]]:
        order = np.arange(len(self)) if order is None else order
        for start in range(0, len(order), batch_size):
            chosen = order[start : start + batch_size]
            yield Tensor(self.images.data[chosen]), self.labels[chosen]

    def label_histogram(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)


def _open(path: Path):
    return gzip.open(path, "rb") if path.suffix == ".gz" else open(path, "rb")


def read_idx(path: PathLike, expected_magic: int) -> np.ndarray:
    """Parse one IDX container of unsigned bytes into an array of its dimensions"""
    path = Path(path)
    with _open(path) as handle:
        payload = handle.read()
    if len(payload) < 4:
        raise TruncatedPayloadError("file ends inside the magic number", len(payload), str(path))
    (magic,) = struct.unpack(">I", payload[:4])
    if magic != expected_magic:
        raise BadMagicError(
            f"magic 0x{magic:08x} != expected 0x{expected_magic:08x}", 0, str(path)
        )
    ndim = magic & 0xFF
    header_end = 4 + 4 * ndim
    if len(payload) < header_end:
        raise TruncatedPayloadError("file ends inside the dimension sizes", len(payload), str(path))
    dims = struct.unpack(f">{ndim}I", payload[4:header_end])
    expected = int(np.prod(dims, dtype=np.int64))
    available = len(payload) - header_end
    if available < expected:
        raise TruncatedPayloadError(
            f"payload has {available} of {expected} bytes", len(payload), str(path)
        )
    if available > expected:
        raise IdxFormatError(
            f"{available - expected} trailing bytes after payload", header_end + expected, str(path)
        )
    return np.frombuffer(payload, dtype=np.uint8, offset=header_end).reshape(dims)


def load_mnist_idx(images_path: PathLike, labels_path: PathLike) -> LabeledDataset:
    images = read_idx(images_path, IMAGES_MAGIC)
    labels = read_idx(labels_path, LABELS_MAGIC)
    if images.shape[0] != labels.shape[0]:
        # count fields sit right after the magic number in both files
        raise CountMismatchError(
            f"{images.shape[0]} images but {labels.shape[0]} labels", 4, str(labels_path)
        )
    data = images.astype(np.float64)[:, None, :, :] / 255.0
    num_classes = max(10, int(labels.max()) + 1) if labels.size else 10
    logger.info(
        "Loaded IDX dataset",
        extra={"images": str(images_path), "count": int(labels.shape[0]), "shape": list(images.shape[1:])},
    )
    return LabeledDataset(images=Tensor(data), labels=labels.astype(np.int64), num_classes=num_classes)


def find_mnist_files(data_dir: PathLike, split: Literal["train", "test"]) -> Tuple[Path, Path]:
    """Locate the split's image/label files, raw or gzipped"""
    data_dir = Path(data_dir)
    found = []
    for stem in MNIST_FILES[split]:
        candidates = [data_dir / stem, data_dir / f"{stem}.gz"]
        hit = next((c for c in candidates if c.exists()), None)
        if hit is None:
            raise FileNotFoundError(f"{stem}[.gz] not found in {data_dir}")
        found.append(hit)
    return found[0], found[1]


def load_mnist_split(data_dir: PathLike, split: Literal["train", "test"]) -> LabeledDataset:
    return load_mnist_idx(*find_mnist_files(data_dir, split))


def write_idx(path: PathLike, array: np.ndarray, magic: int) -> None:
    array = np.asarray(array)
    if array.dtype != np.uint8:
        raise RejectedInputError(f"IDX payload must be uint8, got {array.dtype}")
    header = struct.pack(f">I{array.ndim}I", magic, *array.shape)
    with open(path, "wb") as handle:
        handle.write(header)
        handle.write(np.ascontiguousarray(array).tobytes())


def write_mnist_idx(ds: LabeledDataset, images_path: PathLike, labels_path: PathLike) -> None:
    if ds.images.shape[1] != 1:
        raise RejectedInputError("IDX images are single-channel")
    pixels = np.rint(np.clip(ds.images.data[:, 0], 0.0, 1.0) * 255.0).astype(np.uint8)
    write_idx(images_path, pixels, IMAGES_MAGIC)
    write_idx(labels_path, ds.labels.astype(np.uint8), LABELS_MAGIC)


def pad_to_canvas(ds: LabeledDataset, size: int) -> LabeledDataset:
    """Zero-pad every image to size x size, content centered"""
    _, _, height, width = ds.images.shape
    if height > size or width > size:
        raise RejectedInputError(f"images {height}x{width} do not fit a {size}x{size} canvas")
    if height == size and width == size:
        return ds
    top, left = (size - height) // 2, (size - width) // 2
    canvas = np.zeros(ds.images.shape[:2] + (size, size))
    canvas[:, :, top : top + height, left : left + width] = ds.images.data
    return LabeledDataset(Tensor(canvas), ds.labels, list(ds.transforms), ds.num_classes)


def _check_range(kind: str, value_range: float, height: int) -> None:
    if kind == "rotation" and not (0.0 <= value_range <= math.pi):
        raise RejectedInputError(f"rotation range {value_range} outside [0, pi]")
    if kind == "translation":
        if value_range < 0 or value_range != int(value_range):
            raise RejectedInputError(f"translation range {value_range} must be a whole pixel count")
        if value_range > height / 2:
            raise RejectedInputError(f"translation range {value_range} exceeds half the extent {height}")
    if kind not in ("rotation", "translation"):
        raise RejectedInputError(f"unknown augmentation kind {kind!r}")


def apply_transform(
    ds: LabeledDataset,
    kind: Literal["rotation", "translation"],
    values: np.ndarray,
    chunk: int = 512,
) -> LabeledDataset:
    """Warp example i by values[i] (an angle, or a (dy, dx) shift) and record it.

    Examples whose parameter is exactly zero are copied bit-for-bit.
    """
    values = np.asarray(values, dtype=np.float64)
    count = len(ds)
    _, _, height, width = ds.images.shape
    if kind == "rotation":
        values = values.reshape(count)
        params = AffineParams.rotation(values).numpy()
        records = [AppliedTransform(kind="rotation", angle=wrap_angle(a)) for a in values]
        moving = values != 0.0
    elif kind == "translation":
        values = values.reshape(count, 2)
        if np.any(np.abs(values) > max(height, width) / 2) or np.any(values != np.rint(values)):
            raise RejectedInputError("shifts must be whole pixels within half the image extent")
        params = AffineParams.translation(values, height, width).numpy()
        records = [
            AppliedTransform(kind="translation", shift=(int(dy), int(dx))) for dy, dx in values
        ]
        moving = np.any(values != 0.0, axis=1)
    else:
        raise RejectedInputError(f"unknown transform kind {kind!r}")

    out = ds.images.data.copy()
    selected = np.flatnonzero(moving)
    for start in range(0, selected.size, chunk):
        rows = selected[start : start + chunk]
        warped = warp(Tensor(ds.images.data[rows]), AffineParams(Tensor(params[rows])))
        out[rows] = warped.data
    return LabeledDataset(Tensor(out), ds.labels, records, ds.num_classes)


def sample_parameters(
    kind: Literal["rotation", "translation"], value_range: float, count: int, rng: np.random.Generator
) -> np.ndarray:
    if kind == "rotation":
        if value_range == 0:
            return np.zeros(count)
        return rng.uniform(-value_range, value_range, size=count)
    limit = int(value_range)
    return rng.integers(-limit, limit + 1, size=(count, 2)).astype(np.float64)


def apply_random_transform(
    ds: LabeledDataset,
    kind: Literal["none", "rotation", "translation"],
    value_range: float,
    seed: int,
    stream_name: str = "augment",
) -> LabeledDataset:
    """Warp every example by a uniformly sampled parameter; deterministic in seed"""
    if kind == "none":
        return LabeledDataset(Tensor(ds.images.data.copy()), ds.labels, None, ds.num_classes)
    _check_range(kind, value_range, ds.images.shape[2])
    values = sample_parameters(kind, value_range, len(ds), stream(seed, stream_name))
    augmented = apply_transform(ds, kind, values)
    logger.info(
        "Augmented dataset",
        extra={"kind": kind, "range": value_range, "count": len(ds), "stream": stream_name},
    )
    return augmented
