"""Dataset container, file ingestion (IDX and CSV) and synthetic data.

IDX follows the canonical layout: big-endian int32 magic and dimension
sizes, then unsigned bytes.  Magic 0x00000801 is a label vector, magic
0x00000803 an image stack; pixel bytes are scaled to [0, 1] and images
get a leading channel axis.  CSV rows are "label,feat0,feat1,...".
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, ParseError
from .rng import Rng

IDX_LABEL_MAGIC = 0x00000801
IDX_IMAGE_MAGIC = 0x00000803


@dataclass
class Dataset:
    inputs: np.ndarray  # [n, ...] float64, finite
    labels: np.ndarray  # [n] int64 in [0, num_classes)
    num_classes: int

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise ConfigError(f"{self.inputs.shape[0]} inputs but {self.labels.shape[0]} labels")
        if not np.all(np.isfinite(self.inputs)):
            raise ConfigError("dataset inputs contain non-finite values")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ConfigError(f"labels outside [0, {self.num_classes})")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.inputs[idx], self.labels[idx], self.num_classes)


def _read_be32(data: bytes, offset: int, path: str) -> int:
    if offset + 4 > len(data):
        raise ParseError(f"{path}: truncated at byte {offset}, expected a 4-byte field")
    return struct.unpack_from(">i", data, offset)[0]


def _load_idx(path: str) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) == 0:
        raise ParseError(f"{path}: empty file")
    magic = _read_be32(data, 0, path)
    if magic == IDX_LABEL_MAGIC:
        ndim = 1
    elif magic == IDX_IMAGE_MAGIC:
        ndim = 3
    else:
        raise ParseError(f"{path}: bad magic 0x{magic & 0xFFFFFFFF:08x} at byte 0")
    dims = [_read_be32(data, 4 + 4 * i, path) for i in range(ndim)]
    start = 4 + 4 * ndim
    count = int(np.prod(dims))
    if len(data) - start < count:
        raise ParseError(f"{path}: truncated body at byte {len(data)}, "
                         f"expected {start + count} bytes for dims {dims}")
    body = np.frombuffer(data, dtype=np.uint8, count=count, offset=start)
    return body.reshape(dims)


def _companion_label_path(images_path: str) -> str:
    p = str(images_path)
    for a, b in (("images", "labels"), ("idx3", "idx1")):
        cand = p.replace(a, b)
        if cand != p and Path(cand).exists():
            return cand
    raise ParseError(
        f"{images_path}: cannot locate the label file; pass 'images_path,labels_path'")


def ingest(path: str, format: str) -> Dataset:
    """Load a labelled dataset from disk.

    format "idx": path is either "images_path,labels_path" or the images
    path alone (the labels file is found by the usual images->labels
    naming).  format "csv": one sample per row, integer label first.
    """
    if format == "idx":
        if "," in path:
            img_path, lbl_path = (s.strip() for s in path.split(",", 1))
        else:
            img_path, lbl_path = path, _companion_label_path(path)
        images = _load_idx(img_path)
        labels = _load_idx(lbl_path)
        if images.ndim != 3:
            raise ParseError(f"{img_path}: expected an image stack, found magic for {images.ndim}-d data")
        if labels.ndim != 1:
            raise ParseError(f"{lbl_path}: expected a label vector")
        if images.shape[0] != labels.shape[0]:
            raise ParseError(f"{img_path}: {images.shape[0]} images vs {labels.shape[0]} labels")
        inputs = images.astype(np.float64)[:, np.newaxis] / 255.0
        return Dataset(inputs, labels.astype(np.int64), int(labels.max()) + 1 if labels.size else 1)
    if format == "csv":
        return _ingest_csv(path)
    raise ConfigError(f"unknown dataset format {format!r}")


def _ingest_csv(path: str) -> Dataset:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ParseError(f"{path}: empty file")
    rows = []
    width = None
    for lineno, ln in enumerate(lines, start=1):
        cells = ln.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise ParseError(f"{path}: line {lineno} has {len(cells)} cells, expected {width}")
        try:
            rows.append([float(c) for c in cells])
        except ValueError:
            bad = next(i for i, c in enumerate(cells) if not _is_number(c))
            raise ParseError(f"{path}: line {lineno}, cell {bad}: "
                             f"non-numeric value {cells[bad]!r}") from None
    arr = np.asarray(rows, dtype=np.float64)
    if arr.shape[1] < 2:
        raise ParseError(f"{path}: rows need a label plus at least one feature")
    labels_f = arr[:, 0]
    if np.any(labels_f != np.round(labels_f)) or np.any(labels_f < 0):
        bad = int(np.argmax((labels_f != np.round(labels_f)) | (labels_f < 0))) + 1
        raise ParseError(f"{path}: line {bad}: label must be a non-negative integer")
    labels = labels_f.astype(np.int64)
    return Dataset(arr[:, 1:], labels, int(labels.max()) + 1)


def _is_number(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def write_csv(data: Dataset, path: str, fmt: str = "%.6g") -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i in range(len(data)):
            feats = ",".join(fmt % v for v in data.inputs[i].ravel())
            fh.write(f"{int(data.labels[i])},{feats}\n")


def write_idx(data: Dataset, images_path: str, labels_path: str) -> None:
    """Write [n,1,h,w] inputs (values in [0,1]) as ubyte IDX image/label files."""
    inputs = data.inputs
    if inputs.ndim != 4 or inputs.shape[1] != 1:
        raise ConfigError(f"IDX export needs [n,1,h,w] inputs, got {inputs.shape}")
    n, _, h, w = inputs.shape
    pixels = np.clip(np.round(inputs[:, 0] * 255.0), 0, 255).astype(np.uint8)
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">iiii", IDX_IMAGE_MAGIC, n, h, w))
        fh.write(pixels.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">ii", IDX_LABEL_MAGIC, n))
        fh.write(data.labels.astype(np.uint8).tobytes())


def make_blob_images(n: int, seed: int, num_classes: int = 10, image_size: int = 28,
                     noise: float = 0.06, base_intensity: float = 0.16,
                     intensity_step: float = 0.08, flat: bool = False) -> Dataset:
    """Synthetic classification set: Gaussian blobs whose peak intensity
    encodes the class.

    Class k's blob peaks at base_intensity + k * intensity_step; blob
    position is uniform within a central disc, so intensity is the only
    class signal and correct classification needs an unbiased estimate of
    it.  Pixel noise is added and values are clipped to [0, 1].  Images
    come out [n,1,s,s], or [n,s*s] with flat=True (the layout the
    fully-connected reference network consumes).
    """
    rng = Rng(seed)
    s = image_size
    labels = (rng.uint64(n) % np.uint64(num_classes)).astype(np.int64)
    angles = 2.0 * np.pi * rng.random(n)
    radius = s * 0.30 * np.sqrt(rng.random(n))
    cy = (s - 1) / 2.0 + radius * np.sin(angles)
    cx = (s - 1) / 2.0 + radius * np.cos(angles)
    yy = np.arange(s, dtype=np.float64)
    d2 = ((yy[np.newaxis, :, np.newaxis] - cy[:, np.newaxis, np.newaxis]) ** 2
          + (yy[np.newaxis, np.newaxis, :] - cx[:, np.newaxis, np.newaxis]) ** 2)
    sigma = s / 9.0
    images = np.exp(-d2 / (2.0 * sigma * sigma))
    images *= (base_intensity + intensity_step * labels)[:, np.newaxis, np.newaxis]
    images += noise * rng.normal((n, s, s))
    images = np.clip(images, 0.0, 1.0)
    inputs = images.reshape(n, -1) if flat else images[:, np.newaxis]
    return Dataset(inputs, labels, num_classes)


def as_image_dataset(data: Dataset) -> Dataset:
    """Reshape flat feature rows to [n,1,s,s] for convolutional networks."""
    if data.inputs.ndim == 4:
        return data
    if data.inputs.ndim != 2:
        raise ConfigError(f"cannot reshape inputs of shape {data.inputs.shape} to images")
    side = int(round(np.sqrt(data.inputs.shape[1])))
    if side * side != data.inputs.shape[1]:
        raise ConfigError(f"{data.inputs.shape[1]} features is not a square image")
    return Dataset(data.inputs.reshape(len(data), 1, side, side), data.labels, data.num_classes)


def as_flat_dataset(data: Dataset) -> Dataset:
    """Flatten image inputs to [n, features] for fully-connected networks."""
    if data.inputs.ndim == 2:
        return data
    return Dataset(data.inputs.reshape(len(data), -1), data.labels, data.num_classes)
