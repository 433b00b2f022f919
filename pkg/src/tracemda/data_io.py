"""Dataset readers and writers, seeded splits and synthetic datasets.

File formats
------------
IDX
    The MNIST format: big-endian header ``00 00 <type> <ndim>`` followed by
    ``ndim`` big-endian uint32 extents and the payload.  Gzipped files are
    detected by their ``.gz`` suffix.
TTEN
    Little-endian tensor container::

        magic      4 bytes  b"TTEN"
        version    u8       1
        scalar     u8       1 (float64 little-endian)
        order      u8       N
        extents    N x u64
        length     u64      payload length in bytes (8 * prod(extents))
        payload    C-ordered float64 values
Label CSV
    UTF-8 with header ``index,label``, one row per sample.

All randomness comes from ``numpy.random.Generator(PCG64(seed))``.
"""
from __future__ import annotations

import csv
import gzip
import io
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from tracemda.exceptions import DataFormatError, DimensionError
from tracemda.mda import LabeledDataset

TTEN_MAGIC = b"TTEN"
TTEN_VERSION = 1
SCALAR_F64 = 1

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

_IDX_TYPES = {
    0x08: np.dtype(">u1"),
    0x09: np.dtype(">i1"),
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}
_IDX_CODES = {np.dtype(v).newbyteorder("=").str: k for k, v in _IDX_TYPES.items()}


def rng_from_seed(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _read_bytes(path) -> bytes:
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        return fh.read()


def parse_idx(raw: bytes, expected_magic: int | None = None) -> np.ndarray:
    """Decode an IDX byte string into an array (native byte order)."""
    if len(raw) < 4:
        raise DataFormatError("IDX file truncated: missing header")
    zeros, code, ndim = struct.unpack(">HBB", raw[:4])
    magic = (code << 8) | ndim
    if zeros != 0 or code not in _IDX_TYPES:
        raise DataFormatError(f"bad IDX magic 0x{struct.unpack('>I', raw[:4])[0]:08x}")
    if expected_magic is not None and magic != expected_magic:
        raise DataFormatError(f"IDX magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise DataFormatError("IDX file truncated inside the dimension header")
    dims = struct.unpack(">" + "I" * ndim, raw[4:header])
    dtype = _IDX_TYPES[code]
    need = math.prod(dims) * dtype.itemsize
    if len(raw) - header < need:
        raise DataFormatError(f"IDX payload truncated: {len(raw) - header} of {need} bytes")
    if len(raw) - header > need:
        raise DataFormatError(f"IDX payload has {len(raw) - header - need} trailing bytes")
    data = np.frombuffer(raw, dtype=dtype, count=math.prod(dims), offset=header)
    return data.reshape(dims).astype(dtype.newbyteorder("="))


def read_idx(path, expected_magic: int | None = None) -> np.ndarray:
    return parse_idx(_read_bytes(path), expected_magic)


def encode_idx(array) -> bytes:
    array = np.asarray(array)
    key = array.dtype.newbyteorder("=").str
    if key not in _IDX_CODES:
        raise DataFormatError(f"dtype {array.dtype} has no IDX type code")
    code = _IDX_CODES[key]
    head = struct.pack(">HBB", 0, code, array.ndim)
    head += struct.pack(">" + "I" * array.ndim, *array.shape)
    return head + np.ascontiguousarray(array, dtype=_IDX_TYPES[code]).tobytes()


def write_idx(path, array) -> None:
    path = Path(path)
    raw = encode_idx(array)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "wb") as fh:
        fh.write(raw)


def load_idx(images_path, labels_path) -> LabeledDataset:
    """Load an IDX image/label pair as ``H x W x n`` data scaled to ``[0, 1]``."""
    images = read_idx(images_path, IDX_IMAGES_MAGIC)
    labels = read_idx(labels_path, IDX_LABELS_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise DataFormatError(
            f"{images.shape[0]} images but {labels.shape[0]} labels"
        )
    X = np.moveaxis(images.astype(np.float64) / 255.0, 0, -1)
    return LabeledDataset(np.ascontiguousarray(X), labels.astype(np.int64))


def encode_container(tensor) -> bytes:
    tensor = np.asarray(tensor, dtype=np.float64)
    if tensor.ndim == 0 or tensor.ndim > 255:
        raise DimensionError(f"cannot store a tensor of order {tensor.ndim}")
    payload = np.ascontiguousarray(tensor, dtype="<f8").tobytes()
    head = TTEN_MAGIC + struct.pack("<BBB", TTEN_VERSION, SCALAR_F64, tensor.ndim)
    head += struct.pack("<" + "Q" * tensor.ndim, *tensor.shape)
    head += struct.pack("<Q", len(payload))
    return head + payload


def decode_container(raw: bytes) -> np.ndarray:
    if len(raw) < 7:
        raise DataFormatError("TTEN container truncated: missing header")
    if raw[:4] != TTEN_MAGIC:
        raise DataFormatError(f"bad TTEN magic {raw[:4]!r}")
    version, scalar, order = struct.unpack("<BBB", raw[4:7])
    if version != TTEN_VERSION:
        raise DataFormatError(f"unsupported TTEN version {version}")
    if scalar != SCALAR_F64:
        raise DataFormatError(f"unsupported TTEN scalar code {scalar}")
    if order == 0:
        raise DataFormatError("TTEN order must be >= 1")
    end = 7 + 8 * order + 8
    if len(raw) < end:
        raise DataFormatError("TTEN container truncated inside the header")
    extents = struct.unpack("<" + "Q" * order, raw[7 : 7 + 8 * order])
    (length,) = struct.unpack("<Q", raw[end - 8 : end])
    if length != 8 * math.prod(extents):
        raise DataFormatError(
            f"TTEN payload length {length} does not match extents {extents}"
        )
    if len(raw) - end != length:
        raise DataFormatError(f"TTEN payload has {len(raw) - end} bytes, header says {length}")
    data = np.frombuffer(raw, dtype="<f8", offset=end).astype(np.float64)
    return data.reshape(extents)


def save_container(path, tensor) -> None:
    Path(path).write_bytes(encode_container(tensor))


def load_container(path) -> np.ndarray:
    return decode_container(Path(path).read_bytes())


def save_labels_csv(path, labels) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "label"])
        for i, lab in enumerate(np.asarray(labels, dtype=np.int64)):
            w.writerow([i, int(lab)])


def load_labels_csv(path) -> np.ndarray:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0]] != ["index", "label"]:
        raise DataFormatError(f"{path}: expected header 'index,label'")
    labels = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            i, lab = int(row[0]), int(row[1])
        except (ValueError, IndexError):
            raise DataFormatError(f"{path}:{lineno}: malformed row {row!r}") from None
        labels[i] = lab
    if sorted(labels) != list(range(len(labels))):
        raise DataFormatError(f"{path}: indices must be 0..n-1 without gaps")
    return np.array([labels[i] for i in range(len(labels))], dtype=np.int64)


def load_feature_csv(path, shape=None) -> LabeledDataset:
    """Read a CSV with one sample per row; a ``label`` column holds the class."""
    text = Path(path).read_text(encoding="utf-8")
    reader = csv.reader(io.StringIO(text))
    header = [h.strip() for h in next(reader, [])]
    if "label" not in header:
        raise DataFormatError(f"{path}: no 'label' column")
    li = header.index("label")
    feats, labels = [], []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            labels.append(int(row[li]))
            feats.append([float(v) for j, v in enumerate(row) if j != li])
        except ValueError:
            raise DataFormatError(f"{path}:{lineno}: non-numeric value") from None
    if not feats:
        raise DataFormatError(f"{path}: no samples")
    F = np.asarray(feats, dtype=np.float64)
    shape = tuple(shape) if shape else (F.shape[1],)
    if math.prod(shape) != F.shape[1]:
        raise DataFormatError(f"{F.shape[1]} features cannot be shaped as {shape}")
    X = np.moveaxis(F.reshape((F.shape[0],) + shape), 0, -1)
    return LabeledDataset(np.ascontiguousarray(X), np.asarray(labels))


@dataclass(frozen=True)
class SplitSpec:
    """How to split a dataset into train and test parts.

    Give ``train_per_class`` for a stratified split (optionally capping the
    test side with ``test_per_class``) or ``train_fraction`` for a global one.
    """

    train_per_class: int | None = None
    test_per_class: int | None = None
    train_fraction: float | None = None
    seed: int = 0

    def __post_init__(self):
        if (self.train_per_class is None) == (self.train_fraction is None):
            raise ValueError("give exactly one of train_per_class and train_fraction")
        if self.train_fraction is not None and not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must lie in (0, 1)")
        if self.train_per_class is not None and self.train_per_class < 1:
            raise ValueError("train_per_class must be >= 1")
        if self.test_per_class is not None and self.test_per_class < 0:
            raise ValueError("test_per_class must be >= 0")


def split_indices(labels, spec: SplitSpec):
    labels = np.asarray(labels, dtype=np.int64)
    rng = rng_from_seed(spec.seed)
    if spec.train_fraction is not None:
        perm = rng.permutation(labels.size)
        k = int(round(spec.train_fraction * labels.size))
        if not 0 < k < labels.size:
            raise ValueError(f"train fraction {spec.train_fraction} leaves an empty side")
        return np.sort(perm[:k]), np.sort(perm[k:])
    train, test = [], []
    for cls in range(int(labels.max()) + 1):
        members = np.flatnonzero(labels == cls)
        # without test_per_class the remainder is the test side and must be non-empty
        need = spec.train_per_class + (1 if spec.test_per_class is None else spec.test_per_class)
        if members.size < need:
            raise ValueError(
                f"class {cls} has {members.size} samples, split needs "
                f"{spec.train_per_class} train + {spec.test_per_class or 'at least 1'} test"
            )
        perm = rng.permutation(members)
        train.append(perm[: spec.train_per_class])
        rest = perm[spec.train_per_class :]
        test.append(rest if spec.test_per_class is None else rest[: spec.test_per_class])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def split(dataset: LabeledDataset, spec: SplitSpec):
    """Seeded train/test split; returns two :class:`LabeledDataset`."""
    tr, te = split_indices(dataset.labels, spec)
    return dataset.subset(tr), dataset.subset(te)


@dataclass(frozen=True)
class SynthSpec:
    n_classes: int = 3
    per_class: int = 20
    feature_shape: tuple = (4, 3)
    separation: float = 3.0
    noise: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_classes < 2:
            raise ValueError("need at least two classes")
        if self.per_class < 1 or any(s < 1 for s in self.feature_shape):
            raise ValueError("per_class and feature extents must be positive")
        if self.separation < 0 or self.noise < 0:
            raise ValueError("separation and noise must be non-negative")


def synth_gaussian_classes(spec: SynthSpec) -> LabeledDataset:
    """Isotropic Gaussian classes; class ``j`` is centred on a scaled one-hot pattern."""
    rng = rng_from_seed(spec.seed)
    shape = tuple(spec.feature_shape)
    D = math.prod(shape)
    labels = np.repeat(np.arange(spec.n_classes), spec.per_class)
    means = np.zeros((D, spec.n_classes))
    means[np.arange(spec.n_classes) % D, np.arange(spec.n_classes)] = spec.separation
    F = means[:, labels] + spec.noise * rng.standard_normal((D, labels.size))
    return LabeledDataset(F.reshape(shape + (labels.size,)), labels)
