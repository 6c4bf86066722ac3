"""
Data Module

MNIST IDX ingestion, image vectorization and seeded construction of balanced
binary-task split quadruples.

IDX layout (all integers big-endian)::

    images: [0] magic 2051  [4] count  [8] rows=28  [12] cols=28  [16] count*784 pixels
    labels: [0] magic 2049  [4] count  [8] count labels

Paths ending in ``.gz`` are decompressed transparently.
"""
import gzip
import logging
import os
import struct
from dataclasses import dataclass

import numpy as np

from pyconformaltrain.core import (
    Dataset,
    ImagePool,
    Label,
    ObjectVector,
    SplitQuadruple,
    as_object_vector,
)
from pyconformaltrain.exceptions import (
    BadMagic,
    CountMismatch,
    DimensionMismatch,
    IdxFormatError,
    InsufficientData,
    TruncatedFile,
    ZeroImage,
)

logger = logging.getLogger(__name__)

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049
IMAGE_ROWS = 28
IMAGE_COLS = 28
DIGITS = tuple(range(10))

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True, eq=False)
class MnistPool:
    """
    Raw MNIST images and digit labels.

    Attributes:
        images (np.ndarray): ``(n, 28, 28)`` uint8 pixel grids.
        labels (np.ndarray): ``(n,)`` uint8 digits in 0..9.
    """

    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        images = np.asarray(self.images, dtype=np.uint8)
        labels = np.asarray(self.labels, dtype=np.uint8).reshape(-1)
        if images.ndim != 3 or images.shape[1:] != (IMAGE_ROWS, IMAGE_COLS):
            raise ValueError(f"images must have shape (n, 28, 28), got {images.shape}")
        if images.shape[0] != labels.shape[0]:
            raise ValueError(f"{images.shape[0]} images but {labels.shape[0]} labels")
        if labels.size and labels.max() > 9:
            raise ValueError("labels must be digits 0..9")
        images.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def counts(self) -> dict[int, int]:
        """Number of images per digit."""
        return dict(zip(DIGITS, np.bincount(self.labels, minlength=10).tolist()))

    def concat(self, other: "MnistPool") -> "MnistPool":
        return MnistPool(np.concatenate([self.images, other.images]),
                         np.concatenate([self.labels, other.labels]))


def _open(path):
    if os.fspath(path).endswith(".gz"):
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_exact(path, payload: bytes, offset: int, length: int, what: str) -> bytes:
    chunk = payload[offset:offset + length]
    if len(chunk) != length:
        raise TruncatedFile(f"expected {length} bytes of {what}, found {len(chunk)}",
                            path, offset + len(chunk))
    return chunk


def _read_images(path) -> np.ndarray:
    with _open(path) as handle:
        payload = handle.read()
    header = _read_exact(path, payload, 0, 16, "image header")
    magic, count, rows, cols = struct.unpack(">IIII", header)
    if magic != IMAGE_MAGIC:
        raise BadMagic(f"image magic is {magic}, expected {IMAGE_MAGIC}", path, 0)
    if rows != IMAGE_ROWS:
        raise DimensionMismatch(f"rows = {rows}, expected {IMAGE_ROWS}", path, 8)
    if cols != IMAGE_COLS:
        raise DimensionMismatch(f"cols = {cols}, expected {IMAGE_COLS}", path, 12)
    pixels = _read_exact(path, payload, 16, count * rows * cols, "pixels")
    return np.frombuffer(pixels, dtype=np.uint8).reshape(count, rows, cols)


def _read_labels(path) -> np.ndarray:
    with _open(path) as handle:
        payload = handle.read()
    header = _read_exact(path, payload, 0, 8, "label header")
    magic, count = struct.unpack(">II", header)
    if magic != LABEL_MAGIC:
        raise BadMagic(f"label magic is {magic}, expected {LABEL_MAGIC}", path, 0)
    labels = np.frombuffer(_read_exact(path, payload, 8, count, "labels"), dtype=np.uint8)
    bad = np.flatnonzero(labels > 9)
    if bad.size:
        raise IdxFormatError(f"label {labels[bad[0]]} is not a digit", path, 8 + int(bad[0]))
    return labels


def load_idx(images_path, labels_path) -> MnistPool:
    """
    Read an MNIST image file and its label file.

    Raises:
        BadMagic, DimensionMismatch, TruncatedFile: On a malformed file.
        CountMismatch: When the two files disagree on the item count.
    """
    images = _read_images(images_path)
    labels = _read_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise CountMismatch(
            f"{labels.shape[0]} labels for {images.shape[0]} images in {images_path}",
            labels_path, 4,
        )
    logger.info("loaded %d images from %s", images.shape[0], images_path)
    return MnistPool(images, labels)


def vectorize(raw) -> ObjectVector:
    """
    Turn a 28x28 byte image into a unit-norm object vector.

    Pixels are scaled to [0, 1], flattened row-major (pixel (i, j), 1-based,
    lands at entry 28 (i - 1) + j) and divided by the Euclidean norm.

    Raises:
        ZeroImage: If every pixel is 0.
    """
    vector = np.asarray(raw, dtype=np.float64).reshape(-1) / 255.0
    norm = np.linalg.norm(vector)
    if norm == 0.0:
        raise ZeroImage("all-zero image cannot be normalized")
    return as_object_vector(vector / norm)


@dataclass(frozen=True)
class TaskSpec:
    """
    One experiment cell: digit ``digit_k`` against the rest.

    Every dataset built from it holds ``n_size`` positives and ``n_size``
    negatives.
    """

    digit_k: int
    n_size: int
    seed: int
    replication_index: int

    def __post_init__(self):
        if self.digit_k not in DIGITS:
            raise ValueError(f"digit must be in 0..9, got {self.digit_k}")
        if self.n_size < 1:
            raise ValueError(f"n_size must be positive, got {self.n_size}")
        if not 0 <= self.seed <= _MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.replication_index < 0:
            raise ValueError("replication index must be nonnegative")


def splitmix64(state: int) -> int:
    """One splitmix64 output for ``state``."""
    z = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *coordinates: int) -> int:
    """Mix a root seed with cell coordinates into an independent 64-bit seed."""
    state = splitmix64(seed & _MASK64)
    for value in coordinates:
        state = splitmix64(state ^ (value & _MASK64))
    return state


def _draw(pool: MnistPool, candidates: np.ndarray, wanted: int, rng, what: str) -> np.ndarray:
    """``wanted`` distinct candidates in random order, skipping blank images."""
    if candidates.size < wanted:
        raise InsufficientData(f"need {wanted} {what} images, pool has {candidates.size}")
    chosen = []
    for index in rng.permutation(candidates):
        if pool.images[index].any():
            chosen.append(int(index))
            if len(chosen) == wanted:
                return np.array(chosen, dtype=np.int64)
        else:
            logger.debug("skipping blank image %d", index)
    raise InsufficientData(f"need {wanted} non-blank {what} images, pool has {len(chosen)}")


def sample_indices(pool: MnistPool, spec: TaskSpec) -> tuple[np.ndarray, np.ndarray]:
    """
    Pool indices of the positive and negative images of one cell.

    Returns ``4 * n_size`` distinct digit-k indices and ``4 * n_size`` distinct
    indices drawn uniformly from all other digits; a pure function of ``spec``.
    """
    rng = np.random.default_rng(
        derive_seed(spec.seed, spec.digit_k, spec.n_size, spec.replication_index)
    )
    wanted = 4 * spec.n_size
    positives = _draw(pool, np.flatnonzero(pool.labels == spec.digit_k), wanted, rng,
                      f"digit-{spec.digit_k}")
    negatives = _draw(pool, np.flatnonzero(pool.labels != spec.digit_k), wanted, rng,
                      f"non-{spec.digit_k}")
    return positives, negatives


def sample_task(pool: MnistPool, spec: TaskSpec) -> SplitQuadruple:
    """
    Draw the split quadruple of one cell.

    The eight blocks of ``n_size`` images (four positive, four negative) are
    stacked into one image pool; dataset j takes positive block j and negative
    block j, in the order pre-pre-train, pre-pre-test, pre-test, test.

    Raises:
        InsufficientData: If the pool lacks ``4 * n_size`` usable images of
            either class.
    """
    positives, negatives = sample_indices(pool, spec)
    n = spec.n_size
    images = ImagePool.from_vectors(
        [vectorize(pool.images[index]) for index in np.concatenate([positives, negatives])]
    )
    block_labels = [int(Label.POSITIVE)] * n + [int(Label.NEGATIVE)] * n
    datasets = []
    for block in range(4):
        rows = np.concatenate([np.arange(block * n, (block + 1) * n),
                               np.arange((4 + block) * n, (5 + block) * n)])
        datasets.append(Dataset(images, rows, block_labels))
    return SplitQuadruple(*datasets)
