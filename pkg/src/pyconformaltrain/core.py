"""
Core Module

Domain types for observations, bag-semantics datasets and the four-way data
split used to train and test conformity measures.

Datasets never copy image data. Every dataset holds row indices into a shared,
read-only ``ImagePool`` together with one label per position, so sums and
leave-one-out removals only touch small integer arrays.

Classes:
    Label: The binary label space.
    ImagePool: Read-only matrix of unit-norm object vectors.
    Observation: An (object, label) pair.
    Dataset: A bag of observations.
    SplitQuadruple: The four disjoint datasets of one experiment.

Functions:
    as_object_vector: Validate a vector as a unit-norm object.
    bag_sum: Bag union of two datasets.
    leave_one_out: Remove one copy of an observation from a dataset.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import IntEnum
from functools import cached_property
from typing import Iterable, Iterator, TypeAlias

import numpy as np

from pyconformaltrain.exceptions import EmptyDataset, MissingObservation, NotUnitNorm

logger = logging.getLogger(__name__)

OBJECT_DIM = 784
UNIT_NORM_TOLERANCE = 1e-9

ObjectVector: TypeAlias = np.ndarray


class Label(IntEnum):
    """Binary labels: the target digit is POSITIVE, every other digit NEGATIVE."""

    NEGATIVE = 0
    POSITIVE = 1


LABELS: tuple[Label, ...] = tuple(Label)


def as_object_vector(values) -> ObjectVector:
    """
    Validate ``values`` as an object vector.

    Args:
        values (array-like): 784 finite components with unit Euclidean norm.

    Returns:
        ObjectVector: A read-only float64 copy.

    Raises:
        NotUnitNorm: On a wrong length, a non-finite component or a norm that
            differs from 1 by more than ``UNIT_NORM_TOLERANCE``.
    """
    vector = np.array(values, dtype=np.float64).reshape(-1)
    if vector.shape != (OBJECT_DIM,):
        raise NotUnitNorm(f"expected {OBJECT_DIM} components, got {vector.size}")
    if not np.all(np.isfinite(vector)):
        raise NotUnitNorm("object vector has non-finite components")
    norm = float(np.linalg.norm(vector))
    if abs(norm - 1.0) > UNIT_NORM_TOLERANCE:
        raise NotUnitNorm(f"object vector norm is {norm!r}, expected 1")
    vector.setflags(write=False)
    return vector


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class ImagePool:
    """
    A read-only stack of object vectors shared by the datasets built on it.

    Attributes:
        vectors (np.ndarray): ``(n, dim)`` float64 matrix, one object per row.
        keys (np.ndarray): For every row, the smallest row index holding
            bit-identical components. Two rows are the same object iff their
            keys are equal.
    """

    vectors: np.ndarray
    keys: np.ndarray

    @classmethod
    def from_vectors(cls, vectors: Iterable[np.ndarray] | np.ndarray) -> "ImagePool":
        """Stack and validate unit-norm vectors into a new pool."""
        rows = [as_object_vector(v) for v in vectors]
        matrix = np.vstack(rows) if rows else np.empty((0, OBJECT_DIM), dtype=np.float64)
        first_seen: dict[bytes, int] = {}
        keys = np.array(
            [first_seen.setdefault(row.tobytes(), i) for i, row in enumerate(matrix)],
            dtype=np.int64,
        )
        return cls(vectors=_readonly(matrix), keys=_readonly(keys))

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @cached_property
    def squared_distances(self) -> np.ndarray:
        """
        Pairwise squared Euclidean distances between all pooled objects.

        Computed once as ``2 - 2<a, b>`` clamped at 0; rows that hold the same
        object are at distance exactly 0. The matrix is quadratic in the pool
        size, so pools are meant to hold one replication's images.
        """
        gram = self.vectors @ self.vectors.T
        distances = np.maximum(2.0 - 2.0 * gram, 0.0)
        distances[self.keys[:, None] == self.keys[None, :]] = 0.0
        logger.debug("cached %d x %d distance matrix", *distances.shape)
        return _readonly(distances)

    def concat(self, other: "ImagePool") -> "ImagePool":
        """A new pool holding this pool's rows followed by ``other``'s."""
        return ImagePool.from_vectors(np.vstack([self.vectors, other.vectors]))


@dataclass(frozen=True, eq=False)
class Observation:
    """
    An (object, label) pair.

    Observations taken from a dataset remember their pool row so conformity
    measures can reuse the pool's distance cache. Equality is exact bitwise
    equality of the components plus label equality.
    """

    vector: ObjectVector
    label: Label
    pool: ImagePool | None = None
    index: int | None = None

    def with_label(self, label: Label) -> "Observation":
        """The same object paired with another label."""
        return Observation(self.vector, Label(label), self.pool, self.index)

    def __eq__(self, other):
        if not isinstance(other, Observation):
            return NotImplemented
        return self.label == other.label and self.vector.tobytes() == other.vector.tobytes()

    def __hash__(self):
        return hash((int(self.label), self.vector.tobytes()))


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    A bag of observations over an ``ImagePool``.

    The stored order is an implementation convenience; nothing computed from a
    dataset depends on it.

    Attributes:
        pool (ImagePool): Source of the object vectors.
        indices (np.ndarray): Pool row of every item.
        labels (np.ndarray): Label of every item, aligned with ``indices``.
    """

    pool: ImagePool
    indices: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        indices = np.array(self.indices, dtype=np.int64).reshape(-1)
        labels = np.array(self.labels, dtype=np.int8).reshape(-1)
        if indices.shape != labels.shape:
            raise ValueError("indices and labels must have the same length")
        if indices.size and (indices.min() < 0 or indices.max() >= len(self.pool)):
            raise ValueError("dataset index outside the image pool")
        if not np.isin(labels, [int(label) for label in LABELS]).all():
            raise ValueError("labels must be 0 or 1")
        object.__setattr__(self, "indices", _readonly(indices))
        object.__setattr__(self, "labels", _readonly(labels))

    @classmethod
    def from_observations(cls, observations: Iterable[Observation]) -> "Dataset":
        """Build a dataset (and a fresh pool) from standalone observations."""
        observations = list(observations)
        pool = ImagePool.from_vectors([z.vector for z in observations])
        return cls(pool, np.arange(len(observations)), [int(z.label) for z in observations])

    def size(self) -> int:
        """Number of items, duplicates included."""
        return int(self.indices.size)

    def __len__(self) -> int:
        return self.size()

    def __iter__(self) -> Iterator[Observation]:
        for index, label in zip(self.indices.tolist(), self.labels.tolist()):
            yield Observation(self.pool.vectors[index], Label(label), self.pool, index)

    @property
    def vectors(self) -> np.ndarray:
        """The item objects as an ``(n, dim)`` matrix."""
        return self.pool.vectors[self.indices]

    def label_counts(self) -> dict[Label, int]:
        """Multiplicity of each label."""
        return {label: int(np.count_nonzero(self.labels == label)) for label in LABELS}

    def positions_of(self, z: Observation) -> np.ndarray:
        """Positions of all copies of ``z``."""
        same_label = self.labels == int(z.label)
        if z.pool is self.pool and z.index is not None:
            same_object = self.pool.keys[self.indices] == self.pool.keys[z.index]
        else:
            rows = self.pool.vectors[self.indices].view(np.uint64)
            same_object = np.all(rows == np.asarray(z.vector, dtype=np.float64).view(np.uint64),
                                 axis=1)
        return np.flatnonzero(same_label & same_object)

    def multiplicity(self, z: Observation) -> int:
        """How many copies of ``z`` the bag holds."""
        return int(self.positions_of(z).size)

    def __add__(self, other: "Dataset") -> "Dataset":
        return bag_sum(self, other)

    def require_nonempty(self, name: str = "dataset"):
        """Raise ``EmptyDataset`` when the bag has no items."""
        if self.size() == 0:
            raise EmptyDataset(f"{name} is empty")


def bag_sum(a: Dataset, b: Dataset) -> Dataset:
    """
    Bag union ``a + b``; multiplicities add.

    Datasets over different pools are re-based onto a concatenated pool.
    """
    if a.pool is b.pool:
        return Dataset(a.pool, np.concatenate([a.indices, b.indices]),
                       np.concatenate([a.labels, b.labels]))
    pool = a.pool.concat(b.pool)
    return Dataset(pool, np.concatenate([a.indices, b.indices + len(a.pool)]),
                   np.concatenate([a.labels, b.labels]))


def leave_one_out(d: Dataset, z: Observation) -> Dataset:
    """
    Remove exactly one copy of ``z`` from ``d``.

    Raises:
        MissingObservation: If ``z`` does not occur in ``d``.
    """
    positions = d.positions_of(z)
    if positions.size == 0:
        raise MissingObservation(f"observation with label {int(z.label)} is not in the dataset")
    keep = np.ones(d.size(), dtype=bool)
    keep[positions[0]] = False
    return Dataset(d.pool, d.indices[keep], d.labels[keep])


@dataclass(frozen=True)
class SplitQuadruple:
    """
    The four disjoint datasets of one experiment.

    ``pre_train = pre_pre_train + pre_pre_test`` serves as proper training set
    and ``pre_test`` as calibration set; ``train = pre_train + pre_test``.
    """

    pre_pre_train: Dataset
    pre_pre_test: Dataset
    pre_test: Dataset
    test: Dataset

    def __post_init__(self):
        for name in ("pre_pre_train", "pre_pre_test", "pre_test", "test"):
            getattr(self, name).require_nonempty(name)

    @property
    def pre_train(self) -> Dataset:
        return bag_sum(self.pre_pre_train, self.pre_pre_test)

    @property
    def train(self) -> Dataset:
        return bag_sum(self.pre_train, self.pre_test)
