"""Conformity measures: the abstract scoring interface and the Gaussian kernel measure."""
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from pyconformaltrain.core import Dataset, ObjectVector, Observation
from pyconformaltrain.exceptions import EmptyReference


class ConformityMeasure(ABC):
    """
    A scoring rule Q((x, y), D) -> float; larger means more conforming.

    Implementations must be pure: the same observation and reference always
    give the same score.
    """

    @abstractmethod
    def score(self, observation: Observation, reference: Dataset) -> float:
        """
        Conformity score of ``observation`` relative to ``reference``.

        Args:
            observation (Observation): The candidate (object, label) pair.
            reference (Dataset): The dataset the measure is fitted on.
        """

    def __call__(self, observation: Observation, reference: Dataset) -> float:
        return self.score(observation, reference)


@dataclass(frozen=True)
class KernelConformity(ConformityMeasure):
    """
    Kernel-weighted label frequency around an object.

    The weight of a reference object x' is exp(-rho * |x - x'|^2); the score of
    (x, y) is the weight share of reference items labelled y.

    Attributes:
        rho (float): Nonnegative, finite inverse bandwidth. ``rho = 0`` reduces
            the score to the label frequency of the reference.
    """

    rho: float

    def __post_init__(self):
        if not math.isfinite(self.rho) or self.rho < 0:
            raise ValueError(f"rho must be finite and nonnegative, got {self.rho!r}")

    def score(self, observation: Observation, reference: Dataset) -> float:
        return kernel_score(self, observation, reference)


def squared_distance(a: ObjectVector, b: ObjectVector) -> float:
    """``|a - b|^2`` for unit vectors, as ``2 - 2<a, b>`` clamped at 0."""
    return max(2.0 - 2.0 * float(np.dot(a, b)), 0.0)


def squared_distances_to(x: ObjectVector, objects: np.ndarray) -> np.ndarray:
    """Squared distances from ``x`` to every row of ``objects``."""
    return np.maximum(2.0 - 2.0 * (objects @ x), 0.0)


def reference_distances(observation: Observation, reference: Dataset) -> np.ndarray:
    """
    Squared distances from an observation's object to every reference item.

    Observations drawn from the reference's own pool read the pool's cached
    distance matrix; anything else is computed directly.
    """
    if observation.pool is reference.pool and observation.index is not None:
        return reference.pool.squared_distances[observation.index, reference.indices]
    return squared_distances_to(observation.vector, reference.vectors)


def kernel_weights(rho: float, distances: np.ndarray) -> np.ndarray:
    """
    Kernel weights shifted so the nearest item has weight 1.

    exp(-rho * (d - d_min)) scales every weight by the same factor
    exp(rho * d_min), so weight ratios are exact while the largest weight stays
    1 and the sum stays at least 1 even when exp(-rho * d) underflows.
    """
    return np.exp(-rho * (distances - distances.min()))


def kernel_score(measure: KernelConformity, obs: Observation, reference: Dataset) -> float:
    """
    Score ``obs`` against ``reference`` with the kernel measure.

    Raises:
        EmptyReference: If ``reference`` has no items.
    """
    if reference.size() == 0:
        raise EmptyReference("kernel conformity needs a nonempty reference dataset")
    weights = kernel_weights(measure.rho, reference_distances(obs, reference))
    agreeing = math.fsum(weights[reference.labels == int(obs.label)])
    return min(agreeing / math.fsum(weights), 1.0)
