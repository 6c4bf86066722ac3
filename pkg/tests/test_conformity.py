import math

import numpy as np
import pytest

from pyconformaltrain.conformity import (
    KernelConformity,
    kernel_weights,
    reference_distances,
    squared_distance,
)
from pyconformaltrain.core import LABELS, Dataset, Label, Observation
from pyconformaltrain.exceptions import EmptyReference

from .brute_force import direct_kernel_score
from .factories import basis, pooled_datasets, random_unit_vectors, unit


def two_point_reference():
    return Dataset.from_observations([
        Observation(basis(0), Label.POSITIVE),
        Observation(basis(1), Label.NEGATIVE),
    ])


def test_rho_zero_gives_label_frequency():
    d = two_point_reference()
    x = unit(basis(5) + basis(6))
    assert KernelConformity(0.0).score(Observation(x, Label.POSITIVE), d) == 0.5
    assert KernelConformity(0.0).score(Observation(x, Label.NEGATIVE), d) == 0.5


def test_orthogonal_reference_example():
    d = two_point_reference()
    score = KernelConformity(1.0).score(Observation(basis(0), Label.POSITIVE), d)
    assert score == pytest.approx(1 / (1 + math.exp(-2)), abs=1e-12)
    assert score == pytest.approx(0.880797, abs=1e-6)


@pytest.mark.parametrize("a, b, expected", [
    (basis(0), basis(0), 0.0),
    (basis(0), basis(1), 2.0),
    (basis(0), -basis(0), 4.0),
])
def test_squared_distance_examples(a, b, expected):
    assert squared_distance(a, b) == pytest.approx(expected, abs=1e-15)


def test_binary_scores_sum_to_one(rng):
    (d,) = pooled_datasets(random_unit_vectors(rng, 12), [list(rng.integers(0, 2, 12))])
    x = random_unit_vectors(rng, 1)[0]
    for rho in (0.0, 0.1, 3.0, 200.0):
        q = KernelConformity(rho)
        total = sum(q.score(Observation(x, label), d) for label in LABELS)
        assert total == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("rho", [math.exp(-5), 0.5, 1.0, math.exp(1), math.exp(2)])
def test_stabilized_score_matches_direct_formula(rng, rho):
    vectors = random_unit_vectors(rng, 15)
    labels = list(rng.integers(0, 2, 15))
    (d,) = pooled_datasets(vectors, [labels])
    q = KernelConformity(rho)
    for x in random_unit_vectors(rng, 5):
        for y in LABELS:
            expected = direct_kernel_score(rho, x, int(y), vectors, labels)
            assert q.score(Observation(x, y), d) == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_scores_stay_finite_at_the_top_of_the_grid(rng):
    q = KernelConformity(math.exp(8.5))
    for _ in range(1000):
        size = int(rng.integers(1, 8))
        (d,) = pooled_datasets(random_unit_vectors(rng, size), [list(rng.integers(0, 2, size))])
        x = random_unit_vectors(rng, 1)[0]
        for y in LABELS:
            score = q.score(Observation(x, y), d)
            assert math.isfinite(score)
            assert 0.0 <= score <= 1.0


def test_weights_are_shift_invariant(rng):
    distances = rng.uniform(0.0, 4.0, size=20)
    for rho in (0.3, 5.0):
        shifted = kernel_weights(rho, distances + 1.25)
        plain = kernel_weights(rho, distances)
        np.testing.assert_allclose(shifted / shifted.sum(), plain / plain.sum(), rtol=1e-12)
        assert plain.max() == 1.0


def test_large_rho_recovers_nearest_neighbour():
    angles = [0.2, 0.5, 0.9]
    vectors = [math.cos(a) * basis(0) + math.sin(a) * basis(1) for a in angles]
    (d,) = pooled_datasets(vectors, [[1, 0, 0]])
    q = KernelConformity(math.exp(8.5))
    x = basis(0)
    assert q.score(Observation(x, Label.POSITIVE), d) == pytest.approx(1.0, abs=1e-12)
    assert q.score(Observation(x, Label.NEGATIVE), d) == pytest.approx(0.0, abs=1e-12)


def test_pool_cache_agrees_with_direct_distances(rng):
    (d,) = pooled_datasets(random_unit_vectors(rng, 10), [[0, 1] * 5])
    inside = next(iter(d))
    outside = Observation(inside.vector.copy(), inside.label)
    np.testing.assert_allclose(reference_distances(inside, d),
                               reference_distances(outside, d), atol=1e-12)
    q = KernelConformity(2.0)
    assert q(inside, d) == pytest.approx(q(outside, d), abs=1e-12)


def test_empty_reference_is_rejected():
    empty = Dataset.from_observations([])
    with pytest.raises(EmptyReference):
        KernelConformity(1.0).score(Observation(basis(0), Label.POSITIVE), empty)


@pytest.mark.parametrize("rho", [-1.0, math.inf, math.nan])
def test_invalid_rho_is_rejected(rho):
    with pytest.raises(ValueError):
        KernelConformity(rho)
