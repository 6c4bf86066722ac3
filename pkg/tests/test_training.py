import math

import numpy as np
import pytest

from pyconformaltrain.conformity import KernelConformity
from pyconformaltrain.core import SplitQuadruple
from pyconformaltrain.exceptions import InvalidGrid
from pyconformaltrain.training import (
    ParamGrid,
    Regime,
    Score,
    evaluate,
    grid_values,
    objective,
    score_at,
    score_curve,
    train,
)

from . import brute_force
from .factories import balanced_split, random_split


def oracle_objective(regime, split, rho):
    reference, validation = regime.datasets(split)
    q = KernelConformity(rho)
    if regime in (Regime.PE, Regime.PRE_PE):
        return brute_force.prediction_error(reference, validation, q)
    return brute_force.observed_fuzziness_loo(reference, validation, q)


def train_all(split, grid, of_variant="loo"):
    return {regime: train(regime, split, grid, of_variant) for regime in Regime}


def test_default_grid_values():
    values = grid_values(ParamGrid())
    assert len(values) == 10
    assert values[0] == pytest.approx(0.0067379, abs=1e-7)
    assert values[0] == pytest.approx(math.exp(-5), rel=1e-15)
    assert values[-1] == pytest.approx(4914.769, abs=1e-3)
    assert values[-1] == pytest.approx(math.exp(8.5), rel=1e-15)
    assert all(a < b for a, b in zip(values, values[1:]))
    assert ParamGrid().values() == values


def test_single_point_grid():
    assert grid_values(ParamGrid(points=1)) == (pytest.approx(math.exp(-5)),)


@pytest.mark.parametrize("kwargs", [
    {"points": 0},
    {"min_exp": 2.0, "max_exp": 2.0},
    {"min_exp": 3.0, "max_exp": 1.0},
    {"max_exp": math.inf},
    {"points": 2.5},
])
def test_invalid_grid(kwargs):
    with pytest.raises(InvalidGrid):
        ParamGrid(**kwargs)


def test_score_names_and_regimes():
    assert Score.PE_TEST_OF_TRAIN.column == "pe_test_of_train"
    assert Score.OF_TEST_PE_TRAIN.regime is Regime.PRE_PE
    assert {score.regime for score in Score} == set(Regime)
    assert Score.for_regime(Regime.OF) is Score.PE_TEST_OF_TRAIN


def test_flat_objective_picks_smallest_rho(rng):
    split = balanced_split(rng, 4)
    grid = ParamGrid()
    model = train(Regime.PE, split, grid)
    assert [value for _, value in model.objective_curve] == [0.0] * grid.points
    assert model.rho_star == grid.values()[0]


def test_single_point_grid_training(rng):
    split = random_split(rng, 4)
    grid = ParamGrid(min_exp=1.0, max_exp=2.0, points=1)
    for regime in Regime:
        assert train(regime, split, grid).rho_star == pytest.approx(math.e)


@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("regime", list(Regime))
def test_training_matches_brute_force_argmin(seed, regime):
    split = random_split(np.random.default_rng(seed), 3)
    grid = ParamGrid()
    model = train(regime, split, grid)
    expected = [oracle_objective(regime, split, rho) for rho in grid.values()]
    observed = [value for _, value in model.objective_curve]
    np.testing.assert_allclose(observed, expected, rtol=0, atol=1e-15)
    assert model.rho_star == grid.values()[brute_force.argmin_index(observed)]
    assert model.rho_star in grid.values()
    assert objective(regime, split, model.rho_star) == model.objective_min


def test_pre_regimes_ignore_pre_test(rng):
    split = random_split(rng, 4)
    other = random_split(np.random.default_rng(99), 4)
    swapped = SplitQuadruple(split.pre_pre_train, split.pre_pre_test, other.pre_test, other.test)
    grid = ParamGrid()
    for regime in (Regime.PRE_PE, Regime.PRE_OF):
        assert train(regime, split, grid) == train(regime, swapped, grid)


def test_evaluate_is_deterministic(rng):
    split = random_split(rng, 4)
    grid = ParamGrid()
    assert evaluate(train_all(split, grid), split) == evaluate(train_all(split, grid), split)


def test_evaluate_uses_each_regimes_rho(rng):
    split = random_split(rng, 4)
    grid = ParamGrid()
    models = train_all(split, grid)
    report = evaluate(models, split)
    for score in Score:
        expected = score_at(score, split, models[score.regime].rho_star)
        assert report.score(score) == expected
        assert 0.0 <= report.score(score) <= 1.0
    assert report.rho_pre_of == models[Regime.PRE_OF].rho_star


def test_single_point_grid_pe_scores_agree(rng):
    split = random_split(rng, 4)
    report = evaluate(train_all(split, ParamGrid(points=1)), split)
    assert report.pe_test_pe_train == report.pe_test_of_train


def test_separable_split_reaches_best_case(rng):
    split = balanced_split(rng, 5, noise=0.02)
    grid = ParamGrid(min_exp=8.0, max_exp=9.0, points=1)
    report = evaluate(train_all(split, grid), split)
    assert report.pe_test_pe_train == 0.0
    assert report.pe_test_of_train == 0.0
    assert report.of_test_of_train == pytest.approx(1 / (1 + len(split.pre_test)))
    assert report.ties == 0


def test_evaluate_requires_every_regime(rng):
    split = random_split(rng, 3)
    models = train_all(split, ParamGrid(points=2))
    del models[Regime.PRE_OF]
    with pytest.raises(ValueError, match="pre-OF"):
        evaluate(models, split)


def test_test_curves_are_reproducible_and_match_scores(rng):
    split = random_split(rng, 4)
    grid = ParamGrid()
    models = train_all(split, grid)
    report = evaluate(models, split)
    for regime in Regime:
        curve = score_curve(regime, split, grid)
        assert curve == score_curve(regime, split, grid)
        assert [rho for rho, _ in curve] == list(grid.values())
        assert dict(curve)[models[regime].rho_star] == report.score(Score.for_regime(regime))


def test_plain_of_variant(rng):
    split = random_split(rng, 4)
    grid = ParamGrid()
    model = train(Regime.OF, split, grid, of_variant="plain")
    for rho, value in model.objective_curve:
        q = KernelConformity(rho)
        assert value == pytest.approx(
            brute_force.observed_fuzziness(split.pre_train, split.pre_test, split.pre_test, q),
            abs=1e-15)


def test_unknown_of_variant(rng):
    with pytest.raises(ValueError):
        train(Regime.OF, random_split(rng, 3), ParamGrid(), of_variant="median")


@pytest.mark.parametrize("seed", range(3))
def test_full_replication_matches_brute_force(seed):
    split = random_split(np.random.default_rng(100 + seed), 5)
    grid = ParamGrid()
    rhos = grid.values()
    rho_star = {
        regime: rhos[brute_force.argmin_index(
            [oracle_objective(regime, split, rho) for rho in rhos])]
        for regime in Regime
    }
    expected = {}
    for score in Score:
        q = KernelConformity(rho_star[score.regime])
        if score.value.startswith("PE-test"):
            expected[score] = brute_force.prediction_error(split.train, split.test, q)
        else:
            expected[score] = brute_force.observed_fuzziness(
                split.pre_train, split.pre_test, split.test, q)

    report = evaluate(train_all(split, grid), split)
    assert (report.rho_pe, report.rho_pre_pe, report.rho_of, report.rho_pre_of) == (
        rho_star[Regime.PE], rho_star[Regime.PRE_PE], rho_star[Regime.OF], rho_star[Regime.PRE_OF])
    for score in Score:
        assert report.score(score) == pytest.approx(expected[score], abs=1e-15)
