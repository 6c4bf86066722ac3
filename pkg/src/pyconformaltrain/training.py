"""
Training Module

Grid search over the kernel parameter rho for the four training regimes, and
the four test scores of a trained set of models.

Classes:
    ParamGrid: Log-spaced grid of rho values.
    Regime: The four training objectives.
    Score: The four test scores, each fed by exactly one regime.
    TrainedModel: Argmin of a regime's objective and the full objective curve.
    ScoreReport: The four test scores of one split.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Literal, Mapping

import numpy as np

from pyconformaltrain.conformity import KernelConformity
from pyconformaltrain.core import Dataset, SplitQuadruple
from pyconformaltrain.criteria import (
    Criterion,
    TieCounter,
    observed_fuzziness,
    observed_fuzziness_loo,
    prediction_error,
)
from pyconformaltrain.exceptions import InvalidGrid

logger = logging.getLogger(__name__)

OfVariant = Literal["loo", "plain"]
OF_VARIANTS: tuple[str, ...] = ("loo", "plain")


@dataclass(frozen=True)
class ParamGrid:
    """
    rho_r = exp(min_exp + (max_exp - min_exp) * r / points), r = 0 .. points - 1.

    The largest grid exponent is therefore below ``max_exp``.
    """

    min_exp: float = -5.0
    max_exp: float = 10.0
    points: int = 10

    def __post_init__(self):
        if not (math.isfinite(self.min_exp) and math.isfinite(self.max_exp)):
            raise InvalidGrid("grid bounds must be finite")
        if self.min_exp >= self.max_exp:
            raise InvalidGrid(f"min_exp {self.min_exp} must be below max_exp {self.max_exp}")
        if int(self.points) != self.points or self.points < 1:
            raise InvalidGrid(f"points must be a positive integer, got {self.points!r}")

    def values(self) -> tuple[float, ...]:
        return grid_values(self)


def grid_values(g: ParamGrid) -> tuple[float, ...]:
    """The grid's rho values in increasing order."""
    steps = np.arange(g.points, dtype=np.float64)
    exponents = g.min_exp + (g.max_exp - g.min_exp) * steps / g.points
    return tuple(float(v) for v in np.exp(exponents))


class Regime(str, Enum):
    """A training objective: criterion plus the datasets it is measured on."""

    PE = "PE"
    PRE_PE = "pre-PE"
    OF = "OF"
    PRE_OF = "pre-OF"

    @property
    def criterion(self) -> Criterion:
        return Criterion.PE if self in (Regime.PE, Regime.PRE_PE) else Criterion.OF

    def datasets(self, split: SplitQuadruple) -> tuple[Dataset, Dataset]:
        """(reference, validation) datasets of the objective."""
        if self in (Regime.PRE_PE, Regime.PRE_OF):
            return split.pre_pre_train, split.pre_pre_test
        return split.pre_train, split.pre_test


class Score(str, Enum):
    """A test score, named test-criterion/training-criterion."""

    PE_TEST_PE_TRAIN = "PE-test/PE-train"
    PE_TEST_OF_TRAIN = "PE-test/OF-train"
    OF_TEST_PE_TRAIN = "OF-test/PE-train"
    OF_TEST_OF_TRAIN = "OF-test/OF-train"

    @property
    def regime(self) -> Regime:
        """The regime whose model this score tests; OF tests use the pre-models."""
        return {
            Score.PE_TEST_PE_TRAIN: Regime.PE,
            Score.PE_TEST_OF_TRAIN: Regime.OF,
            Score.OF_TEST_PE_TRAIN: Regime.PRE_PE,
            Score.OF_TEST_OF_TRAIN: Regime.PRE_OF,
        }[self]

    @property
    def criterion(self) -> Criterion:
        return Criterion.PE if self.value.startswith("PE-test") else Criterion.OF

    @property
    def column(self) -> str:
        """snake_case column name, e.g. ``pe_test_of_train``."""
        return self.value.lower().replace("-", "_").replace("/", "_")

    @classmethod
    def for_regime(cls, regime: Regime) -> "Score":
        return next(score for score in cls if score.regime is regime)


@dataclass(frozen=True)
class TrainedModel:
    """
    Result of a grid search.

    Attributes:
        regime (Regime): The objective that was minimized.
        rho_star (float): Smallest grid value attaining the minimum.
        objective_curve (tuple[tuple[float, float], ...]): (rho, objective) at
            every grid point, in grid order.
        ties (int): Point predictions decided by the tie-break rule during the
            search (PE regimes only).
    """

    regime: Regime
    rho_star: float
    objective_curve: tuple[tuple[float, float], ...]
    ties: int = 0

    @property
    def measure(self) -> KernelConformity:
        return KernelConformity(self.rho_star)

    @property
    def objective_min(self) -> float:
        return min(value for _, value in self.objective_curve)


@dataclass(frozen=True)
class ScoreReport:
    """The four test scores of one split and the rho values behind them."""

    pe_test_pe_train: float
    pe_test_of_train: float
    of_test_pe_train: float
    of_test_of_train: float
    rho_pe: float
    rho_pre_pe: float
    rho_of: float
    rho_pre_of: float
    ties: int = 0

    def score(self, score: Score) -> float:
        return getattr(self, score.column)


def objective(
    regime: Regime,
    split: SplitQuadruple,
    rho: float,
    of_variant: OfVariant = "loo",
    ties: TieCounter | None = None,
) -> float:
    """
    A regime's training objective at one rho.

    OF regimes use the leave-one-out OF by default; ``of_variant="plain"``
    evaluates the calibration set against itself instead.
    """
    reference, validation = regime.datasets(split)
    measure = KernelConformity(rho)
    if regime.criterion is Criterion.PE:
        return prediction_error(reference, validation, measure, ties).value
    if of_variant == "plain":
        return observed_fuzziness(reference, validation, validation, measure).value
    return observed_fuzziness_loo(reference, validation, measure).value


def train(
    regime: Regime,
    split: SplitQuadruple,
    g: ParamGrid,
    of_variant: OfVariant = "loo",
) -> TrainedModel:
    """
    Evaluate ``regime``'s objective on every grid point and keep the argmin.

    Ties in the minimum go to the smallest rho.
    """
    if of_variant not in OF_VARIANTS:
        raise ValueError(f"unknown OF variant {of_variant!r}")
    ties = TieCounter()
    curve = tuple((rho, objective(regime, split, rho, of_variant, ties)) for rho in g.values())
    best_rho, best_value = curve[0]
    for rho, value in curve[1:]:
        if value < best_value:
            best_rho, best_value = rho, value
    logger.debug("regime %s: rho* = %g, objective %g", regime.value, best_rho, best_value)
    return TrainedModel(regime, best_rho, curve, ties.count)


def score_at(
    score: Score, split: SplitQuadruple, rho: float, ties: TieCounter | None = None
) -> float:
    """
    A test score evaluated at an arbitrary rho.

    PE testing fits the measure on the whole training set; OF testing keeps the
    pre-training/pre-test split and scores the test set.
    """
    measure = KernelConformity(rho)
    if score.criterion is Criterion.PE:
        return prediction_error(split.train, split.test, measure, ties).value
    return observed_fuzziness(split.pre_train, split.pre_test, split.test, measure).value


def score_curve(
    regime: Regime, split: SplitQuadruple, g: ParamGrid
) -> tuple[tuple[float, float], ...]:
    """The test score fed by ``regime``, evaluated at every grid point."""
    score = Score.for_regime(regime)
    return tuple((rho, score_at(score, split, rho)) for rho in g.values())


def evaluate(models: Mapping[Regime, TrainedModel], split: SplitQuadruple) -> ScoreReport:
    """
    Compute the four test scores of a set of trained models.

    Args:
        models: One trained model per regime, all trained on ``split``.
        split: The split the models were trained on.
    """
    missing = [regime.value for regime in Regime if regime not in models]
    if missing:
        raise ValueError(f"missing trained models for {', '.join(missing)}")
    ties = TieCounter()
    values = {
        score.column: score_at(score, split, models[score.regime].rho_star, ties)
        for score in Score
    }
    training_ties = sum(models[regime].ties for regime in Regime)
    return ScoreReport(
        **values,
        rho_pe=models[Regime.PE].rho_star,
        rho_pre_pe=models[Regime.PRE_PE].rho_star,
        rho_of=models[Regime.OF].rho_star,
        rho_pre_of=models[Regime.PRE_OF].rho_star,
        ties=training_ties + ties.count,
    )
