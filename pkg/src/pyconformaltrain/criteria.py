"""
Criteria Module

Split-conformal p-values, the argmax point predictor and the two evaluation
criteria: observed fuzziness (OF, in the evaluation-set and the leave-one-out
form) and prediction error (PE).

Calibration scores are computed once per call and reused for every evaluation
point. Sums are exactly rounded (``math.fsum``), so every result is
bit-identical under any reordering of a dataset.
"""
import logging
import math
import threading
from dataclasses import dataclass
from enum import Enum
from typing import TypeAlias

import numpy as np

from pyconformaltrain.conformity import ConformityMeasure
from pyconformaltrain.core import LABELS, Dataset, Label, ObjectVector, Observation
from pyconformaltrain.exceptions import CalibrationTooSmall

logger = logging.getLogger(__name__)

PValue: TypeAlias = float


class Criterion(str, Enum):
    """Which criterion a score was produced by."""

    OF = "OF"
    PE = "PE"


@dataclass(frozen=True)
class CriterionScore:
    """A criterion value in [0, 1] tagged with its criterion."""

    value: float
    kind: Criterion

    def __float__(self):
        return self.value


class TieCounter:
    """Counts point predictions decided by the tie-break rule. Thread safe."""

    def __init__(self):
        self._count = 0
        self._lock = threading.Lock()

    @property
    def count(self) -> int:
        return self._count

    def increment(self):
        with self._lock:
            self._count += 1


def _as_observation(x: ObjectVector | Observation, y: Label) -> Observation:
    if isinstance(x, Observation):
        return x.with_label(y)
    return Observation(np.asarray(x, dtype=np.float64), Label(y))


def conformity_scores(q: ConformityMeasure, points: Dataset, reference: Dataset) -> np.ndarray:
    """Scores of every item of ``points`` (with its own label) against ``reference``."""
    return np.array([q.score(z, reference) for z in points], dtype=np.float64)


def _rank(score: float, calibration_scores: np.ndarray) -> int:
    """Number of calibration scores ``s`` with ``score - s >= 0``."""
    return int(np.count_nonzero(calibration_scores <= score))


def _mean(values: list[float]) -> float:
    # exactly rounded sum, so the mean does not depend on dataset order
    return math.fsum(values) / len(values)


def p_value(
    x: ObjectVector | Observation,
    y: Label,
    d_train: Dataset,
    d_cal: Dataset,
    q: ConformityMeasure,
) -> PValue:
    """
    Conformal p-value of label ``y`` for object ``x``.

    (1 + #{z in d_cal : Q((x, y), d_train) >= Q(z, d_train)}) / (1 + |d_cal|),
    counting multiplicity. Comparisons are exact, so ties count.

    Raises:
        EmptyDataset: If ``d_train`` or ``d_cal`` is empty.
    """
    d_train.require_nonempty("training dataset")
    d_cal.require_nonempty("calibration dataset")
    calibration_scores = conformity_scores(q, d_cal, d_train)
    test_score = q.score(_as_observation(x, y), d_train)
    return (1 + _rank(test_score, calibration_scores)) / (1 + d_cal.size())


def point_predict(
    x: ObjectVector | Observation,
    d: Dataset,
    q: ConformityMeasure,
    ties: TieCounter | None = None,
) -> Label:
    """
    The label with the largest conformity score.

    Exact ties go to ``Label.NEGATIVE`` and are counted on ``ties``.
    """
    d.require_nonempty("reference dataset")
    scores = [q.score(_as_observation(x, label), d) for label in LABELS]
    best = max(scores)
    winners = [label for label, score in zip(LABELS, scores) if score == best]
    if len(winners) > 1 and ties is not None:
        ties.increment()
    return winners[0]


def observed_fuzziness(
    d: Dataset, d_cal: Dataset, d_eval: Dataset, q: ConformityMeasure
) -> CriterionScore:
    """
    Mean over ``d_eval`` of the summed p-values of the false labels.

    Raises:
        EmptyDataset: If any dataset is empty.
    """
    d.require_nonempty("training dataset")
    d_cal.require_nonempty("calibration dataset")
    d_eval.require_nonempty("evaluation dataset")
    calibration_scores = conformity_scores(q, d_cal, d)
    denominator = 1 + d_cal.size()
    fuzziness = []
    for z in d_eval:
        total = 0.0
        for label in LABELS:
            if label != z.label:
                score = q.score(z.with_label(label), d)
                total += (1 + _rank(score, calibration_scores)) / denominator
        fuzziness.append(total)
    return CriterionScore(_mean(fuzziness), Criterion.OF)


def observed_fuzziness_loo(d: Dataset, d_cal: Dataset, q: ConformityMeasure) -> CriterionScore:
    """
    Leave-one-out observed fuzziness over the calibration set itself.

    Each calibration observation is ranked against ``d_cal`` with one copy of
    itself removed. The reference ``d`` is unchanged, so the cached calibration
    scores stay valid and only one comparison term drops out.

    Raises:
        EmptyDataset: If ``d`` is empty.
        CalibrationTooSmall: If ``d_cal`` has fewer than two items.
    """
    d.require_nonempty("training dataset")
    if d_cal.size() < 2:
        raise CalibrationTooSmall(
            f"leave-one-out calibration needs at least 2 items, got {d_cal.size()}"
        )
    calibration_scores = conformity_scores(q, d_cal, d)
    denominator = d_cal.size()
    fuzziness = []
    for position, z in enumerate(d_cal):
        own = calibration_scores[position]
        total = 0.0
        for label in LABELS:
            if label != z.label:
                score = q.score(z.with_label(label), d)
                count = _rank(score, calibration_scores) - int(own <= score)
                total += (1 + count) / denominator
        fuzziness.append(total)
    return CriterionScore(_mean(fuzziness), Criterion.OF)


def prediction_error(
    d: Dataset, d_eval: Dataset, q: ConformityMeasure, ties: TieCounter | None = None
) -> CriterionScore:
    """
    Fraction of ``d_eval`` misclassified by the point predictor fitted on ``d``.

    Raises:
        EmptyDataset: If either dataset is empty.
    """
    d.require_nonempty("reference dataset")
    d_eval.require_nonempty("evaluation dataset")
    errors = [float(point_predict(z, d, q, ties) != z.label) for z in d_eval]
    return CriterionScore(_mean(errors), Criterion.PE)
