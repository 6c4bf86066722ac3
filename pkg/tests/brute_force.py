"""
Literal implementations of the conformal criteria.

Every quantity is computed straight from its defining sum, one comparison at a time,
with no cached scores. Used as an oracle for the optimized code paths.
"""
import math

from pyconformaltrain.core import LABELS, leave_one_out


def theta(u):
    return 1 if u >= 0 else 0


def delta(y, y_prime):
    return 1 if y == y_prime else 0


def p_value(z, y, d, d_cal, q):
    test_score = q.score(z.with_label(y), d)
    hits = sum(theta(test_score - q.score(other, d)) for other in d_cal)
    return (1 + hits) / (1 + len(d_cal))


def observed_fuzziness(d, d_cal, d_eval, q):
    total = [
        sum((1 - delta(z.label, y)) * p_value(z, y, d, d_cal, q) for y in LABELS)
        for z in d_eval
    ]
    return math.fsum(total) / len(d_eval)


def observed_fuzziness_loo(d, d_cal, q):
    total = [
        sum((1 - delta(z.label, y)) * p_value(z, y, d, leave_one_out(d_cal, z), q)
            for y in LABELS)
        for z in d_cal
    ]
    return math.fsum(total) / len(d_cal)


def point_predict(z, d, q):
    scores = {y: q.score(z.with_label(y), d) for y in LABELS}
    return max(LABELS, key=lambda y: (scores[y], -int(y)))


def prediction_error(d, d_eval, q):
    errors = [1 - delta(z.label, point_predict(z, d, q)) for z in d_eval]
    return math.fsum(errors) / len(d_eval)


def argmin_index(values):
    best = 0
    for index, value in enumerate(values):
        if value < values[best]:
            best = index
    return best


def direct_kernel_score(rho, x, y, vectors, labels):
    """The kernel measure without any stabilization."""
    weights = [math.exp(-rho * float(((x - v) ** 2).sum())) for v in vectors]
    agreeing = sum(w for w, label in zip(weights, labels) if label == y)
    return agreeing / sum(weights)
