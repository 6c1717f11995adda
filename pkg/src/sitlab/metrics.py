"""Accuracy summaries: anytime area under the curve, per-task average and last."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import EmptyCurve, EmptyInput, InvalidCurve


def a_auc(curve: Sequence[tuple[float, float]]) -> float:
    """Normalized area under an accuracy curve sampled every ``dn`` samples.

    ``curve`` holds ``(samples_seen, accuracy)`` points at ``dn, 2dn, ..., k dn``.
    The Riemann sum ``sum_i f(i dn) dn`` is divided by the covered span ``k dn``
    so the result is on the accuracy scale (a flat curve at c gives c).
    """
    if len(curve) == 0:
        raise EmptyCurve("no curve points")
    xs = np.array([p[0] for p in curve], dtype=np.float64)
    ys = np.array([p[1] for p in curve], dtype=np.float64)
    dn = xs[0]
    if not dn > 0 or not np.array_equal(xs, dn * np.arange(1, len(xs) + 1)):
        raise InvalidCurve("curve points must sit at dn, 2dn, ..., k dn")
    # sum(y_i dn) / (k dn) is the mean of the samples; shifting by the first
    # point keeps a flat curve exact instead of accumulating rounding
    y0 = ys[0]
    return float(y0 + math.fsum(ys - y0) / len(ys))


def a_avg(task_accuracies: Sequence[float]) -> float:
    if len(task_accuracies) == 0:
        raise EmptyInput("no task accuracies")
    return float(np.mean(np.asarray(task_accuracies, dtype=np.float64)))


def a_last(task_accuracies: Sequence[float]) -> float:
    if len(task_accuracies) == 0:
        raise EmptyInput("no task accuracies")
    return float(task_accuracies[-1])


def new_class_bias(confusion: np.ndarray, class_ids: Sequence[int], home_task: dict[int, int],
                   final_task: int) -> float:
    """Share of earlier-task test samples predicted as a final-task class.

    Rows/columns of ``confusion`` follow ``class_ids``. "Earlier" and "final"
    refer to each class's home task.
    """
    ids = [int(c) for c in class_ids]
    old = [i for i, c in enumerate(ids) if home_task[c] < final_task]
    new = [i for i, c in enumerate(ids) if home_task[c] == final_task]
    total = confusion[old].sum()
    if total == 0:
        return 0.0
    return float(confusion[np.ix_(old, new)].sum() / total)
