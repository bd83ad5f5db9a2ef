from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from ..corpus.types import MetricName
from ..runs import RunResult


class MetricError(ValueError):
    pass


class Direction(str, enum.Enum):
    LOWER_BETTER = "lower_better"
    HIGHER_BETTER = "higher_better"


def direction_of(name: Union[MetricName, str]) -> Direction:
    return Direction.LOWER_BETTER if MetricName(name).lower_is_better else Direction.HIGHER_BETTER


@dataclass(frozen=True)
class MetricValue:
    name: MetricName
    value: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "name", MetricName(self.name))
        if self.name is MetricName.MAE:
            if self.value < 0:
                raise MetricError(f"MAE must be non-negative, got {self.value}")
        elif not 0.0 <= self.value <= 100.0:
            raise MetricError(f"{self.name.value} must lie in [0, 100], got {self.value}")

    @property
    def direction(self) -> Direction:
        return direction_of(self.name)

    def better_than(self, other: "MetricValue") -> bool:
        if self.direction is Direction.LOWER_BETTER:
            return self.value < other.value
        return self.value > other.value


def _arrays(predictions: Sequence, golds: Sequence) -> tuple[np.ndarray, np.ndarray]:
    if len(predictions) != len(golds):
        raise MetricError(f"{len(predictions)} predictions for {len(golds)} gold labels")
    if len(golds) == 0:
        raise MetricError("cannot score an empty prediction set")
    return np.asarray(predictions), np.asarray(golds)


def f1_score(predictions: Sequence[int], golds: Sequence[int], average: str = "macro") -> float:
    """F1 in percent over the classes present in ``golds``.

    ``macro`` averages per-class F1 unweighted, ``weighted`` by gold support,
    ``micro`` pools counts over those classes.
    """
    p, g = _arrays(predictions, golds)
    classes = np.unique(g)
    tp = np.array([np.sum((p == c) & (g == c)) for c in classes], dtype=float)
    fp = np.array([np.sum((p == c) & (g != c)) for c in classes], dtype=float)
    fn = np.array([np.sum((p != c) & (g == c)) for c in classes], dtype=float)
    if average == "micro":
        denom = 2 * tp.sum() + fp.sum() + fn.sum()
        return 100.0 * (2 * tp.sum() / denom if denom else 0.0)
    denom = 2 * tp + fp + fn
    per_class = np.divide(2 * tp, denom, out=np.zeros_like(tp), where=denom > 0)
    if average == "macro":
        return 100.0 * float(per_class.mean())
    if average == "weighted":
        support = tp + fn
        return 100.0 * float((per_class * support).sum() / support.sum())
    raise MetricError(f"unknown F1 average {average!r}")


def compute_metric(
    kind: Union[MetricName, str], predictions: Sequence, golds: Sequence, *, f1_average: str = "macro"
) -> MetricValue:
    kind = MetricName(kind)
    if kind is MetricName.MAE:
        p, g = _arrays(predictions, golds)
        return MetricValue(kind, float(np.mean(np.abs(p.astype(float) - g.astype(float)))))
    if kind is MetricName.ACCURACY:
        p, g = _arrays(predictions, golds)
        return MetricValue(kind, 100.0 * float(np.mean(p == g)))
    return MetricValue(kind, f1_score(predictions, golds, f1_average))


def aggregate_runs(results: Iterable[RunResult]) -> MetricValue:
    """Arithmetic mean over seeds or folds of one (corpus, mode, engine) group."""
    results = list(results)
    if not results:
        raise MetricError("no runs to aggregate")
    keys = {(r.corpus, r.mode, r.engine, r.metric_name) for r in results}
    if len(keys) != 1:
        raise MetricError(f"heterogeneous run group: {sorted(keys)}")
    values = sorted(r.metric_value for r in results)  # order-independent summation
    return MetricValue(results[0].metric_name, float(np.mean(values)))
