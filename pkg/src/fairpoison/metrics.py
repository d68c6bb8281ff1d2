"""Utility and group-fairness metrics over hard predictions.

All gaps are computed from thresholded labels, not probabilities: the
demographic parity difference is the absolute gap in positive-prediction
rates between the two groups, and the equal opportunity difference is
the absolute gap in true-positive rates. Soft (probability-averaged)
variants exist for sensitivity analysis only and are never the default.

Undefined strata raise instead of returning 0; a silent zero would fake
fairness.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import Corpus
from .features import FeaturizerModel, transform_corpus, stack_features
from .models import LinearModel, predict_label_batch, predict_proba_batch

__all__ = [
    "PredictionTable",
    "GroupRates",
    "EvalReport",
    "CSV_COLUMNS",
    "demographic_parity_diff",
    "equal_opportunity_diff",
    "accuracy",
    "recall",
    "soft_demographic_parity_diff",
    "soft_equal_opportunity_diff",
    "build_prediction_table",
    "evaluate",
]

# Report CSV schema: run context first, then the metric quadruple.
CSV_COLUMNS = ("surrogate", "condition", "trigger", "p", "k", "seed", "acc", "recall", "dp_diff", "eo_diff")


@dataclass(frozen=True, eq=False)
class PredictionTable:
    """Aligned prediction rows: id, true label, predicted label, group."""

    ids: tuple[str, ...]
    y_true: np.ndarray
    y_pred: np.ndarray
    group: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.ids)
        if len(self.y_true) != n or len(self.y_pred) != n or len(self.group) != n:
            raise ValueError("prediction table columns have mismatched lengths")
        if len(set(self.ids)) != n:
            raise ValueError("prediction table ids must be unique")
        for name, col in (("y_true", self.y_true), ("y_pred", self.y_pred), ("group", self.group)):
            if n and not np.isin(col, (0, 1)).all():
                raise ValueError(f"{name} must contain only 0/1")

    def __len__(self) -> int:
        return len(self.ids)

    @classmethod
    def from_rows(cls, rows: Sequence[tuple[str, int, int, int]]) -> "PredictionTable":
        ids = tuple(r[0] for r in rows)
        cols = np.array([[r[1], r[2], r[3]] for r in rows], dtype=np.int64).reshape(len(rows), 3)
        return cls(ids=ids, y_true=cols[:, 0], y_pred=cols[:, 1], group=cols[:, 2])


@dataclass(frozen=True)
class GroupRates:
    positive_prediction_rate: float
    true_positive_rate: float
    support: int
    positive_support: int


@dataclass(frozen=True)
class EvalReport:
    """The reported metric quadruple plus the per-group rate table."""

    accuracy: float
    recall: float
    dp_diff: float
    eo_diff: float
    group_rates: dict[int, GroupRates]
    soft_dp_diff: float | None = None
    soft_eo_diff: float | None = None

    def to_dict(self) -> dict:
        out: dict = {
            "accuracy": self.accuracy,
            "recall": self.recall,
            "dp_diff": self.dp_diff,
            "eo_diff": self.eo_diff,
            "group_rates": {
                str(g): {
                    "positive_prediction_rate": r.positive_prediction_rate,
                    "true_positive_rate": r.true_positive_rate,
                    "support": r.support,
                    "positive_support": r.positive_support,
                }
                for g, r in sorted(self.group_rates.items())
            },
        }
        if self.soft_dp_diff is not None:
            out["soft_dp_diff"] = self.soft_dp_diff
        if self.soft_eo_diff is not None:
            out["soft_eo_diff"] = self.soft_eo_diff
        return out


def _require_both_groups(table: PredictionTable) -> tuple[np.ndarray, np.ndarray]:
    mask1 = table.group == 1
    mask0 = table.group == 0
    for g, mask in ((1, mask1), (0, mask0)):
        if not mask.any():
            raise ValueError(f"undefined: missing group {g}")
    return mask0, mask1


def demographic_parity_diff(table: PredictionTable) -> float:
    """|positive-prediction rate of group 1 - rate of group 0|."""
    mask0, mask1 = _require_both_groups(table)
    rate1 = float(np.mean(table.y_pred[mask1]))
    rate0 = float(np.mean(table.y_pred[mask0]))
    return abs(rate1 - rate0)


def equal_opportunity_diff(table: PredictionTable) -> float:
    """|true-positive rate of group 1 - rate of group 0|."""
    mask0, mask1 = _require_both_groups(table)
    rates = []
    for g, mask in ((0, mask0), (1, mask1)):
        pos = mask & (table.y_true == 1)
        if not pos.any():
            raise ValueError(f"undefined: no positives in group {g}")
        rates.append(float(np.mean(table.y_pred[pos])))
    return abs(rates[1] - rates[0])


def accuracy(table: PredictionTable) -> float:
    if len(table) == 0:
        raise ValueError("empty table")
    return float(np.mean(table.y_pred == table.y_true))


def recall(table: PredictionTable) -> float:
    """TP / (TP + FN), pooled over both groups."""
    if len(table) == 0:
        raise ValueError("empty table")
    pos = table.y_true == 1
    if not pos.any():
        raise ValueError("undefined: no positive examples")
    return float(np.mean(table.y_pred[pos]))


def soft_demographic_parity_diff(scores: np.ndarray, group: np.ndarray) -> float:
    """Probability-averaged DP gap; sensitivity analysis only."""
    scores = np.asarray(scores, dtype=np.float64)
    group = np.asarray(group)
    out = []
    for g in (0, 1):
        mask = group == g
        if not mask.any():
            raise ValueError(f"undefined: missing group {g}")
        out.append(float(np.mean(scores[mask])))
    return abs(out[1] - out[0])


def soft_equal_opportunity_diff(scores: np.ndarray, group: np.ndarray, y_true: np.ndarray) -> float:
    """Probability-averaged EO gap; sensitivity analysis only."""
    scores = np.asarray(scores, dtype=np.float64)
    group = np.asarray(group)
    y_true = np.asarray(y_true)
    out = []
    for g in (0, 1):
        mask = (group == g) & (y_true == 1)
        if not mask.any():
            raise ValueError(f"undefined: no positives in group {g}")
        out.append(float(np.mean(scores[mask])))
    return abs(out[1] - out[0])


def build_prediction_table(
    model: LinearModel,
    featurizer: FeaturizerModel,
    test: Corpus,
    threshold: float = 0.5,
) -> PredictionTable:
    X = stack_features(transform_corpus(featurizer, test))
    y_pred = predict_label_batch(model, X, threshold=threshold)
    return PredictionTable(
        ids=tuple(ex.id for ex in test),
        y_true=np.array([ex.label for ex in test], dtype=np.int64),
        y_pred=y_pred.astype(np.int64),
        group=np.array([ex.group for ex in test], dtype=np.int64),
    )


def _group_rates(table: PredictionTable) -> dict[int, GroupRates]:
    rates = {}
    for g in (0, 1):
        mask = table.group == g
        pos = mask & (table.y_true == 1)
        rates[g] = GroupRates(
            positive_prediction_rate=float(np.mean(table.y_pred[mask])),
            true_positive_rate=float(np.mean(table.y_pred[pos])),
            support=int(mask.sum()),
            positive_support=int(pos.sum()),
        )
    return rates


def evaluate(
    model: LinearModel,
    featurizer: FeaturizerModel,
    test: Corpus,
    threshold: float = 0.5,
    include_soft: bool = False,
) -> EvalReport:
    """Predict on the test corpus and fill the full report.

    Raises when a metric is undefined (a group missing from test, or a
    group without positives), naming the offending stratum.
    """
    if len(test) == 0:
        raise ValueError("empty table")
    table = build_prediction_table(model, featurizer, test, threshold=threshold)
    dp = demographic_parity_diff(table)
    eo = equal_opportunity_diff(table)
    soft_dp = soft_eo = None
    if include_soft:
        X = stack_features(transform_corpus(featurizer, test))
        scores = predict_proba_batch(model, X)
        soft_dp = soft_demographic_parity_diff(scores, table.group)
        soft_eo = soft_equal_opportunity_diff(scores, table.group, table.y_true)
    return EvalReport(
        accuracy=accuracy(table),
        recall=recall(table),
        dp_diff=dp,
        eo_diff=eo,
        group_rates=_group_rates(table),
        soft_dp_diff=soft_dp,
        soft_eo_diff=soft_eo,
    )
