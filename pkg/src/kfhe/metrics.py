"""Classification metrics and cross-dataset rank aggregation."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata


def confusion(truth, predicted, class_count: int) -> np.ndarray:
    """Counts with rows = true class and columns = predicted class."""
    truth = np.asarray(truth, dtype=np.int64)
    predicted = np.asarray(predicted, dtype=np.int64)
    if truth.shape != predicted.shape or truth.ndim != 1:
        raise ValueError("truth and predictions must be 1-D and equally long")
    for v in (truth, predicted):
        if v.size and (v.min() < 0 or v.max() >= class_count):
            raise ValueError(f"labels must lie in [0, {class_count})")
    cm = np.zeros((class_count, class_count), dtype=np.int64)
    np.add.at(cm, (truth, predicted), 1)
    return cm


def per_class_f1(cm) -> np.ndarray:
    cm = np.asarray(cm)
    tp = np.diag(cm).astype(np.float64)
    predicted = cm.sum(axis=0).astype(np.float64)
    actual = cm.sum(axis=1).astype(np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(predicted > 0, tp / predicted, 0.0)
        recall = np.where(actual > 0, tp / actual, 0.0)
        denom = precision + recall
        f1 = np.where(denom > 0, 2.0 * precision * recall / denom, 0.0)
    return f1


def macro_f1(cm) -> float:
    """Unweighted mean of per-class F1 over every declared class.

    A class whose precision or recall is undefined, or whose F1 would be 0/0,
    contributes 0, and absent classes still count in the denominator.
    """
    cm = np.asarray(cm)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1] or cm.shape[0] == 0:
        raise ValueError("confusion matrix must be square and non-empty")
    return float(per_class_f1(cm).sum() / cm.shape[0])


def misclassification_rate(truth, predicted) -> float:
    truth = np.asarray(truth)
    predicted = np.asarray(predicted)
    if truth.shape != predicted.shape:
        raise ValueError("truth and predictions differ in length")
    if truth.size == 0:
        return 0.0
    return float(np.count_nonzero(truth != predicted)) / truth.size


@dataclass(frozen=True)
class RankTable:
    datasets: tuple[str, ...]
    algorithms: tuple[str, ...]
    scores: np.ndarray  # datasets x algorithms
    ranks: np.ndarray

    @property
    def mean_ranks(self) -> dict[str, float]:
        return dict(zip(self.algorithms, self.ranks.mean(axis=0).tolist()))

    def write_csv(self, path) -> None:
        """Per-dataset ranks plus a closing ``average`` row."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["dataset", *self.algorithms])
            for name, row in zip(self.datasets, self.ranks):
                w.writerow([name, *(repr(float(v)) for v in row)])
            w.writerow(["average", *(repr(v) for v in self.mean_ranks.values())])


def average_ranks(scores, datasets=None, algorithms=None, higher_is_better: bool = True) -> RankTable:
    """Rank algorithms within each dataset (1 = best, ties share the average rank).

    ``scores`` is either a datasets x algorithms array or a mapping
    ``{dataset: {algorithm: score}}``.
    """
    if isinstance(scores, dict):
        datasets = tuple(datasets or scores)
        algorithms = tuple(algorithms or next(iter(scores.values())))
        try:
            table = np.array([[scores[d][a] for a in algorithms] for d in datasets], dtype=np.float64)
        except KeyError as exc:
            raise ValueError(f"missing score cell {exc}") from None
    else:
        table = np.asarray(scores, dtype=np.float64)
        if table.ndim != 2:
            raise ValueError("score table must be 2-D")
        datasets = tuple(datasets or (str(i) for i in range(table.shape[0])))
        algorithms = tuple(algorithms or (str(j) for j in range(table.shape[1])))
    if table.shape != (len(datasets), len(algorithms)) or table.size == 0:
        raise ValueError("score table shape does not match the labels")
    if np.isnan(table).any():
        raise ValueError("score table has missing cells")
    keyed = -table if higher_is_better else table
    ranks = np.vstack([rankdata(row, method="average") for row in keyed])
    return RankTable(datasets, algorithms, table, ranks)
