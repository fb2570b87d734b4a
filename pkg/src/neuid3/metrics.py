"""Classification metrics, aggregation and stratified cross-validation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .seeding import derive_seed


def _pair(preds, labels):
    p = np.asarray(preds, dtype=bool).reshape(-1)
    y = np.asarray(labels, dtype=bool).reshape(-1)
    if p.size == 0 or p.shape != y.shape:
        raise ValueError("predictions and labels must be nonempty and of equal length")
    return p, y


def accuracy(preds, labels) -> float:
    p, y = _pair(preds, labels)
    return float(np.mean(p == y))


def majority(labels) -> bool:
    """Most frequent label; ties go to positive."""
    y = np.asarray(labels, dtype=bool)
    if y.size == 0:
        raise ValueError("no labels")
    return bool(y.sum() * 2 >= y.size)


def default_accuracy(train_labels, test_labels) -> float:
    """Accuracy on the test labels of always predicting the training majority."""
    y = np.asarray(test_labels, dtype=bool)
    if y.size == 0:
        raise ValueError("no test labels")
    return float(np.mean(y == majority(train_labels)))


def _f1(tp, fp, fn) -> float:
    denom = 2 * tp + fp + fn
    return 0.0 if denom == 0 else 2.0 * tp / denom


def f1_per_class(preds, labels) -> tuple[float, float]:
    """``(F1 of pos, F1 of neg)``; a class with zero precision and recall scores 0."""
    p, y = _pair(preds, labels)
    tp = int(np.sum(p & y))
    tn = int(np.sum(~p & ~y))
    fp = int(np.sum(p & ~y))
    fn = int(np.sum(~p & y))
    return _f1(tp, fp, fn), _f1(tn, fn, fp)


def mean_std(values: Sequence[float]) -> tuple[float, float]:
    """Mean and sample standard deviation (0 for a single value)."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("no values")
    m = float(v.mean())
    if v.size == 1:
        return m, 0.0
    return m, float(math.sqrt(np.sum((v - m) ** 2) / (v.size - 1)))


METRICS = ("accuracy", "default_accuracy", "f1_pos", "f1_neg")


def score(preds, labels, train_labels) -> dict[str, float]:
    f1p, f1n = f1_per_class(preds, labels)
    return {
        "accuracy": accuracy(preds, labels),
        "default_accuracy": default_accuracy(train_labels, labels),
        "f1_pos": f1p,
        "f1_neg": f1n,
    }


@dataclass
class EvalReport:
    """Per-run metric dictionaries and their mean and standard deviation."""

    runs: list[dict] = field(default_factory=list)

    def add(self, metrics: dict, **tags) -> None:
        self.runs.append({**tags, **metrics})

    def aggregate(self) -> dict[str, tuple[float, float]]:
        if not self.runs:
            return {}
        return {m: mean_std([r[m] for r in self.runs]) for m in METRICS if m in self.runs[0]}

    def mean(self, metric: str) -> float:
        return self.aggregate()[metric][0]

    def to_dict(self) -> dict:
        return {
            "runs": self.runs,
            "summary": {m: {"mean": mu, "std": sd} for m, (mu, sd) in self.aggregate().items()},
        }


def stratified_folds(labels, k: int, seed: int = 0) -> list[np.ndarray]:
    """``k`` disjoint index arrays covering all rows with class ratios kept.

    Each class is shuffled and dealt round-robin, so every fold's count of a
    class is within one of the average.
    """
    y = np.asarray(labels, dtype=bool)
    if k < 2 or y.size < k:
        raise ValueError(f"need 2 <= k <= {y.size}, got k={k}")
    rng = np.random.default_rng(derive_seed(seed, "folds"))
    folds = [[] for _ in range(k)]
    start = 0
    for cls in (True, False):
        idx = rng.permutation(np.flatnonzero(y == cls))
        for j, i in enumerate(idx):
            folds[(start + j) % k].append(int(i))
        start = (start + len(idx)) % k
    return [np.array(sorted(f), dtype=int) for f in folds]


def kfold_cv(n_rows: int, labels, k: int, pipeline: Callable, seed: int = 0) -> EvalReport:
    """Run ``pipeline(train_idx, test_idx, fold)`` on each fold.

    The pipeline returns ``(test predictions, test labels, train labels)``.
    """
    if n_rows != len(labels):
        raise ValueError("row count and labels disagree")
    report = EvalReport()
    all_idx = np.arange(n_rows)
    for f, test_idx in enumerate(stratified_folds(labels, k, seed)):
        train_idx = np.setdiff1d(all_idx, test_idx)
        preds, y_test, y_train = pipeline(train_idx, test_idx, f)
        report.add(score(preds, y_test, y_train), fold=f)
    return report
