"""Threshold-sweep evaluation of probabilistic outage predictions.

A row predicts positive when its probability reaches the threshold.
Precision, recall, and F1 use the zero-denominator-means-zero convention
throughout, and the sweep reports the lowest threshold achieving the top
F1.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .preprocess import DiscreteDataset

log = logging.getLogger(__name__)

DEFAULT_GRID = tuple(i / 100 for i in range(101))


@dataclass
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int


@dataclass
class ThresholdMetrics:
    threshold: float
    tp: int
    fp: int
    tn: int
    fn: int
    precision: float
    recall: float
    f1: float


@dataclass
class EvalReport:
    rows: list[ThresholdMetrics]
    best_index: int

    @property
    def best(self) -> ThresholdMetrics:
        return self.rows[self.best_index]

    @property
    def thresholds(self) -> list[float]:
        return [r.threshold for r in self.rows]


def _check_inputs(probs: np.ndarray, labels: np.ndarray) -> None:
    if probs.shape != labels.shape or probs.ndim != 1:
        raise ValueError("probabilities and labels must be equal-length vectors")
    if probs.size == 0:
        raise ValueError("cannot evaluate an empty prediction set")
    if np.any(probs < 0) or np.any(probs > 1):
        raise ValueError("probabilities must lie in [0, 1]")
    if not np.all((labels == 0) | (labels == 1)):
        raise ValueError("labels must be 0 or 1")


def confusion_at(probs, labels, threshold: float) -> ConfusionCounts:
    """Counts at one decision threshold; predicted positive means prob >= threshold."""
    if not 0 <= threshold <= 1:
        raise ValueError("threshold must lie in [0, 1]")
    probs = np.asarray(probs, dtype=float)
    labels = np.asarray(labels)
    _check_inputs(probs, labels)
    pred = probs >= threshold
    actual = labels == 1
    tp = int(np.sum(pred & actual))
    fp = int(np.sum(pred & ~actual))
    fn = int(np.sum(~pred & actual))
    tn = int(np.sum(~pred & ~actual))
    return ConfusionCounts(tp, fp, tn, fn)


def prf1(counts: ConfusionCounts) -> tuple[float, float, float]:
    """Precision, recall, F1 with empty denominators scoring zero.

    F1 reduces algebraically to 2*tp / (2*tp + fp + fn), which one float
    division evaluates exactly as the correctly rounded rational value.
    """
    for name in ("tp", "fp", "tn", "fn"):
        if getattr(counts, name) < 0:
            raise ValueError("confusion counts must be nonnegative")
    tp, fp, fn = counts.tp, counts.fp, counts.fn
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * tp / (2 * tp + fp + fn) if tp else 0.0
    return precision, recall, f1


def sweep_best_f1(probs, labels, grid: Sequence[float] | None = None) -> EvalReport:
    """Evaluate every threshold on the grid and flag the best F1.

    The grid must be ascending and inside [0, 1]; the default steps by
    0.01 from 0 to 1. Ties on F1 resolve to the lower threshold.
    """
    thresholds = list(DEFAULT_GRID if grid is None else grid)
    if not thresholds:
        raise ValueError("threshold grid is empty")
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("threshold grid must be strictly ascending")
    if thresholds[0] < 0 or thresholds[-1] > 1:
        raise ValueError("threshold grid must lie within [0, 1]")
    probs = np.asarray(probs, dtype=float)
    labels = np.asarray(labels)
    _check_inputs(probs, labels)

    rows = []
    best_index = 0
    for k, t in enumerate(thresholds):
        counts = confusion_at(probs, labels, t)
        precision, recall, f1 = prf1(counts)
        rows.append(ThresholdMetrics(t, counts.tp, counts.fp, counts.tn,
                                     counts.fn, precision, recall, f1))
        if f1 > rows[best_index].f1:
            best_index = k
    return EvalReport(rows, best_index)


def split_validation(ds: DiscreteDataset, fraction: float = 0.05,
                     keep_all_positives: bool = True,
                     seed: int = 0) -> tuple[DiscreteDataset, DiscreteDataset]:
    """Carve a validation set of about ``fraction`` of the rows.

    With ``keep_all_positives`` every positive row goes to validation and
    uniformly sampled negatives top the set up to ceil(fraction * n); the
    validation set is never smaller than the positive count. Without it
    (or when there are no positives, which logs a warning) the split is a
    plain uniform sample. Row order is preserved on both sides.
    """
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie in (0, 1)")
    n = ds.n_rows
    if n < 2:
        raise ValueError("need at least two rows to split")
    rng = np.random.default_rng(seed)
    quota = math.ceil(fraction * n)

    pos = np.flatnonzero(ds.labels == 1)
    if keep_all_positives and pos.size == 0:
        log.warning("no positive rows; falling back to a plain uniform split")
        keep_all_positives = False

    if keep_all_positives:
        neg = np.flatnonzero(ds.labels == 0)
        extra = min(max(quota - pos.size, 0), neg.size)
        sampled = neg[np.sort(rng.choice(neg.size, size=extra, replace=False))]
        val_idx = np.sort(np.concatenate([pos, sampled]))
    else:
        val_idx = np.sort(rng.choice(n, size=min(quota, n), replace=False))

    mask = np.zeros(n, dtype=bool)
    mask[val_idx] = True
    train = replace(ds, rows=ds.rows[~mask], labels=ds.labels[~mask])
    val = replace(ds, rows=ds.rows[mask], labels=ds.labels[mask])
    return train, val


def write_report_csv(report: EvalReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "tp", "fp", "tn", "fn",
                         "precision", "recall", "f1"])
        for r in report.rows:
            writer.writerow([repr(float(r.threshold)), r.tp, r.fp, r.tn, r.fn,
                             repr(r.precision), repr(r.recall), repr(r.f1)])
