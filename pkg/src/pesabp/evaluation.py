"""Classification metrics, ROC/AUC, detection accuracy and a timing harness."""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from threadpoolctl import threadpool_limits


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class RocPoint:
    threshold: float
    fpr: float
    tpr: float


def confusion(labels, predictions) -> ConfusionCounts:
    y = np.asarray(labels, dtype=int)
    p = np.asarray(predictions, dtype=int)
    if y.shape != p.shape:
        raise ValueError(f"length mismatch: {y.shape} vs {p.shape}")
    return ConfusionCounts(tp=int(((y == 1) & (p == 1)).sum()), fp=int(((y == 0) & (p == 1)).sum()),
                           tn=int(((y == 0) & (p == 0)).sum()), fn=int(((y == 1) & (p == 0)).sum()))


def _ratio(num, den):
    return num / den if den > 0 else None


def metrics(c: ConfusionCounts) -> dict:
    """Accuracy, standard precision, recall and the TP/(TP+TN) variant.

    A value is None when its denominator is zero.
    """
    return {
        "accuracy": _ratio(c.tp + c.tn, c.total),
        "precision_std": _ratio(c.tp, c.tp + c.fp),
        "recall": _ratio(c.tp, c.tp + c.fn),
        "precision_paper": _ratio(c.tp, c.tp + c.tn),
    }


def roc_and_auc(scores, labels) -> tuple[list[RocPoint], float]:
    """ROC sweep over the distinct scores (descending) and trapezoid AUC.

    A sample is called positive when its score is >= the threshold; the
    +inf / -inf sentinels pin the curve to (0, 0) and (1, 1).
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=int)
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    n_pos, n_neg = int((y == 1).sum()), int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs both classes")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    tp = np.cumsum(y == 1)
    fp = np.cumsum(y == 0)
    last = np.r_[np.flatnonzero(np.diff(s) != 0), len(s) - 1]  # end of each tie block
    points = [RocPoint(math.inf, 0.0, 0.0)]
    points += [RocPoint(float(s[k]), fp[k] / n_neg, tp[k] / n_pos) for k in last]
    points.append(RocPoint(-math.inf, 1.0, 1.0))
    fpr = np.array([p.fpr for p in points])
    tpr = np.array([p.tpr for p in points])
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return points, auc


def pair_auc(scores, labels) -> float:
    """P(s+ > s-) + P(s+ = s-) / 2 by counting every positive/negative pair."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=int)
    pos, neg = s[y == 1], s[y == 0]
    diff = pos[:, None] - neg[None, :]
    return float(((diff > 0).sum() + 0.5 * (diff == 0).sum()) / diff.size)


def detection_accuracy(predicted, true) -> float:
    p, t = np.asarray(predicted), np.asarray(true)
    if p.shape != t.shape:
        raise ValueError("length mismatch")
    if p.size == 0:
        raise ValueError("no environments to score")
    return float(np.mean(p == t))


def time_inference(fn: Callable, samples: Sequence, repeats: int = 100, warmup: int = 10) -> dict:
    """Wall-clock milliseconds per call of ``fn(sample)``, cycling through samples."""
    if not samples:
        raise ValueError("timing needs at least one sample")
    times = []
    with threadpool_limits(limits=1):
        for k in range(warmup):
            fn(samples[k % len(samples)])
        for k in range(max(1, repeats)):
            t0 = time.perf_counter()
            fn(samples[k % len(samples)])
            times.append((time.perf_counter() - t0) * 1e3)
    return {"mean_ms": float(np.mean(times)), "p95_ms": float(np.percentile(times, 95)), "repeats": len(times)}


def write_roc_csv(path, points: Sequence[RocPoint]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["threshold", "fpr", "tpr"])
        for p in points:
            w.writerow([repr(p.threshold), repr(float(p.fpr)), repr(float(p.tpr))])


def read_roc_csv(path) -> list[RocPoint]:
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.DictReader(fh)
        return [RocPoint(float(row["threshold"]), float(row["fpr"]), float(row["tpr"])) for row in r]
