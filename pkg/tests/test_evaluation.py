import math
import time

import numpy as np
import pytest

from pesabp.evaluation import (ConfusionCounts, confusion, detection_accuracy, metrics, pair_auc, read_roc_csv,
                               roc_and_auc, time_inference, write_roc_csv)


def test_confusion_examples():
    assert confusion([1, 1, 0, 0], [1, 1, 0, 0]) == ConfusionCounts(tp=2, fp=0, tn=2, fn=0)
    c = confusion([1, 0], [1, 1])
    assert (c.tp, c.fp) == (1, 1)
    rng = np.random.default_rng(0)
    assert confusion(rng.integers(0, 2, 37), rng.integers(0, 2, 37)).total == 37
    with pytest.raises(ValueError):
        confusion([1, 0], [1])


def test_metric_examples():
    m = metrics(ConfusionCounts(tp=45, fp=5, tn=45, fn=5))
    assert m["precision_std"] == pytest.approx(0.9) and m["accuracy"] == pytest.approx(0.9)
    assert metrics(ConfusionCounts(tp=0, fp=3, tn=1, fn=1))["precision_std"] == 0
    assert metrics(ConfusionCounts(tp=9, fp=0, tn=1, fn=0))["precision_paper"] == pytest.approx(0.9)
    assert metrics(ConfusionCounts(0, 0, 4, 0))["precision_std"] is None


def test_accuracy_consistency():
    rng = np.random.default_rng(1)
    for _ in range(50):
        y, p = rng.integers(0, 2, 20), rng.integers(0, 2, 20)
        c = confusion(y, p)
        assert metrics(c)["accuracy"] == (c.tp + c.tn) / 20 == np.mean(y == p)


def random_score_set(rng):
    n = int(rng.integers(2, 60))
    y = rng.integers(0, 2, n)
    y[:2] = (0, 1)
    # coarse grid forces plenty of ties
    s = rng.integers(0, int(rng.integers(2, 12)), n) / 7.0 if rng.random() < 0.5 else rng.normal(size=n)
    return s, y


def test_trapezoid_equals_pair_counting():
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(1000):
        s, y = random_score_set(rng)
        worst = max(worst, abs(roc_and_auc(s, y)[1] - pair_auc(s, y)))
    assert worst <= 1e-12


def test_roc_endpoints_and_monotone():
    rng = np.random.default_rng(3)
    for _ in range(100):
        pts, _ = roc_and_auc(*random_score_set(rng))
        assert (pts[0].fpr, pts[0].tpr) == (0.0, 0.0) and (pts[-1].fpr, pts[-1].tpr) == (1.0, 1.0)
        assert all(a.fpr <= b.fpr and a.tpr <= b.tpr and a.threshold > b.threshold for a, b in zip(pts, pts[1:]))


def test_auc_degenerate_and_worked_example():
    assert roc_and_auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])[1] == 1.0
    assert roc_and_auc([0.5] * 6, [1, 0, 1, 0, 0, 1])[1] == 0.5
    assert roc_and_auc([0.9, 0.8, 0.7, 0.6], [1, 0, 1, 0])[1] == pytest.approx(0.75, abs=1e-15)
    assert pair_auc([0.9, 0.8, 0.7, 0.6], [1, 0, 1, 0]) == 0.75
    with pytest.raises(ValueError):
        roc_and_auc([0.1, 0.2], [1, 1])


def test_roc_csv_round_trip(tmp_path):
    pts, _ = roc_and_auc([0.3, 0.1, 0.7, 0.7], [1, 0, 0, 1])
    write_roc_csv(tmp_path / "roc.csv", pts)
    assert read_roc_csv(tmp_path / "roc.csv") == pts
    assert (tmp_path / "roc.csv").read_text().splitlines()[0] == "threshold,fpr,tpr"


def test_detection_accuracy_examples():
    assert detection_accuracy([0, 1, 2], [0, 1, 2]) == 1.0
    assert detection_accuracy([0, 1, 2], [0, 1, 3]) == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        detection_accuracy([0], [0, 1])


def test_random_detection_baseline():
    rng = np.random.default_rng(4)
    n = rng.integers(3, 13, size=10_000)
    truth = (rng.random(n.size) * n).astype(int)
    guess = (rng.random(n.size) * n).astype(int)
    expected = np.mean([1 / k for k in range(3, 13)])
    assert detection_accuracy(guess, truth) == pytest.approx(expected, abs=0.02)


def test_timing_calibrated_stub():
    target = 0.004

    def stub(_):
        end = time.perf_counter() + target
        while time.perf_counter() < end:
            pass

    out = time_inference(stub, [None], repeats=30, warmup=2)
    assert out["mean_ms"] == pytest.approx(target * 1e3, rel=0.2)
    assert {"mean_ms", "p95_ms", "repeats"} <= set(out)


def test_timing_single_repeat():
    calls = []
    out = time_inference(calls.append, [1, 2], repeats=1, warmup=10)
    assert out["repeats"] == 1 and len(calls) == 11
    assert math.isfinite(out["mean_ms"]) and math.isfinite(out["p95_ms"])
    with pytest.raises(ValueError):
        time_inference(calls.append, [])
