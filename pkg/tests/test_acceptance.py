"""Acceptance criteria 1-8. Each test records one PASS/FAIL line that the
terminal summary prints after the run."""
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from pesabp.environment import GenConfig, read_jsonl
from pesabp.evaluation import pair_auc, roc_and_auc
from pesabp.gnn import GinConfig, GinModel, forward, softmax
from pesabp.oracle import RadioConfig
from pesabp.pess import PendingGraph, evaluation_feature, pca_first_component, read_features_csv, \
    read_graphs_jsonl, star_edges
from pesabp.pipeline import run_all
from pesabp.svm import KERNELS, KernelSpec, kernel_eval, smo_train

from test_evaluation import random_score_set
from test_geometry import check_intersection_against_sampling, equal_angle_residual, random_bounces
from test_gnn import numeric_check
from test_pess import eig_oracle, random_global_matrices
from test_svm import blobs, kkt_ok

DESK_COUNT = 1750  # about 1200 train once n in {4, 8, 12} is held out
DESK_SEED = 2024
ARTIFACTS = ("envs.jsonl", "labeled.jsonl", "features.csv", "graphs.jsonl", "svm.json", "gin.json",
             "results/roc_quality.csv", "results/roc_detection.csv")


def desk_run(workdir, threads):
    t0 = time.perf_counter()
    summary = run_all(workdir, GenConfig(seed=DESK_SEED, count_target=DESK_COUNT), RadioConfig(),
                      KernelSpec("polynomial"), GinConfig(seed=DESK_SEED), threads=threads, timing_repeats=200)
    return summary, time.perf_counter() - t0


@pytest.fixture(scope="module")
def desk_a(tmp_path_factory):
    work = tmp_path_factory.mktemp("desk_a")
    return work, *desk_run(work, threads=4)


@pytest.fixture(scope="module")
def desk_b(tmp_path_factory):
    work = tmp_path_factory.mktemp("desk_b")
    return work, *desk_run(work, threads=1)


def test_c1_geometry(record_criterion):
    t0 = time.perf_counter()
    agree, decided = check_intersection_against_sampling(1000, samples=10_000)
    worst = max(equal_angle_residual(tx, rx, q, f.normal) for tx, rx, q, f in random_bounces(1000))
    elapsed = time.perf_counter() - t0
    ok = agree == decided and decided >= 900 and worst < 1e-9 and elapsed < 10
    record_criterion("1 geometry oracle", ok,
                     f"agree {agree}/{decided}, equal-angle residual {worst:.1e}, {elapsed:.1f} s")
    assert ok


def test_c2_pca(record_criterion):
    err = max(np.abs(pca_first_component(m) - eig_oracle(m)).max() for m in random_global_matrices(100, seed=7))
    ok = err <= 1e-8
    record_criterion("2 PCA vs eigendecomposition", ok, f"max abs err {err:.1e}")
    assert ok


def test_c3_svm(record_criterion):
    X, y = blobs()
    kkt = {k: kkt_ok(smo_train(X, y, spec=KernelSpec(k)), X, y)[0] for k in KERNELS}
    sep = smo_train([[-2], [-1], [1], [2]], [0, 0, 1, 1], spec=KernelSpec("linear"))
    xor_X = [[0, 0], [1, 1], [0, 1], [1, 0]]
    xor = smo_train(xor_X, [0, 0, 1, 1], C=10, spec=KernelSpec("rbf", sigma=0.5))
    sep_acc = np.mean(sep.predict([[-2], [-1], [1], [2]]) == [0, 0, 1, 1])
    xor_acc = np.mean(xor.predict(xor_X) == [0, 0, 1, 1])
    values = (kernel_eval(KernelSpec("linear"), (1, 2), (3, 4)), kernel_eval(KernelSpec("polynomial"), (1, 0), (1, 5)),
              kernel_eval(KernelSpec("rbf"), (2, 2), (2, 2)), kernel_eval(KernelSpec("sigmoid"), (10, 0), (10, 0)))
    ok = all(kkt.values()) and sep_acc == 1.0 and xor_acc == 1.0 and values == (11, 8, 1, 0)
    record_criterion("3 SVM KKT / separable / XOR / kernel values", ok,
                     f"kkt {kkt}, sep {sep_acc}, xor {xor_acc}, kernels {values}")
    assert ok


def test_c4_gnn(record_criterion):
    grad_err = max(numeric_check(GinConfig(num_layers=d, hidden_width=w, seed=10 * d + w), seed=d + w)
                   for d in (1, 3) for w in (8, 64))
    rng = np.random.default_rng(11)
    logits = rng.normal(scale=20, size=(2000, 2))
    probs = softmax(logits)
    norm_err = np.abs(probs.sum(axis=1) - 1).max()
    identity = bool(np.all((probs[:, 1] > probs[:, 0]) == (probs[:, 0] < 0.5)))
    model = GinModel.init(GinConfig(seed=12))
    perm_err = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 12))
        p = int(rng.integers(n))
        x = rng.uniform(size=(n + 2, 6))
        g = PendingGraph(0, p, x, star_edges(n, p), 0)
        order = rng.permutation(n + 2)
        inv = np.argsort(order)
        h = PendingGraph(0, int(inv[p + 2]) - 2, x[order], tuple((int(inv[a]), int(inv[b])) for a, b in g.edges), 0)
        perm_err = max(perm_err, abs(forward(model, g)[1] - forward(model, h)[1]))
    # argmax p1 over a scatterer set equals argmin p0
    sets = softmax(rng.normal(size=(500, 7, 2)))
    identity = identity and bool(np.all(sets[..., 1].argmax(1) == sets[..., 0].argmin(1)))
    ok = grad_err <= 1e-4 and norm_err <= 1e-12 and perm_err <= 1e-9 and identity
    record_criterion("4 GNN gradients / softmax / permutation / identity", ok,
                     f"grad rel err {grad_err:.1e}, norm err {norm_err:.1e}, perm err {perm_err:.1e}")
    assert ok


def test_c5_auc(record_criterion):
    rng = np.random.default_rng(13)
    err = max(abs(roc_and_auc(*s)[1] - pair_auc(*s)) for s in (random_score_set(rng) for _ in range(1000)))
    sep = roc_and_auc([0.9, 0.8, 0.3, 0.1], [1, 1, 0, 0])[1]
    flat = roc_and_auc([0.4] * 8, [0, 1] * 4)[1]
    ok = err <= 1e-12 and sep == 1.0 and flat == 0.5
    record_criterion("5 AUC trapezoid vs pair counting", ok, f"max err {err:.1e}, degenerate {sep} / {flat}")
    assert ok


@pytest.mark.slow
def test_c6_desk_scale(desk_a, record_criterion):
    work, s, elapsed = desk_a
    samples = read_jsonl(work / "labeled.jsonl")
    n_test = s["n_test"]
    q, d = s["quality"], s["detection"]
    margin = q["accuracy"] - q["majority_baseline"]
    t_q, t_d = s["timing_ms"]["quality"]["mean_ms"], s["timing_ms"]["detection"]["mean_ms"]
    checks = {
        "a": margin >= 0.10 and q["auc"] >= 0.75 and q["kernel"] == "polynomial",
        "b": d["detection_accuracy"] >= 3 * d["random_baseline"],
        "c": t_q <= 10 and t_d <= 5 and elapsed <= 1800,
    }
    ok = all(checks.values()) and all(lab.los_blocked for _, lab in samples)
    record_criterion(
        "6 desk-scale pipeline", ok,
        f"{len(samples) - n_test}/{n_test} envs; acc {q['accuracy']:.3f} vs majority {q['majority_baseline']:.3f}, "
        f"AUC {q['auc']:.3f}; detection {d['detection_accuracy']:.3f} vs random {d['random_baseline']:.3f}; "
        f"{t_q:.2f} / {t_d:.2f} ms; total {elapsed:.0f} s")
    assert ok, checks


@pytest.mark.slow
def test_c7_determinism(desk_a, desk_b, record_criterion):
    a, b = desk_a[0], desk_b[0]
    diff = [name for name in ARTIFACTS if (a / name).read_bytes() != (b / name).read_bytes()]
    sa = json.loads((a / "results/summary.json").read_text())
    sb = json.loads((b / "results/summary.json").read_text())
    # wall-clock timings are measurements, not outputs of the seed
    sa.pop("timing_ms"), sb.pop("timing_ms")
    if json.dumps(sa, sort_keys=True) != json.dumps(sb, sort_keys=True):
        diff.append("summary.json")
    ok = not diff
    record_criterion("7 determinism across runs", ok,
                     f"{len(ARTIFACTS) + 1} artifacts compared, threads 4 vs 1" + (f"; differ: {diff}" if diff else ""))
    assert ok


@pytest.mark.slow
def test_c8_structure(desk_a, record_criterion):
    work = desk_a[0]
    samples = read_jsonl(work / "labeled.jsonl")
    rows = read_features_csv(work / "features.csv")
    by_env = {}
    for g in read_graphs_jsonl(work / "graphs.jsonl"):
        by_env.setdefault(g.env_id, []).append(g)
    feat_ok = all(len(r[1]) == 7 for r in rows) and evaluation_feature(samples[0][0]).shape == (7,)
    graph_ok = pos_ok = True
    pathless = 0
    for env, lab in samples:
        graphs = by_env[env.id]
        graph_ok &= len(graphs) == env.n
        for g in graphs:
            graph_ok &= g.num_nodes == env.n + 2 and len(g.edges) == env.n + 1
            graph_ok &= all(g.pending_node in e for e in g.edges)
        # without any path there is no maximum-power scatterer; such samples are dropped downstream
        pathless += not lab.has_path
        pos_ok &= sum(g.label for g in graphs) == int(lab.has_path)
    ok = feat_ok and graph_ok and pos_ok
    record_criterion("8 feature and graph structure", ok,
                     f"{len(rows)} feature rows of length 7: {feat_ok}; star graphs: {graph_ok}; one positive: {pos_ok} "
                     f"({pathless} pathless with none)")
    assert ok
