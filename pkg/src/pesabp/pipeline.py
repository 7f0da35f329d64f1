"""File-to-file pipeline stages shared by the CLI and the acceptance suite."""
from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import evaluation as ev
from .environment import GenConfig, SchemaError, generate_dataset, read_jsonl, split_dataset, write_jsonl
from .gnn import GinConfig, GinModel, predict_proba, rank_scatterers, select_scatterer, train_detector
from .oracle import RadioConfig, apply_quality, label_environment, quality_threshold
from .pess import (PendingGraph, evaluation_feature, graphs_for_environment, read_features_csv,
                   read_graphs_jsonl, write_features_csv, write_graphs_jsonl)
from .svm import KernelSpec, SvmModel, smo_train

log = logging.getLogger(__name__)

TEST_COUNTS = (4, 8, 12)


def generate(cfg: GenConfig, radio: RadioConfig, out, threads: int = 1) -> int:
    samples = generate_dataset(cfg, radio, threads=threads)
    write_jsonl(out, samples)
    return len(samples)


def _usable(samples):
    """Drop pathless samples (no finite received power), logging how many."""
    kept = [s for s in samples if s[1] is not None and s[1].has_path]
    if len(kept) < len(samples):
        log.info("dropped %d samples without any propagation path", len(samples) - len(kept))
    return kept


def label(in_path, out, radio: RadioConfig | None = None, q: float = 0.6,
          test_counts=TEST_COUNTS) -> float:
    """(Re)label environments and set the quality class from the train split.

    With ``radio`` the oracle labels are recomputed; otherwise stored labels
    are kept. Returns the nearest-rank power threshold.
    """
    samples = read_jsonl(in_path)
    if radio is not None:
        samples = [(env, label_environment(env, radio)) for env, _ in samples]
    missing = [env.id for env, lab in samples if lab is None]
    if missing:
        raise SchemaError(f"environment {missing[0]} has no label; rerun with oracle relabeling")
    train, _ = split_dataset(samples, test_counts)
    train = _usable(train)
    threshold = quality_threshold([lab.total_power for _, lab in train], q)
    write_jsonl(out, [(env, apply_quality(lab, threshold)) for env, lab in samples])
    return threshold


def extract(in_path, features_out, graphs_out, reduce: str = "max") -> tuple[int, int]:
    samples = read_jsonl(in_path)
    rows, graphs = [], []
    for env, lab in samples:
        quality = None if lab is None or lab.qualified is None else int(lab.qualified)
        rows.append((env.id, evaluation_feature(env, reduce), quality))
        graphs.extend(graphs_for_environment(env, lab))
    write_features_csv(features_out, rows)
    write_graphs_jsonl(graphs_out, graphs)
    return len(rows), len(graphs)


def _split_ids(envs_path, test_counts):
    samples = _usable(read_jsonl(envs_path))
    train, test = split_dataset(samples, test_counts)
    return samples, {e.id for e, _ in train}, {e.id for e, _ in test}


def train_quality(features_path, envs_path, model_out, spec: KernelSpec = KernelSpec(), C: float = 1.0,
                  tol: float = 1e-3, max_passes: int = 20, test_counts=TEST_COUNTS) -> SvmModel:
    samples, train_ids, _ = _split_ids(envs_path, test_counts)
    rows = [r for r in read_features_csv(features_path) if r[0] in train_ids]
    if any(q is None for _, _, q in rows):
        raise SchemaError("training features lack quality classes; run `label` before `extract`")
    threshold = quality_threshold([lab.total_power for env, lab in samples if env.id in train_ids])
    X = np.array([f for _, f, _ in rows])
    y = np.array([q for _, _, q in rows])
    with threadpool_limits(limits=1):
        model = smo_train(X, y, C=C, spec=spec, tol=tol, max_passes=max_passes, threshold=threshold)
    Path(model_out).write_text(model.to_json())
    return model


def train_gin(graphs_path, envs_path, model_out, cfg: GinConfig = GinConfig(),
              test_counts=TEST_COUNTS) -> GinModel:
    _, train_ids, _ = _split_ids(envs_path, test_counts)
    graphs = [g for g in read_graphs_jsonl(graphs_path) if g.env_id in train_ids]
    with threadpool_limits(limits=1):
        model = train_detector(graphs, cfg)
    Path(model_out).write_text(model.to_json())
    return model


def evaluate(envs_path, features_path, graphs_path, svm_path, gin_path, out_dir,
             test_counts=TEST_COUNTS, timing_repeats: int = 100) -> dict:
    """Score both classifiers on the held-out split and write summary + ROC files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    samples, _, test_ids = _split_ids(envs_path, test_counts)
    test = [(env, lab) for env, lab in samples if env.id in test_ids]
    if not test:
        raise SchemaError("held-out split is empty")
    svm = SvmModel.from_json(Path(svm_path).read_text())
    gin = GinModel.from_json(Path(gin_path).read_text())

    rows = {r[0]: r for r in read_features_csv(features_path)}
    X = np.array([rows[env.id][1] for env, _ in test])
    yq = np.array([int(lab.qualified) for _, lab in test])
    with threadpool_limits(limits=1):
        scores = svm.decision_value(X)
    quality = _binary_block(yq, (scores >= 0).astype(int), scores, out_dir / "roc_quality.csv")
    quality["majority_baseline"] = float(max(yq.mean(), 1 - yq.mean()))
    quality["kernel"] = svm.kernel.kind

    by_env: dict[int, list[PendingGraph]] = {}
    for g in read_graphs_jsonl(graphs_path):
        if g.env_id in test_ids:
            by_env.setdefault(g.env_id, []).append(g)
    probs, glabels, predicted, truth = [], [], [], []
    with threadpool_limits(limits=1):
        for env, lab in test:
            graphs = sorted(by_env[env.id], key=lambda g: g.pending)
            p1 = predict_proba(gin, graphs)
            probs.extend(p1)
            glabels.extend(g.label for g in graphs)
            predicted.append(select_scatterer(p1))
            truth.append(lab.max_power_scatterer)
    probs = np.array(probs)
    detection = _binary_block(np.array(glabels), (probs >= 0.5).astype(int), probs,
                              out_dir / "roc_detection.csv")
    detection["detection_accuracy"] = ev.detection_accuracy(predicted, truth)
    detection["random_baseline"] = float(np.mean([1.0 / env.n for env, _ in test]))

    timing = None
    if timing_repeats > 0:
        envs = [env for env, _ in test]
        timing = {
            "quality": ev.time_inference(lambda e: svm.decision_value(evaluation_feature(e)), envs, timing_repeats),
            "detection": ev.time_inference(lambda e: rank_scatterers(gin, e), envs, timing_repeats),
        }
    summary = {
        "n_test": len(test),
        "quality": quality,
        "detection": detection,
        "precision_std": quality["precision_std"],
        "precision_paper": quality["precision_paper"],
        "accuracy": quality["accuracy"],
        "recall": quality["recall"],
        "auc": quality["auc"],
        "detection_accuracy": detection["detection_accuracy"],
        "timing_ms": timing,
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def _binary_block(labels, preds, scores, roc_path) -> dict:
    c = ev.confusion(labels, preds)
    out = ev.metrics(c)
    out.update(tp=c.tp, fp=c.fp, tn=c.tn, fn=c.fn)
    points, auc = ev.roc_and_auc(scores, labels)
    ev.write_roc_csv(roc_path, points)
    out["auc"] = auc
    return out


def run_all(workdir, gen: GenConfig, radio: RadioConfig = RadioConfig(), spec: KernelSpec = KernelSpec(),
            gin_cfg: GinConfig = GinConfig(), threads: int = 1, timing_repeats: int = 100,
            test_counts=TEST_COUNTS, C: float = 1.0) -> dict:
    """generate -> label -> extract -> train both models -> evaluate."""
    w = Path(workdir)
    w.mkdir(parents=True, exist_ok=True)
    generate(gen, radio, w / "envs.jsonl", threads)
    label(w / "envs.jsonl", w / "labeled.jsonl", test_counts=test_counts)
    extract(w / "labeled.jsonl", w / "features.csv", w / "graphs.jsonl")
    train_quality(w / "features.csv", w / "labeled.jsonl", w / "svm.json", spec, C=C, test_counts=test_counts)
    train_gin(w / "graphs.jsonl", w / "labeled.jsonl", w / "gin.json", gin_cfg, test_counts)
    return evaluate(w / "labeled.jsonl", w / "features.csv", w / "graphs.jsonl", w / "svm.json",
                    w / "gin.json", w / "results", test_counts, timing_repeats)
