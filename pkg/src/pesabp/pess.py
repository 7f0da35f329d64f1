"""Semantic scene representations.

* the 1x7 evaluation feature: LOS blockage ratio + PCA-compressed global matrix
* the pending-scatterer star graph used for maximum-power scatterer detection

Node order everywhere is tx, rx, scatterer 0 .. scatterer n-1.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .environment import SchemaError
from .geometry import Segment, point_segment_distance

FEATURE_HEADER = ["id", "b_max", "g1", "g2", "g3", "g4", "g5", "g6", "quality"]
PCA_TOL = 1e-12
PCA_MAX_ITER = 10_000


@dataclass(frozen=True)
class BlockageFeature:
    per_scatterer: tuple[float, ...]
    max_value: float


def blockage_feature(env, reduce: str = "max") -> BlockageFeature:
    """b_i = distance(center_i, LOS segment) / w_i, reduced over scatterers.

    ``reduce="min"`` is an ablation switch; the default keeps the maximum.
    """
    if env.n == 0:
        raise ValueError("blockage feature needs at least one scatterer")
    los = Segment(env.tx, env.rx)
    b = tuple(point_segment_distance(box.center, los) / box.dims[1] for box in env.scatterers)
    if reduce == "max":
        return BlockageFeature(b, max(b))
    if reduce == "min":
        return BlockageFeature(b, min(b))
    raise ValueError(f"unknown reduction {reduce!r}")


def global_matrix(env) -> np.ndarray:
    """(n+2) x 6 matrix: tx and rx rows zero-padded, then center + dims per box."""
    m = np.zeros((env.n + 2, 6))
    m[0, :3] = env.tx
    m[1, :3] = env.rx
    for i, box in enumerate(env.scatterers):
        m[i + 2, :3] = box.center
        m[i + 2, 3:] = box.dims
    return m


def _leading_start(cov: np.ndarray) -> np.ndarray:
    """Start vector with a guaranteed component along the leading eigenvector.

    Repeated squaring of the (trace-normalised) covariance drives every
    column towards the dominant direction; the largest column is returned.
    """
    a = cov / np.trace(cov)
    for _ in range(6):
        a = a @ a
        a /= np.trace(a)
    col = a[:, int(np.argmax(np.linalg.norm(a, axis=0)))]
    return col / np.linalg.norm(col)


def pca_first_component(m: np.ndarray, tol: float = PCA_TOL, max_iter: int = PCA_MAX_ITER) -> np.ndarray:
    """sqrt(lambda_1) * u_1 of the population covariance of the rows of ``m``.

    Sign is fixed so the largest-magnitude entry of u_1 is positive (entries
    within a relative 1e-9 of the largest count as tied; the first wins). Returns
    zeros when the covariance vanishes.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] < 2:
        raise ValueError("pca needs a matrix with at least two rows")
    centered = m - m.mean(axis=0)
    cov = centered.T @ centered / m.shape[0]
    if np.trace(cov) <= PCA_TOL:
        return np.zeros(m.shape[1])
    v = _leading_start(cov)
    for _ in range(max_iter):
        w = cov @ v
        norm = np.linalg.norm(w)
        if norm <= PCA_TOL:
            return np.zeros(m.shape[1])
        w /= norm
        if w @ v < 0:
            w = -w
        done = np.linalg.norm(w - v) < tol
        v = w
        if done:
            break
    lam = float(v @ cov @ v)
    if lam <= PCA_TOL:
        return np.zeros(m.shape[1])
    mag = np.abs(v)
    lead = int(np.flatnonzero(mag >= mag.max() * (1 - 1e-9))[0])  # near-ties go to the lowest index
    if v[lead] < 0:
        v = -v
    return math.sqrt(lam) * v


def evaluation_feature(env, reduce: str = "max") -> np.ndarray:
    """The 7-vector [blockage | pca_first_component(global_matrix)]."""
    b = blockage_feature(env, reduce).max_value
    return np.concatenate([[b], pca_first_component(global_matrix(env))])


@dataclass(frozen=True)
class PendingGraph:
    env_id: int
    pending: int  # scatterer index; the node index is pending + 2
    x: np.ndarray
    edges: tuple[tuple[int, int], ...]
    label: int

    @property
    def num_nodes(self) -> int:
        return self.x.shape[0]

    @property
    def pending_node(self) -> int:
        return self.pending + 2


def node_features(env) -> np.ndarray:
    scale = np.array(list(env.room) * 2)
    return global_matrix(env) / scale


def star_edges(n: int, p: int) -> tuple[tuple[int, int], ...]:
    vp = p + 2
    return tuple((v, vp) for v in range(n + 2) if v != vp)


def build_pending_graph(env, p: int, label=None, x: np.ndarray | None = None) -> PendingGraph:
    """Star graph marking scatterer ``p``: every other node links to it."""
    if not 0 <= p < env.n:
        raise IndexError(f"pending index {p} out of range for {env.n} scatterers")
    if x is None:
        x = node_features(env)
    y = int(label is not None and label.max_power_scatterer == p)
    return PendingGraph(env.id, p, x, star_edges(env.n, p), y)


def graphs_for_environment(env, label=None) -> list[PendingGraph]:
    if env.n < 1:
        raise ValueError("environment has no scatterers")
    x = node_features(env)
    return [build_pending_graph(env, p, label, x) for p in range(env.n)]


# -- persistence ------------------------------------------------------------

def write_features_csv(path, rows) -> None:
    """``rows``: iterable of (env_id, 7-vector, quality 0/1 or None)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FEATURE_HEADER)
        for env_id, feat, quality in rows:
            w.writerow([env_id, *(repr(float(v)) for v in feat), "" if quality is None else int(quality)])


def read_features_csv(path):
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header != FEATURE_HEADER:
            raise SchemaError(f"{Path(path).name}: header must be {','.join(FEATURE_HEADER)}")
        for lineno, row in enumerate(r, 2):
            where = f"{Path(path).name}:{lineno}"
            if len(row) != len(FEATURE_HEADER):
                raise SchemaError(f"{where}: expected {len(FEATURE_HEADER)} columns")
            try:
                env_id = int(row[0])
                feat = np.array([float(v) for v in row[1:8]])
                quality = None if row[8] == "" else int(row[8])
            except ValueError as exc:
                raise SchemaError(f"{where}: {exc}") from exc
            if quality not in (None, 0, 1) or not np.all(np.isfinite(feat)):
                raise SchemaError(f"{where}: invalid feature row")
            out.append((env_id, feat, quality))
    return out


def graph_to_record(g: PendingGraph) -> dict:
    return {"env_id": g.env_id, "pending": g.pending, "x": g.x.tolist(),
            "edges": [list(e) for e in g.edges], "label": g.label}


def graph_from_record(rec: dict, where: str = "graph") -> PendingGraph:
    try:
        x = np.asarray(rec["x"], dtype=float)
        edges = tuple((int(a), int(b)) for a, b in rec["edges"])
        g = PendingGraph(int(rec["env_id"]), int(rec["pending"]), x, edges, int(rec["label"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{where}: malformed graph record: {exc}") from exc
    n = g.num_nodes - 2
    if x.ndim != 2 or x.shape[1] != 6 or n < 1:
        raise SchemaError(f"{where}: node features must be (n+2) x 6")
    if not 0 <= g.pending < n or g.label not in (0, 1):
        raise SchemaError(f"{where}: pending index or label out of range")
    if set(map(frozenset, edges)) != set(map(frozenset, star_edges(n, g.pending))):
        raise SchemaError(f"{where}: edges are not the star around the pending node")
    return g


def write_graphs_jsonl(path, graphs) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for g in graphs:
            fh.write(json.dumps(graph_to_record(g), separators=(",", ":")) + "\n")


def read_graphs_jsonl(path) -> list[PendingGraph]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                where = f"{Path(path).name}:{lineno}"
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise SchemaError(f"{where}: invalid JSON: {exc}") from exc
                out.append(graph_from_record(rec, where))
    return out
