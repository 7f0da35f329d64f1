"""GIN-style graph classifier in plain numpy, with hand-written backprop.

Per layer: a_v = sum of neighbour states, h_v <- MLP((1 + eps) h_v + a_v).
A linear input projection lifts the 6 node features to ``hidden_width``;
the readout sums final node states per graph and maps them to 2 logits.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import sparse

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GinConfig:
    num_layers: int = 3
    mlp_hidden_layers: int = 2
    hidden_width: int = 64
    epsilon: float = 0.0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 50
    batch_size: int = 32  # 0 means full batch
    class_weight_mode: str = "inverse-frequency"
    seed: int = 0
    in_features: int = 6

    def __post_init__(self):
        if not 1 <= self.num_layers <= 8:
            raise ValueError("num_layers must lie in [1, 8]")
        if self.hidden_width < 1 or self.mlp_hidden_layers < 0 or self.in_features < 1:
            raise ValueError("widths must be positive")
        if self.class_weight_mode not in ("inverse-frequency", "none"):
            raise ValueError(f"unknown class_weight_mode {self.class_weight_mode!r}")


@dataclass
class Batch:
    """Disjoint union of graphs: stacked node features plus sparse operators."""

    x: np.ndarray
    adj: sparse.csr_matrix   # symmetric, no self loops
    pool: sparse.csr_matrix  # graphs x nodes, sums node states per graph

    @classmethod
    def from_graphs(cls, graphs) -> "Batch":
        xs = [np.asarray(g.x, dtype=float) for g in graphs]
        sizes = np.array([x.shape[0] for x in xs])
        offsets = np.r_[0, np.cumsum(sizes)[:-1]]
        edges = np.concatenate([np.asarray(g.edges, dtype=np.int64).reshape(-1, 2) + o
                                for g, o in zip(graphs, offsets)])
        total = int(sizes.sum())
        rows = np.r_[edges[:, 0], edges[:, 1]]
        cols = np.r_[edges[:, 1], edges[:, 0]]
        adj = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(total, total))
        owner = np.repeat(np.arange(len(xs)), sizes)
        pool = sparse.csr_matrix((np.ones(total), (owner, np.arange(total))), shape=(len(xs), total))
        return cls(np.vstack(xs), adj, pool)


def _glorot(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


@dataclass
class GinModel:
    config: GinConfig
    params: dict[str, np.ndarray]
    history: list[float] = field(default_factory=list)

    @classmethod
    def init(cls, cfg: GinConfig) -> "GinModel":
        rng = np.random.default_rng(cfg.seed)
        H = cfg.hidden_width
        p = {"proj.W": _glorot(rng, cfg.in_features, H), "proj.b": np.zeros(H)}
        for layer in range(cfg.num_layers):
            for k in range(cfg.mlp_hidden_layers + 1):
                p[f"gin{layer}.W{k}"] = _glorot(rng, H, H)
                p[f"gin{layer}.b{k}"] = np.zeros(H)
        p["out.W"] = _glorot(rng, H, 2)
        p["out.b"] = np.zeros(2)
        return cls(cfg, p)

    # -- forward / backward -------------------------------------------------

    def _forward(self, batch: Batch):
        cfg, p = self.config, self.params
        if batch.x.shape[1] != cfg.in_features:
            raise ValueError(f"expected {cfg.in_features} node features, got {batch.x.shape[1]}")
        h = batch.x @ p["proj.W"] + p["proj.b"]
        cache = []
        for layer in range(cfg.num_layers):
            z = (1.0 + cfg.epsilon) * h + batch.adj @ h
            acts = [z]
            u = z
            for k in range(cfg.mlp_hidden_layers + 1):
                u = u @ p[f"gin{layer}.W{k}"] + p[f"gin{layer}.b{k}"]
                if k < cfg.mlp_hidden_layers:
                    u = np.maximum(u, 0.0)
                acts.append(u)
            cache.append(acts)
            h = u
        g = batch.pool @ h
        logits = g @ p["out.W"] + p["out.b"]
        return logits, (h, g, cache)

    def logits(self, graphs) -> np.ndarray:
        return self._forward(Batch.from_graphs(graphs))[0]

    def _backward(self, batch: Batch, cache, dlogits) -> dict[str, np.ndarray]:
        cfg, p = self.config, self.params
        _, g, layers = cache
        grads = {"out.W": g.T @ dlogits, "out.b": dlogits.sum(0)}
        dh = batch.pool.T @ (dlogits @ p["out.W"].T)
        for layer in reversed(range(cfg.num_layers)):
            acts = layers[layer]
            du = dh
            for k in reversed(range(cfg.mlp_hidden_layers + 1)):
                if k < cfg.mlp_hidden_layers:
                    du = du * (acts[k + 1] > 0)
                grads[f"gin{layer}.W{k}"] = acts[k].T @ du
                grads[f"gin{layer}.b{k}"] = du.sum(0)
                du = du @ p[f"gin{layer}.W{k}"].T
            dh = (1.0 + cfg.epsilon) * du + batch.adj.T @ du
        grads["proj.W"] = batch.x.T @ dh
        grads["proj.b"] = dh.sum(0)
        return grads

    def loss_and_gradients(self, graphs, labels, class_weights=(1.0, 1.0), batch: Batch | None = None):
        """Mean weighted cross-entropy over the batch and its full gradient."""
        batch = batch or Batch.from_graphs(graphs)
        labels = np.asarray(labels, dtype=int)
        if not np.isin(labels, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        logits, cache = self._forward(batch)
        shifted = logits - logits.max(axis=1, keepdims=True)
        logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        w = np.asarray(class_weights, dtype=float)[labels]
        n = len(labels)
        loss = float(-(w * logp[np.arange(n), labels]).sum() / n)
        dlogits = np.exp(logp)
        dlogits[np.arange(n), labels] -= 1.0
        dlogits *= (w / n)[:, None]
        return loss, self._backward(batch, cache, dlogits)

    # -- persistence --------------------------------------------------------

    def to_json(self) -> str:
        doc = {
            "config": asdict(self.config),
            "params": {k: {"shape": list(v.shape), "data": v.ravel().tolist()} for k, v in self.params.items()},
            "history": self.history,
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "GinModel":
        doc = json.loads(text)
        cfg = GinConfig(**doc["config"])
        params = {k: np.asarray(v["data"], dtype=float).reshape(v["shape"]) for k, v in doc["params"].items()}
        ref = cls.init(cfg).params
        for k, v in ref.items():
            if k not in params or params[k].shape != v.shape:
                raise ValueError(f"parameter {k} missing or misshaped")
        return cls(cfg, params, list(doc.get("history", [])))


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=float)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def aggregate(graph, h) -> np.ndarray:
    """Neighbour sums over the undirected edge list of one graph."""
    h = np.asarray(h, dtype=float)
    if h.shape[0] != graph.num_nodes:
        raise ValueError("one state row per node expected")
    out = np.zeros_like(h)
    for a, b in graph.edges:
        out[a] += h[b]
        out[b] += h[a]
    return out


def combine(model: GinModel, layer: int, h, a) -> np.ndarray:
    """MLP_layer((1 + eps) h + a) with ReLU hidden activations."""
    cfg, p = model.config, model.params
    u = (1.0 + cfg.epsilon) * np.asarray(h, dtype=float) + np.asarray(a, dtype=float)
    for k in range(cfg.mlp_hidden_layers + 1):
        u = u @ p[f"gin{layer}.W{k}"] + p[f"gin{layer}.b{k}"]
        if k < cfg.mlp_hidden_layers:
            u = np.maximum(u, 0.0)
    return u


def forward(model: GinModel, graph):
    """(logits, class-1 probability) for one graph."""
    logits = model.logits([graph])[0]
    return logits, float(softmax(logits)[1])


def predict_proba(model: GinModel, graphs) -> np.ndarray:
    return softmax(model.logits(graphs))[:, 1]


def class_weights(labels, mode: str = "inverse-frequency") -> tuple[float, float]:
    labels = np.asarray(labels, dtype=int)
    if mode == "none":
        return 1.0, 1.0
    counts = np.bincount(labels, minlength=2).astype(float)
    return tuple(float(len(labels) / (2.0 * c)) for c in counts)


def train_detector(graphs, cfg: GinConfig = GinConfig()) -> GinModel:
    """Adam on the weighted cross-entropy; batch order is seeded per epoch."""
    labels = np.array([g.label for g in graphs], dtype=int)
    if len(np.unique(labels)) < 2:
        raise ValueError("detector training needs both classes")
    model = GinModel.init(cfg)
    weights = class_weights(labels, cfg.class_weight_mode)
    m = {k: np.zeros_like(v) for k, v in model.params.items()}
    v = {k: np.zeros_like(x) for k, x in model.params.items()}
    step = 0
    size = cfg.batch_size or len(graphs)
    full = Batch.from_graphs(graphs) if size >= len(graphs) else None
    for epoch in range(cfg.epochs):
        order = np.random.default_rng([cfg.seed, epoch]).permutation(len(graphs))
        total = 0.0
        for start in range(0, len(graphs), size):
            idx = np.sort(order[start:start + size]) if full is not None else order[start:start + size]
            batch = full if full is not None else Batch.from_graphs([graphs[i] for i in idx])
            loss, grads = model.loss_and_gradients(None, labels[idx], weights, batch=batch)
            total += loss * len(idx)
            step += 1
            for k, g in grads.items():
                m[k] = cfg.beta1 * m[k] + (1 - cfg.beta1) * g
                v[k] = cfg.beta2 * v[k] + (1 - cfg.beta2) * g * g
                mhat = m[k] / (1 - cfg.beta1 ** step)
                vhat = v[k] / (1 - cfg.beta2 ** step)
                model.params[k] -= cfg.learning_rate * mhat / (np.sqrt(vhat) + cfg.adam_eps)
        model.history.append(total / len(graphs))
        log.debug("epoch %d loss %.6f", epoch, model.history[-1])
    return model


def select_scatterer(p1) -> int:
    """Index with the top class-1 probability; ties go to the lowest index.

    Under a binary softmax p0 = 1 - p1, so this is also the minimum class-0
    probability and the all-class-0 fallback needs no separate branch.
    """
    p1 = np.asarray(p1, dtype=float)
    if p1.size == 0:
        raise ValueError("no scatterers to rank")
    return int(np.argmax(p1))


def rank_scatterers(model: GinModel, env=None, graphs=None) -> int:
    """Predicted maximum-power scatterer of one environment."""
    from .pess import graphs_for_environment

    if graphs is None:
        graphs = graphs_for_environment(env)
    return select_scatterer(predict_proba(model, graphs))
