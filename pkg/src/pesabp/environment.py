"""Random indoor scenes, dataset splitting and JSONL persistence."""
from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .geometry import AxisBox

log = logging.getLogger(__name__)

ROOM = (15.0, 10.0, 3.0)
TX_ANCHOR = (0.5, 0.5, 2.5)
RX_ANCHOR = (14.5, 9.5, 1.5)
MAX_PLACEMENT_ATTEMPTS = 1000


class PlacementError(RuntimeError):
    """A scatterer could not be placed within the attempt budget."""


class SchemaError(ValueError):
    """A persisted record violates the environment schema."""


@dataclass(frozen=True)
class Environment:
    id: int
    tx: tuple[float, float, float]
    rx: tuple[float, float, float]
    scatterers: tuple[AxisBox, ...]
    room: tuple[float, float, float] = ROOM

    @property
    def n(self) -> int:
        return len(self.scatterers)

    def validate(self, min_gap: float = 0.0) -> None:
        room = np.asarray(self.room)
        if np.array_equal(self.tx, self.rx):
            raise SchemaError(f"env {self.id}: tx == rx")
        for k, box in enumerate(self.scatterers):
            if np.any(box.lo < -1e-9) or np.any(box.hi > room + 1e-9):
                raise SchemaError(f"env {self.id}: scatterer {k} leaves the room")
        for i in range(self.n):
            for j in range(i + 1, self.n):
                if boxes_too_close(self.scatterers[i], self.scatterers[j], min_gap):
                    raise SchemaError(f"env {self.id}: scatterers {i} and {j} overlap")


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    count_target: int = 100
    scatterer_count_range: tuple[int, int] = (3, 12)
    dim_ranges: tuple[tuple[float, float], ...] = ((0.3, 2.0), (0.3, 2.0), (0.3, 2.0))
    min_gap: float = 0.05
    nlos_only: bool = True
    on_floor: bool = True
    room: tuple[float, float, float] = ROOM
    tx: tuple[float, float, float] = TX_ANCHOR
    rx: tuple[float, float, float] = RX_ANCHOR

    def __post_init__(self):
        lo, hi = self.scatterer_count_range
        if not 1 <= lo <= hi:
            raise ValueError(f"bad scatterer_count_range {self.scatterer_count_range}")
        if len(self.dim_ranges) != 3:
            raise ValueError("dim_ranges needs (l, w, h) ranges")
        for (a, b), side in zip(self.dim_ranges, self.room):
            if not 0 < a <= b or b > side:
                raise ValueError(f"bad dim range {(a, b)}")
        if self.min_gap < 0 or self.count_target < 0:
            raise ValueError("min_gap and count_target must be non-negative")


def boxes_too_close(a: AxisBox, b: AxisBox, gap: float) -> bool:
    """True when the boxes overlap or are closer than ``gap`` on every axis."""
    return bool(np.all(a.lo < b.hi + gap) and np.all(b.lo < a.hi + gap))


def substream(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), int(index)]))


def generate_environment(rng: np.random.Generator, cfg: GenConfig, env_id: int = 0) -> Environment:
    """Draw one scene: scatterer count, then boxes by rejection sampling."""
    lo_n, hi_n = cfg.scatterer_count_range
    n = int(rng.integers(lo_n, hi_n + 1))
    room = np.asarray(cfg.room)
    tx, rx = np.asarray(cfg.tx, float), np.asarray(cfg.rx, float)
    boxes: list[AxisBox] = []
    for k in range(n):
        for _ in range(MAX_PLACEMENT_ATTEMPTS):
            dims = np.array([rng.uniform(a, b) for a, b in cfg.dim_ranges])
            center = rng.uniform(dims / 2, room - dims / 2)
            if cfg.on_floor:
                center[2] = dims[2] / 2
            box = AxisBox(tuple(center.tolist()), tuple(dims.tolist()))
            # antennas stay outside every box, with the same clearance as box pairs
            if box.contains(tx, cfg.min_gap) or box.contains(rx, cfg.min_gap):
                continue
            if any(boxes_too_close(box, other, cfg.min_gap) for other in boxes):
                continue
            boxes.append(box)
            break
        else:
            raise PlacementError(f"scatterer {k} of {n} not placed after {MAX_PLACEMENT_ATTEMPTS} attempts")
    return Environment(id=env_id, tx=tuple(cfg.tx), rx=tuple(cfg.rx),
                       scatterers=tuple(boxes), room=tuple(cfg.room))


def _candidate(args):
    cfg, radio, index = args
    from .oracle import label_environment, los_blocked

    try:
        env = generate_environment(substream(cfg.seed, index), cfg)
    except PlacementError:
        return None
    if cfg.nlos_only and not los_blocked(env):
        return env, None
    return env, label_environment(env, radio)


def generate_dataset(cfg: GenConfig, radio=None, threads: int = 1, chunk: int = 256):
    """Generate ``cfg.count_target`` labeled environments.

    Candidate ``k`` is drawn from the substream ``(seed, k)``; candidates
    are kept in index order, so the result does not depend on ``threads``.
    """
    from .oracle import RadioConfig

    radio = radio or RadioConfig()
    out = []
    start = 0
    failures = 0
    pool = ProcessPoolExecutor(threads) if threads > 1 else None
    try:
        while len(out) < cfg.count_target:
            jobs = [(cfg, radio, k) for k in range(start, start + chunk)]
            results = pool.map(_candidate, jobs, chunksize=16) if pool else map(_candidate, jobs)
            for res in results:
                if res is None:
                    failures += 1
                    continue
                env, label = res
                if label is None or (cfg.nlos_only and not label.los_blocked):
                    continue
                if len(out) < cfg.count_target:
                    out.append((Environment(len(out), env.tx, env.rx, env.scatterers, env.room), label))
            start += chunk
            if start > 1000 * max(cfg.count_target, 1) + 10 * chunk:
                raise PlacementError("candidate budget exhausted before reaching count_target")
    finally:
        if pool:
            pool.shutdown()
    if failures:
        log.info("%d candidates skipped after placement failure", failures)
    return out


def split_dataset(samples: Sequence, test_counts: Iterable[int] = (4, 8, 12)):
    """Partition samples by scatterer count; order is preserved in both parts.

    ``samples`` may hold environments or (environment, label) pairs.
    """
    test_counts = set(test_counts)
    train, test = [], []
    for s in samples:
        env = s[0] if isinstance(s, tuple) else s
        (test if env.n in test_counts else train).append(s)
    return train, test


# -- persistence ------------------------------------------------------------

def env_to_record(env: Environment, label=None) -> dict:
    rec = {
        "id": env.id,
        "room": list(env.room),
        "tx": list(env.tx),
        "rx": list(env.rx),
        "scatterers": [{"c": list(b.center), "d": list(b.dims)} for b in env.scatterers],
    }
    if label is not None:
        rec["label"] = label.to_record()
    return rec


def _vec3(rec, key, where):
    v = rec.get(key)
    if not isinstance(v, list) or len(v) != 3 or not all(isinstance(x, (int, float)) for x in v):
        raise SchemaError(f"{where}: field {key!r} must be a list of 3 numbers")
    return tuple(float(x) for x in v)


def env_from_record(rec: dict, where: str = "record"):
    """Parse one JSONL object into (Environment, PropagationLabel | None)."""
    from .oracle import PropagationLabel

    if not isinstance(rec, dict) or not isinstance(rec.get("id"), int):
        raise SchemaError(f"{where}: missing integer 'id'")
    where = f"{where} (id {rec['id']})"
    scat = rec.get("scatterers")
    if not isinstance(scat, list):
        raise SchemaError(f"{where}: 'scatterers' must be a list")
    try:
        boxes = tuple(AxisBox(_vec3(s, "c", where), _vec3(s, "d", where)) for s in scat)
    except (ValueError, AttributeError, TypeError) as exc:
        raise SchemaError(f"{where}: bad scatterer: {exc}") from exc
    env = Environment(rec["id"], _vec3(rec, "tx", where), _vec3(rec, "rx", where), boxes,
                      _vec3(rec, "room", where))
    try:
        env.validate()
    except SchemaError as exc:
        raise SchemaError(f"{where}: {exc}") from exc
    label = None
    if rec.get("label") is not None:
        label = PropagationLabel.from_record(rec["label"], env.n, where)
    return env, label


def write_jsonl(path, samples) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            env, label = s if isinstance(s, tuple) else (s, None)
            fh.write(json.dumps(env_to_record(env, label), separators=(",", ":")) + "\n")


def read_jsonl(path) -> list:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            where = f"{Path(path).name}:{lineno}"
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{where}: invalid JSON: {exc}") from exc
            out.append(env_from_record(rec, where))
    return out
