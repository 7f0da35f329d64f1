"""First-order propagation oracle and label assignment.

Stands in for a full ray tracer: the LOS ray, one specular reflection off
each scatterer face (image method) and one diffraction off each scatterer
edge, with free-space loss plus a flat per-interaction loss. Only received
power per path is modeled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .geometry import (EPS_GEO, Face, box_edges, diffraction_point_on_edge,
                       reflection_point_on_face, segment_box_hits, segment_box_intervals)

SPEED_OF_LIGHT = 299_792_458.0
LOS = -1
WALL = -2


@dataclass(frozen=True)
class RadioConfig:
    frequency: float = 28e9
    tx_power: float = 0.0
    reflection_loss: float = 6.0
    include_wall_reflections: bool = False
    include_diffraction: bool = True
    diffraction_loss: float = 20.0

    def __post_init__(self):
        if not self.frequency > 0:
            raise ValueError("frequency must be positive")
        if self.reflection_loss < 0 or self.diffraction_loss < 0:
            raise ValueError("interaction losses must be non-negative")


@dataclass(frozen=True)
class PathRecord:
    scatterer_index: int  # LOS, WALL or a scatterer index
    bounce_point: tuple[float, float, float] | None
    length: float
    power: float
    mechanism: str = "reflection"  # "los", "reflection" or "diffraction"


@dataclass(frozen=True)
class PropagationLabel:
    los_blocked: bool
    per_scatterer_power: tuple[float, ...]
    total_power: float
    max_power_scatterer: int | None
    qualified: bool | None = None

    @property
    def has_path(self) -> bool:
        return math.isfinite(self.total_power)

    def to_record(self) -> dict:
        def enc(p):
            return p if math.isfinite(p) else None

        return {
            "los_blocked": self.los_blocked,
            "per_scatterer_power": [enc(p) for p in self.per_scatterer_power],
            "total_power": enc(self.total_power),
            "max_power_scatterer": self.max_power_scatterer,
            "qualified": self.qualified,
        }

    @classmethod
    def from_record(cls, rec: dict, n: int, where: str = "label") -> "PropagationLabel":
        from .environment import SchemaError

        try:
            powers = tuple(-math.inf if p is None else float(p) for p in rec["per_scatterer_power"])
            total = -math.inf if rec["total_power"] is None else float(rec["total_power"])
            smax = rec["max_power_scatterer"]
            qualified = rec.get("qualified")
            blocked = rec["los_blocked"]
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"{where}: malformed label: {exc}") from exc
        if len(powers) != n:
            raise SchemaError(f"{where}: label has {len(powers)} powers for {n} scatterers")
        if not isinstance(blocked, bool) or qualified not in (None, True, False):
            raise SchemaError(f"{where}: label flags must be booleans")
        if smax is not None and not (isinstance(smax, int) and 0 <= smax < n):
            raise SchemaError(f"{where}: max_power_scatterer {smax!r} out of range")
        return cls(blocked, powers, total, smax, qualified)


def fspl_db(length: float, frequency: float) -> float:
    """Free-space path loss 20 log10(4 pi L f / c) in dB."""
    if not length > 0:
        raise ValueError(f"path length must be positive, got {length}")
    return 20.0 * math.log10(4.0 * math.pi * length * frequency / SPEED_OF_LIGHT)


def _box_arrays(env):
    if not env.scatterers:
        return np.zeros((0, 3)), np.zeros((0, 3))
    lo = np.array([b.lo for b in env.scatterers])
    hi = np.array([b.hi for b in env.scatterers])
    return lo, hi


def los_blocked(env) -> bool:
    lo, hi = _box_arrays(env)
    return bool(segment_box_hits(env.tx, env.rx, lo, hi).any())


def _wall_faces(room) -> list[Face]:
    faces = []
    for axis in range(3):
        others = [k for k in range(3) if k != axis]
        lo = (0.0, 0.0)
        hi = (float(room[others[0]]), float(room[others[1]]))
        faces.append(Face(axis, 0.0, 1, lo, hi))
        faces.append(Face(axis, float(room[axis]), -1, lo, hi))
    return faces


def _candidates(env, radio):
    """Yield (owner, mechanism, interaction point, interaction loss)."""
    tx, rx = env.tx, env.rx
    for i, box in enumerate(env.scatterers):
        for face in box.faces():
            q = reflection_point_on_face(tx, rx, face)
            if q is not None:
                yield i, "reflection", q, radio.reflection_loss
        if radio.include_diffraction:
            for axis, fixed, span in box_edges(box):
                q = diffraction_point_on_edge(tx, rx, axis, fixed, span)
                if q is not None:
                    yield i, "diffraction", q, radio.diffraction_loss
    if radio.include_wall_reflections:
        for face in _wall_faces(env.room):
            q = reflection_point_on_face(tx, rx, face)
            if q is not None:
                yield WALL, "reflection", q, radio.reflection_loss


def first_order_paths(env, radio: RadioConfig = RadioConfig()) -> list[PathRecord]:
    """Best single-interaction path per scatterer, plus wall bounces when enabled.

    A leg is blocked by any other box it touches; the interacting box blocks
    only if the leg meets it somewhere other than the interaction point.
    """
    cands = list(_candidates(env, radio))
    if not cands:
        return []
    tx, rx = np.asarray(env.tx, float), np.asarray(env.rx, float)
    lo, hi = _box_arrays(env)
    owner = np.array([c[0] for c in cands])
    q = np.array([c[2] for c in cands])
    k = len(cands)
    starts = np.concatenate([np.broadcast_to(tx, q.shape), np.broadcast_to(rx, q.shape)])
    ends = np.concatenate([q, q])
    legs_owner = np.concatenate([owner, owner])
    clear = np.ones(2 * k, dtype=bool)
    if env.n:
        t0, t1 = segment_box_intervals(starts, ends, lo, hi)
        hit = t0 <= t1
        own = legs_owner >= 0
        rows = np.nonzero(own)[0]
        hit[rows, legs_owner[own]] = False
        clear = ~hit.any(axis=1)
        # own box: exact (eps = 0) overlap must shrink to the interaction point
        e0, e1 = segment_box_intervals(starts[rows], ends[rows], lo, hi, eps=0.0)
        oe0, oe1 = e0[np.arange(len(rows)), legs_owner[own]], e1[np.arange(len(rows)), legs_owner[own]]
        leg_len = np.linalg.norm(ends[rows] - starts[rows], axis=1)
        enters = (oe0 <= oe1) & ((1.0 - oe0) * leg_len > EPS_GEO)
        clear[rows[enters]] = False
    ok = clear[:k] & clear[k:]
    lengths = np.linalg.norm(q - tx, axis=1) + np.linalg.norm(rx - q, axis=1)
    best: dict[int, PathRecord] = {}
    walls = []
    for j in np.nonzero(ok)[0]:
        i, mech, point, loss = cands[j]
        length = float(lengths[j])
        power = radio.tx_power - fspl_db(length, radio.frequency) - loss
        rec = PathRecord(int(i), tuple(point.tolist()), length, power, mech)
        if i == WALL:
            walls.append(rec)
        elif i not in best or power > best[i].power:
            best[i] = rec
    return [best[i] for i in sorted(best)] + walls


def power_sum_db(powers: Sequence[float]) -> float:
    """Linear-domain sum of dBm powers; -inf for an empty input."""
    finite = [p for p in powers if math.isfinite(p)]
    if not finite:
        return -math.inf
    peak = max(finite)
    return peak + 10.0 * math.log10(sum(10.0 ** ((p - peak) / 10.0) for p in finite))


def label_environment(env, radio: RadioConfig = RadioConfig()) -> PropagationLabel:
    blocked = los_blocked(env)
    paths = first_order_paths(env, radio)
    per = [-math.inf] * env.n
    for path in paths:
        if path.scatterer_index >= 0:
            per[path.scatterer_index] = path.power
    powers = [p.power for p in paths]
    if not blocked:
        d = float(np.linalg.norm(np.subtract(env.rx, env.tx)))
        powers.append(radio.tx_power - fspl_db(d, radio.frequency))
    smax = None
    if any(math.isfinite(p) for p in per):
        smax = int(np.argmax(per))  # first maximum: ties go to the lowest index
    return PropagationLabel(blocked, tuple(per), power_sum_db(powers), smax)


def quality_threshold(total_powers: Sequence[float], q: float = 0.6) -> float:
    """Nearest-rank quantile: sorted element at index ceil(q N) - 1."""
    values = sorted(float(p) for p in total_powers)
    if not values:
        raise ValueError("quality threshold needs at least one power value")
    if not 0 < q <= 1:
        raise ValueError("q must lie in (0, 1]")
    # round() absorbs representation error such as 0.6 * 10 = 6.000000000000001
    rank = max(1, math.ceil(round(q * len(values), 9)))
    return values[rank - 1]


def apply_quality(label: PropagationLabel, threshold: float) -> PropagationLabel:
    return replace(label, qualified=bool(label.total_power >= threshold))
