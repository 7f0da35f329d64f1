"""Axis-aligned 3-D primitives: distances, slab intersection, mirroring.

Points are plain length-3 float arrays (or anything ``np.asarray`` accepts).
All containment tests use closed-set semantics with tolerance ``EPS_GEO``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EPS_GEO = 1e-9


class GeometryError(ValueError):
    """Raised on degenerate geometric input."""


def as_point(p) -> np.ndarray:
    a = np.asarray(p, dtype=float).reshape(3)
    if not np.all(np.isfinite(a)):
        raise GeometryError(f"non-finite point {p!r}")
    return a


@dataclass(frozen=True)
class AxisBox:
    """Box given by its center and (l, w, h) extents along x, y, z."""

    center: tuple[float, float, float]
    dims: tuple[float, float, float]

    def __post_init__(self):
        c = tuple(float(v) for v in self.center)
        d = tuple(float(v) for v in self.dims)
        if len(c) != 3 or len(d) != 3:
            raise GeometryError("center and dims need three components")
        if not all(np.isfinite(c)) or not all(np.isfinite(d)):
            raise GeometryError("non-finite box")
        if min(d) <= 0:
            raise GeometryError(f"box dims must be positive, got {d}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "dims", d)

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.center) - 0.5 * np.asarray(self.dims)

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.center) + 0.5 * np.asarray(self.dims)

    def contains(self, p, eps: float = EPS_GEO) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.lo - eps) and np.all(p <= self.hi + eps))

    def faces(self) -> list["Face"]:
        """The six faces, ordered -x, +x, -y, +y, -z, +z."""
        lo, hi = self.lo, self.hi
        out = []
        for axis in range(3):
            others = [k for k in range(3) if k != axis]
            for sign, coord in ((-1, lo[axis]), (1, hi[axis])):
                out.append(Face(axis=axis, coord=float(coord), normal_sign=sign,
                                lo=(float(lo[others[0]]), float(lo[others[1]])),
                                hi=(float(hi[others[0]]), float(hi[others[1]]))))
        return out


@dataclass(frozen=True)
class Segment:
    a: tuple[float, float, float]
    b: tuple[float, float, float]

    def __post_init__(self):
        a, b = as_point(self.a), as_point(self.b)
        if np.dot(b - a, b - a) == 0.0:
            raise GeometryError("degenerate segment: endpoints coincide")
        object.__setattr__(self, "a", tuple(a.tolist()))
        object.__setattr__(self, "b", tuple(b.tolist()))

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.subtract(self.b, self.a)))


@dataclass(frozen=True)
class Face:
    """Axis-aligned rectangle lying in the plane ``x[axis] == coord``.

    ``lo``/``hi`` bound the two remaining axes in increasing axis order;
    ``normal_sign`` is the direction of the outward normal along ``axis``.
    """

    axis: int
    coord: float
    normal_sign: int
    lo: tuple[float, float]
    hi: tuple[float, float]

    @property
    def normal(self) -> np.ndarray:
        n = np.zeros(3)
        n[self.axis] = self.normal_sign
        return n

    def outward_distance(self, p) -> float:
        return self.normal_sign * (float(np.asarray(p)[self.axis]) - self.coord)


def point_segment_distance(p, s: Segment) -> float:
    """Euclidean distance from ``p`` to the closed segment ``s``."""
    p, a, b = as_point(p), np.asarray(s.a), np.asarray(s.b)
    ab = b - a
    t = float(np.dot(p - a, ab) / np.dot(ab, ab))
    t = min(1.0, max(0.0, t))
    return float(np.linalg.norm(p - (a + t * ab)))


def segment_box_hits(a, b, lo: np.ndarray, hi: np.ndarray, eps: float = EPS_GEO) -> np.ndarray:
    """Vectorised slab test of segment a->b against boxes ``lo[k]..hi[k]``.

    ``lo`` and ``hi`` have shape (m, 3); returns a boolean mask of length m.
    """
    a = np.asarray(a, dtype=float)
    d = np.asarray(b, dtype=float) - a
    lo = np.atleast_2d(lo) - eps
    hi = np.atleast_2d(hi) + eps
    t0 = np.zeros(lo.shape[0])
    t1 = np.ones(lo.shape[0])
    inside = np.ones(lo.shape[0], dtype=bool)
    for k in range(3):
        if d[k] == 0.0:
            inside &= (a[k] >= lo[:, k]) & (a[k] <= hi[:, k])
            continue
        ta = (lo[:, k] - a[k]) / d[k]
        tb = (hi[:, k] - a[k]) / d[k]
        t0 = np.maximum(t0, np.minimum(ta, tb))
        t1 = np.minimum(t1, np.maximum(ta, tb))
    return inside & (t0 <= t1)


def segment_box_intervals(a, b, lo: np.ndarray, hi: np.ndarray, eps: float = EPS_GEO):
    """Parametric overlap [t0, t1] of many segments with many boxes.

    ``a``, ``b`` have shape (L, 3), ``lo``, ``hi`` shape (m, 3); returns t0, t1
    of shape (L, m). The overlap is empty where t0 > t1.
    """
    a = np.asarray(a, dtype=float)[:, None, :]
    d = np.asarray(b, dtype=float)[:, None, :] - a
    lo = np.asarray(lo, dtype=float)[None, :, :] - eps
    hi = np.asarray(hi, dtype=float)[None, :, :] + eps
    with np.errstate(divide="ignore", invalid="ignore"):
        ta = (lo - a) / d
        tb = (hi - a) / d
    flat = d == 0.0
    outside = flat & ((a < lo) | (a > hi))
    t_near = np.where(flat, -np.inf, np.minimum(ta, tb))
    t_far = np.where(flat, np.inf, np.maximum(ta, tb))
    t0 = np.maximum(0.0, t_near.max(axis=2))
    t1 = np.minimum(1.0, t_far.min(axis=2))
    t0 = np.where(outside.any(axis=2), np.inf, t0)
    return t0, t1


def segment_intersects_box(s: Segment, box: AxisBox, eps: float = EPS_GEO) -> bool:
    return bool(segment_box_hits(s.a, s.b, box.lo[None, :], box.hi[None, :], eps)[0])


def mirror_point(p, axis: int, coord: float) -> np.ndarray:
    """Reflect ``p`` across the plane ``x[axis] == coord``."""
    q = as_point(p).copy()
    q[axis] = 2.0 * coord - q[axis]
    return q


def reflection_point_on_face(tx, rx, face: Face, eps: float = EPS_GEO) -> np.ndarray | None:
    """Specular bounce point of tx -> face -> rx, or None if it misses the face.

    Both endpoints must lie strictly on the outward side of the face plane.
    """
    tx, rx = as_point(tx), as_point(rx)
    dt = face.outward_distance(tx)
    dr = face.outward_distance(rx)
    if dt <= eps or dr <= eps:
        return None
    # mirrored tx sits at -dt, rx at +dr: the crossing is at fraction dt/(dt+dr)
    t = dt / (dt + dr)
    image = mirror_point(tx, face.axis, face.coord)
    q = image + t * (rx - image)
    q[face.axis] = face.coord
    others = [k for k in range(3) if k != face.axis]
    for j, k in enumerate(others):
        if q[k] < face.lo[j] - eps or q[k] > face.hi[j] + eps:
            return None
    return q


def box_edges(box: AxisBox) -> list[tuple[int, tuple[float, float], tuple[float, float]]]:
    """The 12 edges as (axis, fixed coords of the other two axes, (start, end))."""
    lo, hi = box.lo, box.hi
    edges = []
    for axis in range(3):
        u, v = [k for k in range(3) if k != axis]
        for cu in (lo[u], hi[u]):
            for cv in (lo[v], hi[v]):
                edges.append((axis, (float(cu), float(cv)), (float(lo[axis]), float(hi[axis]))))
    return edges


def diffraction_point_on_edge(tx, rx, axis: int, fixed: tuple[float, float],
                              span: tuple[float, float]) -> np.ndarray | None:
    """Point on an axis-parallel edge minimising |tx - e| + |e - rx|.

    Unclamped, the minimiser satisfies the edge-cone law: both legs make the
    same angle with the edge direction. Returns None when both endpoints lie
    on the edge line.
    """
    tx, rx = as_point(tx), as_point(rx)
    u, v = [k for k in range(3) if k != axis]
    a = float(np.hypot(tx[u] - fixed[0], tx[v] - fixed[1]))
    b = float(np.hypot(rx[u] - fixed[0], rx[v] - fixed[1]))
    if a + b <= EPS_GEO:
        return None
    t = (tx[axis] * b + rx[axis] * a) / (a + b)
    t = min(span[1], max(span[0], t))
    e = np.empty(3)
    e[axis], e[u], e[v] = t, fixed[0], fixed[1]
    return e
