"""Polygon primitives, shrink/unclip offsets and distance queries.

Coordinates are pixels with ``x`` to the right and ``y`` down.  "Counter-clockwise"
means a positive shoelace sum in those raw coordinates; every :class:`Polygon`
is normalized to that orientation when built.
"""

from __future__ import annotations

import math
from typing import Iterable, NamedTuple, Sequence

import numpy as np
import shapely.geometry

from ._raster import fill_ring
from .errors import DegenerateGeometry, InvalidParameter

AREA_EPS = 1e-9
DUPLICATE_EPS = 1e-9
# Mitre length limit as a multiple of |delta|; longer corners are bevelled.
MITRE_LIMIT = 2.0


class Point(NamedTuple):
    x: float
    y: float


class Polygon:
    """Immutable simple polygon with at least three distinct vertices.

    Consecutive duplicate vertices (and a repeated closing vertex) are dropped,
    then the vertex order is flipped if needed so the signed area is positive.
    Raises :class:`DegenerateGeometry` for fewer than 3 vertices or an area
    below ``1e-9``.
    """

    __slots__ = ("_pts",)

    def __init__(self, vertices: Iterable[Sequence[float]] | np.ndarray):
        pts = np.array(
            [tuple(v) for v in vertices] if not isinstance(vertices, np.ndarray) else vertices,
            dtype=np.float64,
        )
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise DegenerateGeometry(f"expected an (n, 2) vertex array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise DegenerateGeometry("polygon vertices must be finite")
        pts = _drop_repeats(pts)
        if len(pts) < 3:
            raise DegenerateGeometry(f"polygon needs >= 3 distinct vertices, got {len(pts)}")
        signed = _signed_area(pts)
        if abs(signed) < AREA_EPS:
            raise DegenerateGeometry("polygon area is (near) zero")
        if signed < 0:
            pts = pts[::-1].copy()
        pts.flags.writeable = False
        self._pts = pts

    @property
    def points(self) -> np.ndarray:
        """Read-only ``(n, 2)`` vertex array."""
        return self._pts

    def __len__(self) -> int:
        return len(self._pts)

    def __iter__(self):
        return (Point(float(x), float(y)) for x, y in self._pts)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polygon):
            return NotImplemented
        return self._pts.shape == other._pts.shape and bool(np.array_equal(self._pts, other._pts))

    def __hash__(self):
        return hash(self._pts.tobytes())

    def __repr__(self) -> str:
        inner = ", ".join(f"({x:g}, {y:g})" for x, y in self._pts[:6])
        more = ", ..." if len(self._pts) > 6 else ""
        return f"Polygon([{inner}{more}])"

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        """``(xmin, ymin, xmax, ymax)``."""
        lo = self._pts.min(axis=0)
        hi = self._pts.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    def translated(self, dx: float, dy: float) -> "Polygon":
        return Polygon(self._pts + (dx, dy))

    def scaled(self, s: float, origin: tuple[float, float] = (0.0, 0.0)) -> "Polygon":
        o = np.asarray(origin, dtype=np.float64)
        return Polygon((self._pts - o) * s + o)

    def is_simple(self) -> bool:
        return _is_simple(self._pts)

    def to_shapely(self) -> shapely.geometry.Polygon:
        return shapely.geometry.Polygon(self._pts)


def _drop_repeats(pts: np.ndarray) -> np.ndarray:
    if len(pts) < 2:
        return pts
    step = np.abs(pts - np.roll(pts, -1, axis=0)).max(axis=1)
    # Keep a vertex unless the next one (cyclically) duplicates it.
    keep = step > DUPLICATE_EPS
    if not keep.any():
        return pts[:1]
    return pts[keep]


def _signed_area(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _cross(o, a, b):
    return (a[..., 0] - o[..., 0]) * (b[..., 1] - o[..., 1]) - (a[..., 1] - o[..., 1]) * (
        b[..., 0] - o[..., 0]
    )


def _is_simple(pts: np.ndarray) -> bool:
    n = len(pts)
    a = pts
    b = np.roll(pts, -1, axis=0)
    i, j = np.triu_indices(n, k=1)

    adjacent = (j == i + 1) | ((i == 0) & (j == n - 1))
    # Adjacent edges only fail by folding back onto each other.
    ai, bi, aj, bj = a[i[adjacent]], b[i[adjacent]], a[j[adjacent]], b[j[adjacent]]
    d1 = bi - ai
    d2 = bj - aj
    cr = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    dot = (d1 * d2).sum(axis=1)
    scale = np.linalg.norm(d1, axis=1) * np.linalg.norm(d2, axis=1)
    if np.any((np.abs(cr) <= 1e-12 * scale) & (dot < 0)):
        return False

    i, j = i[~adjacent], j[~adjacent]
    if i.size == 0:
        return True
    p1, p2, q1, q2 = a[i], b[i], a[j], b[j]
    o1 = _cross(p1, p2, q1)
    o2 = _cross(p1, p2, q2)
    o3 = _cross(q1, q2, p1)
    o4 = _cross(q1, q2, p2)
    proper = (np.sign(o1) * np.sign(o2) < 0) & (np.sign(o3) * np.sign(o4) < 0)
    if proper.any():
        return False

    def on_seg(p, q, r, o):
        return (
            (o == 0)
            & (np.minimum(p[:, 0], q[:, 0]) <= r[:, 0])
            & (r[:, 0] <= np.maximum(p[:, 0], q[:, 0]))
            & (np.minimum(p[:, 1], q[:, 1]) <= r[:, 1])
            & (r[:, 1] <= np.maximum(p[:, 1], q[:, 1]))
        )

    touch = on_seg(p1, p2, q1, o1) | on_seg(p1, p2, q2, o2) | on_seg(q1, q2, p1, o3) | on_seg(q1, q2, p2, o4)
    return not touch.any()


def polygon_area(poly: Polygon) -> float:
    """Absolute shoelace area in pixels squared."""
    return abs(_signed_area(poly.points))


def polygon_perimeter(poly: Polygon) -> float:
    pts = poly.points
    return float(np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1).sum())


def shrink_offset(poly: Polygon, r: float = 0.4) -> float:
    """Inward offset ``D = A (1 - r^2) / L`` used to build the shrunk text kernel."""
    if not 0.0 < r < 1.0:
        raise InvalidParameter(f"shrink ratio must lie in (0, 1), got {r}")
    return polygon_area(poly) * (1.0 - r * r) / polygon_perimeter(poly)


def unclip_offset(poly: Polygon, r_prime: float = 1.5) -> float:
    """Outward offset ``D' = A' r' / L'`` that re-expands a detected kernel."""
    if not r_prime > 0.0:
        raise InvalidParameter(f"unclip ratio must be > 0, got {r_prime}")
    return polygon_area(poly) * r_prime / polygon_perimeter(poly)


def offset_polygon(poly: Polygon, delta: float) -> list[Polygon]:
    """Offset by ``delta`` pixels (negative shrinks, positive dilates).

    Mitre joins, bevelled beyond ``MITRE_LIMIT * |delta|``.  Shrinking may return
    several pieces or none.  Only outer rings are returned; holes that a dilation
    could enclose are dropped.
    """
    if abs(delta) < 1e-9:
        return [poly]
    shape = poly.to_shapely().buffer(delta, join_style="mitre", mitre_limit=MITRE_LIMIT)
    if shape.is_empty:
        return []
    parts = getattr(shape, "geoms", [shape])
    out = []
    for part in parts:
        if part.geom_type != "Polygon" or part.is_empty:
            continue
        try:
            out.append(Polygon(np.asarray(part.exterior.coords)))
        except DegenerateGeometry:
            continue
    # Stable order for downstream determinism.
    out.sort(key=lambda p: (p.bounds[1], p.bounds[0]))
    return out


def point_segment_distance(p: Sequence[float], a: Sequence[float], b: Sequence[float]) -> float:
    px, py = float(p[0]), float(p[1])
    ax, ay = float(a[0]), float(a[1])
    dx, dy = float(b[0]) - ax, float(b[1]) - ay
    len2 = dx * dx + dy * dy
    if len2 == 0.0:
        return math.hypot(px - ax, py - ay)
    t = ((px - ax) * dx + (py - ay) * dy) / len2
    t = min(1.0, max(0.0, t))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def boundary_distance(points: np.ndarray, poly: Polygon) -> np.ndarray:
    """Vectorized unsigned distance from each of ``points`` (m x 2) to the boundary."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    a = poly.points
    d = np.roll(a, -1, axis=0) - a
    len2 = (d * d).sum(axis=1)
    best = np.full(len(points), np.inf)
    # Edge loop keeps memory at O(m); polygons here have few edges.
    for k in range(len(a)):
        rel = points - a[k]
        t = np.clip(rel @ d[k] / len2[k], 0.0, 1.0)
        diff = rel - t[:, None] * d[k]
        np.minimum(best, np.hypot(diff[:, 0], diff[:, 1]), out=best)
    return best


def point_polygon_distance(p: Sequence[float], poly: Polygon) -> float:
    """Distance to the closest boundary segment; the same inside and outside."""
    return float(boundary_distance(np.asarray([p], dtype=np.float64), poly)[0])


def polygon_iou(a: Polygon, b: Polygon, resolution: float = 1.0) -> float:
    """Intersection over union of two polygons by rasterizing on their joint bbox.

    ``resolution`` is the number of samples per pixel along each axis.
    """
    if resolution <= 0:
        raise InvalidParameter("resolution must be > 0")
    ax0, ay0, ax1, ay1 = a.bounds
    bx0, by0, bx1, by1 = b.bounds
    x0 = math.floor(min(ax0, bx0))
    y0 = math.floor(min(ay0, by0))
    w = max(1, math.ceil((max(ax1, bx1) - x0) * resolution))
    h = max(1, math.ceil((max(ay1, by1) - y0) * resolution))
    ma = np.zeros((h, w), dtype=bool)
    mb = np.zeros((h, w), dtype=bool)
    origin = np.array([x0, y0], dtype=np.float64)
    fill_ring(ma, (a.points - origin) * resolution)
    fill_ring(mb, (b.points - origin) * resolution)
    union = np.count_nonzero(ma | mb)
    if union == 0:
        return 0.0
    return np.count_nonzero(ma & mb) / union


def polygon_gap(a: Polygon, b: Polygon) -> float:
    """Euclidean distance between two polygonal regions (0 if they overlap)."""
    return float(a.to_shapely().distance(b.to_shapely()))
