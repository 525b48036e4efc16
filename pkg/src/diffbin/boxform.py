"""Inference post-processing: probability map -> scored text polygons.

Pipeline per map: hard-threshold at a constant, 8-connected components, drop
low-scoring regions, trace and simplify each outer contour, dilate it by the
unclip offset ``D' = A' r' / L'``, then drop boxes that are too thin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .dbcore import standard_binarize
from .errors import DegenerateGeometry, FormatError, InvalidParameter
from .geometry import (
    Polygon,
    offset_polygon,
    polygon_area,
    polygon_perimeter,
    unclip_offset,
)
from .maps import BinaryMap, FloatMap

POLYGON = "polygon"
MIN_AREA_RECT = "min_area_rect"


@dataclass(frozen=True)
class Detection:
    polygon: Polygon
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise InvalidParameter(f"detection score must lie in [0, 1], got {self.score}")


@dataclass(frozen=True)
class BoxformParams:
    const_thresh: float = 0.2
    r_prime: float = 1.5
    score_thresh: float = 0.5
    min_side: float = 3.0
    approx_eps_ratio: float = 0.01
    output_mode: str = POLYGON

    def __post_init__(self):
        if not 0.0 < self.const_thresh < 1.0:
            raise InvalidParameter(f"const_thresh must lie in (0, 1), got {self.const_thresh}")
        if not 0.0 < self.score_thresh < 1.0:
            raise InvalidParameter(f"score_thresh must lie in (0, 1), got {self.score_thresh}")
        if not self.r_prime > 0:
            raise InvalidParameter(f"r_prime must be > 0, got {self.r_prime}")
        if self.min_side < 0 or self.approx_eps_ratio < 0:
            raise InvalidParameter("min_side and approx_eps_ratio must be >= 0")
        if self.output_mode not in (POLYGON, MIN_AREA_RECT):
            raise InvalidParameter(f"unknown output_mode {self.output_mode!r}")


# ---------------------------------------------------------------------------
# Connected components: run-length two-pass labeling with union-find.


def _find(parent: list[int], a: int) -> int:
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


def connected_components(B, connectivity: int = 8) -> tuple[np.ndarray, int]:
    """Label foreground components; returns ``(labels, count)``.

    ``labels`` is int32 with 0 for background.  Ids follow the raster-scan order
    of each component's first pixel.
    """
    if connectivity not in (4, 8):
        raise InvalidParameter(f"connectivity must be 4 or 8, got {connectivity}")
    mask = np.asarray(B.data if isinstance(B, BinaryMap) else B, dtype=bool)
    h, w = mask.shape
    padded = np.zeros((h, w + 2), dtype=np.int8)
    padded[:, 1:-1] = mask
    d = np.diff(padded, axis=1)
    srow, starts = np.nonzero(d == 1)
    _, ends = np.nonzero(d == -1)
    n = starts.size
    labels = np.zeros((h, w), dtype=np.int32)
    if n == 0:
        return labels, 0

    slack = 1 if connectivity == 8 else 0
    parent = list(range(n))
    row_first = np.searchsorted(srow, np.arange(h + 1))
    s_list, e_list = starts.tolist(), ends.tolist()
    for r in range(1, h):
        i, i_end = int(row_first[r - 1]), int(row_first[r])
        j, j_end = i_end, int(row_first[r + 1])
        while i < i_end and j < j_end:
            if s_list[i] < e_list[j] + slack and s_list[j] < e_list[i] + slack:
                ri, rj = _find(parent, i), _find(parent, j)
                if ri != rj:
                    # Smaller run index stays root so roots are first-in-raster runs.
                    if ri < rj:
                        parent[rj] = ri
                    else:
                        parent[ri] = rj
            if e_list[i] <= e_list[j]:
                i += 1
            else:
                j += 1

    run_ids = np.empty(n, dtype=np.int32)
    root_id: dict[int, int] = {}
    for k in range(n):
        root = _find(parent, k)
        if root not in root_id:
            root_id[root] = len(root_id) + 1
        run_ids[k] = root_id[root]

    acc = np.zeros((h, w + 1), dtype=np.int64)
    np.add.at(acc, (srow, starts), run_ids)
    np.add.at(acc, (srow, ends), -run_ids)
    labels[:] = np.cumsum(acc[:, :w], axis=1)
    return labels, len(root_id)


# ---------------------------------------------------------------------------
# Contours.

_EAST = (1, 0)


def trace_contour(region: np.ndarray, origin: tuple[int, int] = (0, 0)) -> Polygon:
    """Outer boundary of a pixel region as a polygon through pixel corners.

    Follows the region's border keeping it on the right-hand side in image
    coordinates (positive shoelace area), treating diagonal neighbours as
    connected.  Only direction changes are emitted, starting at the top-left
    corner of the first pixel in raster order.  ``origin`` is the ``(row, col)``
    of ``region[0, 0]`` in the full image.  Holes are ignored.
    """
    region = np.asarray(region, dtype=bool)
    if not region.any():
        raise DegenerateGeometry("cannot trace an empty region")
    m = np.zeros((region.shape[0] + 2, region.shape[1] + 2), dtype=bool)
    m[1:-1, 1:-1] = region
    i0, j0 = np.argwhere(region)[0]

    def fg(px: int, py: int) -> bool:
        return bool(m[py + 1, px + 1])

    start = (int(j0), int(i0))
    dx, dy = _EAST
    cx, cy = start[0] + dx, start[1] + dy
    pts = [start]
    while True:
        lx, ly = dy, -dx
        rx, ry = -dy, dx
        if fg(cx + (dx + lx - 1) // 2, cy + (dy + ly - 1) // 2):
            nx, ny = lx, ly
        elif fg(cx + (dx + rx - 1) // 2, cy + (dy + ry - 1) // 2):
            nx, ny = dx, dy
        else:
            nx, ny = rx, ry
        if (cx, cy) == start and (nx, ny) == _EAST:
            break
        if (nx, ny) != (dx, dy):
            pts.append((cx, cy))
        dx, dy = nx, ny
        cx, cy = cx + dx, cy + dy

    r0, c0 = origin
    return Polygon(np.asarray(pts, dtype=np.float64) + (c0, r0))


def _seg_dist(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = b - a
    len2 = float(d @ d)
    rel = pts - a
    if len2 == 0.0:
        return np.hypot(rel[:, 0], rel[:, 1])
    t = np.clip(rel @ d / len2, 0.0, 1.0)
    diff = rel - t[:, None] * d
    return np.hypot(diff[:, 0], diff[:, 1])


def _drop_collinear(pts: np.ndarray) -> np.ndarray:
    prev = np.roll(pts, 1, axis=0)
    nxt = np.roll(pts, -1, axis=0)
    a, b = pts - prev, nxt - pts
    cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    dot = (a * b).sum(axis=1)
    return pts[~((cross == 0) & (dot > 0))]


def simplify(poly: Polygon, eps: float) -> Polygon:
    """Douglas-Peucker on the closed contour.

    Every dropped vertex lies within ``eps`` of the output edge that replaced it.
    Raises :class:`DegenerateGeometry` if fewer than 3 vertices survive.
    """
    if eps < 0:
        raise InvalidParameter(f"eps must be >= 0, got {eps}")
    pts = _drop_collinear(poly.points)
    if eps > 0 and len(pts) > 3:
        far = int(np.argmax(np.hypot(*(pts - pts[0]).T)))
        ring = np.vstack([pts, pts[:1]])
        keep = np.zeros(len(ring), dtype=bool)
        keep[[0, far, len(ring) - 1]] = True
        stack = [(0, far), (far, len(ring) - 1)]
        while stack:
            lo, hi = stack.pop()
            if hi - lo < 2:
                continue
            dist = _seg_dist(ring[lo + 1 : hi], ring[lo], ring[hi])
            k = int(np.argmax(dist))
            if dist[k] > eps:
                mid = lo + 1 + k
                keep[mid] = True
                stack.append((lo, mid))
                stack.append((mid, hi))
        pts = ring[:-1][keep[:-1]]
    if len(pts) < 3:
        raise DegenerateGeometry(f"simplification left {len(pts)} vertices")
    return Polygon(pts)


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain; positive orientation, no collinear points."""
    pts = np.unique(np.asarray(points, dtype=np.float64), axis=0)
    if len(pts) < 3:
        return pts

    def half(seq):
        out: list = []
        for p in seq:
            while len(out) >= 2:
                ox, oy = out[-2]
                ax, ay = out[-1]
                if (ax - ox) * (p[1] - oy) - (ay - oy) * (p[0] - ox) <= 0:
                    out.pop()
                else:
                    break
            out.append((p[0], p[1]))
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    return np.asarray(lower[:-1] + upper[:-1])


def min_area_rect(poly: Polygon) -> Polygon:
    """Minimum-area enclosing rectangle via rotating calipers on the hull."""
    hull = convex_hull(poly.points)
    m = len(hull)
    if m < 3:
        raise DegenerateGeometry("hull has fewer than 3 vertices")

    def proj(idx, v):
        return float(hull[idx % m] @ v)

    best = None
    a = b = c = None
    for i in range(m):
        origin = hull[i]
        e = hull[(i + 1) % m] - origin
        u = e / np.hypot(*e)
        nrm = np.array([-u[1], u[0]])
        if a is None:
            a = i + 1
            while proj(a + 1, u) > proj(a, u) + 1e-12:
                a += 1
            b = a
            while proj(b + 1, nrm) > proj(b, nrm) + 1e-12:
                b += 1
            c = b
            while proj(c + 1, u) < proj(c, u) - 1e-12:
                c += 1
        else:
            a = max(a, i + 1)
            while proj(a + 1, u) > proj(a, u) + 1e-12:
                a += 1
            b = max(b, a)
            while proj(b + 1, nrm) > proj(b, nrm) + 1e-12:
                b += 1
            c = max(c, b)
            while proj(c + 1, u) < proj(c, u) - 1e-12:
                c += 1
        hi_u = proj(a, u) - float(origin @ u)
        lo_u = proj(c, u) - float(origin @ u)
        height = proj(b, nrm) - float(origin @ nrm)
        area = (hi_u - lo_u) * height
        if best is None or area < best[0] - 1e-12:
            corners = np.array(
                [
                    origin + lo_u * u,
                    origin + hi_u * u,
                    origin + hi_u * u + height * nrm,
                    origin + lo_u * u + height * nrm,
                ]
            )
            best = (area, corners)
    return Polygon(best[1])


def _rect_sides(rect: Polygon) -> tuple[float, float]:
    p = rect.points
    return float(np.hypot(*(p[1] - p[0]))), float(np.hypot(*(p[2] - p[1])))


# ---------------------------------------------------------------------------
# Pipeline.


def region_score(P, region: np.ndarray) -> float:
    """Mean of ``P`` over the region's pixels."""
    vals = np.asarray(P.data if isinstance(P, FloatMap) else P, dtype=np.float64)[np.asarray(region, bool)]
    if vals.size == 0:
        raise InvalidParameter("region is empty")
    return float(vals.mean())


def form_boxes(P, params: BoxformParams = BoxformParams()) -> list[Detection]:
    prob = np.asarray(P.data if isinstance(P, FloatMap) else P, dtype=np.float64)
    binary = standard_binarize(prob, params.const_thresh)
    labels, count = connected_components(binary, 8)
    found = []
    for rid, sl in enumerate(ndimage.find_objects(labels), start=1):
        if sl is None:
            continue
        region = labels[sl] == rid
        score = float(prob[sl][region].mean())
        if score < params.score_thresh:
            continue
        contour = trace_contour(region, origin=(sl[0].start, sl[1].start))
        try:
            kernel = simplify(contour, params.approx_eps_ratio * polygon_perimeter(contour))
        except DegenerateGeometry:
            continue
        grown = offset_polygon(kernel, unclip_offset(kernel, params.r_prime))
        if not grown:
            continue
        box = max(grown, key=polygon_area)
        rect = min_area_rect(box)
        if min(_rect_sides(rect)) < params.min_side:
            continue
        out_poly = rect if params.output_mode == MIN_AREA_RECT else box
        found.append((-score, rid, Detection(out_poly, min(max(score, 0.0), 1.0))))
    found.sort(key=lambda t: (t[0], t[1]))
    return [det for _, _, det in found]


def format_detection(det: Detection) -> str:
    coords = ",".join(f"{v:.1f}" for v in det.polygon.points.ravel())
    return f"{coords},{det.score:.4f}"


def parse_detection_line(line: str, lineno: int = 0) -> Detection:
    fields = line.strip().split(",")
    try:
        values = [float(v) for v in fields]
    except ValueError:
        raise FormatError(f"line {lineno}: non-numeric field in detection {line.strip()!r}") from None
    *coords, score = values
    if len(coords) % 2 or len(coords) < 6:
        raise FormatError(f"line {lineno}: need an even number (>= 6) of coordinates, got {len(coords)}")
    try:
        return Detection(Polygon(np.asarray(coords).reshape(-1, 2)), score)
    except (DegenerateGeometry, InvalidParameter) as exc:
        raise FormatError(f"line {lineno}: {exc}") from None
