import math

import numpy as np
import pytest

from diffbin.geometry import Polygon


def square(x0, y0, side):
    return Polygon([(x0, y0), (x0 + side, y0), (x0 + side, y0 + side), (x0, y0 + side)])


def rect(x0, y0, x1, y1):
    return Polygon([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])


def rotated_rect(cx, cy, w, h, angle):
    c, s = math.cos(angle), math.sin(angle)
    base = np.array([[-w, -h], [w, -h], [w, h], [-w, h]]) * 0.5
    return Polygon(base @ np.array([[c, s], [-s, c]]) + (cx, cy))


def point_in_polygon(x, y, pts):
    """Plain ray casting, written independently of the scanline filler."""
    inside = False
    n = len(pts)
    for i in range(n):
        x1, y1 = pts[i]
        x2, y2 = pts[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < xc:
                inside = not inside
    return inside


def brute_raster(poly, h, w):
    pts = [tuple(p) for p in np.asarray(poly.points)]
    out = np.zeros((h, w), dtype=bool)
    for i in range(h):
        for j in range(w):
            out[i, j] = point_in_polygon(j + 0.5, i + 0.5, pts)
    return out


def seg_dist(px, py, ax, ay, bx, by):
    dx, dy = bx - ax, by - ay
    t = ((px - ax) * dx + (py - ay) * dy) / (dx * dx + dy * dy)
    t = min(1.0, max(0.0, t))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def brute_boundary_distance(px, py, pts):
    n = len(pts)
    return min(seg_dist(px, py, *pts[i], *pts[(i + 1) % n]) for i in range(n))


# ---------------------------------------------------------------------------
# Acceptance summary: each criterion records one line, printed at session end.


@pytest.fixture
def criterion(request):
    lines = request.config.__dict__.setdefault("_acceptance_lines", [])

    def record(label: str, passed: bool, detail: str = "") -> bool:
        line = f"[{'PASS' if passed else 'FAIL'}] {label}" + (f": {detail}" if detail else "")
        lines.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.__dict__.get("_acceptance_lines")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


def flood_fill_labels(mask, connectivity):
    """Stack-based flood fill started from each unlabeled pixel in raster order."""
    h, w = mask.shape
    fg = mask.tolist()
    labels = [[0] * w for _ in range(h)]
    if connectivity == 8:
        steps = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    else:
        steps = [(-1, 0), (0, -1), (0, 1), (1, 0)]
    count = 0
    for i in range(h):
        for j in range(w):
            if not fg[i][j] or labels[i][j]:
                continue
            count += 1
            labels[i][j] = count
            queue = [(i, j)]
            while queue:
                y, x = queue.pop()
                for dy, dx in steps:
                    ny, nx = y + dy, x + dx
                    if 0 <= ny < h and 0 <= nx < w and fg[ny][nx] and not labels[ny][nx]:
                        labels[ny][nx] = count
                        queue.append((ny, nx))
    return np.array(labels, dtype=np.int32), count
