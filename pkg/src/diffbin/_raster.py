"""Scanline polygon fill shared by ``maps`` and ``geometry``.

Pixel ``(i, j)`` covers ``[j, j+1) x [i, i+1)`` and is inside a polygon iff its
center ``(j + 0.5, i + 0.5)`` is, under the even-odd rule.  Edges are treated as
half-open in y, so a vertex lying exactly on a scanline is counted once.
"""

from __future__ import annotations

import numpy as np


def fill_ring(mask: np.ndarray, ring: np.ndarray) -> None:
    """OR the even-odd interior of ``ring`` (N x 2 array of x, y) into ``mask``."""
    height, width = mask.shape
    ys = ring[:, 1]
    row_lo = max(int(np.ceil(ys.min() - 0.5)), 0)
    row_hi = min(int(np.ceil(ys.max() - 0.5)), height)
    if row_lo >= row_hi:
        return

    x0, y0 = ring[:, 0], ring[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    keep = y0 != y1
    x0, y0, x1, y1 = x0[keep], y0[keep], x1[keep], y1[keep]
    if x0.size == 0:
        return

    yc = np.arange(row_lo, row_hi, dtype=np.float64)[:, None] + 0.5
    ylo = np.minimum(y0, y1)
    yhi = np.maximum(y0, y1)
    hit = (yc >= ylo) & (yc < yhi)
    with np.errstate(invalid="ignore", divide="ignore"):
        xs = x0 + (yc - y0) * (x1 - x0) / (y1 - y0)
    xs = np.where(hit, xs, np.inf)
    xs.sort(axis=1)

    # Crossings come in pairs per row; fill [ceil(xa - .5), ceil(xb - .5)).
    n_pairs = xs.shape[1] // 2
    if n_pairs == 0:
        return
    starts = xs[:, 0 : 2 * n_pairs : 2]
    ends = xs[:, 1 : 2 * n_pairs : 2]
    valid = np.isfinite(ends)
    rows = np.broadcast_to(np.arange(row_hi - row_lo)[:, None], starts.shape)[valid]
    cs = np.clip(np.ceil(starts[valid] - 0.5), 0, width).astype(np.int64)
    ce = np.clip(np.ceil(ends[valid] - 0.5), 0, width).astype(np.int64)
    keep = ce > cs
    if not keep.any():
        return

    diff = np.zeros((row_hi - row_lo, width + 1), dtype=np.int32)
    np.add.at(diff, (rows[keep], cs[keep]), 1)
    np.add.at(diff, (rows[keep], ce[keep]), -1)
    mask[row_lo:row_hi] |= np.cumsum(diff[:, :width], axis=1) > 0
