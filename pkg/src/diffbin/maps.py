"""Raster containers, polygon rasterization, distance bands and map file I/O.

FMAP layout (little-endian, no padding, no trailing bytes)::

    b"FMAP" | u32 height | u32 width | height*width float32, row-major, top row first
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from PIL import Image

from ._raster import fill_ring
from .errors import DimensionError, FormatError, InvalidParameter, RangeError
from .geometry import Polygon, boundary_distance, offset_polygon

PROBABILITY = "probability"
DISTANCE = "distance"
_ROLES = (PROBABILITY, DISTANCE)

FMAP_MAGIC = b"FMAP"
_HEADER = struct.Struct("<4sII")
# Largest payload we are willing to allocate from an untrusted header.
MAX_PIXELS = 1 << 28


@dataclass(frozen=True, eq=False)
class FloatMap:
    """``height x width`` float32 grid.

    ``role`` is ``"probability"`` (values in [0, 1]) or ``"distance"`` (values >= 0).
    """

    data: np.ndarray
    role: str = PROBABILITY

    def __post_init__(self):
        if self.role not in _ROLES:
            raise InvalidParameter(f"unknown map role {self.role!r}")
        arr = np.array(self.data, dtype="<f4", order="C")
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionError(f"map data must be a non-empty 2-D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise RangeError("map values must be finite")
        if self.role == PROBABILITY and (arr.min() < 0.0 or arr.max() > 1.0):
            raise RangeError("probability map values must lie in [0, 1]")
        if self.role == DISTANCE and arr.min() < 0.0:
            raise RangeError("distance map values must be >= 0")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, FloatMap):
            return NotImplemented
        return self.shape == other.shape and self.data.tobytes() == other.data.tobytes()

    @classmethod
    def zeros(cls, height: int, width: int, role: str = PROBABILITY) -> "FloatMap":
        return cls(np.zeros((height, width), dtype=np.float32), role)


@dataclass(frozen=True, eq=False)
class BinaryMap:
    """``height x width`` boolean grid."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=bool, order="C")
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionError(f"map data must be a non-empty 2-D array, got shape {arr.shape}")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, BinaryMap):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.data, other.data))

    def count(self) -> int:
        return int(np.count_nonzero(self.data))

    def to_float(self) -> FloatMap:
        return FloatMap(self.data.astype(np.float32))


def _check_dims(height: int, width: int) -> None:
    if height < 1 or width < 1:
        raise DimensionError(f"map dimensions must be positive, got {height}x{width}")


def rasterize_mask(polys: Iterable[Polygon], height: int, width: int) -> np.ndarray:
    """Boolean array version of :func:`rasterize_polygon`."""
    _check_dims(height, width)
    mask = np.zeros((height, width), dtype=bool)
    for poly in polys:
        # Each polygon is filled on its own so overlaps OR rather than cancel.
        fill_ring(mask, poly.points)
    return mask


def rasterize_polygon(polys: Iterable[Polygon], height: int, width: int) -> BinaryMap:
    """Union of the polygons sampled at pixel centers ``(j + .5, i + .5)``."""
    return BinaryMap(rasterize_mask(polys, height, width))


def band_values(poly: Polygon, D: float, region: np.ndarray) -> np.ndarray:
    """``clip(1 - dist / D, 0, 1)`` at the pixel centers selected by ``region``."""
    rows, cols = np.nonzero(region)
    centers = np.column_stack([cols + 0.5, rows + 0.5])
    dist = boundary_distance(centers, poly)
    return np.clip(1.0 - dist / D, 0.0, 1.0)


def distance_band(poly: Polygon, D: float, height: int, width: int) -> FloatMap:
    """Ramp that is 1 on the polygon boundary and falls to 0 at distance ``D``.

    Only pixels inside the polygon dilated by ``D`` are filled; the rest are 0.
    """
    if not D > 0:
        raise InvalidParameter(f"band width D must be > 0, got {D}")
    dilated = rasterize_mask(offset_polygon(poly, D), height, width)
    out = np.zeros((height, width), dtype=np.float64)
    out[dilated] = band_values(poly, D, dilated)
    return FloatMap(out)


def fmap_bytes(fmap: FloatMap) -> bytes:
    h, w = fmap.shape
    return _HEADER.pack(FMAP_MAGIC, h, w) + fmap.data.astype("<f4", copy=False).tobytes()


def fmap_write(fmap: FloatMap, path: str | os.PathLike) -> None:
    """Write atomically (temp file + rename)."""
    payload = fmap_bytes(fmap)
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def fmap_parse(blob: bytes, role: str = PROBABILITY) -> FloatMap:
    if len(blob) < _HEADER.size:
        raise FormatError(f"FMAP header truncated ({len(blob)} bytes)")
    magic, h, w = _HEADER.unpack_from(blob)
    if magic != FMAP_MAGIC:
        raise FormatError(f"bad FMAP magic {magic!r}")
    if h == 0 or w == 0:
        raise FormatError(f"FMAP dimensions must be positive, got {h}x{w}")
    if h * w > MAX_PIXELS:
        raise FormatError(f"FMAP dimensions {h}x{w} exceed the {MAX_PIXELS}-pixel limit")
    expected = _HEADER.size + 4 * h * w
    if len(blob) < expected:
        raise FormatError(f"FMAP payload truncated: {len(blob) - _HEADER.size} of {4 * h * w} bytes")
    if len(blob) > expected:
        raise FormatError(f"FMAP has {len(blob) - expected} trailing bytes")
    data = np.frombuffer(blob, dtype="<f4", count=h * w, offset=_HEADER.size).reshape(h, w)
    try:
        return FloatMap(data, role)
    except (RangeError, DimensionError) as exc:
        raise FormatError(str(exc)) from exc


def fmap_read(path: str | os.PathLike, role: str = PROBABILITY) -> FloatMap:
    with open(path, "rb") as fh:
        return fmap_parse(fh.read(), role)


def to_gray8(fmap: FloatMap) -> np.ndarray:
    v = np.asarray(fmap.data, dtype=np.float64)
    if v.min() < 0.0 or v.max() > 1.0:
        raise RangeError("PNG export needs values in [0, 1]")
    # Round half up so 0.5 -> 128.
    return np.floor(255.0 * v + 0.5).astype(np.uint8)


def png_export(fmap: FloatMap, path: str | os.PathLike) -> None:
    """8-bit grayscale PNG with ``pixel = round(255 * v)``."""
    Image.fromarray(to_gray8(fmap)).save(path, format="PNG")
