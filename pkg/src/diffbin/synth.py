"""Seeded synthetic scenes with known ground truth.

Randomness comes from SplitMix64 so scenes can be regenerated bit-for-bit in
any language:

    state <- (state + 0x9E3779B97F4A7C15) mod 2**64
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 mod 2**64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB mod 2**64
    out = z ^ (z >> 31)

The seed is the initial state.  Uniform doubles are ``(out >> 11) * 2**-53``.
Normals use one Box-Muller draw per pair of uniforms,
``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)``.  Draw order inside :func:`gen_scene`:
per placement attempt ``w, h``, then ``angle`` (rotated kinds only), then the
vertex count and vertex angles (convex polygons only), then ``cx, cy``; after
all regions, the noise field in row-major order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter, PlacementError
from .geometry import Polygon, offset_polygon, polygon_gap, shrink_offset
from .labelgen import (
    DEFAULT_SHRINK_RATIO,
    DEFAULT_T_MAX,
    DEFAULT_T_MIN,
    Annotation,
    LabelSet,
    generate_labels,
)
from .maps import FloatMap

_MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

SHAPE_KINDS = ("axis_rect", "rotated_rect", "convex_polygon")


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _M1) & _MASK64
    z = ((z ^ (z >> 27)) * _M2) & _MASK64
    return z ^ (z >> 31)


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GAMMA) & _MASK64
        return _mix(self.state)

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        return lo + (hi - lo) * ((self.next_u64() >> 11) * 2.0**-53)

    def u64_array(self, n: int) -> np.ndarray:
        """The next ``n`` outputs, identical to ``n`` calls of :meth:`next_u64`."""
        steps = np.arange(1, n + 1, dtype=np.uint64)
        z = np.uint64(self.state) + steps * np.uint64(GAMMA)
        self.state = (self.state + n * GAMMA) & _MASK64
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
        return z ^ (z >> np.uint64(31))

    def uniforms(self, n: int) -> np.ndarray:
        return (self.u64_array(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normals(self, n: int) -> np.ndarray:
        u = self.uniforms(2 * n).reshape(n, 2)
        return np.sqrt(-2.0 * np.log1p(-u[:, 0])) * np.cos(2.0 * math.pi * u[:, 1])


@dataclass(frozen=True)
class SceneSpec:
    seed: int = 0
    height: int = 512
    width: int = 512
    num_regions: int = 5
    shape_kind: str = "rotated_rect"
    side_range: tuple[float, float] = (40.0, 120.0)
    min_gap: float = 10.0
    noise_sigma: float = 0.0
    max_tries: int = 1000

    def __post_init__(self):
        if self.shape_kind not in SHAPE_KINDS:
            raise InvalidParameter(f"shape_kind must be one of {SHAPE_KINDS}, got {self.shape_kind!r}")
        lo, hi = self.side_range
        if lo < 10 or hi < lo:
            raise InvalidParameter(f"side_range needs 10 <= min <= max, got {self.side_range}")
        if self.min_gap < 0 or self.noise_sigma < 0 or self.num_regions < 0:
            raise InvalidParameter("min_gap, noise_sigma and num_regions must be >= 0")
        if self.height < 1 or self.width < 1:
            raise InvalidParameter("canvas dimensions must be positive")


@dataclass(frozen=True)
class Scene:
    spec: SceneSpec
    annotations: list[Annotation]
    ideal_p: FloatMap
    labels: LabelSet


def _shape_at_origin(rng: SplitMix64, spec: SceneSpec) -> np.ndarray | None:
    lo, hi = spec.side_range
    w = rng.uniform(lo, hi)
    h = rng.uniform(lo, hi)
    angle = 0.0 if spec.shape_kind == "axis_rect" else rng.uniform(0.0, math.pi)
    if spec.shape_kind == "convex_polygon":
        n = 5 + int(rng.uniform(0.0, 4.0))
        thetas = np.sort([rng.uniform(0.0, 2 * math.pi) for _ in range(n)])
        gaps = np.diff(np.append(thetas, thetas[0] + 2 * math.pi))
        if gaps.max() >= math.pi * 0.9:
            return None
        pts = np.column_stack([0.5 * w * np.cos(thetas), 0.5 * h * np.sin(thetas)])
    else:
        pts = np.array([[-w, -h], [w, -h], [w, h], [-w, h]]) * 0.5
    c, s = math.cos(angle), math.sin(angle)
    return pts @ np.array([[c, s], [-s, c]])


def place_regions(spec: SceneSpec, rng: SplitMix64, r: float = DEFAULT_SHRINK_RATIO) -> list[Polygon]:
    """Polygons whose D-dilations fit the canvas and stay ``min_gap`` apart."""
    placed: list[Polygon] = []
    dilated: list[Polygon] = []
    for idx in range(spec.num_regions):
        for _ in range(spec.max_tries):
            pts = _shape_at_origin(rng, spec)
            cx_u, cy_u = rng.uniform(), rng.uniform()
            if pts is None:
                continue
            base = Polygon(pts)
            grown = offset_polygon(base, shrink_offset(base, r))
            x0, y0, x1, y1 = grown[0].bounds
            if x1 - x0 > spec.width or y1 - y0 > spec.height:
                continue
            cx = -x0 + cx_u * (spec.width - (x1 - x0))
            cy = -y0 + cy_u * (spec.height - (y1 - y0))
            # Quantize so the 2-decimal annotation file reproduces the polygon exactly.
            poly = Polygon(np.round(base.points + (cx, cy), 2))
            grown = offset_polygon(poly, shrink_offset(poly, r))[0]
            if all(polygon_gap(grown, other) >= spec.min_gap for other in dilated):
                placed.append(poly)
                dilated.append(grown)
                break
        else:
            raise PlacementError(
                f"could not place region {idx + 1} of {spec.num_regions} after {spec.max_tries} tries"
            )
    return placed


def gen_scene(
    spec: SceneSpec,
    r: float = DEFAULT_SHRINK_RATIO,
    t_min: float = DEFAULT_T_MIN,
    t_max: float = DEFAULT_T_MAX,
) -> Scene:
    """Annotations, a perfectly trained probability map, and the matching labels.

    The ideal map is 1 on the shrunk kernels and 0 elsewhere, plus optional
    Gaussian noise clamped to [0, 1].  Noise never touches the labels.
    """
    rng = SplitMix64(spec.seed)
    polys = place_regions(spec, rng, r)
    annots = [Annotation(p, text=f"region{i}") for i, p in enumerate(polys)]
    labels = generate_labels(annots, spec.height, spec.width, r, t_min, t_max)
    p = labels.prob_label.data.astype(np.float64)
    if spec.noise_sigma > 0:
        noise = rng.normals(spec.height * spec.width).reshape(spec.height, spec.width)
        p = np.clip(p + spec.noise_sigma * noise, 0.0, 1.0)
    return Scene(spec, annots, FloatMap(p), labels)


def suite_specs(
    seed: int,
    count: int,
    region_range: tuple[int, int] = (3, 8),
    **fields,
) -> list[SceneSpec]:
    """``count`` scene specs with per-scene seeds and region counts drawn from ``seed``."""
    lo, hi = region_range
    if not 0 <= lo <= hi:
        raise InvalidParameter(f"bad region range {region_range}")
    rng = SplitMix64(seed)
    specs = []
    for _ in range(count):
        scene_seed = rng.next_u64()
        n = lo + rng.next_u64() % (hi - lo + 1)
        specs.append(SceneSpec(seed=scene_seed, num_regions=n, **fields))
    return specs
