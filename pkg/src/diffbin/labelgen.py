"""Training labels from text polygons: shrunk kernel, border threshold ramp, masks."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateGeometry, DiffBinError, FormatError, InvalidParameter
from .geometry import Polygon, offset_polygon, shrink_offset
from .maps import BinaryMap, FloatMap, band_values, rasterize_mask

DEFAULT_SHRINK_RATIO = 0.4
DEFAULT_T_MIN = 0.3
DEFAULT_T_MAX = 0.7
IGNORE_TEXT = "###"


class LabelWarning(UserWarning):
    """An annotation was skipped during ingestion or label generation."""


@dataclass(frozen=True)
class Annotation:
    polygon: Polygon
    ignore: bool = False
    text: str = ""

    def __post_init__(self):
        if not isinstance(self.polygon, Polygon):
            object.__setattr__(self, "polygon", Polygon(self.polygon))
        if not self.polygon.is_simple():
            raise DegenerateGeometry("annotation polygon is self-intersecting")


@dataclass(frozen=True)
class LabelSet:
    prob_label: BinaryMap
    thresh_label: FloatMap
    band_mask: BinaryMap
    train_mask: BinaryMap

    def __post_init__(self):
        shapes = {m.shape for m in (self.prob_label, self.thresh_label, self.band_mask, self.train_mask)}
        if len(shapes) != 1:
            raise InvalidParameter(f"label maps disagree on shape: {sorted(shapes)}")


def _check_r(r: float) -> None:
    if not 0.0 < r < 1.0:
        raise InvalidParameter(f"shrink ratio must lie in (0, 1), got {r}")


def _kernel_and_band(poly: Polygon, r: float, height: int, width: int):
    """Rasterized shrunk kernel, the border band between kernel and dilation, and D."""
    D = shrink_offset(poly, r)
    kernel = rasterize_mask(offset_polygon(poly, -D), height, width)
    dilated = rasterize_mask(offset_polygon(poly, D), height, width)
    return kernel, dilated & ~kernel, D


def _active(annots: Iterable[Annotation]):
    for idx, ann in enumerate(annots):
        if not ann.ignore:
            yield idx, ann


def gen_prob_label(
    annots: Sequence[Annotation], height: int, width: int, r: float = DEFAULT_SHRINK_RATIO
) -> BinaryMap:
    """Union of the shrunk polygons of all non-ignored annotations."""
    _check_r(r)
    out = np.zeros((height, width), dtype=bool)
    for idx, ann in _active(annots):
        try:
            D = shrink_offset(ann.polygon, r)
            out |= rasterize_mask(offset_polygon(ann.polygon, -D), height, width)
        except DiffBinError as exc:
            warnings.warn(f"annotation {idx} skipped: {exc}", LabelWarning, stacklevel=2)
    return BinaryMap(out)


def gen_thresh_label(
    annots: Sequence[Annotation],
    height: int,
    width: int,
    r: float = DEFAULT_SHRINK_RATIO,
    t_min: float = DEFAULT_T_MIN,
    t_max: float = DEFAULT_T_MAX,
) -> tuple[FloatMap, BinaryMap]:
    """Border threshold ramp and its footprint.

    For every non-ignored polygon the band is its D-dilation minus its shrunk
    kernel.  Inside the band the label is ``t_min + (t_max - t_min) * (1 - d/D)``
    clipped at ``t_min``, with ``d`` the distance to the polygon boundary.
    Overlapping bands keep the per-pixel maximum; outside every band the label is 0.
    """
    _check_r(r)
    if not 0.0 <= t_min < t_max <= 1.0:
        raise InvalidParameter(f"need 0 <= t_min < t_max <= 1, got {t_min}, {t_max}")
    label = np.zeros((height, width), dtype=np.float64)
    footprint = np.zeros((height, width), dtype=bool)
    for idx, ann in _active(annots):
        try:
            _, band, D = _kernel_and_band(ann.polygon, r, height, width)
        except DiffBinError as exc:
            warnings.warn(f"annotation {idx} skipped: {exc}", LabelWarning, stacklevel=2)
            continue
        if not band.any():
            continue
        vals = t_min + band_values(ann.polygon, D, band) * (t_max - t_min)
        label[band] = np.maximum(label[band], vals)
        footprint |= band
    return FloatMap(label), BinaryMap(footprint)


def gen_train_mask(annots: Sequence[Annotation], height: int, width: int) -> BinaryMap:
    """All ones except over the (unshrunk) footprint of ignored annotations."""
    ignored = rasterize_mask([a.polygon for a in annots if a.ignore], height, width)
    return BinaryMap(~ignored)


def generate_labels(
    annots: Sequence[Annotation],
    height: int,
    width: int,
    r: float = DEFAULT_SHRINK_RATIO,
    t_min: float = DEFAULT_T_MIN,
    t_max: float = DEFAULT_T_MAX,
) -> LabelSet:
    thresh, band = gen_thresh_label(annots, height, width, r, t_min, t_max)
    return LabelSet(
        prob_label=gen_prob_label(annots, height, width, r),
        thresh_label=thresh,
        band_mask=band,
        train_mask=gen_train_mask(annots, height, width),
    )


def parse_annotation_line(line: str, lineno: int = 0) -> Annotation:
    """Parse ``x1,y1,...,xn,yn,transcription``; ``###`` marks a don't-care region.

    Raises :class:`FormatError` (naming the line) on malformed input and
    :class:`DegenerateGeometry` when the coordinates do not form a valid polygon.
    """
    fields = line.rstrip("\r\n").split(",")
    if len(fields) < 2:
        raise FormatError(f"line {lineno}: expected coordinates followed by a transcription")
    *coords, text = fields
    try:
        values = [float(c) for c in coords]
    except ValueError:
        raise FormatError(f"line {lineno}: non-numeric coordinate in {line.strip()!r}") from None
    if len(values) % 2:
        raise FormatError(f"line {lineno}: odd number of coordinates ({len(values)})")
    if len(values) < 6:
        raise FormatError(f"line {lineno}: need at least 3 vertices, got {len(values) // 2}")
    text = text.strip()
    try:
        return Annotation(np.asarray(values).reshape(-1, 2), ignore=text == IGNORE_TEXT, text=text)
    except DegenerateGeometry as exc:
        raise DegenerateGeometry(f"line {lineno}: {exc}") from None


def parse_annotations(text: str) -> list[Annotation]:
    """Parse a whole annotation file body.

    Blank lines are skipped.  Degenerate or self-intersecting polygons are
    dropped with a :class:`LabelWarning`; syntax errors raise :class:`FormatError`.
    """
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            out.append(parse_annotation_line(line, lineno))
        except DegenerateGeometry as exc:
            warnings.warn(f"{exc} (skipped)", LabelWarning, stacklevel=2)
    return out


def read_annotations(path) -> list[Annotation]:
    with open(path, encoding="utf-8-sig") as fh:
        return parse_annotations(fh.read())


def format_annotation(ann: Annotation, decimals: int = 2) -> str:
    coords = ",".join(f"{v:.{decimals}f}" for v in ann.polygon.points.ravel())
    text = IGNORE_TEXT if ann.ignore else (ann.text or "text")
    return f"{coords},{text}"
