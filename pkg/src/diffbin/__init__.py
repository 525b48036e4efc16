"""Differentiable-binarization text detection core: labels, losses and box formation."""

__version__ = "0.1.0"

from .boxform import (
    BoxformParams,
    Detection,
    connected_components,
    form_boxes,
    min_area_rect,
)
from .dbcore import (
    DbParams,
    LossReport,
    bce_hard_neg,
    db_loss_grads,
    db_map,
    standard_binarize,
    total_loss,
)
from .errors import (
    DegenerateGeometry,
    DiffBinError,
    DimensionError,
    FormatError,
    InputError,
    InvalidParameter,
    PlacementError,
    RangeError,
)
from .evaluation import EvalReport, evaluate, match_detections
from .geometry import Point, Polygon, offset_polygon, shrink_offset, unclip_offset
from .labelgen import Annotation, LabelSet, generate_labels
from .maps import BinaryMap, FloatMap, fmap_read, fmap_write
from .synth import SceneSpec, gen_scene

__all__ = [
    "BoxformParams",
    "Detection",
    "connected_components",
    "form_boxes",
    "min_area_rect",
    "DbParams",
    "LossReport",
    "bce_hard_neg",
    "db_loss_grads",
    "db_map",
    "standard_binarize",
    "total_loss",
    "DegenerateGeometry",
    "DiffBinError",
    "DimensionError",
    "FormatError",
    "InputError",
    "InvalidParameter",
    "PlacementError",
    "RangeError",
    "EvalReport",
    "evaluate",
    "match_detections",
    "Point",
    "Polygon",
    "offset_polygon",
    "shrink_offset",
    "unclip_offset",
    "Annotation",
    "LabelSet",
    "generate_labels",
    "BinaryMap",
    "FloatMap",
    "fmap_read",
    "fmap_write",
    "SceneSpec",
    "gen_scene",
]
