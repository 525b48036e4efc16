"""IoU-matched precision / recall / F-measure for text detections."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .boxform import Detection
from .errors import InputError, InvalidParameter
from .geometry import Polygon, polygon_iou
from .labelgen import Annotation


@dataclass(frozen=True)
class EvalReport:
    precision: float
    recall: float
    fmeasure: float
    matches: int
    num_dets: int
    num_gts: int

    def line(self) -> str:
        return f"P={self.precision:.4f} R={self.recall:.4f} F={self.fmeasure:.4f}"

    def block(self) -> str:
        return "\n".join(
            [
                f"precision: {self.precision:.4f}",
                f"recall: {self.recall:.4f}",
                f"fmeasure: {self.fmeasure:.4f}",
                f"matches: {self.matches}",
                f"num_dets: {self.num_dets}",
                f"num_gts: {self.num_gts}",
            ]
        )


@dataclass
class Matching:
    pairs: list[tuple[int, int]] = field(default_factory=list)  # (det index, gt index)
    ious: list[float] = field(default_factory=list)
    discarded: list[int] = field(default_factory=list)  # dets absorbed by don't-care GTs
    num_dets: int = 0
    num_gts: int = 0


def _bbox_overlap(a: Polygon, b: Polygon) -> bool:
    ax0, ay0, ax1, ay1 = a.bounds
    bx0, by0, bx1, by1 = b.bounds
    return ax0 < bx1 and bx0 < ax1 and ay0 < by1 and by0 < ay1


def _iou(a: Polygon, b: Polygon) -> float:
    return polygon_iou(a, b) if _bbox_overlap(a, b) else 0.0


def match_detections(
    dets: Sequence[Detection], gts: Sequence[Annotation], iou_thresh: float = 0.5
) -> Matching:
    """Greedy one-to-one matching in descending score order.

    A detection whose best overlap (at or above ``iou_thresh``) is with a
    don't-care GT is discarded and counts neither as hit nor as false alarm.
    """
    if not 0.0 < iou_thresh <= 1.0:
        raise InvalidParameter(f"iou_thresh must lie in (0, 1], got {iou_thresh}")
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    taken = [False] * len(gts)
    result = Matching(num_gts=sum(not g.ignore for g in gts))
    for di in order:
        ious = [_iou(dets[di].polygon, g.polygon) for g in gts]
        if ious:
            top = max(range(len(gts)), key=lambda g: ious[g])
            if gts[top].ignore and ious[top] >= iou_thresh:
                result.discarded.append(di)
                continue
        eligible = [
            gi for gi, g in enumerate(gts) if not g.ignore and not taken[gi] and ious[gi] >= iou_thresh
        ]
        if eligible:
            best = max(eligible, key=lambda gi: (ious[gi], -gi))
            taken[best] = True
            result.pairs.append((di, best))
            result.ious.append(ious[best])
    result.num_dets = len(dets) - len(result.discarded)
    return result


def report_from_counts(matches: int, num_dets: int, num_gts: int) -> EvalReport:
    p = matches / num_dets if num_dets else 0.0
    r = matches / num_gts if num_gts else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return EvalReport(p, r, f, matches, num_dets, num_gts)


def evaluate(dets_per_image, gts_per_image, iou_thresh: float = 0.5) -> EvalReport:
    """Micro-averaged report over images.

    Both arguments are either sequences aligned by position or mappings keyed by
    image id; mismatched ids raise :class:`InputError`.
    """
    if isinstance(dets_per_image, Mapping) or isinstance(gts_per_image, Mapping):
        if not (isinstance(dets_per_image, Mapping) and isinstance(gts_per_image, Mapping)):
            raise InputError("detections and ground truth must both be mappings or both sequences")
        if set(dets_per_image) != set(gts_per_image):
            missing = sorted(set(dets_per_image) ^ set(gts_per_image), key=str)
            raise InputError(f"image ids differ between detections and ground truth: {missing}")
        keys = sorted(dets_per_image, key=str)
        pairs = [(dets_per_image[k], gts_per_image[k]) for k in keys]
    else:
        if len(dets_per_image) != len(gts_per_image):
            raise InputError(
                f"{len(dets_per_image)} detection images vs {len(gts_per_image)} ground-truth images"
            )
        pairs = list(zip(dets_per_image, gts_per_image))
    matches = n_dets = n_gts = 0
    for dets, gts in pairs:
        m = match_detections(dets, gts, iou_thresh)
        matches += len(m.pairs)
        n_dets += m.num_dets
        n_gts += m.num_gts
    return report_from_counts(matches, n_dets, n_gts)
