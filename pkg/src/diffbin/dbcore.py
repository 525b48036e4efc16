"""Binarization math: hard threshold, differentiable binarization and training losses."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .errors import DimensionError, InvalidParameter
from .maps import BinaryMap, FloatMap

PRED_EPS = 1e-7
# Negatives sampled from images that have no positive pixels at all.
MAX_NEGATIVES_NO_POSITIVES = 10000
GRAD_CUTOFF = 1e-6


@dataclass(frozen=True)
class DbParams:
    k: float = 50.0
    alpha: float = 1.0
    beta: float = 10.0
    neg_ratio: float = 3.0
    const_thresh: float = 0.2

    def __post_init__(self):
        if not self.k > 0:
            raise InvalidParameter(f"k must be > 0, got {self.k}")
        if self.alpha < 0 or self.beta < 0:
            raise InvalidParameter("alpha and beta must be >= 0")
        if not self.neg_ratio > 0:
            raise InvalidParameter(f"neg_ratio must be > 0, got {self.neg_ratio}")
        if not 0.0 < self.const_thresh < 1.0:
            raise InvalidParameter(f"const_thresh must lie in (0, 1), got {self.const_thresh}")


@dataclass(frozen=True)
class LossReport:
    l_s: float
    l_b: float
    l_t: float
    total: float
    sampled_negatives: int
    positives: int


def _arr(m, dtype=np.float64) -> np.ndarray:
    return np.asarray(m.data if isinstance(m, (FloatMap, BinaryMap)) else m, dtype=dtype)


def _same_shape(*maps) -> None:
    shapes = {np.shape(_arr(m)) for m in maps}
    if len(shapes) != 1:
        raise DimensionError(f"map dimensions differ: {sorted(shapes)}")


def sigmoid(z):
    """Overflow-free logistic function."""
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def standard_binarize(P, t: float) -> BinaryMap:
    """1 where ``P >= t``."""
    return BinaryMap(_arr(P) >= t)


def db_map(P, T, k: float = 50.0) -> FloatMap:
    """Approximate binary map ``1 / (1 + exp(-k (P - T)))``."""
    if not k > 0:
        raise InvalidParameter(f"k must be > 0, got {k}")
    _same_shape(P, T)
    return FloatMap(sigmoid(k * (_arr(P) - _arr(T))))


def db_loss_grads(x, k: float = 50.0):
    """Derivatives of ``l+ = -log f(x)`` and ``l- = -log(1 - f(x))`` with ``f(x) = sigmoid(kx)``.

    ``-k f(x) e^{-kx}`` is rewritten as ``-k sigmoid(-kx)`` so it stays finite
    for large ``|kx|``.  Scalars in, scalars out; arrays broadcast.
    """
    kx = k * np.asarray(x, dtype=np.float64)
    dl_pos = -k * sigmoid(-kx)
    dl_neg = k * sigmoid(kx)
    if dl_pos.ndim == 0:
        return float(dl_pos), float(dl_neg)
    return dl_pos, dl_neg


def loss_pos(x, k: float):
    """``-log sigmoid(kx)`` evaluated as ``softplus(-kx)``."""
    return np.logaddexp(0.0, -k * np.asarray(x, dtype=np.float64))


def loss_neg(x, k: float):
    """``-log(1 - sigmoid(kx))`` evaluated as ``softplus(kx)``."""
    return np.logaddexp(0.0, k * np.asarray(x, dtype=np.float64))


def finite_diff_check(
    k: float,
    xs: Iterable[float],
    h: float = 1e-5,
    grad_fn: Callable = db_loss_grads,
) -> float:
    """Max relative error between ``grad_fn`` and central differences of the losses.

    Gradients with magnitude at or below ``1e-6`` are skipped.
    """
    if not 1e-8 < h < 1e-2:
        raise InvalidParameter(f"step h must lie in (1e-8, 1e-2), got {h}")
    xs = np.asarray(list(xs), dtype=np.float64)
    dl_pos, dl_neg = grad_fn(xs, k)
    fd_pos = (loss_pos(xs + h, k) - loss_pos(xs - h, k)) / (2 * h)
    fd_neg = (loss_neg(xs + h, k) - loss_neg(xs - h, k)) / (2 * h)
    worst = 0.0
    for analytic, numeric in ((np.asarray(dl_pos), fd_pos), (np.asarray(dl_neg), fd_neg)):
        keep = np.abs(analytic) > GRAD_CUTOFF
        if keep.any():
            rel = np.abs(analytic[keep] - numeric[keep]) / np.abs(analytic[keep])
            worst = max(worst, float(rel.max()))
    return worst


def sample_hard_negatives(pred, label, train_mask, neg_ratio: float = 3.0):
    """Flat indices of the positives and of the mined hard negatives.

    Negatives are ranked by predicted value, highest first, ties broken by the
    lower linear pixel index.  With no positives, up to 10000 negatives are kept.
    """
    p = _arr(pred).ravel()
    y = _arr(label, bool).ravel()
    m = _arr(train_mask, bool).ravel()
    pos = np.flatnonzero(y & m)
    neg = np.flatnonzero(~y & m)
    if pos.size:
        n_neg = min(int(math.ceil(neg_ratio * pos.size)), neg.size)
    else:
        n_neg = min(neg.size, MAX_NEGATIVES_NO_POSITIVES)
    order = np.argsort(-p[neg], kind="stable")
    return pos, neg[order[:n_neg]]


def bce_hard_neg(pred, label, train_mask, neg_ratio: float = 3.0) -> float:
    """Mean BCE over all positives plus the mined hard negatives."""
    _same_shape(pred, label, train_mask)
    pos, neg = sample_hard_negatives(pred, label, train_mask, neg_ratio)
    if pos.size + neg.size == 0:
        return 0.0
    x = np.clip(_arr(pred).ravel(), PRED_EPS, 1.0 - PRED_EPS)
    total = -np.log(x[pos]).sum() - np.log1p(-x[neg]).sum()
    return float(total / (pos.size + neg.size))


def threshold_loss(pred_T, label_T, band_mask) -> float:
    """Mean absolute error over the band pixels (0 for an empty band)."""
    _same_shape(pred_T, label_T, band_mask)
    m = _arr(band_mask, bool)
    if not m.any():
        return 0.0
    return float(np.abs(_arr(pred_T)[m] - _arr(label_T)[m]).mean())


def total_loss(P, B_hat, T_pred, labels, params: DbParams = DbParams()) -> LossReport:
    """``L_s + alpha * L_b + beta * L_t``; P and B_hat share the probability label."""
    _same_shape(P, B_hat, T_pred, labels.prob_label)
    l_s = bce_hard_neg(P, labels.prob_label, labels.train_mask, params.neg_ratio)
    l_b = bce_hard_neg(B_hat, labels.prob_label, labels.train_mask, params.neg_ratio)
    l_t = threshold_loss(T_pred, labels.thresh_label, labels.band_mask)
    pos, neg = sample_hard_negatives(P, labels.prob_label, labels.train_mask, params.neg_ratio)
    return LossReport(
        l_s=l_s,
        l_b=l_b,
        l_t=l_t,
        total=l_s + params.alpha * l_b + params.beta * l_t,
        sampled_negatives=int(neg.size),
        positives=int(pos.size),
    )
