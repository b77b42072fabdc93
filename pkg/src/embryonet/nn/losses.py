"""Losses returning both value and gradient w.r.t. the prediction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DistributionError, ShapeError
from .layers import log_softmax, sigmoid


@dataclass(frozen=True)
class LossValue:
    value: float
    gradient: np.ndarray


def l2_loss(pred, target) -> LossValue:
    """Mean squared error over all elements."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError("l2_loss needs equal shapes", pred.shape, target.shape)
    diff = pred - target
    return LossValue(float(np.mean(diff * diff)), 2.0 * diff / diff.size)


def softmax_cross_entropy(logits, target, atol: float = 1e-9) -> LossValue:
    """Cross-entropy between ``softmax(logits)`` and a target distribution.

    Works on a single vector or a batch along the last axis; a batch loss is
    the mean over rows and its gradient is scaled to match.
    """
    logits = np.asarray(logits, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if logits.shape != target.shape:
        raise ShapeError("logits and target differ in shape", logits.shape, target.shape)
    if np.any(target < 0) or np.any(np.abs(target.sum(axis=-1) - 1.0) > atol):
        raise DistributionError("target must be nonnegative and sum to 1")
    logp = log_softmax(logits)
    rows = target.size // target.shape[-1]
    value = -float(np.sum(target * logp)) / rows
    return LossValue(value, (np.exp(logp) - target) / rows)


def binary_cross_entropy(logit, label, weight=1.0) -> LossValue:
    """Logistic loss on raw logits, stable for arbitrarily large ``|logit|``.

    ``label`` is 0/1 (scalar or array); ``weight`` scales each example.
    For arrays the value is the weighted mean over examples.
    """
    x = np.asarray(logit, dtype=np.float64)
    y = np.asarray(label)
    if y.dtype.kind not in "biuf":
        raise TypeError(f"label must be numeric 0/1, got dtype {y.dtype}")
    if np.any((y != 0) & (y != 1)):
        raise ValueError("label must be 0 or 1")
    y = y.astype(np.float64)
    if x.shape != y.shape:
        raise ShapeError("logit and label differ in shape", x.shape, y.shape)
    w = np.broadcast_to(np.asarray(weight, dtype=np.float64), x.shape)
    per = np.maximum(x, 0.0) - x * y + np.log1p(np.exp(-np.abs(x)))
    n = max(x.size, 1)
    value = float(np.sum(w * per)) / n
    grad = w * (sigmoid(x) - y) / n
    return LossValue(value, grad)
