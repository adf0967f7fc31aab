"""Shared loss primitives and the coefficient bundle.

Branch decisions (the smooth-L1 quadratic/linear split, focal's target
split) are taken on forward values and treated as constants, which is the
standard piecewise-smooth treatment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import Tensor


@dataclass(frozen=True)
class LossWeights:
    """Total-loss weights plus every sub-term coefficient."""

    point: float = 1.0
    box: float = 2.0
    aux: float = 0.05
    point_objectness: float = 0.1
    point_distance: float = 1.0
    box_cls: float = 0.1
    box_reg: float = 1.0
    reg_offset: float = 1.0
    reg_heading: float = 5.0
    reg_giou: float = 0.25
    match_cls: float = 0.1
    match_giou: float = 0.25
    focal_alpha: float = 0.25
    focal_gamma: float = 2.0

    def __post_init__(self):
        for name in ("point", "box", "aux"):
            if getattr(self, name) < 0:
                raise ValueError(f"LossWeights: {name} must be nonnegative")


def _reduce(x: Tensor, mode: str) -> Tensor:
    if mode == "mean":
        return T.tmean(x)
    if mode == "sum":
        return T.tsum(x)
    if mode == "none":
        return x
    raise ValueError(f"unknown reduction {mode!r}")


def smooth_l1(pred: Tensor, target: np.ndarray, reduction: str = "mean") -> Tensor:
    """0.5 r^2 below |r|=1, |r|-0.5 above."""
    r = T.sub(pred, Tensor(np.asarray(target, dtype=np.float64)))
    a = T.abs_(r)
    quad = a.data < 1.0
    elem = T.add(
        T.mul(T.mul(r, r), Tensor(0.5 * quad)),
        T.mul(T.sub(a, 0.5), Tensor((~quad).astype(np.float64))),
    )
    return _reduce(elem, reduction)


def bce_with_logits(logits: Tensor, targets: np.ndarray, reduction: str = "mean") -> Tensor:
    t = np.asarray(targets, dtype=np.float64)
    elem = T.neg(
        T.add(
            T.mul(T.log_sigmoid(logits), Tensor(t)),
            T.mul(T.log_sigmoid(T.neg(logits)), Tensor(1.0 - t)),
        )
    )
    return _reduce(elem, reduction)


def focal_loss(
    logits: Tensor,
    targets: np.ndarray,
    alpha: float = 0.25,
    gamma: float = 2.0,
    reduction: str = "sum",
) -> Tensor:
    """Binary focal loss; the positive count is 1 here, so sum is the default."""
    t = np.asarray(targets, dtype=np.float64)
    log_p = T.log_sigmoid(logits)
    log_not_p = T.log_sigmoid(T.neg(logits))
    # (1 - p)^gamma and p^gamma via exp(gamma * log(.)), which stays stable
    pos = T.mul(T.exp(T.mul(log_not_p, gamma)), T.neg(log_p))
    neg = T.mul(T.exp(T.mul(log_p, gamma)), T.neg(log_not_p))
    elem = T.add(T.mul(pos, Tensor(alpha * t)), T.mul(neg, Tensor((1.0 - alpha) * (1.0 - t))))
    return _reduce(elem, reduction)


def total_loss(point: Tensor, box: Tensor, aux: Tensor, weights: LossWeights) -> Tensor:
    """Weighted linear sum of the three loss components."""
    return T.add(
        T.add(T.mul(point, weights.point), T.mul(box, weights.box)),
        T.mul(aux, weights.aux),
    )
