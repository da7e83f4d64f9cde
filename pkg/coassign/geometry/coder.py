"""Regression-target encodings used by the assigners.

Two parameterizations are supported:

* ltrb distances from a point to the four sides of a box, with the FCOS
  centerness quality target;
* anchor-relative deltas ``(dx, dy, dw, dh)`` without mean/std scaling, so
  :func:`decode_deltas` is the exact inverse of :func:`encode_deltas`.
"""
import math
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np

from coassign.errors import InvalidInputError
from coassign.geometry.boxes import Box, as_boxes

BoxInput = Union[Box, Sequence[float]]


@dataclass(frozen=True)
class LtrbTarget:
    l: float
    t: float
    r: float
    b: float
    centerness: float

    def as_array(self) -> np.ndarray:
        return np.array([self.l, self.t, self.r, self.b], dtype=np.float64)


@dataclass(frozen=True)
class DeltaTarget:
    dx: float
    dy: float
    dw: float
    dh: float

    def as_array(self) -> np.ndarray:
        return np.array([self.dx, self.dy, self.dw, self.dh], dtype=np.float64)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> 'DeltaTarget':
        dx, dy, dw, dh = (float(v) for v in values)
        return cls(dx, dy, dw, dh)


def _to_box(box: BoxInput) -> Box:
    return box if isinstance(box, Box) else Box.from_array(box)


def ltrb_distances(points: np.ndarray, boxes: np.ndarray) -> np.ndarray:
    """Distances from every point to the sides of every box.

    Args:
        points: (P, 2) array of (x, y).
        boxes: (G, 4) corner-form boxes.

    Returns:
        (P, G, 4) array of (l, t, r, b); negative where the point is outside.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    xs = points[:, 0][:, None]
    ys = points[:, 1][:, None]
    return np.stack([
        xs - boxes[None, :, 0],
        ys - boxes[None, :, 1],
        boxes[None, :, 2] - xs,
        boxes[None, :, 3] - ys,
    ], axis=-1)


def centerness_from_ltrb(ltrb: np.ndarray) -> np.ndarray:
    """FCOS centerness for ``(..., 4)`` ltrb distances; 0 where any side <= 0."""
    ltrb = np.asarray(ltrb, dtype=np.float64)
    l, t, r, b = (ltrb[..., k] for k in range(4))
    valid = (l > 0) & (t > 0) & (r > 0) & (b > 0)
    lr_max = np.where(valid, np.maximum(l, r), 1.0)
    tb_max = np.where(valid, np.maximum(t, b), 1.0)
    ratio = np.minimum(l, r) / lr_max * (np.minimum(t, b) / tb_max)
    return np.where(valid, np.sqrt(np.clip(ratio, 0.0, None)), 0.0)


def encode_ltrb(point: Tuple[float, float], gt: BoxInput) -> LtrbTarget:
    """Encode a point strictly inside ``gt`` as ltrb distances plus centerness."""
    gt = _to_box(gt)
    x, y = float(point[0]), float(point[1])
    l, t, r, b = x - gt.x1, y - gt.y1, gt.x2 - x, gt.y2 - y
    if min(l, t, r, b) <= 0:
        raise InvalidInputError(
            f'point ({x}, {y}) is not strictly inside box {gt.as_list()}')
    centerness = math.sqrt((min(l, r) / max(l, r)) * (min(t, b) / max(t, b)))
    return LtrbTarget(l, t, r, b, centerness)


def deltas_from_boxes(anchors: np.ndarray, gts: np.ndarray) -> np.ndarray:
    """Row-wise anchor-relative deltas for aligned (N, 4) arrays."""
    anchors = as_boxes(anchors, 'anchors')
    gts = as_boxes(gts, 'gts')
    if anchors.shape != gts.shape:
        raise InvalidInputError(f'anchors {anchors.shape} and gts {gts.shape} must align')
    aw = anchors[:, 2] - anchors[:, 0]
    ah = anchors[:, 3] - anchors[:, 1]
    gw = gts[:, 2] - gts[:, 0]
    gh = gts[:, 3] - gts[:, 1]
    if np.any(aw <= 0) or np.any(ah <= 0):
        bad = int(np.flatnonzero((aw <= 0) | (ah <= 0))[0])
        raise InvalidInputError(f'anchor {anchors[bad].tolist()} has zero size')
    if np.any(gw <= 0) or np.any(gh <= 0):
        bad = int(np.flatnonzero((gw <= 0) | (gh <= 0))[0])
        raise InvalidInputError(f'gt {gts[bad].tolist()} has zero size; dw/dh undefined')
    acx = anchors[:, 0] + 0.5 * aw
    acy = anchors[:, 1] + 0.5 * ah
    gcx = gts[:, 0] + 0.5 * gw
    gcy = gts[:, 1] + 0.5 * gh
    return np.stack([(gcx - acx) / aw, (gcy - acy) / ah, np.log(gw / aw), np.log(gh / ah)], axis=-1)


def boxes_from_deltas(anchors: np.ndarray, deltas: np.ndarray) -> np.ndarray:
    """Inverse of :func:`deltas_from_boxes`."""
    anchors = as_boxes(anchors, 'anchors')
    deltas = np.asarray(deltas, dtype=np.float64).reshape(-1, 4)
    aw = anchors[:, 2] - anchors[:, 0]
    ah = anchors[:, 3] - anchors[:, 1]
    if np.any(aw <= 0) or np.any(ah <= 0):
        raise InvalidInputError('cannot decode deltas against a zero-size anchor')
    cx = anchors[:, 0] + 0.5 * aw + deltas[:, 0] * aw
    cy = anchors[:, 1] + 0.5 * ah + deltas[:, 1] * ah
    w = aw * np.exp(deltas[:, 2])
    h = ah * np.exp(deltas[:, 3])
    return np.stack([cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h], axis=-1)


def encode_deltas(anchor: BoxInput, gt: BoxInput) -> DeltaTarget:
    """Delta target ``(dx, dy, dw, dh)`` of ``gt`` relative to ``anchor``."""
    deltas = deltas_from_boxes(_to_box(anchor).as_array()[None], _to_box(gt).as_array()[None])
    return DeltaTarget.from_array(deltas[0])


def decode_deltas(anchor: BoxInput, delta: Union[DeltaTarget, Sequence[float]]) -> Box:
    """Apply ``delta`` to ``anchor``; exact inverse of :func:`encode_deltas`."""
    values = delta.as_array() if isinstance(delta, DeltaTarget) else np.asarray(delta, dtype=np.float64)
    return Box.from_array(boxes_from_deltas(_to_box(anchor).as_array()[None], values[None])[0])
