"""Axis-aligned box types and pairwise overlap measures.

Boxes are continuous and half-open: area = (x2 - x1) * (y2 - y1), no +1
pixel convention. Array helpers work on ``(N, 4)`` float64 arrays in corner
form ``(x1, y1, x2, y2)``.
"""
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple, Union

import numpy as np

from coassign.errors import InvalidInputError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Box:
    """Corner-form box in absolute image coordinates."""
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        coords = (self.x1, self.y1, self.x2, self.y2)
        if not all(math.isfinite(float(c)) for c in coords):
            raise InvalidInputError(f'box has non-finite coordinates: {list(coords)}')
        if self.x2 < self.x1 or self.y2 < self.y1:
            raise InvalidInputError(f'box has negative extent: {list(coords)}')

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> Tuple[float, float]:
        return (self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.y1, self.x2, self.y2], dtype=np.float64)

    def as_list(self) -> list:
        return [float(self.x1), float(self.y1), float(self.x2), float(self.y2)]

    @classmethod
    def from_array(cls, values: Sequence[float]) -> 'Box':
        x1, y1, x2, y2 = (float(v) for v in values)
        return cls(x1, y1, x2, y2)


@dataclass(frozen=True)
class CenterBox:
    """Center-size box ``(cx, cy, w, h)``."""
    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        values = (self.cx, self.cy, self.w, self.h)
        if not all(math.isfinite(float(v)) for v in values):
            raise InvalidInputError(f'center box has non-finite values: {list(values)}')
        if self.w < 0 or self.h < 0:
            raise InvalidInputError(f'center box has negative size: {list(values)}')

    def as_array(self) -> np.ndarray:
        return np.array([self.cx, self.cy, self.w, self.h], dtype=np.float64)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> 'CenterBox':
        cx, cy, w, h = (float(v) for v in values)
        return cls(cx, cy, w, h)


BoxesLike = Union[np.ndarray, Iterable[Box], Iterable[Sequence[float]]]


def validate_boxes(boxes: np.ndarray, what: str = 'boxes') -> np.ndarray:
    """Check an ``(N, 4)`` corner-form array and return it as float64."""
    arr = np.asarray(boxes, dtype=np.float64)
    if arr.size == 0:
        return arr.reshape(0, 4)
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise InvalidInputError(f'{what} must have shape (N, 4), got {arr.shape}')
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(arr), axis=1))[0])
        raise InvalidInputError(f'{what}[{bad}] has non-finite coordinates: {arr[bad].tolist()}')
    negative = (arr[:, 2] < arr[:, 0]) | (arr[:, 3] < arr[:, 1])
    if negative.any():
        bad = int(np.flatnonzero(negative)[0])
        raise InvalidInputError(f'{what}[{bad}] has negative extent: {arr[bad].tolist()}')
    return arr


def as_boxes(boxes: BoxesLike, what: str = 'boxes') -> np.ndarray:
    """Coerce a list of :class:`Box` or raw coordinates to a validated array."""
    if isinstance(boxes, np.ndarray):
        return validate_boxes(boxes, what)
    rows = [b.as_array() if isinstance(b, Box) else np.asarray(b, dtype=np.float64) for b in boxes]
    if not rows:
        return np.zeros((0, 4), dtype=np.float64)
    return validate_boxes(np.stack(rows), what)


def xyxy_to_cxcywh(boxes: np.ndarray) -> np.ndarray:
    boxes = np.asarray(boxes, dtype=np.float64)
    w = boxes[..., 2] - boxes[..., 0]
    h = boxes[..., 3] - boxes[..., 1]
    cx = (boxes[..., 0] + boxes[..., 2]) / 2.0
    cy = (boxes[..., 1] + boxes[..., 3]) / 2.0
    return np.stack([cx, cy, w, h], axis=-1)


def cxcywh_to_xyxy(boxes: np.ndarray) -> np.ndarray:
    boxes = np.asarray(boxes, dtype=np.float64)
    half_w = boxes[..., 2] / 2.0
    half_h = boxes[..., 3] / 2.0
    return np.stack([boxes[..., 0] - half_w, boxes[..., 1] - half_h,
                     boxes[..., 0] + half_w, boxes[..., 1] + half_h], axis=-1)


def convert_box(box: Union[Box, CenterBox]) -> Union[CenterBox, Box]:
    """Convert a :class:`Box` to a :class:`CenterBox` or back.

    Args:
        box: Either representation.

    Returns:
        The other representation of the same rectangle.
    """
    if isinstance(box, Box):
        return CenterBox.from_array(xyxy_to_cxcywh(box.as_array()))
    if isinstance(box, CenterBox):
        return Box.from_array(cxcywh_to_xyxy(box.as_array()))
    raise InvalidInputError(f'cannot convert object of type {type(box).__name__}')


def box_area(boxes: np.ndarray) -> np.ndarray:
    boxes = np.asarray(boxes, dtype=np.float64)
    return (boxes[..., 2] - boxes[..., 0]) * (boxes[..., 3] - boxes[..., 1])


def _overlap_terms(a: np.ndarray, b: np.ndarray):
    """Broadcast ``a`` (N,1,4) against ``b`` (1,M,4) and return raw terms."""
    ax1, ay1, ax2, ay2 = (a[:, None, k] for k in range(4))
    bx1, by1, bx2, by2 = (b[None, :, k] for k in range(4))
    raw_iw = np.minimum(ax2, bx2) - np.maximum(ax1, bx1)
    raw_ih = np.minimum(ay2, by2) - np.maximum(ay1, by1)
    iw = np.clip(raw_iw, 0.0, None)
    ih = np.clip(raw_ih, 0.0, None)
    inter = iw * ih
    area_a = (ax2 - ax1) * (ay2 - ay1)
    area_b = (bx2 - bx1) * (by2 - by1)
    union = area_a + area_b - inter
    ew = np.maximum(ax2, bx2) - np.minimum(ax1, bx1)
    eh = np.maximum(ay2, by2) - np.minimum(ay1, by1)
    enclose = ew * eh
    return {
        'raw_iw': raw_iw, 'raw_ih': raw_ih, 'iw': iw, 'ih': ih, 'inter': inter,
        'union': union, 'ew': ew, 'eh': eh, 'enclose': enclose,
    }


def _safe_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros(np.broadcast(num, den).shape, dtype=np.float64)
    np.divide(num, den, out=out, where=den > 0)
    return out


def pairwise_iou(a: BoxesLike, b: BoxesLike) -> np.ndarray:
    """Intersection over union for every pair.

    Args:
        a: N boxes.
        b: M boxes.

    Returns:
        (N, M) matrix in [0, 1]. Pairs whose union is empty score 0.
    """
    a = as_boxes(a, 'a')
    b = as_boxes(b, 'b')
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)), dtype=np.float64)
    t = _overlap_terms(a, b)
    return np.clip(_safe_ratio(t['inter'], t['union']), 0.0, 1.0)


def pairwise_giou(a: BoxesLike, b: BoxesLike, return_grad: bool = False):
    """Generalized IoU for every pair, optionally with d GIoU / d a.

    GIoU = IoU - (enclose - union) / enclose. A zero-area enclosing box gives
    GIoU 0 and a zero gradient.

    Args:
        a: N boxes; the gradient is taken with respect to these coordinates.
        b: M boxes.
        return_grad: Also return the analytic gradient.

    Returns:
        (N, M) matrix in [-1, 1], or a tuple of that matrix and an
        (N, M, 4) gradient ordered (x1, y1, x2, y2).
    """
    a = as_boxes(a, 'a')
    b = as_boxes(b, 'b')
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        giou = np.zeros((n, m), dtype=np.float64)
        return (giou, np.zeros((n, m, 4), dtype=np.float64)) if return_grad else giou

    t = _overlap_terms(a, b)
    union, enclose, inter = t['union'], t['enclose'], t['inter']
    iou = _safe_ratio(inter, union)
    penalty = _safe_ratio(np.clip(enclose - union, 0.0, None), enclose)
    giou = np.where(enclose > 0, iou - penalty, 0.0)
    giou = np.clip(giou, -1.0, 1.0)
    if not return_grad:
        return giou
    return giou, _giou_grad(a, b, t)


def _giou_grad(a: np.ndarray, b: np.ndarray, t: dict) -> np.ndarray:
    ax1, ay1, ax2, ay2 = (a[:, None, k] for k in range(4))
    bx1, by1, bx2, by2 = (b[None, :, k] for k in range(4))
    iw, ih, ew, eh = t['iw'], t['ih'], t['ew'], t['eh']
    inter, union, enclose = t['inter'], t['union'], t['enclose']
    x_open = (t['raw_iw'] > 0).astype(np.float64)
    y_open = (t['raw_ih'] > 0).astype(np.float64)

    # coordinate order: x1, y1, x2, y2
    d_inter = np.stack([
        -ih * (ax1 > bx1) * x_open,
        -iw * (ay1 > by1) * y_open,
        ih * (ax2 < bx2) * x_open,
        iw * (ay2 < by2) * y_open,
    ], axis=-1)
    wa = np.broadcast_to(ax2 - ax1, union.shape)
    ha = np.broadcast_to(ay2 - ay1, union.shape)
    d_area = np.stack([-ha, -wa, ha, wa], axis=-1)
    d_enclose = np.stack([
        -eh * (ax1 < bx1),
        -ew * (ay1 < by1),
        eh * (ax2 > bx2),
        ew * (ay2 > by2),
    ], axis=-1)
    d_union = d_area - d_inter

    grad = np.zeros(union.shape + (4,), dtype=np.float64)
    has_union = union > 0
    has_enclose = enclose > 0
    u = np.where(has_union, union, 1.0)[..., None]
    e = np.where(has_enclose, enclose, 1.0)[..., None]
    d_iou = d_inter / u - inter[..., None] * d_union / (u * u)
    d_ratio = d_union / e - union[..., None] * d_enclose / (e * e)
    grad += np.where(has_union[..., None], d_iou, 0.0)
    grad += np.where(has_enclose[..., None], d_ratio, 0.0)
    return np.where(has_enclose[..., None], grad, 0.0)
