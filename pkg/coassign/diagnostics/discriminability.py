"""Discriminability score maps and their IoF/IoB threshold sweep.

A score map averages the max-normalized per-level feature-norm maps after
resizing them to image resolution. Thresholding it at S activates a set of
pixels; IoF is the activated fraction of the foreground and IoB the
activated fraction of the background, both with the indicator ``D > S``.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from coassign.errors import InvalidInputError
from coassign.geometry import as_boxes
from coassign.priors import ScalarMap, resize_grid

logger = logging.getLogger(__name__)

DEFAULT_CURVE_CONFIG = {
    'num_thresholds': 256,
}


@dataclass(frozen=True, eq=False)
class ScoreMap:
    """Image-resolution grid of discriminability scores in [0, 1]."""
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.size == 0:
            raise InvalidInputError(f'score map must be a nonempty 2-D grid, got shape {values.shape}')
        if not np.all(np.isfinite(values)) or values.min() < 0 or values.max() > 1:
            raise InvalidInputError('score map values must lie in [0, 1]')
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True, eq=False)
class ForegroundMask:
    """Binary image-resolution mask; ``True`` marks foreground pixels."""
    values: np.ndarray

    def __post_init__(self):
        raw = np.asarray(self.values)
        if raw.ndim != 2 or raw.size == 0:
            raise InvalidInputError(f'foreground mask must be a nonempty 2-D grid, got shape {raw.shape}')
        if not np.all((raw == 0) | (raw == 1)):
            raise InvalidInputError('foreground mask must be binary')
        values = raw.astype(bool)
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    @property
    def background(self) -> np.ndarray:
        return ~self.values

    @classmethod
    def from_boxes(cls, boxes, image_h: int, image_w: int) -> 'ForegroundMask':
        """Pixels whose centers lie inside (or on the border of) any box."""
        boxes = as_boxes(boxes, 'gt boxes')
        ys = np.arange(image_h, dtype=np.float64)[:, None] + 0.5
        xs = np.arange(image_w, dtype=np.float64)[None, :] + 0.5
        mask = np.zeros((image_h, image_w), dtype=bool)
        for x1, y1, x2, y2 in boxes:
            mask |= (xs >= x1) & (xs <= x2) & (ys >= y1) & (ys <= y2)
        return cls(values=mask)


@dataclass(frozen=True)
class CurvePoint:
    S: float
    iof: float
    iob: float


def discriminability_map(level_maps: Sequence[ScalarMap], image_h: int, image_w: int) -> ScoreMap:
    """Average of per-level max-normalized maps resized to ``image_h x image_w``.

    A level whose maximum is 0 contributes 0.
    """
    if not level_maps:
        raise InvalidInputError('discriminability map needs at least one level')
    total = np.zeros((image_h, image_w))
    for m in level_maps:
        peak = float(m.values.max())
        if peak > 0:
            total += resize_grid(m.values / peak, image_h, image_w)
    return ScoreMap(values=np.clip(total / len(level_maps), 0.0, 1.0))


def _check_pair(D: ScoreMap, fg: ForegroundMask):
    if D.shape != fg.shape:
        raise InvalidInputError(f'score map {D.shape} and foreground mask {fg.shape} differ in shape')


def _ratio(count: float, total: int) -> float:
    return count / total if total else 0.0


def iof_iob_at_threshold(D: ScoreMap, fg: ForegroundMask, S: float) -> Tuple[float, float]:
    """(IoF, IoB) of the pixels with ``D > S``; an empty region gives 0."""
    _check_pair(D, fg)
    if not math.isfinite(S):
        raise InvalidInputError(f'threshold must be finite, got {S}')
    active = D.values > S
    fg_mask = fg.values
    bg_mask = fg.background
    iof = _ratio(int(np.count_nonzero(active & fg_mask)), int(np.count_nonzero(fg_mask)))
    iob = _ratio(int(np.count_nonzero(active & bg_mask)), int(np.count_nonzero(bg_mask)))
    return iof, iob


def default_thresholds(num: int = DEFAULT_CURVE_CONFIG['num_thresholds']) -> np.ndarray:
    return np.linspace(0.0, 1.0, num)


def iof_iob_curve(D: ScoreMap, fg: ForegroundMask,
                  thresholds: Optional[Sequence[float]] = None) -> List[CurvePoint]:
    """One :class:`CurvePoint` per threshold; thresholds must ascend."""
    _check_pair(D, fg)
    s = default_thresholds() if thresholds is None else np.asarray(thresholds, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(s)):
        raise InvalidInputError('thresholds must be finite')
    if np.any(np.diff(s) < 0):
        raise InvalidInputError('thresholds must be sorted ascending')
    fg_scores = np.sort(D.values[fg.values])
    bg_scores = np.sort(D.values[fg.background])
    # count of scores strictly above each threshold
    fg_above = len(fg_scores) - np.searchsorted(fg_scores, s, side='right')
    bg_above = len(bg_scores) - np.searchsorted(bg_scores, s, side='right')
    return [CurvePoint(S=float(t), iof=_ratio(int(a), len(fg_scores)), iob=_ratio(int(b), len(bg_scores)))
            for t, a, b in zip(s, fg_above, bg_above)]


def mean_curve(curves: Sequence[Sequence[CurvePoint]]) -> List[CurvePoint]:
    """Pointwise mean of curves sampled at the same thresholds."""
    if not curves:
        return []
    thresholds = [p.S for p in curves[0]]
    for c in curves[1:]:
        if [p.S for p in c] != thresholds:
            raise InvalidInputError('curves are sampled at different thresholds')
    return [CurvePoint(S=s,
                       iof=math.fsum(c[k].iof for c in curves) / len(curves),
                       iob=math.fsum(c[k].iob for c in curves) / len(curves))
            for k, s in enumerate(thresholds)]
