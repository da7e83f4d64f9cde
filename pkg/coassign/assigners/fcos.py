"""Center-sampling point assignment (anchor-free heads)."""
import logging
import math
from typing import Optional, Sequence, Tuple

import numpy as np

from coassign.assigners.base import NEGATIVE, Assignment, GroundTruth, assignment_from_vector
from coassign.errors import ConfigError, InvalidInputError
from coassign.geometry import box_area, ltrb_distances
from coassign.priors import PriorSet

logger = logging.getLogger(__name__)

DEFAULT_FCOS_CONFIG = {
    'center_radius': 1.5,
    # regress range of level 1; each further level doubles it, the last is open
    'base_range': 64.0,
    # positive boxes are squares of side pos_box_factor * stride
    'pos_box_factor': 8.0,
}


def default_regress_ranges(num_levels: int, base: float = DEFAULT_FCOS_CONFIG['base_range']) -> Tuple[Tuple[float, float], ...]:
    """(0, 64], (64, 128], ... with the last level unbounded."""
    bounds = [0.0] + [base * 2 ** k for k in range(num_levels - 1)] + [math.inf]
    return tuple((bounds[k], bounds[k + 1]) for k in range(num_levels))


def fcos_pos_boxes(priors: PriorSet, factor: float = DEFAULT_FCOS_CONFIG['pos_box_factor']) -> np.ndarray:
    """Square box of side ``factor * stride`` centred on each point."""
    half = factor * priors.strides / 2.0
    cx, cy = priors.centers[:, 0], priors.centers[:, 1]
    return np.stack([cx - half, cy - half, cx + half, cy + half], axis=-1)


def assign_fcos(priors: PriorSet, gt: GroundTruth,
                center_radius: float = DEFAULT_FCOS_CONFIG['center_radius'],
                regress_ranges: Optional[Sequence[Tuple[float, float]]] = None) -> Assignment:
    """FCOS assignment with center sampling.

    A point is positive for a gt when it lies strictly inside the gt's center
    region (gt center +/- radius * stride per axis, cut to the gt box) and its
    largest ltrb distance falls in its level's regress range ``(lo, hi]``.
    A point claimed by several gts goes to the smallest-area one (lower index
    on equal areas).

    Args:
        priors: Point priors.
        gt: Ground truth of the image.
        center_radius: Center-region half size in strides.
        regress_ranges: Per-level ``(lo, hi]``; defaults to
            :func:`default_regress_ranges`.

    Returns:
        The assignment with ltrb targets, centerness and the square
        positive boxes.
    """
    if priors.kind != 'point':
        raise InvalidInputError(f'FCOS needs point priors, got {priors.kind!r}')
    if center_radius <= 0:
        raise ConfigError(f'FCOS center radius must be positive, got {center_radius}')
    num_levels = priors.spec.num_levels
    ranges = tuple(regress_ranges) if regress_ranges is not None else default_regress_ranges(num_levels)
    if len(ranges) != num_levels:
        raise ConfigError(f'{len(ranges)} regress ranges for {num_levels} levels')

    n, g = len(priors), len(gt)
    assigned = np.full(n, NEGATIVE, dtype=np.int64)
    pos_boxes = fcos_pos_boxes(priors)
    if g == 0 or n == 0:
        return assignment_from_vector('fcos', priors, gt, assigned, 'ltrb', pos_boxes, with_centerness=True)

    ltrb = ltrb_distances(priors.centers, gt.boxes)
    boxes = gt.boxes
    gcx = (boxes[:, 0] + boxes[:, 2]) / 2.0
    gcy = (boxes[:, 1] + boxes[:, 3]) / 2.0
    radius = (priors.strides * center_radius)[:, None]
    x1 = np.maximum(gcx[None] - radius, boxes[None, :, 0])
    y1 = np.maximum(gcy[None] - radius, boxes[None, :, 1])
    x2 = np.minimum(gcx[None] + radius, boxes[None, :, 2])
    y2 = np.minimum(gcy[None] + radius, boxes[None, :, 3])
    px = priors.centers[:, 0:1]
    py = priors.centers[:, 1:2]
    in_center = (px - x1 > 0) & (py - y1 > 0) & (x2 - px > 0) & (y2 - py > 0)

    lo = np.array([ranges[j - 1][0] for j in priors.levels], dtype=np.float64)[:, None]
    hi = np.array([ranges[j - 1][1] for j in priors.levels], dtype=np.float64)[:, None]
    max_dist = ltrb.max(axis=-1)
    in_range = (max_dist > lo) & (max_dist <= hi)

    areas = np.where(in_center & in_range, box_area(boxes)[None, :], np.inf)
    smallest = areas.min(axis=1)
    assigned = np.where(np.isfinite(smallest), areas.argmin(axis=1), NEGATIVE)
    return assignment_from_vector('fcos', priors, gt, assigned, 'ltrb', pos_boxes, with_centerness=True)
