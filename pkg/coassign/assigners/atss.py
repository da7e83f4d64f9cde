"""Adaptive training sample selection over anchors."""
import logging

import numpy as np

from coassign.assigners.base import NEGATIVE, Assignment, GroundTruth, assignment_from_vector
from coassign.errors import ConfigError, InvalidInputError
from coassign.geometry import pairwise_iou
from coassign.priors import PriorSet

logger = logging.getLogger(__name__)

DEFAULT_ATSS_CONFIG = {
    'topk': 9,
}


def atss_threshold(candidate_ious: np.ndarray) -> np.ndarray:
    """mean + std of candidate IoUs per column (sample std; 0 for one candidate)."""
    candidate_ious = np.asarray(candidate_ious, dtype=np.float64)
    mean = candidate_ious.mean(axis=0)
    if candidate_ious.shape[0] > 1:
        std = candidate_ious.std(axis=0, ddof=1)
    else:
        std = np.zeros_like(mean)
    return mean + std


def assign_atss(priors: PriorSet, gt: GroundTruth, k: int = DEFAULT_ATSS_CONFIG['topk']) -> Assignment:
    """ATSS assignment.

    For each gt, the ``k`` anchors per level whose centers are closest to the
    gt center become candidates (ties broken by lower location). Candidates
    with IoU >= mean + std of the candidate IoUs and a center strictly inside
    the gt are positive. An anchor claimed by several gts goes to the one with
    the highest IoU, then the lower gt index. Everything else is negative.

    Args:
        priors: Anchor priors.
        gt: Ground truth of the image.
        k: Candidates per level.

    Returns:
        The assignment; regression targets are anchor deltas and every
        positive carries the centerness of its anchor center.
    """
    if priors.kind != 'anchor':
        raise InvalidInputError(f'ATSS needs anchor priors, got {priors.kind!r}')
    if k < 1:
        raise ConfigError(f'ATSS topk must be >= 1, got {k}')
    n, g = len(priors), len(gt)
    assigned = np.full(n, NEGATIVE, dtype=np.int64)
    if g == 0 or n == 0:
        return assignment_from_vector('atss', priors, gt, assigned, 'deltas', with_centerness=True)

    ious = pairwise_iou(priors.boxes, gt.boxes)
    gt_cx = (gt.boxes[:, 0] + gt.boxes[:, 2]) / 2.0
    gt_cy = (gt.boxes[:, 1] + gt.boxes[:, 3]) / 2.0
    dist = np.hypot(priors.centers[:, 0:1] - gt_cx[None], priors.centers[:, 1:2] - gt_cy[None])

    candidates = []
    for level in priors.spec.levels:
        idx = np.flatnonzero(priors.levels == level.j)
        if len(idx) == 0:
            raise InvalidInputError(f'ATSS needs anchors on every level; level {level.j} has none')
        # idx is ascending in location, so a stable sort breaks ties by location
        order = np.argsort(dist[idx], axis=0, kind='stable')[:min(k, len(idx))]
        candidates.append(idx[order])
    candidates = np.concatenate(candidates, axis=0)
    cols = np.arange(g)[None, :]
    cand_ious = ious[candidates, cols]
    threshold = atss_threshold(cand_ious)

    cx = priors.centers[candidates, 0]
    cy = priors.centers[candidates, 1]
    inside = ((cx - gt.boxes[:, 0] > 0) & (cy - gt.boxes[:, 1] > 0)
              & (gt.boxes[:, 2] - cx > 0) & (gt.boxes[:, 3] - cy > 0))
    is_pos = (cand_ious >= threshold[None, :]) & inside

    claimed = np.full((n, g), -np.inf)
    rows, gts = np.nonzero(is_pos)
    claimed[candidates[rows, gts], gts] = ious[candidates[rows, gts], gts]
    best = claimed.max(axis=1)
    winner = claimed.argmax(axis=1)
    assigned = np.where(np.isfinite(best), winner, NEGATIVE)
    logger.debug('ATSS thresholds %s', np.round(threshold, 4).tolist())
    return assignment_from_vector('atss', priors, gt, assigned, 'deltas', with_centerness=True)
