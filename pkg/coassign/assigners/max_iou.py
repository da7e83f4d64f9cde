"""IoU-threshold assignment for anchors (RetinaNet) and proposals (Faster-RCNN)."""
import logging
from typing import Dict

import numpy as np

from coassign.assigners.base import IGNORED, NEGATIVE, Assignment, GroundTruth, assignment_from_vector
from coassign.errors import ConfigError
from coassign.geometry import pairwise_iou
from coassign.priors import PriorSet

logger = logging.getLogger(__name__)

RETINANET_THRESHOLDS = {'pos_thr': 0.5, 'neg_thr': 0.4}
FASTER_RCNN_THRESHOLDS = {'pos_thr': 0.5, 'neg_thr': 0.5}


def assign_max_iou(priors: PriorSet, gt: GroundTruth, pos_thr: float = 0.5, neg_thr: float = 0.4,
                   rescue_low_quality: bool = True, min_rescue_iou: float = 0.0,
                   head: str = 'max_iou') -> Assignment:
    """Max-IoU assignment with an ignore band.

    Each prior goes to its best gt (lower index on ties). It is positive when
    that IoU exceeds ``pos_thr``, negative below ``neg_thr`` and ignored in
    between. With ``rescue_low_quality`` each gt's single best prior (lowest
    index on ties) is forced positive for it when their IoU exceeds
    ``min_rescue_iou``; a prior rescued by several gts keeps the one with the
    higher IoU, then the lower index.

    Args:
        priors: Anchors or proposals with level tags.
        gt: Ground truth of the image.
        pos_thr: Strict lower bound for positives.
        neg_thr: Strict upper bound for negatives.
        rescue_low_quality: Force each gt's best prior positive.
        min_rescue_iou: IoU a rescued prior must exceed.
        head: Name recorded on the assignment.
    """
    if pos_thr < neg_thr:
        raise ConfigError(f'pos_thr {pos_thr} must be >= neg_thr {neg_thr}')
    n, g = len(priors), len(gt)
    assigned = np.full(n, NEGATIVE, dtype=np.int64)
    if g == 0 or n == 0:
        return assignment_from_vector(head, priors, gt, assigned, 'deltas')

    ious = pairwise_iou(priors.boxes, gt.boxes)
    best_iou = ious.max(axis=1)
    best_gt = ious.argmax(axis=1)
    assigned = np.full(n, IGNORED, dtype=np.int64)
    assigned[best_iou < neg_thr] = NEGATIVE
    strong = best_iou > pos_thr
    assigned[strong] = best_gt[strong]

    if rescue_low_quality:
        rescued: Dict[int, int] = {}
        best_prior = ious.argmax(axis=0)
        for j in range(g):
            i = int(best_prior[j])
            if ious[i, j] <= min_rescue_iou:
                continue
            if i not in rescued or ious[i, j] > ious[i, rescued[i]]:
                rescued[i] = j
        for i, j in rescued.items():
            assigned[i] = j
        logger.debug('%s rescued %d low-quality matches', head, len(rescued))
    return assignment_from_vector(head, priors, gt, assigned, 'deltas')
