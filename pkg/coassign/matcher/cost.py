"""DETR-style matching cost between query predictions and ground truth."""
import logging
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np

from coassign.errors import InvalidInputError
from coassign.geometry import Box, CenterBox, cxcywh_to_xyxy, pairwise_giou, xyxy_to_cxcywh
from coassign.matcher.hungarian import MatchResult, hungarian_solve

logger = logging.getLogger(__name__)

DEFAULT_MATCH_CONFIG = {
    'cls_weight': 2.0,
    'l1_weight': 5.0,
    'giou_weight': 2.0,
    'focal_alpha': 0.25,
    'focal_gamma': 2.0,
}

# log() guard used by the focal classification cost
_COST_EPS = 1e-8


@dataclass(frozen=True)
class MatchWeights:
    cls: float = DEFAULT_MATCH_CONFIG['cls_weight']
    l1: float = DEFAULT_MATCH_CONFIG['l1_weight']
    giou: float = DEFAULT_MATCH_CONFIG['giou_weight']
    alpha: float = DEFAULT_MATCH_CONFIG['focal_alpha']
    gamma: float = DEFAULT_MATCH_CONFIG['focal_gamma']


@dataclass(frozen=True, eq=False)
class QueryPrediction:
    """Per-class probabilities and a normalized ``(cx, cy, w, h)`` box."""
    class_scores: np.ndarray
    box: CenterBox

    def __post_init__(self):
        scores = np.asarray(self.class_scores, dtype=np.float64).reshape(-1)
        if scores.size == 0 or not np.all(np.isfinite(scores)):
            raise InvalidInputError('class scores must be a nonempty finite vector')
        if np.any(scores < 0) or np.any(scores > 1):
            raise InvalidInputError(f'class scores must lie in [0, 1], got {scores.tolist()}')
        box = self.box if isinstance(self.box, CenterBox) else CenterBox.from_array(self.box)
        box = CenterBox.from_array(np.clip(box.as_array(), 0.0, 1.0))
        scores.setflags(write=False)
        object.__setattr__(self, 'class_scores', scores)
        object.__setattr__(self, 'box', box)

    @property
    def num_classes(self) -> int:
        return len(self.class_scores)


GroundTruthInput = Sequence[Tuple[int, Union[Box, Sequence[float]]]]


def focal_class_cost(prob: np.ndarray, alpha: float = 0.25, gamma: float = 2.0) -> np.ndarray:
    """alpha(1-p)^g(-log p) - (1-alpha)p^g(-log(1-p)), elementwise."""
    prob = np.asarray(prob, dtype=np.float64)
    pos = alpha * (1.0 - prob) ** gamma * (-np.log(prob + _COST_EPS))
    neg = (1.0 - alpha) * prob ** gamma * (-np.log(1.0 - prob + _COST_EPS))
    return pos - neg


def _gt_arrays(gts: GroundTruthInput, num_classes: int) -> Tuple[np.ndarray, np.ndarray]:
    labels, boxes = [], []
    for k, (label, box) in enumerate(gts):
        label = int(label)
        if not 0 <= label < num_classes:
            raise InvalidInputError(f'gt {k} label {label} outside [0, {num_classes})')
        labels.append(label)
        boxes.append(box.as_array() if isinstance(box, Box) else Box.from_array(box).as_array())
    return np.asarray(labels, dtype=np.int64), np.asarray(boxes, dtype=np.float64).reshape(-1, 4)


def build_detr_cost(preds: Sequence[QueryPrediction], gts: GroundTruthInput,
                    weights: MatchWeights = MatchWeights()) -> np.ndarray:
    """Matching cost matrix with one row per query and one column per gt.

    Args:
        preds: Query predictions, all with the same number of classes.
        gts: (label, normalized corner-form box) pairs.
        weights: Term weights and focal parameters.

    Returns:
        (Q, G) matrix: w_cls * focal cost + w_l1 * L1(cxcywh) - w_giou * GIoU.
    """
    if not gts:
        raise InvalidInputError('matching cost needs at least one ground-truth object')
    if not preds:
        raise InvalidInputError('matching cost needs at least one query')
    num_classes = preds[0].num_classes
    if any(p.num_classes != num_classes for p in preds):
        raise InvalidInputError('all query predictions must score the same number of classes')
    labels, gt_xyxy = _gt_arrays(gts, num_classes)

    probs = np.stack([p.class_scores for p in preds])
    pred_cxcywh = np.stack([p.box.as_array() for p in preds])
    gt_cxcywh = xyxy_to_cxcywh(gt_xyxy)

    cost_cls = focal_class_cost(probs[:, labels], weights.alpha, weights.gamma)
    cost_l1 = np.abs(pred_cxcywh[:, None, :] - gt_cxcywh[None, :, :]).sum(-1)
    cost_giou = -pairwise_giou(cxcywh_to_xyxy(pred_cxcywh), gt_xyxy)
    return weights.cls * cost_cls + weights.l1 * cost_l1 + weights.giou * cost_giou


def match_one_to_one(preds: Sequence[QueryPrediction], gts: GroundTruthInput,
                     weights: MatchWeights = MatchWeights()) -> MatchResult:
    """Hungarian matching of queries to ground truth under the DETR cost.

    With no queries or no gts there is nothing to pair: the result is empty.
    """
    if not gts or not preds:
        return MatchResult(pairs=(), total_cost=0.0)
    result = hungarian_solve(build_detr_cost(preds, gts, weights))
    logger.debug('Matched %d gts to %d queries (cost %.6g)', len(gts), len(preds), result.total_cost)
    return result
