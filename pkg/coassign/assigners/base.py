"""Ground truth and the assignment record every assigner produces."""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from coassign.errors import InvalidInputError
from coassign.geometry import (Box, DeltaTarget, LtrbTarget, as_boxes,
                               box_area, centerness_from_ltrb,
                               deltas_from_boxes, ltrb_distances)
from coassign.priors import PriorSet

logger = logging.getLogger(__name__)

# per-prior codes in the dense assignment vector
NEGATIVE = -1
IGNORED = -2


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Labelled boxes of one image, clamped to the image bounds."""
    labels: np.ndarray
    boxes: np.ndarray
    image_h: int
    image_w: int
    num_classes: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        boxes = as_boxes(self.boxes, 'gt boxes')
        if len(labels) != len(boxes):
            raise InvalidInputError(f'{len(labels)} labels for {len(boxes)} gt boxes')
        if len(labels) and (labels.min() < 0 or labels.max() >= self.num_classes):
            bad = int(np.flatnonzero((labels < 0) | (labels >= self.num_classes))[0])
            raise InvalidInputError(f'gt {bad} label {labels[bad]} outside [0, {self.num_classes})')
        boxes = boxes.copy()
        boxes[:, [0, 2]] = np.clip(boxes[:, [0, 2]], 0.0, float(self.image_w))
        boxes[:, [1, 3]] = np.clip(boxes[:, [1, 3]], 0.0, float(self.image_h))
        empty = box_area(boxes) <= 0
        if empty.any():
            bad = int(np.flatnonzero(empty)[0])
            raise InvalidInputError(f'gt {bad} box {boxes[bad].tolist()} has no area inside the '
                                    f'{self.image_h}x{self.image_w} image')
        labels.setflags(write=False)
        boxes.setflags(write=False)
        object.__setattr__(self, 'labels', labels)
        object.__setattr__(self, 'boxes', boxes)

    def __len__(self) -> int:
        return len(self.labels)

    @classmethod
    def from_objects(cls, objects: Sequence[Tuple[int, Union[Box, Sequence[float]]]],
                     image_h: int, image_w: int, num_classes: int) -> 'GroundTruth':
        labels = [int(label) for label, _ in objects]
        boxes = [box.as_array() if isinstance(box, Box) else np.asarray(box, dtype=np.float64)
                 for _, box in objects]
        return cls(labels=np.asarray(labels, dtype=np.int64),
                   boxes=np.asarray(boxes, dtype=np.float64).reshape(-1, 4),
                   image_h=image_h, image_w=image_w, num_classes=num_classes)

    @classmethod
    def empty(cls, image_h: int, image_w: int, num_classes: int) -> 'GroundTruth':
        return cls(labels=np.zeros(0, dtype=np.int64), boxes=np.zeros((0, 4)),
                   image_h=image_h, image_w=image_w, num_classes=num_classes)


@dataclass(frozen=True)
class PositiveSample:
    """One positive (level, location) with its supervised targets."""
    level: int
    location: int
    prior_index: int
    gt_index: int
    label: int
    regression: Union[DeltaTarget, LtrbTarget]
    centerness: Optional[float] = None
    gt_box: Optional[Box] = None

    def to_dict(self) -> dict:
        out = {
            'level': self.level,
            'location': self.location,
            'gt': self.gt_index,
            'label': self.label,
        }
        if isinstance(self.regression, DeltaTarget):
            out['deltas'] = self.regression.as_array().tolist()
        else:
            out['ltrb'] = self.regression.as_array().tolist()
        if self.centerness is not None:
            out['centerness'] = self.centerness
        return out


@dataclass(frozen=True)
class Assignment:
    """Positive, negative and ignored priors of one head on one image.

    Negatives carry a background classification target only; they never
    receive a regression target.
    """
    head: str
    pos: Tuple[PositiveSample, ...]
    neg: Tuple[Tuple[int, int], ...]
    ignored: Tuple[Tuple[int, int], ...]
    pos_boxes: Tuple[Box, ...]
    num_priors: int

    @property
    def num_pos(self) -> int:
        return len(self.pos)

    def pos_keys(self) -> List[Tuple[int, int]]:
        return [(p.level, p.location) for p in self.pos]

    def counts(self) -> Dict[str, int]:
        return {'pos': len(self.pos), 'neg': len(self.neg), 'ignored': len(self.ignored)}

    def to_dict(self) -> dict:
        return {
            'head': self.head,
            'counts': self.counts(),
            'pos': [p.to_dict() for p in self.pos],
            'pos_boxes': [b.as_list() for b in self.pos_boxes],
        }


def assignment_from_vector(head: str, priors: PriorSet, gt: GroundTruth, assigned: np.ndarray,
                           regression: str, pos_boxes: Optional[np.ndarray] = None,
                           with_centerness: bool = False) -> Assignment:
    """Package a dense per-prior vector into an :class:`Assignment`.

    Args:
        head: Name recorded on the assignment.
        priors: The priors the vector indexes.
        gt: Ground truth the non-negative entries point into.
        assigned: (N,) gt index for positives, ``NEGATIVE`` or ``IGNORED``.
        regression: ``'deltas'`` (prior box to gt) or ``'ltrb'`` (prior
            center to gt sides).
        pos_boxes: (N, 4) box recorded per positive; defaults to the prior
            boxes themselves.
        with_centerness: Attach the centerness of the prior center.
    """
    assigned = np.asarray(assigned, dtype=np.int64)
    if len(assigned) != len(priors):
        raise InvalidInputError(f'{len(assigned)} assignment codes for {len(priors)} priors')
    pos_idx = np.flatnonzero(assigned >= 0)
    gt_idx = assigned[pos_idx]
    src_boxes = priors.boxes if pos_boxes is None else pos_boxes

    if len(pos_idx) and regression == 'deltas':
        reg = deltas_from_boxes(priors.boxes[pos_idx], gt.boxes[gt_idx])
    elif len(pos_idx) and regression == 'ltrb':
        reg = ltrb_distances(priors.centers[pos_idx], gt.boxes)[np.arange(len(pos_idx)), gt_idx]
    else:
        reg = np.zeros((len(pos_idx), 4))
    centerness = None
    if with_centerness and len(pos_idx):
        ltrb = reg if regression == 'ltrb' else \
            ltrb_distances(priors.centers[pos_idx], gt.boxes)[np.arange(len(pos_idx)), gt_idx]
        centerness = centerness_from_ltrb(ltrb)

    pos = []
    for k, (i, g) in enumerate(zip(pos_idx, gt_idx)):
        c = float(centerness[k]) if centerness is not None else None
        if regression == 'deltas':
            target = DeltaTarget.from_array(reg[k])
        else:
            quality = c if c is not None else float(centerness_from_ltrb(reg[k]))
            l, t, r, b = (float(v) for v in reg[k])
            target = LtrbTarget(l, t, r, b, centerness=quality)
        pos.append(PositiveSample(level=int(priors.levels[i]), location=int(priors.locations[i]),
                                  prior_index=int(i), gt_index=int(g), label=int(gt.labels[g]),
                                  regression=target, centerness=c,
                                  gt_box=Box.from_array(gt.boxes[g])))

    def keys(mask):
        idx = np.flatnonzero(mask)
        return tuple((int(priors.levels[i]), int(priors.locations[i])) for i in idx)

    result = Assignment(
        head=head,
        pos=tuple(pos),
        neg=keys(assigned == NEGATIVE),
        ignored=keys(assigned == IGNORED),
        pos_boxes=tuple(Box.from_array(src_boxes[i]) for i in pos_idx),
        num_priors=len(priors),
    )
    logger.debug('%s: %d pos / %d neg / %d ignored over %d priors', head, result.num_pos,
                 len(result.neg), len(result.ignored), len(priors))
    return result


def dense_targets(assignment: Assignment, priors: PriorSet, gt: GroundTruth) -> Dict[str, np.ndarray]:
    """Per-prior target arrays for a trainer.

    Returns:
        ``labels`` (background = num_classes), ``label_weights`` (0 for
        ignored priors), ``reg_targets`` (N, 4), ``reg_weights`` (1 on
        positives only), ``centerness`` (N,), ``gt_boxes`` (N, 4).
    """
    n = len(priors)
    labels = np.full(n, gt.num_classes, dtype=np.int64)
    label_weights = np.ones(n)
    reg_targets = np.zeros((n, 4))
    reg_weights = np.zeros(n)
    centerness = np.zeros(n)
    gt_boxes = np.zeros((n, 4))
    for level, location in assignment.ignored:
        label_weights[priors.flat_index(level, location)] = 0.0
    for p in assignment.pos:
        labels[p.prior_index] = p.label
        reg_targets[p.prior_index] = p.regression.as_array()
        reg_weights[p.prior_index] = 1.0
        gt_boxes[p.prior_index] = gt.boxes[p.gt_index]
        if p.centerness is not None:
            centerness[p.prior_index] = p.centerness
    return {
        'labels': labels,
        'label_weights': label_weights,
        'reg_targets': reg_targets,
        'reg_weights': reg_weights,
        'centerness': centerness,
        'gt_boxes': gt_boxes,
    }
