"""Encoder, auxiliary-decoder and global training objectives.

Encoder heads are supervised by their one-to-many assignment: positives get
classification and regression terms, negatives classification only. The
auxiliary decoder groups are supervised query by query against their
pre-bound gt, so they need no matching. The global objective sums, over
decoder layers, the set-matching loss, lambda1 times the auxiliary losses
and lambda2 times the encoder loss.
"""
import logging
import math
from dataclasses import dataclass, fields
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from coassign.assigners import Assignment
from coassign.errors import ConfigError, InvalidInputError
from coassign.geometry import cxcywh_to_xyxy, xyxy_to_cxcywh
from coassign.losses.primitives import (DEFAULT_FOCAL_CONFIG,
                                        binary_cross_entropy, cross_entropy,
                                        focal_loss, giou_loss, l1_loss)
from coassign.matcher import MatchResult
from coassign.priors import PriorSet

logger = logging.getLogger(__name__)

DEFAULT_LOSS_CONFIG = {
    'lambda1': 1.0,
    'lambda2': 2.0,
    # encoder head terms
    'cls': 1.0,
    'reg': 1.0,
    'centerness': 1.0,
    # decoder terms, as in the matching cost
    'dec_cls': 2.0,
    'dec_l1': 5.0,
    'dec_giou': 2.0,
    'focal_alpha': DEFAULT_FOCAL_CONFIG['alpha'],
    'focal_gamma': DEFAULT_FOCAL_CONFIG['gamma'],
}

# head kind -> (classification loss, has centerness branch)
HEAD_LOSS_TERMS = {
    'atss': ('focal', True),
    'fcos': ('focal', True),
    'retinanet': ('focal', False),
    'faster_rcnn': ('ce', False),
}


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = DEFAULT_LOSS_CONFIG['lambda1']
    lambda2: float = DEFAULT_LOSS_CONFIG['lambda2']
    cls: float = DEFAULT_LOSS_CONFIG['cls']
    reg: float = DEFAULT_LOSS_CONFIG['reg']
    centerness: float = DEFAULT_LOSS_CONFIG['centerness']
    dec_cls: float = DEFAULT_LOSS_CONFIG['dec_cls']
    dec_l1: float = DEFAULT_LOSS_CONFIG['dec_l1']
    dec_giou: float = DEFAULT_LOSS_CONFIG['dec_giou']
    focal_alpha: float = DEFAULT_LOSS_CONFIG['focal_alpha']
    focal_gamma: float = DEFAULT_LOSS_CONFIG['focal_gamma']

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not math.isfinite(value) or value < 0:
                raise ConfigError(f'loss weight {f.name} must be a finite nonnegative number, got {value}')


# ---------------------------------------------------------------------------
# encoder
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class HeadPredictions:
    """Raw outputs of one auxiliary head, per pyramid level.

    ``cls_logits[j]`` is (L_j, C) for sigmoid heads and (L_j, C + 1) with
    background last for softmax heads; ``boxes[j]`` holds decoded corner
    boxes in image pixels; ``centerness[j]`` holds centerness logits.
    Row ``k`` of each array belongs to location ``k`` of level ``j``.
    """
    cls_logits: Mapping[int, np.ndarray]
    boxes: Mapping[int, np.ndarray]
    centerness: Optional[Mapping[int, np.ndarray]] = None

    @classmethod
    def from_flat(cls, priors: PriorSet, cls_logits: np.ndarray, boxes: np.ndarray,
                  centerness: Optional[np.ndarray] = None) -> 'HeadPredictions':
        """Split flat per-prior arrays (prior-table order) into per-level arrays."""
        n = len(priors)
        cls_logits = np.asarray(cls_logits, dtype=np.float64)
        boxes = np.asarray(boxes, dtype=np.float64)
        if len(cls_logits) != n or len(boxes) != n:
            raise InvalidInputError(f'flat predictions must have {n} rows, got {len(cls_logits)} and {len(boxes)}')
        split = {}
        for j in np.unique(priors.levels):
            sel = np.flatnonzero(priors.levels == j)
            split[int(j)] = sel[np.argsort(priors.locations[sel], kind='stable')]
        ctr = None
        if centerness is not None:
            centerness = np.asarray(centerness, dtype=np.float64).reshape(-1)
            ctr = {j: centerness[sel] for j, sel in split.items()}
        return cls(cls_logits={j: cls_logits[sel] for j, sel in split.items()},
                   boxes={j: boxes[sel] for j, sel in split.items()}, centerness=ctr)

    def gather(self, keys: Sequence[Tuple[int, int]], what: str = 'cls_logits') -> np.ndarray:
        table = getattr(self, what)
        if table is None:
            raise InvalidInputError(f'predictions carry no {what}')
        rows = []
        for level, location in keys:
            arr = table.get(level)
            if arr is None or not 0 <= location < len(arr):
                size = 0 if arr is None else len(arr)
                raise InvalidInputError(f'{what}: no prediction at level {level}, location {location} '
                                        f'(level holds {size})')
            rows.append(np.asarray(arr[location], dtype=np.float64))
        if not rows:
            sample = next(iter(table.values()), np.zeros((0,)))
            return np.zeros((0,) + np.asarray(sample).shape[1:])
        return np.stack(rows)


@dataclass(frozen=True)
class HeadLoss:
    """Normalized terms of one head's encoder loss."""
    head: str
    cls: float
    reg: float
    centerness: float
    num_pos: int
    total: float

    def to_dict(self) -> dict:
        return {'head': self.head, 'cls': self.cls, 'reg': self.reg, 'centerness': self.centerness,
                'num_pos': self.num_pos, 'total': self.total}


@dataclass(frozen=True)
class EncoderLoss:
    heads: Tuple[HeadLoss, ...]
    total: float


def _sigmoid_cls(logits: np.ndarray, labels: np.ndarray, weights: LossWeights) -> float:
    num_classes = logits.shape[-1] if logits.ndim == 2 else 0
    onehot = np.zeros_like(logits)
    pos = labels >= 0
    if pos.any():
        if labels[pos].max() >= num_classes:
            raise InvalidInputError(f'label {int(labels[pos].max())} outside the {num_classes} predicted classes')
        onehot[np.flatnonzero(pos), labels[pos]] = 1.0
    value, _ = focal_loss(logits, onehot, weights.focal_alpha, weights.focal_gamma)
    return math.fsum(value.ravel())


def _softmax_cls(logits: np.ndarray, labels: np.ndarray) -> float:
    if len(logits) == 0:
        return 0.0
    background = logits.shape[-1] - 1
    if labels.max() >= background:
        raise InvalidInputError(f'label {int(labels.max())} collides with the background slot {background}')
    value, _ = cross_entropy(logits, np.where(labels >= 0, labels, background))
    return math.fsum(value)


def head_encoder_loss(assignment: Assignment, predictions: HeadPredictions,
                      weights: Optional[LossWeights] = None) -> HeadLoss:
    """Encoder loss of one head, normalized by ``max(num_pos, 1)``."""
    weights = weights or LossWeights()
    if assignment.head not in HEAD_LOSS_TERMS:
        raise ConfigError(f'no loss recipe for head {assignment.head!r}')
    cls_kind, has_centerness = HEAD_LOSS_TERMS[assignment.head]

    pos_keys = assignment.pos_keys()
    keys = pos_keys + list(assignment.neg)
    labels = np.array([p.label for p in assignment.pos] + [-1] * len(assignment.neg), dtype=np.int64)
    logits = predictions.gather(keys, 'cls_logits')
    if cls_kind == 'focal':
        cls_sum = _sigmoid_cls(logits, labels, weights)
    else:
        cls_sum = _softmax_cls(logits, labels)

    reg_sum = 0.0
    ctr_sum = 0.0
    if assignment.pos:
        pred_boxes = predictions.gather(pos_keys, 'boxes')
        gt_boxes = np.stack([p.gt_box.as_array() for p in assignment.pos])
        values, _ = giou_loss(pred_boxes, gt_boxes)
        reg_sum = math.fsum(values)
        if has_centerness:
            ctr_logits = predictions.gather(pos_keys, 'centerness')
            targets = np.array([p.centerness for p in assignment.pos], dtype=np.float64)
            values, _ = binary_cross_entropy(ctr_logits, targets)
            ctr_sum = math.fsum(values)

    norm = max(assignment.num_pos, 1)
    cls_term = cls_sum / norm
    reg_term = reg_sum / norm
    ctr_term = ctr_sum / norm
    total = weights.cls * cls_term + weights.reg * reg_term + weights.centerness * ctr_term
    return HeadLoss(head=assignment.head, cls=cls_term, reg=reg_term, centerness=ctr_term,
                    num_pos=assignment.num_pos, total=total)


def encoder_loss(assignments: Sequence[Assignment], predictions: Sequence[HeadPredictions],
                 weights: Optional[LossWeights] = None) -> EncoderLoss:
    """Per-head encoder losses and their sum over the K heads."""
    if len(assignments) != len(predictions):
        raise InvalidInputError(f'{len(predictions)} prediction sets for {len(assignments)} heads')
    heads = tuple(head_encoder_loss(a, p, weights) for a, p in zip(assignments, predictions))
    total = math.fsum(h.total for h in heads)
    logger.debug('encoder loss %s -> %.6g', [round(h.total, 6) for h in heads], total)
    return EncoderLoss(heads=heads, total=total)


# ---------------------------------------------------------------------------
# decoder
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class QueryOutputs:
    """One decoder layer's outputs for a query group.

    ``logits`` is (M, C) sigmoid class logits; ``boxes`` is (M, 4)
    normalized ``(cx, cy, w, h)``.
    """
    logits: np.ndarray
    boxes: np.ndarray

    def __post_init__(self):
        logits = np.asarray(self.logits, dtype=np.float64)
        boxes = np.asarray(self.boxes, dtype=np.float64).reshape(-1, 4)
        if logits.ndim != 2 or len(logits) != len(boxes):
            raise InvalidInputError(f'query logits {logits.shape} do not pair with boxes {boxes.shape}')
        object.__setattr__(self, 'logits', logits)
        object.__setattr__(self, 'boxes', boxes)

    def __len__(self) -> int:
        return len(self.boxes)


@dataclass(frozen=True, eq=False)
class QueryTargets:
    """Class labels and normalized ``(cx, cy, w, h)`` boxes, one per target."""
    labels: np.ndarray
    boxes: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        boxes = np.asarray(self.boxes, dtype=np.float64).reshape(-1, 4)
        if len(labels) != len(boxes):
            raise InvalidInputError(f'{len(labels)} target labels for {len(boxes)} boxes')
        object.__setattr__(self, 'labels', labels)
        object.__setattr__(self, 'boxes', boxes)

    def __len__(self) -> int:
        return len(self.labels)


def _normalized(boxes: np.ndarray, image_h: int, image_w: int) -> np.ndarray:
    scale = np.array([image_w, image_h, image_w, image_h], dtype=np.float64)
    return xyxy_to_cxcywh(np.asarray(boxes, dtype=np.float64).reshape(-1, 4) / scale)


def aux_targets(assignment: Assignment, image_h: int, image_w: int) -> QueryTargets:
    """Targets of an auxiliary group: query q is bound to the gt of positive q."""
    boxes = [p.gt_box.as_array() for p in assignment.pos]
    return QueryTargets(labels=[p.label for p in assignment.pos],
                        boxes=_normalized(np.array(boxes).reshape(-1, 4), image_h, image_w))


def gt_targets(labels: Sequence[int], boxes: np.ndarray, image_h: int, image_w: int) -> QueryTargets:
    """Targets of the set-matching group: the image's gts, normalized."""
    return QueryTargets(labels=labels, boxes=_normalized(boxes, image_h, image_w))


def _box_terms(pred: np.ndarray, target: np.ndarray) -> Tuple[float, float]:
    if len(pred) == 0:
        return 0.0, 0.0
    l1, _ = l1_loss(pred, target)
    pred_xyxy = cxcywh_to_xyxy(pred)
    # keep raw network boxes valid for GIoU
    pred_xyxy[:, 2:] = np.maximum(pred_xyxy[:, 2:], pred_xyxy[:, :2])
    giou, _ = giou_loss(pred_xyxy, cxcywh_to_xyxy(target))
    return math.fsum(l1), math.fsum(giou)


def _query_cls(logits: np.ndarray, rows: np.ndarray, labels: np.ndarray, weights: LossWeights) -> float:
    onehot = np.zeros_like(logits)
    if len(rows):
        if labels.max() >= logits.shape[1] or labels.min() < 0:
            raise InvalidInputError(f'target label outside the {logits.shape[1]} predicted classes')
        onehot[rows, labels] = 1.0
    value, _ = focal_loss(logits, onehot, weights.focal_alpha, weights.focal_gamma)
    return math.fsum(value.ravel())


def decoder_aux_loss(outputs: QueryOutputs, targets: QueryTargets,
                     weights: Optional[LossWeights] = None) -> float:
    """Matching-free loss of one auxiliary group at one decoder layer.

    Query ``q`` is supervised by target ``q``; classification, L1 and GIoU
    terms are summed and divided by ``max(M, 1)``.
    """
    weights = weights or LossWeights()
    if len(outputs) != len(targets):
        raise InvalidInputError(f'auxiliary group has {len(outputs)} queries for {len(targets)} positives')
    m = len(outputs)
    if m == 0:
        return 0.0
    cls = _query_cls(outputs.logits, np.arange(m), targets.labels, weights)
    l1, giou = _box_terms(outputs.boxes, targets.boxes)
    return (weights.dec_cls * cls + weights.dec_l1 * l1 + weights.dec_giou * giou) / m


def set_matching_loss(outputs: QueryOutputs, targets: QueryTargets, match: MatchResult,
                      weights: Optional[LossWeights] = None) -> float:
    """One-to-one loss of the learnable group given its Hungarian matching.

    Unmatched queries are background; the sum is divided by ``max(G, 1)``.
    """
    weights = weights or LossWeights()
    rows = np.array([q for q, _ in match.pairs], dtype=np.int64)
    cols = np.array([g for _, g in match.pairs], dtype=np.int64)
    if len(rows) and (rows.max() >= len(outputs) or cols.max() >= len(targets)):
        raise InvalidInputError('matching refers to queries or targets that do not exist')
    cls = _query_cls(outputs.logits, rows, targets.labels[cols] if len(cols) else cols, weights)
    l1, giou = _box_terms(outputs.boxes[rows], targets.boxes[cols])
    return (weights.dec_cls * cls + weights.dec_l1 * l1 + weights.dec_giou * giou) / max(len(targets), 1)


# ---------------------------------------------------------------------------
# global objective
# ---------------------------------------------------------------------------

def _component(value, what: str) -> float:
    if value is None:
        raise InvalidInputError(f'missing loss component {what}')
    value = float(value)
    if not math.isfinite(value) or value < 0:
        raise InvalidInputError(f'loss component {what} must be finite and nonnegative, got {value}')
    return value


def global_loss(decoder_main: Sequence[float], decoder_aux: Sequence[Sequence[float]], encoder: float,
                weights: Optional[LossWeights] = None, num_heads: Optional[int] = None,
                encoder_inside_layer_sum: bool = True) -> float:
    """Total training objective over L decoder layers and K auxiliary heads.

    ``sum_l (main_l + lambda1 * sum_i aux_{i,l} + lambda2 * enc)``; with
    ``encoder_inside_layer_sum=False`` the encoder term is added once
    outside the layer sum instead.

    Args:
        decoder_main: Set-matching loss per layer, length L.
        decoder_aux: Per layer, the K auxiliary-group losses.
        encoder: Summed encoder loss of the K heads.
        weights: lambda1 and lambda2.
        num_heads: Expected K; inferred from the first layer when omitted.
        encoder_inside_layer_sum: Keep the encoder term inside the layer sum.
    """
    weights = weights or LossWeights()
    if decoder_main is None or decoder_aux is None:
        raise InvalidInputError('missing decoder loss components')
    num_layers = len(decoder_main)
    if num_layers < 1:
        raise InvalidInputError('global loss needs at least one decoder layer')
    if len(decoder_aux) != num_layers:
        raise InvalidInputError(f'{len(decoder_aux)} auxiliary layers for {num_layers} decoder layers')
    if num_heads is not None:
        k = num_heads
    else:
        k = len(decoder_aux[0]) if decoder_aux[0] is not None else 0
    enc = _component(encoder, 'encoder')
    terms = []
    for layer in range(num_layers):
        row = decoder_aux[layer]
        if row is None or len(row) != k:
            raise InvalidInputError(f'decoder layer {layer + 1} has {0 if row is None else len(row)} '
                                    f'auxiliary losses, expected {k}')
        aux = math.fsum(_component(v, f'aux[{layer + 1}][{i + 1}]') for i, v in enumerate(row))
        main = _component(decoder_main[layer], f'main[{layer + 1}]')
        terms.append(main + weights.lambda1 * aux)
        if encoder_inside_layer_sum:
            terms.append(weights.lambda2 * enc)
    if not encoder_inside_layer_sum:
        terms.append(weights.lambda2 * enc)
    return math.fsum(terms)


@dataclass(frozen=True)
class LossReport:
    encoder: EncoderLoss
    decoder_main: Tuple[float, ...]
    decoder_aux: Tuple[Tuple[float, ...], ...]
    total: float
    encoder_inside_layer_sum: bool = True

    def to_dict(self) -> Dict[str, object]:
        return {
            'encoder': [h.to_dict() for h in self.encoder.heads],
            'encoder_total': self.encoder.total,
            'decoder_main': list(self.decoder_main),
            'decoder_aux': [list(row) for row in self.decoder_aux],
            'encoder_inside_layer_sum': self.encoder_inside_layer_sum,
            'total': self.total,
        }


def build_loss_report(encoder: EncoderLoss, decoder_main: Sequence[float],
                      decoder_aux: Sequence[Sequence[float]], weights: Optional[LossWeights] = None,
                      encoder_inside_layer_sum: bool = True) -> LossReport:
    total = global_loss(decoder_main, decoder_aux, encoder.total, weights, num_heads=len(encoder.heads),
                        encoder_inside_layer_sum=encoder_inside_layer_sum)
    return LossReport(encoder=encoder, decoder_main=tuple(float(v) for v in decoder_main),
                      decoder_aux=tuple(tuple(float(v) for v in row) for row in decoder_aux),
                      total=total, encoder_inside_layer_sum=encoder_inside_layer_sum)
