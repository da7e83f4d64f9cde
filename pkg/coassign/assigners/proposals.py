"""Proposal sources and the optional negative sampler of the two-stage head."""
import logging
from typing import Optional

import numpy as np

from coassign.assigners.base import Assignment, GroundTruth
from coassign.errors import ConfigError
from coassign.geometry import box_area
from coassign.priors import PriorSet, PyramidSpec, proposals_to_priors

logger = logging.getLogger(__name__)

DEFAULT_PROPOSAL_CONFIG = {
    'jitter_per_gt': 16,
    'jitter_scale': 0.15,
    'random_count': 64,
    'add_gt_as_proposals': True,
}

DEFAULT_SAMPLER_CONFIG = {
    'num': 512,
    'pos_fraction': 0.25,
}


def synthesize_proposals(gt: GroundTruth, rng: np.random.Generator,
                         jitter_per_gt: int = DEFAULT_PROPOSAL_CONFIG['jitter_per_gt'],
                         jitter_scale: float = DEFAULT_PROPOSAL_CONFIG['jitter_scale'],
                         random_count: int = DEFAULT_PROPOSAL_CONFIG['random_count']) -> np.ndarray:
    """Stand-in proposals: jittered copies of each gt plus uniform random boxes.

    Offsets are drawn relative to each gt's size; all boxes are clipped to
    the image and empty ones dropped.
    """
    h, w = float(gt.image_h), float(gt.image_w)
    chunks = []
    if len(gt):
        boxes = np.repeat(gt.boxes, jitter_per_gt, axis=0)
        size = np.repeat(gt.boxes[:, 2:] - gt.boxes[:, :2], jitter_per_gt, axis=0)
        noise = rng.normal(0.0, jitter_scale, size=(len(boxes), 4))
        chunks.append(boxes + noise * np.concatenate([size, size], axis=1))
    if random_count > 0:
        xs = np.sort(rng.uniform(0.0, w, size=(random_count, 2)), axis=1)
        ys = np.sort(rng.uniform(0.0, h, size=(random_count, 2)), axis=1)
        chunks.append(np.stack([xs[:, 0], ys[:, 0], xs[:, 1], ys[:, 1]], axis=-1))
    if not chunks:
        return np.zeros((0, 4))
    out = np.concatenate(chunks)
    out[:, [0, 2]] = np.clip(out[:, [0, 2]], 0.0, w)
    out[:, [1, 3]] = np.clip(out[:, [1, 3]], 0.0, h)
    out[:, 2] = np.maximum(out[:, 0], out[:, 2])
    out[:, 3] = np.maximum(out[:, 1], out[:, 3])
    return out[box_area(out) > 0]


def build_proposal_priors(gt: GroundTruth, spec: PyramidSpec, proposals: Optional[np.ndarray] = None,
                          rng: Optional[np.random.Generator] = None,
                          add_gt_as_proposals: bool = DEFAULT_PROPOSAL_CONFIG['add_gt_as_proposals']) -> PriorSet:
    """Level-tagged proposal priors from supplied or synthetic boxes."""
    if proposals is None:
        proposals = synthesize_proposals(gt, rng if rng is not None else np.random.default_rng(0))
    boxes = np.asarray(proposals, dtype=np.float64).reshape(-1, 4)
    if add_gt_as_proposals and len(gt):
        boxes = np.concatenate([boxes, gt.boxes])
    return proposals_to_priors(boxes, spec)


def sample_negatives(assignment: Assignment, rng: np.random.Generator,
                     num: int = DEFAULT_SAMPLER_CONFIG['num'],
                     pos_fraction: float = DEFAULT_SAMPLER_CONFIG['pos_fraction']) -> Assignment:
    """Cap negatives at ``num - min(|pos|, num * pos_fraction)``.

    Positives are never dropped; unsampled negatives become ignored. The
    kept negatives stay in their original order.
    """
    if num <= 0 or not 0.0 < pos_fraction <= 1.0:
        raise ConfigError(f'invalid sampler settings num={num}, pos_fraction={pos_fraction}')
    expected_pos = min(assignment.num_pos, int(round(num * pos_fraction)))
    cap = max(num - expected_pos, 0)
    if len(assignment.neg) <= cap:
        return assignment
    keep = np.sort(rng.choice(len(assignment.neg), size=cap, replace=False))
    kept = set(keep.tolist())
    neg = tuple(assignment.neg[i] for i in keep)
    dropped = tuple(key for i, key in enumerate(assignment.neg) if i not in kept)
    logger.debug('%s sampler kept %d of %d negatives', assignment.head, cap, len(assignment.neg))
    return Assignment(head=assignment.head, pos=assignment.pos, neg=neg,
                      ignored=assignment.ignored + dropped, pos_boxes=assignment.pos_boxes,
                      num_priors=assignment.num_priors)
