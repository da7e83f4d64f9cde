"""Auxiliary head configuration and per-head target construction."""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from coassign.assigners import (DEFAULT_ATSS_CONFIG, DEFAULT_FCOS_CONFIG,
                                DEFAULT_PROPOSAL_CONFIG, DEFAULT_SAMPLER_CONFIG,
                                FASTER_RCNN_THRESHOLDS, RETINANET_THRESHOLDS,
                                Assignment, GroundTruth, assign_atss,
                                assign_fcos, assign_max_iou,
                                build_proposal_priors, sample_negatives)
from coassign.errors import ConfigError, InvalidInputError
from coassign.priors import (ATSS_ANCHOR, RETINA_ANCHOR, PriorSet, PyramidSpec,
                             generate_anchors, generate_points)

logger = logging.getLogger(__name__)

HEAD_KINDS = ('atss', 'fcos', 'retinanet', 'faster_rcnn')

# Per-kind hyperparameters; user params are merged over these.
DEFAULT_HEAD_PARAMS: Dict[str, Dict[str, Any]] = {
    'atss': {**ATSS_ANCHOR, **DEFAULT_ATSS_CONFIG},
    'fcos': {'center_radius': DEFAULT_FCOS_CONFIG['center_radius'], 'regress_ranges': None},
    'retinanet': {**RETINA_ANCHOR, **RETINANET_THRESHOLDS, 'rescue_low_quality': True},
    'faster_rcnn': {
        **FASTER_RCNN_THRESHOLDS,
        'rescue_low_quality': True,
        'add_gt_as_proposals': DEFAULT_PROPOSAL_CONFIG['add_gt_as_proposals'],
        'sample': False,
        **DEFAULT_SAMPLER_CONFIG,
    },
}

DEFAULT_HEADS = ('atss', 'faster_rcnn')
DEFAULT_NUM_LEVELS = 5


@dataclass(frozen=True)
class HeadSpec:
    """One auxiliary head: its assigner kind and merged hyperparameters."""
    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in HEAD_KINDS:
            raise ConfigError(f'unknown assigner kind {self.kind!r}; expected one of {", ".join(HEAD_KINDS)}')
        unknown = set(self.params) - set(DEFAULT_HEAD_PARAMS[self.kind])
        if unknown:
            raise ConfigError(f'{self.kind} head does not take {", ".join(sorted(unknown))}')
        object.__setattr__(self, 'params', {**DEFAULT_HEAD_PARAMS[self.kind], **dict(self.params)})

    @property
    def prior_kind(self) -> str:
        return {'atss': 'anchor', 'retinanet': 'anchor', 'fcos': 'point', 'faster_rcnn': 'proposal'}[self.kind]


@dataclass(frozen=True)
class HeadConfig:
    """The K auxiliary heads and the pyramid depth J they share."""
    heads: Tuple[HeadSpec, ...] = tuple(HeadSpec(kind) for kind in DEFAULT_HEADS)
    num_levels: int = DEFAULT_NUM_LEVELS

    def __post_init__(self):
        if self.num_levels < 1:
            raise ConfigError(f'num_levels must be >= 1, got {self.num_levels}')

    @property
    def K(self) -> int:
        return len(self.heads)

    @classmethod
    def from_kinds(cls, kinds: Sequence[str], num_levels: int = DEFAULT_NUM_LEVELS,
                   params: Optional[Sequence[Mapping[str, Any]]] = None) -> 'HeadConfig':
        params = list(params) if params is not None else [{}] * len(kinds)
        if len(params) != len(kinds):
            raise ConfigError(f'{len(params)} parameter sets for {len(kinds)} heads')
        return cls(heads=tuple(HeadSpec(k, p) for k, p in zip(kinds, params)), num_levels=num_levels)


def build_head_priors(head: HeadSpec, spec: PyramidSpec, gt: GroundTruth,
                      proposals: Optional[np.ndarray] = None,
                      rng: Optional[np.random.Generator] = None) -> PriorSet:
    """Priors a head assigns over: anchors, points or level-tagged proposals."""
    p = head.params
    if head.kind in ('atss', 'retinanet'):
        return generate_anchors(spec, scales=p['scales'], ratios=p['ratios'])
    if head.kind == 'fcos':
        return generate_points(spec)
    return build_proposal_priors(gt, spec, proposals=proposals, rng=rng,
                                 add_gt_as_proposals=p['add_gt_as_proposals'])


def build_head_targets(head: HeadSpec, priors: PriorSet, gt: GroundTruth,
                       rng: Optional[np.random.Generator] = None) -> Assignment:
    """Run one head's assigner and return its positive/negative sets and positive boxes.

    Args:
        head: Head kind and hyperparameters.
        priors: Priors matching the head's prior kind.
        gt: Ground truth of the image.
        rng: Generator for the optional Faster-RCNN negative sampler.

    Raises:
        ConfigError: Unknown head kind.
        InvalidInputError: Priors of the wrong kind for the head.
    """
    if not isinstance(head, HeadSpec) or head.kind not in HEAD_KINDS:
        raise ConfigError(f'unknown assigner kind {getattr(head, "kind", head)!r}')
    if priors.kind != head.prior_kind:
        raise InvalidInputError(f'{head.kind} head needs {head.prior_kind} priors, got {priors.kind}')
    p = head.params
    if head.kind == 'atss':
        return assign_atss(priors, gt, k=p['topk'])
    if head.kind == 'fcos':
        return assign_fcos(priors, gt, center_radius=p['center_radius'],
                           regress_ranges=p['regress_ranges'])
    assignment = assign_max_iou(priors, gt, pos_thr=p['pos_thr'], neg_thr=p['neg_thr'],
                                rescue_low_quality=p['rescue_low_quality'], head=head.kind)
    if head.kind == 'faster_rcnn' and p['sample']:
        assignment = sample_negatives(assignment, rng if rng is not None else np.random.default_rng(0),
                                      num=p['num'], pos_fraction=p['pos_fraction'])
    return assignment
