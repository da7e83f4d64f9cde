from coassign.assigners.atss import DEFAULT_ATSS_CONFIG, assign_atss, atss_threshold
from coassign.assigners.base import (IGNORED, NEGATIVE, Assignment,
                                     GroundTruth, PositiveSample,
                                     assignment_from_vector, dense_targets)
from coassign.assigners.fcos import (DEFAULT_FCOS_CONFIG, assign_fcos,
                                     default_regress_ranges, fcos_pos_boxes)
from coassign.assigners.max_iou import (FASTER_RCNN_THRESHOLDS,
                                        RETINANET_THRESHOLDS, assign_max_iou)
from coassign.assigners.proposals import (DEFAULT_PROPOSAL_CONFIG,
                                          DEFAULT_SAMPLER_CONFIG,
                                          build_proposal_priors,
                                          sample_negatives,
                                          synthesize_proposals)

__all__ = [
    'Assignment',
    'DEFAULT_ATSS_CONFIG',
    'DEFAULT_FCOS_CONFIG',
    'DEFAULT_PROPOSAL_CONFIG',
    'DEFAULT_SAMPLER_CONFIG',
    'FASTER_RCNN_THRESHOLDS',
    'GroundTruth',
    'IGNORED',
    'NEGATIVE',
    'PositiveSample',
    'RETINANET_THRESHOLDS',
    'assign_atss',
    'assign_fcos',
    'assign_max_iou',
    'assignment_from_vector',
    'atss_threshold',
    'build_proposal_priors',
    'default_regress_ranges',
    'dense_targets',
    'fcos_pos_boxes',
    'sample_negatives',
    'synthesize_proposals',
]
