from coassign.losses.objective import (DEFAULT_LOSS_CONFIG, HEAD_LOSS_TERMS,
                                       EncoderLoss, HeadLoss, HeadPredictions,
                                       LossReport, LossWeights, QueryOutputs,
                                       QueryTargets, aux_targets,
                                       build_loss_report, decoder_aux_loss,
                                       encoder_loss, global_loss, gt_targets,
                                       head_encoder_loss, set_matching_loss)
from coassign.losses.primitives import (DEFAULT_FOCAL_CONFIG,
                                        binary_cross_entropy, cross_entropy,
                                        focal_loss, giou_loss, l1_loss)

__all__ = [
    'DEFAULT_FOCAL_CONFIG',
    'DEFAULT_LOSS_CONFIG',
    'EncoderLoss',
    'HEAD_LOSS_TERMS',
    'HeadLoss',
    'HeadPredictions',
    'LossReport',
    'LossWeights',
    'QueryOutputs',
    'QueryTargets',
    'aux_targets',
    'binary_cross_entropy',
    'build_loss_report',
    'cross_entropy',
    'decoder_aux_loss',
    'encoder_loss',
    'focal_loss',
    'giou_loss',
    'global_loss',
    'gt_targets',
    'head_encoder_loss',
    'l1_loss',
    'set_matching_loss',
]
