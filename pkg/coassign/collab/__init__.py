from coassign.collab.heads import (DEFAULT_HEAD_PARAMS, DEFAULT_HEADS,
                                   DEFAULT_NUM_LEVELS, HEAD_KINDS, HeadConfig,
                                   HeadSpec, build_head_priors,
                                   build_head_targets)
from coassign.collab.queries import (DEFAULT_QUERY_CONFIG, ROLE_AUXILIARY,
                                     ROLE_SET_MATCHING, QueryGroup,
                                     QueryGroupLayout, QuerySeed,
                                     extract_query_seeds, layout_query_groups,
                                     normalize_box, positive_ratio,
                                     sinusoidal_pe)

__all__ = [
    'DEFAULT_HEADS',
    'DEFAULT_HEAD_PARAMS',
    'DEFAULT_NUM_LEVELS',
    'DEFAULT_QUERY_CONFIG',
    'HEAD_KINDS',
    'HeadConfig',
    'HeadSpec',
    'QueryGroup',
    'QueryGroupLayout',
    'QuerySeed',
    'ROLE_AUXILIARY',
    'ROLE_SET_MATCHING',
    'build_head_priors',
    'build_head_targets',
    'extract_query_seeds',
    'layout_query_groups',
    'normalize_box',
    'positive_ratio',
    'sinusoidal_pe',
]
