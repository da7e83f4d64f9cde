from coassign.priors.pyramid import (ATSS_ANCHOR, RETINA_ANCHOR, PriorEntry,
                                     PriorSet, PyramidLevel, PyramidSpec,
                                     build_pyramid_spec, generate_anchors,
                                     generate_points, level_stride,
                                     proposals_to_priors, roi_level)
from coassign.priors.resize import ScalarMap, bilinear_resize, resize_grid

__all__ = [
    'ATSS_ANCHOR',
    'RETINA_ANCHOR',
    'PriorEntry',
    'PriorSet',
    'PyramidLevel',
    'PyramidSpec',
    'ScalarMap',
    'bilinear_resize',
    'build_pyramid_spec',
    'generate_anchors',
    'generate_points',
    'level_stride',
    'proposals_to_priors',
    'resize_grid',
    'roi_level',
]
