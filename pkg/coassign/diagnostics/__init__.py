from coassign.diagnostics.discriminability import (DEFAULT_CURVE_CONFIG,
                                                   CurvePoint, ForegroundMask,
                                                   ScoreMap,
                                                   default_thresholds,
                                                   discriminability_map,
                                                   iof_iob_at_threshold,
                                                   iof_iob_curve, mean_curve)
from coassign.diagnostics.instability import (InstabilityReport,
                                              binding_from_match,
                                              matching_instability)

__all__ = [
    'CurvePoint',
    'DEFAULT_CURVE_CONFIG',
    'ForegroundMask',
    'InstabilityReport',
    'ScoreMap',
    'binding_from_match',
    'default_thresholds',
    'discriminability_map',
    'iof_iob_at_threshold',
    'iof_iob_curve',
    'matching_instability',
    'mean_curve',
]
