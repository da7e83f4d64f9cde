from coassign.matcher.cost import (DEFAULT_MATCH_CONFIG, MatchWeights,
                                   QueryPrediction, build_detr_cost,
                                   focal_class_cost, match_one_to_one)
from coassign.matcher.hungarian import (MatchResult, hungarian_solve,
                                        validate_cost_matrix)

__all__ = [
    'DEFAULT_MATCH_CONFIG',
    'MatchResult',
    'MatchWeights',
    'QueryPrediction',
    'build_detr_cost',
    'focal_class_cost',
    'hungarian_solve',
    'match_one_to_one',
    'validate_cost_matrix',
]
