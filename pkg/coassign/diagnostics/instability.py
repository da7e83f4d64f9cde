"""Matching instability across training epochs."""
import logging
import math
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Sequence, Tuple

from coassign.errors import InvalidInputError
from coassign.matcher import MatchResult

logger = logging.getLogger(__name__)

# gt index -> matched query index, None when the gt is unmatched
Binding = Mapping[int, Optional[int]]


def binding_from_match(match: MatchResult, num_gts: int) -> Dict[int, Optional[int]]:
    """Complete gt -> query map of one matching over ``num_gts`` gts."""
    g2q = match.gt_to_query()
    if any(g >= num_gts or g < 0 for g in g2q):
        raise InvalidInputError(f'matching refers to gts outside [0, {num_gts})')
    return {g: g2q.get(g) for g in range(num_gts)}


@dataclass(frozen=True)
class InstabilityReport:
    # ((epoch, next epoch, IS), ...) with 1-based epochs
    pairs: Tuple[Tuple[int, int, float], ...]
    mean: float

    def rows(self):
        return [(f'{a}-{b}', value) for a, b, value in self.pairs]


def _pair_instability(before: Binding, after: Binding, image: int, epoch: int) -> Optional[float]:
    if set(before) != set(after):
        raise InvalidInputError(f'image {image}: gt sets differ between epochs {epoch} and {epoch + 1}')
    if not before:
        return None
    changed = sum(1 for g in before if before[g] != after[g])
    return changed / len(before)


def matching_instability(matchings: Sequence[Sequence[Binding]]) -> InstabilityReport:
    """Fraction of gts whose matched query changes between consecutive epochs.

    Args:
        matchings: ``matchings[e][i]`` is the gt -> query binding of image
            ``i`` at epoch ``e``. Every binding lists the image's full gt set.

    Returns:
        IS per adjacent epoch pair, averaged over images with at least one
        gt, and the mean over pairs. Gaining or losing a match counts as a
        change.
    """
    if len(matchings) < 2:
        raise InvalidInputError(f'instability needs at least two epochs, got {len(matchings)}')
    num_images = len(matchings[0])
    for e, epoch in enumerate(matchings, start=1):
        if len(epoch) != num_images:
            raise InvalidInputError(f'epoch {e} has {len(epoch)} images, epoch 1 has {num_images}')
    pairs = []
    for e in range(len(matchings) - 1):
        per_image = [_pair_instability(matchings[e][i], matchings[e + 1][i], i, e + 1) for i in range(num_images)]
        scored = [v for v in per_image if v is not None]
        value = math.fsum(scored) / len(scored) if scored else 0.0
        pairs.append((e + 1, e + 2, value))
    mean = math.fsum(p[2] for p in pairs) / len(pairs)
    logger.debug('instability over %d epoch pairs: mean %.4f', len(pairs), mean)
    return InstabilityReport(pairs=tuple(pairs), mean=mean)
