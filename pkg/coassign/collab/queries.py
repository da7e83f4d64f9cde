"""Customized positive queries and the K+1 decoder query groups.

Each positive of an auxiliary head becomes one extra decoder query bound to
its gt. The deterministic part of a query is its normalized box, the
sine/cosine encoding of that box and the (level, location) index pair used
to gather encoder features; the learned projections belong to the trainer.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from coassign.assigners import Assignment
from coassign.errors import ConfigError, InvalidInputError
from coassign.geometry import CenterBox, xyxy_to_cxcywh

logger = logging.getLogger(__name__)

DEFAULT_QUERY_CONFIG = {
    'n_learnable': 300,
    'pe_dim': 256,
    'temperature': 10000.0,
}

ROLE_SET_MATCHING = 'set-matching'
ROLE_AUXILIARY = 'auxiliary'


def sinusoidal_pe(box: CenterBox, C: int = DEFAULT_QUERY_CONFIG['pe_dim'],
                  temperature: float = DEFAULT_QUERY_CONFIG['temperature']) -> np.ndarray:
    """Sine/cosine encoding of a normalized ``(cx, cy, w, h)`` box.

    Each coordinate gets ``C / 4`` dims. Coordinates are scaled by 2*pi and
    dim pair ``t`` uses frequency ``temperature ** (-2t / (C / 4))``; pairs
    are laid out as ``sin, cos, sin, cos, ...``.
    """
    if C <= 0 or C % 8:
        raise ConfigError(f'positional encoding width must be a positive multiple of 8, got {C}')
    if not temperature > 0:
        raise ConfigError(f'temperature must be positive, got {temperature}')
    per_coord = C // 4
    t = np.arange(per_coord // 2, dtype=np.float64)
    inv_freq = temperature ** (-2.0 * t / per_coord)
    coords = np.asarray(box.as_array() if isinstance(box, CenterBox) else box, dtype=np.float64)
    angles = coords[:, None] * (2.0 * math.pi) * inv_freq[None, :]
    out = np.empty((4, per_coord))
    out[:, 0::2] = np.sin(angles)
    out[:, 1::2] = np.cos(angles)
    return out.reshape(-1)


@dataclass(frozen=True, eq=False)
class QuerySeed:
    """One customized positive query of head ``head_index`` (1-based)."""
    head_index: int
    head: str
    gt_index: int
    box: CenterBox
    level: int
    location: int
    pe: np.ndarray

    def to_dict(self) -> dict:
        return {
            'gt': self.gt_index,
            'box': self.box.as_array().tolist(),
            'level': self.level,
            'location': self.location,
            'pe': self.pe.tolist(),
        }


def normalize_box(box: np.ndarray, image_h: int, image_w: int) -> CenterBox:
    """Corner box in pixels -> ``CenterBox`` in the unit square (clipped)."""
    scale = np.array([image_w, image_h, image_w, image_h], dtype=np.float64)
    unit = np.clip(np.asarray(box, dtype=np.float64) / scale, 0.0, 1.0)
    return CenterBox.from_array(xyxy_to_cxcywh(unit[None])[0])


def extract_query_seeds(assignment: Assignment, head_index: int, image_h: int, image_w: int,
                        C: int = DEFAULT_QUERY_CONFIG['pe_dim'],
                        temperature: float = DEFAULT_QUERY_CONFIG['temperature']) -> List[QuerySeed]:
    """One seed per positive, in the assignment's positive order."""
    if image_h <= 0 or image_w <= 0:
        raise InvalidInputError(f'image size must be positive, got {image_h}x{image_w}')
    seeds = []
    for sample, pos_box in zip(assignment.pos, assignment.pos_boxes):
        box = normalize_box(pos_box.as_array(), image_h, image_w)
        seeds.append(QuerySeed(head_index=head_index, head=assignment.head, gt_index=sample.gt_index,
                               box=box, level=sample.level, location=sample.location,
                               pe=sinusoidal_pe(box, C, temperature)))
    logger.debug('head %d (%s): %d query seeds', head_index, assignment.head, len(seeds))
    return seeds


@dataclass(frozen=True)
class QueryGroup:
    """A contiguous range ``[start, stop)`` of decoder queries."""
    group_id: int
    count: int
    role: str
    start: int
    head: str = ''
    # pre-bound gt of every query; empty for the set-matching group
    gt_binding: Tuple[int, ...] = ()

    @property
    def stop(self) -> int:
        return self.start + self.count

    def to_dict(self) -> dict:
        out = {'group': self.group_id, 'count': self.count, 'role': self.role,
               'start': self.start, 'stop': self.stop}
        if self.role == ROLE_AUXILIARY:
            out['head'] = self.head
            out['gt_binding'] = list(self.gt_binding)
        return out


@dataclass(frozen=True)
class QueryGroupLayout:
    groups: Tuple[QueryGroup, ...]

    @property
    def K(self) -> int:
        return len(self.groups) - 1

    @property
    def total_queries(self) -> int:
        return sum(g.count for g in self.groups)

    def sizes(self) -> Tuple[int, ...]:
        return tuple(g.count for g in self.groups)

    def to_dict(self) -> dict:
        return {'K': self.K, 'total_queries': self.total_queries,
                'groups': [g.to_dict() for g in self.groups]}


def layout_query_groups(n_learnable: int = DEFAULT_QUERY_CONFIG['n_learnable'],
                        assignments: Sequence[Assignment] = ()) -> QueryGroupLayout:
    """Group 0 holds the learnable one-to-one queries; group i the M_i positives of head i.

    Auxiliary queries are bound to their gt in positive order, so their
    losses need no matching.
    """
    if n_learnable < 1:
        raise ConfigError(f'n_learnable must be >= 1, got {n_learnable}')
    groups = [QueryGroup(group_id=0, count=n_learnable, role=ROLE_SET_MATCHING, start=0)]
    start = n_learnable
    for i, assignment in enumerate(assignments, start=1):
        binding = tuple(p.gt_index for p in assignment.pos)
        groups.append(QueryGroup(group_id=i, count=len(binding), role=ROLE_AUXILIARY, start=start,
                                 head=assignment.head, gt_binding=binding))
        start += len(binding)
    return QueryGroupLayout(groups=tuple(groups))


def positive_ratio(assignments: Sequence[Assignment], num_gts: int) -> Dict[str, float]:
    """|pos| / |gt| per head, keyed ``"<index>:<kind>"``; 0 when there are no gts."""
    return {f'{i}:{a.head}': (a.num_pos / num_gts if num_gts else 0.0)
            for i, a in enumerate(assignments, start=1)}
