"""Feature-pyramid geometry and prior generation.

Level ``j`` (1-based) has stride ``2 ** (2 + j)``: 8, 16, 32, ... Grids use
ceil division, so the coarsest cells may overhang the image border.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from coassign.errors import ConfigError, InvalidInputError
from coassign.geometry import Box, as_boxes

logger = logging.getLogger(__name__)

ATSS_ANCHOR = {'scales': (8.0,), 'ratios': (1.0,)}
RETINA_ANCHOR = {
    'scales': tuple(4.0 * 2.0 ** (k / 3.0) for k in range(3)),
    'ratios': (0.5, 1.0, 2.0),
}

PRIOR_KINDS = ('anchor', 'point', 'proposal')

# RoI scale rule: boxes with sqrt(area) < 2 * _ROI_CANONICAL go to level 1.
_ROI_CANONICAL = 56.0


def level_stride(j: int) -> int:
    return 2 ** (2 + int(j))


@dataclass(frozen=True)
class PyramidLevel:
    j: int
    stride: int
    height: int
    width: int

    @property
    def num_cells(self) -> int:
        return self.height * self.width


@dataclass(frozen=True)
class PyramidSpec:
    image_h: int
    image_w: int
    levels: Tuple[PyramidLevel, ...]

    @property
    def num_levels(self) -> int:
        return len(self.levels)

    def level(self, j: int) -> PyramidLevel:
        for lvl in self.levels:
            if lvl.j == j:
                return lvl
        raise InvalidInputError(f'pyramid has no level {j} (levels 1..{self.num_levels})')


def build_pyramid_spec(image_h: int, image_w: int, num_levels: int) -> PyramidSpec:
    """Lay out ``num_levels`` levels with strides 8, 16, 32, ...

    Args:
        image_h: Image height in pixels.
        image_w: Image width in pixels.
        num_levels: Number of levels J.

    Returns:
        The pyramid geometry.

    Raises:
        ConfigError: On non-positive sizes, or when a level above the first
            has a stride at least twice the larger image side (its single
            cell center lies outside the image on both axes).
    """
    if num_levels < 1:
        raise ConfigError(f'pyramid needs at least one level, got {num_levels}')
    if image_h <= 0 or image_w <= 0:
        raise ConfigError(f'image size must be positive, got {image_h}x{image_w}')
    levels = []
    for j in range(1, num_levels + 1):
        stride = level_stride(j)
        if j > 1 and stride >= 2 * max(image_h, image_w):
            raise ConfigError(
                f'level {j} (stride {stride}) has no cell center inside a '
                f'{image_h}x{image_w} image; use at most {j - 1} levels')
        levels.append(PyramidLevel(j=j, stride=stride,
                                   height=math.ceil(image_h / stride),
                                   width=math.ceil(image_w / stride)))
    return PyramidSpec(image_h=int(image_h), image_w=int(image_w), levels=tuple(levels))


@dataclass(frozen=True)
class PriorEntry:
    level: int
    row: int
    col: int
    location: int
    box: Box
    point: Tuple[float, float]


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PriorSet:
    """Flat, read-only table of priors across all pyramid levels.

    ``locations`` index priors within their level. For anchors the location
    is ``(row * width + col) * A + a`` with A anchors per cell; for points it
    is ``row * width + col``; for proposals it is the running index of the
    proposal among those tagged with the same level.
    """
    kind: str
    spec: PyramidSpec
    boxes: np.ndarray
    centers: np.ndarray
    levels: np.ndarray
    locations: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    scales: Tuple[float, ...] = ()
    ratios: Tuple[float, ...] = ()
    anchors_per_cell: int = 1
    _index: Dict[Tuple[int, int], int] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in PRIOR_KINDS:
            raise ConfigError(f'unknown prior kind {self.kind!r}')
        for name in ('boxes', 'centers', 'levels', 'locations', 'rows', 'cols'):
            _frozen(getattr(self, name))
        self._index.update({(int(j), int(loc)): i
                            for i, (j, loc) in enumerate(zip(self.levels, self.locations))})

    def __len__(self) -> int:
        return len(self.levels)

    @property
    def strides(self) -> np.ndarray:
        return np.array([level_stride(j) for j in self.levels], dtype=np.float64)

    def level_counts(self) -> Dict[int, int]:
        return {lvl.j: int(np.sum(self.levels == lvl.j)) for lvl in self.spec.levels}

    def flat_index(self, level: int, location: int) -> int:
        """Position in the flat table of the prior at (level, location)."""
        try:
            return self._index[(int(level), int(location))]
        except KeyError:
            raise InvalidInputError(f'no prior at level {level}, location {location}') from None

    def entry(self, i: int) -> PriorEntry:
        cx, cy = (float(v) for v in self.centers[i])
        return PriorEntry(level=int(self.levels[i]), row=int(self.rows[i]), col=int(self.cols[i]),
                          location=int(self.locations[i]), box=Box.from_array(self.boxes[i]),
                          point=(cx, cy))


def _cell_grid(level: PyramidLevel) -> Tuple[np.ndarray, np.ndarray]:
    rows, cols = np.meshgrid(np.arange(level.height), np.arange(level.width), indexing='ij')
    return rows.ravel(), cols.ravel()


def generate_anchors(spec: PyramidSpec,
                     scales: Union[float, Sequence[float]] = ATSS_ANCHOR['scales'],
                     ratios: Sequence[float] = ATSS_ANCHOR['ratios']) -> PriorSet:
    """Anchors centred on every cell of every level.

    Each (scale, ratio) pair gives one anchor per cell with area
    ``(scale * stride) ** 2`` and aspect ``w / h = ratio``.

    Args:
        spec: Pyramid geometry.
        scales: Octave scale(s) relative to the stride.
        ratios: Width/height aspect ratios.

    Returns:
        A ``PriorSet`` of kind ``anchor``.
    """
    scales = (float(scales),) if np.isscalar(scales) else tuple(float(s) for s in scales)
    ratios = tuple(float(r) for r in ratios)
    if not scales or any(s <= 0 for s in scales):
        raise ConfigError(f'anchor scales must be positive, got {scales}')
    if not ratios or any(r <= 0 for r in ratios):
        raise ConfigError(f'anchor ratios must be nonempty and positive, got {ratios}')

    # slot a = scale_index * len(ratios) + ratio_index
    sizes = np.array([(s, r) for s in scales for r in ratios], dtype=np.float64)
    per_cell = len(sizes)
    chunks = {k: [] for k in ('boxes', 'centers', 'levels', 'locations', 'rows', 'cols')}
    for level in spec.levels:
        rows, cols = _cell_grid(level)
        cx = (cols + 0.5) * level.stride
        cy = (rows + 0.5) * level.stride
        base = sizes[:, 0] * level.stride
        w = base * np.sqrt(sizes[:, 1])
        h = base / np.sqrt(sizes[:, 1])
        ccx = np.repeat(cx, per_cell)
        ccy = np.repeat(cy, per_cell)
        ww = np.tile(w, len(cx))
        hh = np.tile(h, len(cx))
        chunks['boxes'].append(np.stack([ccx - ww / 2, ccy - hh / 2, ccx + ww / 2, ccy + hh / 2], axis=-1))
        chunks['centers'].append(np.stack([ccx, ccy], axis=-1))
        chunks['levels'].append(np.full(len(ccx), level.j, dtype=np.int64))
        chunks['locations'].append(np.arange(len(ccx), dtype=np.int64))
        chunks['rows'].append(np.repeat(rows, per_cell))
        chunks['cols'].append(np.repeat(cols, per_cell))
    arrays = {k: np.concatenate(v) for k, v in chunks.items()}
    logger.debug('Generated %d anchors over %d levels (%d per cell)', len(arrays['levels']),
                 spec.num_levels, per_cell)
    return PriorSet(kind='anchor', spec=spec, scales=scales, ratios=ratios,
                    anchors_per_cell=per_cell, **arrays)


def generate_points(spec: PyramidSpec) -> PriorSet:
    """One point per cell at the cell center ``((col + 0.5) * s, (row + 0.5) * s)``."""
    chunks = {k: [] for k in ('boxes', 'centers', 'levels', 'locations', 'rows', 'cols')}
    for level in spec.levels:
        rows, cols = _cell_grid(level)
        cx = (cols + 0.5) * level.stride
        cy = (rows + 0.5) * level.stride
        chunks['boxes'].append(np.stack([cx, cy, cx, cy], axis=-1))
        chunks['centers'].append(np.stack([cx, cy], axis=-1))
        chunks['levels'].append(np.full(len(cx), level.j, dtype=np.int64))
        chunks['locations'].append(np.arange(len(cx), dtype=np.int64))
        chunks['rows'].append(rows)
        chunks['cols'].append(cols)
    arrays = {k: np.concatenate(v) for k, v in chunks.items()}
    return PriorSet(kind='point', spec=spec, **arrays)


def roi_level(boxes: np.ndarray, num_levels: int) -> np.ndarray:
    """Pyramid level for each box by the RoI scale rule, clamped to [1, J]."""
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    scale = np.sqrt(np.clip((boxes[:, 2] - boxes[:, 0]) * (boxes[:, 3] - boxes[:, 1]), 0.0, None))
    with np.errstate(divide='ignore'):
        raw = np.floor(np.log2(scale / _ROI_CANONICAL + 1e-6)) + 1
    return np.clip(raw, 1, num_levels).astype(np.int64)


def proposals_to_priors(boxes, spec: PyramidSpec, levels: Optional[Sequence[int]] = None) -> PriorSet:
    """Wrap externally supplied proposals as a ``PriorSet`` of kind ``proposal``.

    Args:
        boxes: (N, 4) proposals in image coordinates.
        spec: Pyramid geometry the level tags refer to.
        levels: Explicit level tags; derived by :func:`roi_level` when omitted.
    """
    boxes = as_boxes(boxes, 'proposals')
    if levels is None:
        tags = roi_level(boxes, spec.num_levels)
    else:
        tags = np.asarray(levels, dtype=np.int64).reshape(-1)
        if len(tags) != len(boxes):
            raise InvalidInputError(f'{len(tags)} level tags for {len(boxes)} proposals')
        if len(tags) and (tags.min() < 1 or tags.max() > spec.num_levels):
            raise InvalidInputError(f'proposal level tags must lie in [1, {spec.num_levels}]')
    locations = np.zeros(len(boxes), dtype=np.int64)
    for j in np.unique(tags):
        sel = np.flatnonzero(tags == j)
        locations[sel] = np.arange(len(sel))
    centers = np.stack([(boxes[:, 0] + boxes[:, 2]) / 2, (boxes[:, 1] + boxes[:, 3]) / 2], axis=-1)
    minus_one = np.full(len(boxes), -1, dtype=np.int64)
    return PriorSet(kind='proposal', spec=spec, boxes=boxes.copy(), centers=centers.reshape(-1, 2),
                    levels=tags.copy(), locations=locations, rows=minus_one, cols=minus_one.copy())
