"""Per-level scalar maps and the bilinear resize used by the diagnostics."""
from dataclasses import dataclass

import numpy as np
from skimage.transform import resize

from coassign.errors import InvalidInputError


@dataclass(frozen=True, eq=False)
class ScalarMap:
    """A ``height x width`` grid of nonnegative values attached to level ``j``."""
    level: int
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.size == 0:
            raise InvalidInputError(f'level {self.level} map must be a nonempty 2-D grid, got shape {values.shape}')
        if not np.all(np.isfinite(values)):
            raise InvalidInputError(f'level {self.level} map has non-finite values')
        if np.any(values < 0):
            raise InvalidInputError(f'level {self.level} map has negative values')
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @property
    def shape(self):
        return self.values.shape


def resize_grid(values: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize of a 2-D array (align_corners=False, edge clamped)."""
    if out_h <= 0 or out_w <= 0:
        raise InvalidInputError(f'output size must be positive, got {out_h}x{out_w}')
    values = np.asarray(values, dtype=np.float64)
    out = resize(values, (out_h, out_w), order=1, mode='edge', anti_aliasing=False, preserve_range=True)
    return np.clip(out, values.min(), values.max())


def bilinear_resize(m: ScalarMap, out_h: int, out_w: int) -> ScalarMap:
    """Resize ``m`` to ``out_h x out_w``; constant maps stay exactly constant."""
    return ScalarMap(level=m.level, values=resize_grid(m.values, out_h, out_w))
