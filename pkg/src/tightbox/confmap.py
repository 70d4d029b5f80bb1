"""Per-class confidence maps and summed-area tables for O(1) box statistics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Box, RingRegion


@dataclass(frozen=True)
class ConfMap:
    """One class's per-pixel segmentation confidence, values in [0, 1].

    ``values`` is a read-only float32 array of shape (height, width),
    row-major: values[y, x] is the confidence of pixel (x, y).
    """

    class_id: int
    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float32)
        if arr.ndim != 2:
            raise ValueError(f"confidence map must be 2-D, got shape {arr.shape}")
        if arr.size == 0:
            raise ValueError("confidence map must have at least one pixel")
        if not np.all(np.isfinite(arr)):
            raise ValueError("confidence map contains non-finite values")
        lo, hi = float(arr.min()), float(arr.max())
        if lo < 0.0 or hi > 1.0:
            raise ValueError(f"confidence values outside [0, 1]: min={lo}, max={hi}")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    def contains_box(self, b: Box) -> bool:
        return b.x1 <= self.width and b.y1 <= self.height


@dataclass(frozen=True)
class IntegralImage:
    """Summed-area table over a ConfMap, accumulated in double precision.

    ``table`` has shape (height+1, width+1); table[j, i] is the sum of all
    map values with y < j and x < i, so any box sum is a 4-corner query.
    """

    class_id: int
    table: np.ndarray = field(repr=False)

    @property
    def width(self) -> int:
        return self.table.shape[1] - 1

    @property
    def height(self) -> int:
        return self.table.shape[0] - 1

    def box_sum(self, b: Box) -> float:
        t = self.table
        return float(t[b.y1, b.x1] - t[b.y0, b.x1] - t[b.y1, b.x0] + t[b.y0, b.x0])


def build_integral(m: ConfMap) -> IntegralImage:
    """One-pass construction; sums are carried in float64."""
    table = np.zeros((m.height + 1, m.width + 1), dtype=np.float64)
    np.cumsum(m.values, axis=0, dtype=np.float64, out=table[1:, 1:])
    np.cumsum(table[1:, 1:], axis=1, out=table[1:, 1:])
    table.flags.writeable = False
    return IntegralImage(class_id=m.class_id, table=table)


def box_mean(ii: IntegralImage, b: Box) -> float:
    """Mean confidence over the pixels of ``b``."""
    if b.x1 > ii.width or b.y1 > ii.height:
        raise ValueError(f"box {b} exceeds map bounds {ii.width}x{ii.height}")
    return ii.box_sum(b) / b.area


def ring_values(m: ConfMap, r: RingRegion) -> np.ndarray:
    """Confidences in the ring, in row-major scan order skipping the inner box.

    Returns an empty array for empty rings.
    """
    outer, inner = r.outer, r.inner
    if outer.x1 > m.width or outer.y1 > m.height:
        raise ValueError(f"ring outer box {outer} exceeds map bounds {m.width}x{m.height}")
    if r.is_empty:
        return np.empty(0, dtype=m.values.dtype)
    patch = m.values[outer.y0:outer.y1, outer.x0:outer.x1]
    keep = np.ones(patch.shape, dtype=bool)
    keep[inner.y0 - outer.y0:inner.y1 - outer.y0,
         inner.x0 - outer.x0:inner.x1 - outer.x0] = False
    return patch[keep]
