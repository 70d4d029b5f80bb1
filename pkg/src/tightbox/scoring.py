"""Proposal objectness scoring: purity minus surrounding-context completeness.

A proposal is rated by two region statistics on one class's confidence map:
the mean confidence inside the box (purity) and the conditional average of
the highest-confidence pixels in the ring between the box and its enlarged
version (surrounding completeness). Tight boxes have high purity and low
surrounding completeness, so the difference ranks them above boxes stuck
on discriminative object parts.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .confmap import ConfMap, IntegralImage, box_mean, build_integral
from .errors import EmptyRegionError
from .geometry import Box, RingRegion, ring


class EmptyRingPolicy(enum.Enum):
    """What to do when the enlarged box clips to the box itself.

    ZERO scores the surround as 0.0 (the box keeps its purity as the full
    score); SKIP marks the proposal excluded from candidate pools.
    """

    ZERO = "zero"
    SKIP = "skip"


@dataclass(frozen=True)
class ScoringConfig:
    enlarge_ratio: float = 1.2
    top_fraction: float = 0.5
    pool_size: int = 200
    empty_ring_policy: EmptyRingPolicy = EmptyRingPolicy.ZERO

    def __post_init__(self):
        if self.enlarge_ratio < 1.0:
            raise ValueError(f"enlarge_ratio must be >= 1, got {self.enlarge_ratio}")
        if not 0.0 < self.top_fraction <= 1.0:
            raise ValueError(f"top_fraction must be in (0, 1], got {self.top_fraction}")
        if self.pool_size < 1:
            raise ValueError(f"pool_size must be >= 1, got {self.pool_size}")


@dataclass(frozen=True)
class ScoredProposal:
    """A box with its inside / surround statistics for one class.

    ``excluded`` is only set under the SKIP empty-ring policy; excluded
    proposals carry their purity but never enter candidate pools.
    """

    box: Box
    class_id: int
    p_inside: float
    p_surround: float
    objectness: float
    excluded: bool = False

    def __post_init__(self):
        if not 0.0 <= self.p_inside <= 1.0:
            raise ValueError(f"p_inside out of [0, 1]: {self.p_inside}")
        if not 0.0 <= self.p_surround <= 1.0:
            raise ValueError(f"p_surround out of [0, 1]: {self.p_surround}")
        if self.objectness != self.p_inside - self.p_surround:
            raise ValueError("objectness must equal p_inside - p_surround")


@dataclass(frozen=True)
class CandidatePool:
    """Top proposals for one (image, class), sorted by objectness descending.

    Ties are broken by p_inside descending, then input position ascending,
    so pools are bit-reproducible.
    """

    image_id: str
    class_id: int
    entries: tuple[ScoredProposal, ...] = field(default=())


def top_k_count(n: int, top_fraction: float) -> int:
    """Number of pixels the conditional average keeps: ceil(fraction * n).

    Rounding up guarantees at least one pixel for any non-empty region.
    The product is evaluated in floats; the fast kernel and the sequence
    path share this helper, and the naive reference scorer mirrors the
    same expression, so all paths agree on k even when the product
    rounds.
    """
    return min(max(math.ceil(top_fraction * n), 1), n)


def conditional_average(values, top_fraction: float) -> float:
    """Mean of the ceil(fraction * N) largest values.

    Equal values contribute equally, so the result does not depend on how
    ties at the cutoff are ordered. Fraction 1 is a plain mean.
    """
    if not 0.0 < top_fraction <= 1.0:
        raise ValueError(f"top_fraction must be in (0, 1], got {top_fraction}")
    arr = np.asarray(values, dtype=np.float64)
    n = arr.size
    if n == 0:
        raise EmptyRegionError("conditional average of an empty region")
    k = top_k_count(n, top_fraction)
    if k >= n:
        return float(arr.sum() / n)
    part = np.partition(arr, n - k)
    return float(part[n - k:].sum() / k)


def _gather_ring(values: np.ndarray, buf: np.ndarray,
                 ox0: int, oy0: int, ox1: int, oy1: int,
                 bx0: int, by0: int, bx1: int, by1: int) -> int:
    """Copy ring pixels into ``buf`` as four strips; returns the pixel count.

    Strip order (top, bottom, left, right) is fixed so every caller fills
    the buffer identically; the loop is unrolled because this sits on the
    hot path of batch scoring.
    """
    n = 0
    h = by0 - oy0
    if h > 0:
        cnt = h * (ox1 - ox0)
        buf[:cnt].reshape(h, ox1 - ox0)[...] = values[oy0:by0, ox0:ox1]
        n = cnt
    h = oy1 - by1
    if h > 0:
        cnt = h * (ox1 - ox0)
        buf[n:n + cnt].reshape(h, ox1 - ox0)[...] = values[by1:oy1, ox0:ox1]
        n += cnt
    w = bx0 - ox0
    if w > 0:
        cnt = (by1 - by0) * w
        if cnt > 0:
            buf[n:n + cnt].reshape(by1 - by0, w)[...] = values[by0:by1, ox0:bx0]
            n += cnt
    w = ox1 - bx1
    if w > 0:
        cnt = (by1 - by0) * w
        if cnt > 0:
            buf[n:n + cnt].reshape(by1 - by0, w)[...] = values[by0:by1, bx1:ox1]
            n += cnt
    return n


def _topk_mean(buf: np.ndarray, n: int, top_fraction: float) -> float:
    """Mean of the k largest of buf[:n]; partitions the buffer in place."""
    k = top_k_count(n, top_fraction)
    v = buf[:n]
    if k >= n:
        return float(v.sum(dtype=np.float64) / n)
    v.partition(n - k)
    return float(v[n - k:].sum(dtype=np.float64) / k)


def _ring_topk_mean(values: np.ndarray, rg: RingRegion, top_fraction: float,
                    buf: np.ndarray):
    """Conditional average over a ring, or None if the ring is empty.

    Selection is exact (introselect to the k-th order statistic), done in
    place on the scratch buffer; sums accumulate in float64.
    """
    o, i = rg.outer, rg.inner
    n = _gather_ring(values, buf, o.x0, o.y0, o.x1, o.y1,
                     i.x0, i.y0, i.x1, i.y1)
    if n == 0:
        return None
    return _topk_mean(buf, n, top_fraction)


def purity(ii: IntegralImage, b: Box) -> float:
    """Mean confidence over all pixels inside the box."""
    return box_mean(ii, b)


def surrounding_completeness(m: ConfMap, b: Box, cfg: ScoringConfig) -> float:
    """Conditional average of the ring around ``b`` at the configured ratio.

    An empty ring resolves per the policy: ZERO returns 0.0, SKIP raises
    EmptyRegionError (callers that batch proposals translate this into an
    exclusion mark instead of aborting).
    """
    rg = ring(b, cfg.enlarge_ratio, m.width, m.height)
    buf = np.empty(rg.pixel_count, dtype=m.values.dtype)
    result = _ring_topk_mean(m.values, rg, cfg.top_fraction, buf)
    if result is None:
        if cfg.empty_ring_policy is EmptyRingPolicy.ZERO:
            return 0.0
        raise EmptyRegionError(f"empty ring for box {b} at ratio {cfg.enlarge_ratio}")
    return result


def score(m: ConfMap, ii: IntegralImage, b: Box, cfg: ScoringConfig,
          _buf: np.ndarray | None = None) -> ScoredProposal:
    """Score one proposal: objectness = purity - surrounding completeness."""
    if not m.contains_box(b):
        raise ValueError(f"box {b} exceeds map bounds {m.width}x{m.height}")
    p_in = purity(ii, b)
    rg = ring(b, cfg.enlarge_ratio, m.width, m.height)
    if _buf is None:
        _buf = np.empty(rg.pixel_count, dtype=m.values.dtype)
    p_sur = _ring_topk_mean(m.values, rg, cfg.top_fraction, _buf)
    if p_sur is None:
        excluded = cfg.empty_ring_policy is EmptyRingPolicy.SKIP
        return ScoredProposal(box=b, class_id=m.class_id, p_inside=p_in,
                              p_surround=0.0, objectness=p_in, excluded=excluded)
    return ScoredProposal(box=b, class_id=m.class_id, p_inside=p_in,
                          p_surround=p_sur, objectness=p_in - p_sur)


def score_batch(m: ConfMap, boxes: list[Box], cfg: ScoringConfig,
                threads: int = 1) -> list[ScoredProposal]:
    """Score proposals in input order; entries equal single-box score() calls.

    Bounds are validated up front and a ValueError names every offending
    box, so the batch either completes for all boxes or fails before
    scoring any. The loop body mirrors score() operation for operation
    (geometry vectorized up front, same ring kernel), so outputs are
    bit-identical to the single-box path.
    """
    bad = [i for i, b in enumerate(boxes) if not m.contains_box(b)]
    if bad:
        raise ValueError(f"boxes out of map bounds {m.width}x{m.height} "
                         f"at input positions {bad}")
    ii = build_integral(m)
    if not boxes:
        return []

    coords = np.array([b.as_tuple() for b in boxes], dtype=np.int64)
    x0, y0, x1, y1 = coords.T
    t = ii.table
    # same 4-corner expression and operation order as IntegralImage.box_sum
    p_in = (t[y1, x1] - t[y0, x1] - t[y1, x0] + t[y0, x0]) / ((x1 - x0) * (y1 - y0))

    # same arithmetic as geometry.enlarge, elementwise
    r = cfg.enlarge_ratio
    cx = (x0 + x1) / 2.0
    cy = (y0 + y1) / 2.0
    hw = (x1 - x0) * r / 2.0
    hh = (y1 - y0) * r / 2.0
    ox0 = np.maximum(0, np.floor(cx - hw)).astype(np.int64)
    oy0 = np.maximum(0, np.floor(cy - hh)).astype(np.int64)
    ox1 = np.minimum(m.width, np.ceil(cx + hw)).astype(np.int64)
    oy1 = np.minimum(m.height, np.ceil(cy + hh)).astype(np.int64)

    geo = np.stack([ox0, oy0, ox1, oy1, x0, y0, x1, y1], axis=1).tolist()
    p_in_list = p_in.tolist()
    skip_on_empty = cfg.empty_ring_policy is EmptyRingPolicy.SKIP
    frac = cfg.top_fraction
    values = m.values
    class_id = m.class_id
    gather = _gather_ring
    topk = _topk_mean
    out: list[ScoredProposal | None] = [None] * len(boxes)

    def work(lo: int, hi: int) -> None:
        buf = np.empty(m.width * m.height, dtype=values.dtype)
        for idx in range(lo, hi):
            g = geo[idx]
            n = gather(values, buf, g[0], g[1], g[2], g[3],
                       g[4], g[5], g[6], g[7])
            pi = p_in_list[idx]
            box = boxes[idx]
            if n == 0:
                out[idx] = ScoredProposal(box=box, class_id=class_id, p_inside=pi,
                                          p_surround=0.0, objectness=pi,
                                          excluded=skip_on_empty)
                continue
            ps = topk(buf, n, frac)
            out[idx] = ScoredProposal(box=box, class_id=class_id, p_inside=pi,
                                      p_surround=ps, objectness=pi - ps)

    if threads <= 1:
        work(0, len(boxes))
    else:
        from concurrent.futures import ThreadPoolExecutor

        step = max(1, math.ceil(len(boxes) / threads))
        spans = [(lo, min(lo + step, len(boxes)))
                 for lo in range(0, len(boxes), step)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda s: work(*s), spans))
    return out  # type: ignore[return-value]


def build_pool(scored: list[ScoredProposal], cfg: ScoringConfig,
               image_id: str = "") -> CandidatePool:
    """Keep the top pool_size proposals by objectness, deterministic ties."""
    kept = [s for s in scored if not s.excluded]
    class_ids = {s.class_id for s in kept}
    if len(class_ids) > 1:
        raise ValueError(f"pool entries span multiple classes: {sorted(class_ids)}")
    ranked = sorted(kept, key=lambda s: (-s.objectness, -s.p_inside))
    class_id = kept[0].class_id if kept else -1
    return CandidatePool(image_id=image_id, class_id=class_id,
                         entries=tuple(ranked[:cfg.pool_size]))


def purity_only_score(ii: IntegralImage, b: Box) -> ScoredProposal:
    """Baseline ranking that looks only inside the box (no surround term)."""
    p_in = purity(ii, b)
    return ScoredProposal(box=b, class_id=ii.class_id, p_inside=p_in,
                          p_surround=0.0, objectness=p_in)
