"""Procedural "W" / "M" glyphs.

Each M is the exact 180 degree rotation of its paired W, so a detector
that fires on W under a half turn fires on M instead.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Literal, Sequence, Tuple

import numpy as np

from stnlab_common.errors import RejectedInputError
from stnlab_common.seeding import stream
from stnlab_core.data import LabeledDataset
from stnlab_core.tensor import Tensor
from stnlab_core.transformer import lattice

logger = logging.getLogger(__name__)

GlyphName = Literal["W", "M"]
GLYPH_LABELS = {"W": 0, "M": 1}
MIN_SIZE = 16

# (x, y) in normalized coordinates, y growing downwards
W_STROKE: Tuple[Tuple[float, float], ...] = (
    (-0.8, -0.6),
    (-0.4, 0.6),
    (0.0, -0.1),
    (0.4, 0.6),
    (0.8, -0.6),
)


@dataclass
class GlyphPair:
    """One glyph image [1, 1, H, W] and the detector channel that should fire on it"""

    image: Tensor
    channel_truth: GlyphName
    pair_index: int


def _segment_distance(xs: np.ndarray, ys: np.ndarray, start, end) -> np.ndarray:
    (x0, y0), (x1, y1) = start, end
    dx, dy = x1 - x0, y1 - y0
    t = ((xs - x0) * dx + (ys - y0) * dy) / (dx * dx + dy * dy)
    t = np.clip(t, 0.0, 1.0)
    return np.hypot(xs - (x0 + t * dx), ys - (y0 + t * dy))


def render_polyline(
    points: Sequence[Tuple[float, float]], size: int, half_width: float
) -> np.ndarray:
    """Anti-aliased stroke: coverage ramps linearly over one pixel at the stroke edge"""
    coords = lattice(size)
    ys, xs = np.meshgrid(coords, coords, indexing="ij")
    distance = np.full((size, size), np.inf)
    for start, end in zip(points[:-1], points[1:]):
        distance = np.minimum(distance, _segment_distance(xs, ys, start, end))
    pixel = 2.0 / (size - 1)
    return np.clip(0.5 - (distance - half_width) / pixel, 0.0, 1.0)


def render_w(size: int, half_width: float = 0.09, vertical_scale: float = 1.0) -> np.ndarray:
    """The canonical W stroke on a size x size canvas"""
    if size < MIN_SIZE:
        raise RejectedInputError(f"glyph size {size} below minimum {MIN_SIZE}")
    points = [(x, y * vertical_scale) for x, y in W_STROKE]
    return render_polyline(points, size, half_width)


def make_glyph_dataset(
    count: int, size: int, seed: int, stream_name: str = "glyphs"
) -> List[GlyphPair]:
    """Alternating W, M, W, M ... ; an odd count gives W the extra glyph.

    Stroke thickness and height are jittered per pair.
    """
    if size < MIN_SIZE:
        raise RejectedInputError(f"glyph size {size} below minimum {MIN_SIZE}")
    if count < 0:
        raise RejectedInputError(f"glyph count {count} is negative")
    rng = stream(seed, stream_name)
    pairs: List[GlyphPair] = []
    for index in range((count + 1) // 2):
        half_width = rng.uniform(0.07, 0.11)
        vertical_scale = rng.uniform(0.9, 1.0)
        w = render_w(size, half_width, vertical_scale)
        pairs.append(GlyphPair(Tensor(w[None, None]), "W", index))
        if len(pairs) < count:
            m = np.rot90(w, 2).copy()
            pairs.append(GlyphPair(Tensor(m[None, None]), "M", index))
    logger.debug("Rendered glyphs", extra={"count": count, "size": size})
    return pairs


def glyphs_as_dataset(pairs: Sequence[GlyphPair]) -> LabeledDataset:
    """Stack glyphs into a two-class dataset (W=0, M=1)"""
    if not pairs:
        raise RejectedInputError("no glyphs to stack")
    images = np.concatenate([pair.image.data for pair in pairs], axis=0)
    labels = np.array([GLYPH_LABELS[pair.channel_truth] for pair in pairs], dtype=np.int64)
    return LabeledDataset(Tensor(images), labels, num_classes=2)
