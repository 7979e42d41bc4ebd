"""Image/feature-map alignment grids as binary PGM"""

import logging
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image

from stnlab_common.errors import RejectedInputError
from stnlab_core.networks import ModelInstance, features_at, layer_geometry
from stnlab_core.tensor import Tensor
from stnlab_core.transformer import AffineParams, invert, warp

from experiments.alignment import conjugate, feature_frame

logger = logging.getLogger(__name__)

MAX_EXAMPLES = 16
ROWS = 3


def _resize(maps: np.ndarray, height: int, width: int) -> np.ndarray:
    """[N, h, w] -> [N, height, width] through the bilinear sampler"""
    if maps.shape[1:] == (height, width):
        return maps
    batch = Tensor(maps[:, None])
    return warp(batch, AffineParams.identity(maps.shape[0]), height, width).data[:, 0]


def render_alignment_grid(
    model: ModelInstance,
    examples: Tensor,
    transform: AffineParams,
    layer: int = 1,
    channel: int = 0,
    gutter: int = 1,
) -> np.ndarray:
    """uint8 grid with one column per example and three rows:

    1. the transformed input T f (first image channel)
    2. channel ``channel`` of G(T f) warped back in feature space, T^-1 G(T f)
    3. channel ``channel`` of G(T^-1 T f), the input compensated before the features are computed

    Each row is scaled by its own peak.
    """
    if examples.ndim != 4:
        raise RejectedInputError(f"examples must be [N, C, H, W], got {examples.shape}")
    count, _, height, width = examples.shape
    if not 1 <= count <= MAX_EXAMPLES:
        raise RejectedInputError(f"{count} examples, expected 1..{MAX_EXAMPLES}")
    if gutter < 0:
        raise RejectedInputError(f"gutter {gutter} is negative")
    per_example = AffineParams.from_array(np.repeat(transform.numpy()[:1], count, axis=0))
    geometry = layer_geometry(model.spec, layer)
    if not 0 <= channel < geometry.channels:
        raise RejectedInputError(f"channel {channel} outside [0, {geometry.channels})")

    moved_input = warp(examples, per_example)
    moved = features_at(model, moved_input, layer)
    compensation = invert(conjugate(per_example, feature_frame(geometry, height, width)))
    rows = [
        moved_input.data[:, 0],
        warp(moved, compensation).data[:, channel],
        features_at(model, warp(moved_input, invert(per_example)), layer).data[:, channel],
    ]

    cell_h, cell_w = height + 2 * gutter, width + 2 * gutter
    grid = np.zeros((ROWS * cell_h, count * cell_w))
    for r, maps in enumerate(rows):
        cells = _resize(maps, height, width)
        peak = cells.max()
        cells = np.clip(cells / peak, 0.0, 1.0) if peak > 0 else np.zeros_like(cells)
        for c in range(count):
            top, left = r * cell_h + gutter, c * cell_w + gutter
            grid[top : top + height, left : left + width] = cells[c]
    return np.rint(grid * 255.0).astype(np.uint8)


def write_pgm(path: Union[str, Path], grid: np.ndarray) -> None:
    """Binary (P5) greymap"""
    Image.fromarray(np.asarray(grid, dtype=np.uint8)).save(path, format="PPM")
    logger.info("Wrote image grid", extra={"path": str(path), "shape": list(grid.shape)})


def read_pgm(path: Union[str, Path]) -> np.ndarray:
    with Image.open(path) as image:
        return np.asarray(image.convert("L"), dtype=np.uint8)
