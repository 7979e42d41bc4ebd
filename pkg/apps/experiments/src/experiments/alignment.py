"""Do feature maps of a transformed input line up with those of the original?

For input images f, a transform T and the backbone feature extractor G at
some layer, the analysis compares

    aligned       T^-1 G(T f)           against G(f)
    best spatial  S G(T f)              for the best warp S of a search family
    channel swap  P T^-1 G(T f)         with channels permuted by P

using a relative L2 norm over sites whose compensating warp stays in bounds.
T is given in input coordinates and mapped into each layer's own
coordinates through the layer's cumulative stride and offset.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from stnlab_common.errors import RejectedInputError
from stnlab_core.networks import LayerGeometry, ModelInstance, features_at, layer_geometry
from stnlab_core.tensor import Tensor
from stnlab_core.transformer import (
    AffineParams,
    affine_grid,
    compose,
    extract_angle,
    invert,
    warp,
)

logger = logging.getLogger(__name__)

SEARCH_ROTATIONS_DEG = tuple(range(0, 360, 5))
SEARCH_SHIFTS = tuple((dy, dx) for dy in range(-2, 3) for dx in range(-2, 3))
MIN_COVERAGE = 0.5
CANDIDATE_CHUNK = 256


@dataclass
class AlignmentRow:
    example: int
    residual_aligned: float
    residual_best_spatial: float
    best_rotation_deg: float
    best_dy: float
    best_dx: float
    channel_swap_residual: float


@dataclass
class AlignmentReport:
    layer: int
    permutation: Tuple[int, ...]
    rows: List[AlignmentRow] = field(default_factory=list)

    def median(self, column: str) -> float:
        values = [getattr(row, column) for row in self.rows]
        return float(np.median(values)) if values else float("nan")


def _axis_frame(stride: float, offset: float, feature_extent: int, input_extent: int) -> Tuple[float, float]:
    """Scale and shift taking a feature-map normalized coordinate to the input's"""
    if feature_extent < 2 or input_extent < 2:
        return 1.0, 0.0
    scale = stride * (feature_extent - 1) / (input_extent - 1)
    shift = (2.0 * offset + stride * (feature_extent - 1)) / (input_extent - 1) - 1.0
    return scale, shift


def feature_frame(geometry: LayerGeometry, input_height: int, input_width: int) -> AffineParams:
    sx, bx = _axis_frame(geometry.stride, geometry.offset, geometry.width, input_width)
    sy, by = _axis_frame(geometry.stride, geometry.offset, geometry.height, input_height)
    return AffineParams.from_array([[sx, 0.0, bx], [0.0, sy, by]])


def conjugate(transform: AffineParams, frame: AffineParams) -> AffineParams:
    """The feature-space transform that corresponds to ``transform`` on the input"""
    frames = AffineParams.from_array(np.repeat(frame.numpy(), transform.batch, axis=0))
    return compose(invert(frames), compose(transform, frames))


def relative_residuals(candidates: np.ndarray, reference: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """||(c - r) * m|| / ||r * m|| for candidates [K, C, H, W] and masks [K, H, W]"""
    weights = masks[:, None, :, :]
    num = np.sqrt(np.sum(((candidates - reference[None]) * weights) ** 2, axis=(1, 2, 3)))
    den = np.sqrt(np.sum((reference[None] * weights) ** 2, axis=(1, 2, 3)))
    out = np.where(num == 0.0, 0.0, np.inf)
    positive = den > 0
    out[positive] = num[positive] / den[positive]
    return out


@dataclass
class SearchFamily:
    params: AffineParams
    rotations_deg: np.ndarray
    shifts: np.ndarray
    masks: np.ndarray

    @property
    def size(self) -> int:
        return self.params.batch


def search_family(height: int, width: int) -> SearchFamily:
    """Rotations about the map center composed with small whole-pixel shifts,
    dropping candidates that keep less than half of the map in view"""
    degrees = np.repeat(np.asarray(SEARCH_ROTATIONS_DEG, dtype=np.float64), len(SEARCH_SHIFTS))
    shifts = np.tile(np.asarray(SEARCH_SHIFTS, dtype=np.float64), (len(SEARCH_ROTATIONS_DEG), 1))
    family = compose(AffineParams.rotation(np.deg2rad(degrees)), AffineParams.translation(shifts, height, width))
    masks = affine_grid(family, height, width).in_bounds()
    keep = masks.mean(axis=(1, 2)) >= MIN_COVERAGE
    return SearchFamily(
        params=AffineParams.from_array(family.numpy()[keep]),
        rotations_deg=degrees[keep],
        shifts=shifts[keep],
        masks=masks[keep].astype(np.float64),
    )


def _describe(comp: np.ndarray, height: int, width: int) -> Tuple[float, float, float]:
    """Rotation (degrees in [0, 360)) and content shift of a compensating warp"""
    angle = float(extract_angle(AffineParams.from_array(comp))[0])
    degrees = math.degrees(angle) % 360.0
    dx = -comp[0, 2] * (width - 1) / 2.0 if width > 1 else 0.0
    dy = -comp[1, 2] * (height - 1) / 2.0 if height > 1 else 0.0
    return degrees, dy, dx


def _check_permutation(permutation: Optional[Sequence[int]], channels: int) -> Tuple[int, ...]:
    if permutation is None:
        return tuple(range(channels))
    permutation = tuple(int(c) for c in permutation)
    if sorted(permutation) != list(range(channels)):
        raise RejectedInputError(f"{permutation} is not a permutation of {channels} channels")
    return permutation


def alignment_analysis(
    model: ModelInstance,
    layer: int,
    transform: AffineParams,
    images: Tensor,
    permutation: Optional[Sequence[int]] = None,
    workers: int = 1,
) -> AlignmentReport:
    """Per-example residuals; ``transform`` holds one matrix for all images or one each"""
    if images.ndim != 4:
        raise RejectedInputError(f"images must be [N, C, H, W], got {images.shape}")
    count, _, height, width = images.shape
    if transform.batch not in (1, count):
        raise RejectedInputError(f"{transform.batch} transforms for {count} images")
    per_example = transform if transform.batch == count else AffineParams.from_array(
        np.repeat(transform.numpy(), count, axis=0)
    )
    geometry = layer_geometry(model.spec, layer)
    order = _check_permutation(permutation, geometry.channels)
    feature_transform = conjugate(per_example, feature_frame(geometry, height, width))
    compensation = invert(feature_transform)

    reference = features_at(model, images, layer).data
    moved = features_at(model, warp(images, per_example), layer)
    aligned = warp(moved, compensation).data
    aligned_masks = affine_grid(compensation, geometry.height, geometry.width).in_bounds().astype(np.float64)
    family = search_family(geometry.height, geometry.width)

    def analyse(index: int) -> AlignmentRow:
        target = reference[index]
        residual_aligned = float(relative_residuals(aligned[index : index + 1], target, aligned_masks[index : index + 1])[0])
        swapped = aligned[index : index + 1][:, list(order)]
        channel_swap = float(relative_residuals(swapped, target, aligned_masks[index : index + 1])[0])

        best = residual_aligned
        rotation, dy, dx = _describe(compensation.numpy()[index], geometry.height, geometry.width)
        source = moved.data[index : index + 1]
        for start in range(0, family.size, CANDIDATE_CHUNK):
            stop = min(start + CANDIDATE_CHUNK, family.size)
            batch = Tensor(np.repeat(source, stop - start, axis=0))
            warped = warp(batch, AffineParams.from_array(family.params.numpy()[start:stop])).data
            residuals = relative_residuals(warped, target, family.masks[start:stop])
            k = int(np.argmin(residuals))
            if residuals[k] < best:
                best = float(residuals[k])
                rotation = float(family.rotations_deg[start + k])
                dy, dx = (float(v) for v in family.shifts[start + k])
        return AlignmentRow(index, residual_aligned, best, rotation, dy, dx, channel_swap)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(analyse, range(count)))
    else:
        rows = [analyse(index) for index in range(count)]

    report = AlignmentReport(layer=layer, permutation=order, rows=rows)
    logger.info(
        "Alignment analysis complete",
        extra={
            "layer": layer,
            "examples": count,
            "candidates": family.size,
            "median_aligned": report.median("residual_aligned"),
            "median_best_spatial": report.median("residual_best_spatial"),
            "median_channel_swap": report.median("channel_swap_residual"),
        },
    )
    return report
