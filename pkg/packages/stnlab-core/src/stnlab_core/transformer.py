"""Differentiable spatial transformer: affine grids, bilinear sampling, localization heads.

Coordinates are normalized to [-1, 1] with the centers of the corner pixels
at +-1. A transform theta = [a b tx; c d ty] maps OUTPUT coordinates (x, y)
to SOURCE coordinates, i.e. the sampler pulls values from theta @ (x, y, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np

from stnlab_common.errors import DegenerateTransformError, RejectedInputError, SingularTransformError
from stnlab_core import ops
from stnlab_core.tensor import Tensor, record

SINGULAR_TOLERANCE = 1e-8
HeadMode = Literal["full_affine", "rotation_only"]

IDENTITY_THETA = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


@dataclass
class AffineParams:
    """Per-example 2x3 transforms, matrix shape [B, 2, 3]"""

    matrix: Tensor

    def __post_init__(self) -> None:
        if self.matrix.ndim != 3 or self.matrix.shape[1:] != (2, 3):
            raise RejectedInputError(f"affine params must be [B, 2, 3], got {self.matrix.shape}")

    @property
    def batch(self) -> int:
        return self.matrix.shape[0]

    def numpy(self) -> np.ndarray:
        return self.matrix.data

    @classmethod
    def from_array(cls, matrix) -> "AffineParams":
        array = np.asarray(matrix, dtype=np.float64)
        if array.ndim == 2:
            array = array[None]
        return cls(Tensor(array))

    @classmethod
    def identity(cls, batch: int = 1) -> "AffineParams":
        return cls(Tensor(np.repeat(IDENTITY_THETA[None], batch, axis=0)))

    @classmethod
    def rotation(cls, angles) -> "AffineParams":
        """Pull transform theta(alpha) = [cos -sin 0; sin cos 0] per angle"""
        alpha = np.atleast_1d(np.asarray(angles, dtype=np.float64))
        return cls(Tensor(_rotation_matrices(alpha)))

    @classmethod
    def translation(cls, shifts: Sequence[Sequence[float]], height: int, width: int) -> "AffineParams":
        """Transforms that move image content by (dy, dx) pixels"""
        shifts = np.atleast_2d(np.asarray(shifts, dtype=np.float64))
        matrix = np.repeat(IDENTITY_THETA[None], len(shifts), axis=0)
        matrix[:, 0, 2] = -2.0 * shifts[:, 1] / max(width - 1, 1)
        matrix[:, 1, 2] = -2.0 * shifts[:, 0] / max(height - 1, 1)
        return cls(Tensor(matrix))


@dataclass
class SamplingGrid:
    """Normalized source coordinates [B, H, W, 2], (y, x) per site"""

    coords: Tensor

    def __post_init__(self) -> None:
        if self.coords.ndim != 4 or self.coords.shape[-1] != 2:
            raise RejectedInputError(f"sampling grid must be [B, H, W, 2], got {self.coords.shape}")

    def in_bounds(self, tolerance: float = 1e-9) -> np.ndarray:
        """[B, H, W] mask of sites whose source lies inside [-1, 1]^2"""
        return np.all(np.abs(self.coords.data) <= 1.0 + tolerance, axis=-1)


@dataclass
class HeadWeights:
    """Final localization layer"""

    weight: Tensor
    bias: Tensor


def _rotation_matrices(alpha: np.ndarray) -> np.ndarray:
    cos, sin = np.cos(alpha), np.sin(alpha)
    matrix = np.zeros((alpha.size, 2, 3))
    matrix[:, 0, 0], matrix[:, 0, 1] = cos, -sin
    matrix[:, 1, 0], matrix[:, 1, 1] = sin, cos
    return matrix


def lattice(extent: int) -> np.ndarray:
    """Uniform [-1, 1] coordinates of pixel centers, exactly symmetric about 0"""
    if extent == 1:
        return np.zeros(1)
    return (2.0 * np.arange(extent) - (extent - 1)) / (extent - 1)


def affine_grid(params: AffineParams, out_height: int, out_width: int) -> SamplingGrid:
    if out_height < 1 or out_width < 1:
        raise RejectedInputError(f"affine_grid: extents must be >= 1, got {out_height}x{out_width}")
    theta = params.matrix
    if not np.all(np.isfinite(theta.data)):
        raise RejectedInputError("affine_grid: transform has non-finite entries")
    ys, xs = np.meshgrid(lattice(out_height), lattice(out_width), indexing="ij")
    base = np.stack([xs, ys, np.ones_like(xs)], axis=-1)  # [H, W, 3]
    source = np.einsum("hwk,bjk->bhwj", base, theta.data)  # (x_s, y_s)

    def rule(grad: np.ndarray):
        return (np.einsum("bhwj,hwk->bjk", grad[..., ::-1], base),)

    coords = record("affine_grid", (theta,), Tensor(source[..., ::-1].copy()), rule)
    return SamplingGrid(coords)


def bilinear_sample(input: Tensor, grid: SamplingGrid) -> Tensor:
    """Bilinear interpolation of input at grid sites, zero outside the image.

    Differentiable with respect to both the input values and the grid.
    """
    if input.ndim != 4:
        raise RejectedInputError(f"bilinear_sample: input must be [B, C, H, W], got {input.shape}")
    batch, channels, height, width = input.shape
    coords = grid.coords
    if coords.shape[0] != batch:
        raise RejectedInputError(
            f"bilinear_sample: grid batch {coords.shape[0]} != input batch {batch}"
        )
    out_h, out_w = coords.shape[1], coords.shape[2]
    sites = out_h * out_w

    py = ((coords.data[..., 0] + 1.0) * 0.5 * (height - 1)).reshape(batch, sites)
    px = ((coords.data[..., 1] + 1.0) * 0.5 * (width - 1)).reshape(batch, sites)
    y0, x0 = np.floor(py), np.floor(px)
    wy1, wx1 = py - y0, px - x0
    wy0, wx0 = 1.0 - wy1, 1.0 - wx1
    y0, x0 = y0.astype(np.int64), x0.astype(np.int64)

    image = input.data.reshape(batch, channels, height * width)
    corners = []
    for dy, dx in ((0, 0), (0, 1), (1, 0), (1, 1)):
        yy, xx = y0 + dy, x0 + dx
        valid = (yy >= 0) & (yy < height) & (xx >= 0) & (xx < width)
        index = np.where(valid, yy * width + xx, 0)
        gather = np.broadcast_to(index[:, None, :], (batch, channels, sites))
        values = np.take_along_axis(image, gather, axis=2) * valid[:, None, :]
        corners.append((index, valid, values))

    v00, v01, v10, v11 = (values for _, _, values in corners)
    weights = (wy0 * wx0, wy0 * wx1, wy1 * wx0, wy1 * wx1)
    out = sum(values * weight[:, None] for (_, _, values), weight in zip(corners, weights))
    out = out.reshape(batch, channels, out_h, out_w)

    def rule(grad: np.ndarray):
        g = grad.reshape(batch, channels, sites)
        grad_input = grad_grid = None
        if input.requires_grad:
            planes = (np.arange(batch * channels) * (height * width)).reshape(batch, channels, 1)
            grad_input = np.zeros(batch * channels * height * width)
            for (index, valid, _), weight in zip(corners, weights):
                contribution = g * (weight * valid)[:, None, :]
                grad_input += np.bincount(
                    (planes + index[:, None, :]).ravel(),
                    weights=contribution.ravel(),
                    minlength=grad_input.size,
                )
            grad_input = grad_input.reshape(input.shape)
        if coords.requires_grad:
            d_px = ((v01 - v00) * wy0[:, None] + (v11 - v10) * wy1[:, None]) * g
            d_py = ((v10 - v00) * wx0[:, None] + (v11 - v01) * wx1[:, None]) * g
            grad_grid = np.stack(
                [d_py.sum(axis=1) * 0.5 * (height - 1), d_px.sum(axis=1) * 0.5 * (width - 1)],
                axis=-1,
            ).reshape(batch, out_h, out_w, 2)
        return grad_input, grad_grid

    return record("bilinear_sample", (input, coords), Tensor(out), rule)


def warp(
    input: Tensor,
    params: AffineParams,
    out_height: Optional[int] = None,
    out_width: Optional[int] = None,
) -> Tensor:
    """bilinear_sample(input, affine_grid(params, ...)) at the input's own size by default"""
    out_height = input.shape[2] if out_height is None else out_height
    out_width = input.shape[3] if out_width is None else out_width
    return bilinear_sample(input, affine_grid(params, out_height, out_width))


def _homogeneous(matrix: np.ndarray) -> np.ndarray:
    full = np.zeros((matrix.shape[0], 3, 3))
    full[:, :2, :] = matrix
    full[:, 2, 2] = 1.0
    return full


def invert(params: AffineParams) -> AffineParams:
    matrix = params.numpy()
    det = matrix[:, 0, 0] * matrix[:, 1, 1] - matrix[:, 0, 1] * matrix[:, 1, 0]
    bad = np.flatnonzero(~(np.abs(det) > SINGULAR_TOLERANCE))
    if bad.size:
        raise SingularTransformError(
            f"transform {int(bad[0])} is singular (|det| = {abs(det[bad[0]]):.3e})"
        )
    linear_inv = np.linalg.inv(matrix[:, :, :2])
    shift = -np.einsum("bij,bj->bi", linear_inv, matrix[:, :, 2])
    return AffineParams(Tensor(np.concatenate([linear_inv, shift[:, :, None]], axis=2)))


def compose(outer: AffineParams, inner: AffineParams) -> AffineParams:
    """Homogeneous product outer @ inner"""
    product = _homogeneous(outer.numpy()) @ _homogeneous(inner.numpy())
    return AffineParams(Tensor(product[:, :2, :]))


def wrap_angle(angle):
    """Map angles into (-pi, pi]"""
    wrapped = np.mod(np.asarray(angle, dtype=np.float64) + math.pi, 2.0 * math.pi) - math.pi
    wrapped = np.where(wrapped <= -math.pi, wrapped + 2.0 * math.pi, wrapped)
    return float(wrapped) if wrapped.ndim == 0 else wrapped


def extract_angle(params: AffineParams) -> np.ndarray:
    """atan2(c, a) per example, in (-pi, pi]"""
    matrix = params.numpy()
    a, c = matrix[:, 0, 0], matrix[:, 1, 0]
    norm = np.hypot(a, c)
    bad = np.flatnonzero(~(norm >= SINGULAR_TOLERANCE))
    if bad.size:
        raise DegenerateTransformError(
            f"transform {int(bad[0])} has a degenerate first column (norm {norm[bad[0]]:.3e})"
        )
    angle = np.arctan2(c, a)
    return np.where(angle <= -math.pi, math.pi, angle)


def rotation_theta(alpha: Tensor) -> Tensor:
    """[B, 1] angles -> [B, 2, 3] rotation transforms, differentiable in alpha"""
    values = alpha.data.reshape(-1)
    cos, sin = np.cos(values), np.sin(values)

    def rule(grad: np.ndarray):
        d_alpha = (
            -grad[:, 0, 0] * sin - grad[:, 0, 1] * cos + grad[:, 1, 0] * cos - grad[:, 1, 1] * sin
        )
        return (d_alpha.reshape(alpha.shape),)

    return record("rotation_theta", (alpha,), Tensor(_rotation_matrices(values)), rule)


def head_outputs(mode: HeadMode) -> int:
    return 6 if mode == "full_affine" else 1


def init_head_weights(in_features: int, mode: HeadMode) -> HeadWeights:
    """Zero weights and a bias that makes the initial transform the identity"""
    bias = IDENTITY_THETA.reshape(-1).copy() if mode == "full_affine" else np.zeros(1)
    return HeadWeights(
        weight=Tensor(np.zeros((head_outputs(mode), in_features)), requires_grad=True),
        bias=Tensor(bias, requires_grad=True),
    )


def localization_head(features: Tensor, mode: HeadMode, weights: HeadWeights) -> AffineParams:
    """Regress per-example transforms from flattened [B, N] features"""
    if features.ndim != 2:
        raise RejectedInputError(f"localization_head: features must be [B, N], got {features.shape}")
    raw = ops.dense(features, weights.weight, weights.bias)
    if mode == "full_affine":
        return AffineParams(ops.reshape(raw, (features.shape[0], 2, 3)))
    if mode == "rotation_only":
        return AffineParams(rotation_theta(raw))
    raise RejectedInputError(f"localization_head: unknown mode {mode!r}")
