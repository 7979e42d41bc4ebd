"""Network builders for the plain CNN and the three spatial-transformer placements.

A backbone is split into conv blocks (a conv layer plus the relu/pool layers
that follow it) and a tail of dense layers. "Layer X" is the output of the
X-th block; layer 0 is the input itself.

  plain    backbone only
  stn_c0   separate localization net on the input, warp the input
  stn_cX   separate localization net on the layer-X map, warp that map
  stn_slX  localization net shares backbone blocks 1..X, warp the input
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np

from stnlab_common.errors import RejectedInputError, RejectedSpecError
from stnlab_common.models import LayerSpec, LocHeadSpec, NetworkSpec
from stnlab_common.seeding import stream
from stnlab_core import ops
from stnlab_core.tensor import Tensor
from stnlab_core.transformer import (
    AffineParams,
    HeadWeights,
    init_head_weights,
    localization_head,
    warp,
)

logger = logging.getLogger(__name__)

MODEL_NAME = re.compile(r"^(?:cnn|stn_c0|stn_c(?P<c>[1-9]\d*)|stn_sl(?P<sl>\d+))$")
DEEP_WIDTHS = (16, 16, 32, 32, 48, 48, 64, 64)
LOC_POOL_MIN_EXTENT = 4

Shape = Tuple[int, int, int]


def default_backbone(num_classes: int = 10) -> List[LayerSpec]:
    return [
        LayerSpec.conv(32),
        LayerSpec.relu(),
        LayerSpec.pool(2),
        LayerSpec.conv(64),
        LayerSpec.relu(),
        LayerSpec.pool(2),
        LayerSpec.dense(128),
        LayerSpec.relu(),
        LayerSpec.dense(num_classes),
    ]


def deep_backbone(num_classes: int = 10) -> List[LayerSpec]:
    """Eight 3x3 conv blocks, pooling after every second one"""
    layers: List[LayerSpec] = []
    for index, width in enumerate(DEEP_WIDTHS, start=1):
        layers += [LayerSpec.conv(width), LayerSpec.relu()]
        if index % 2 == 0:
            layers.append(LayerSpec.pool(2))
    return layers + [LayerSpec.dense(128), LayerSpec.relu(), LayerSpec.dense(num_classes)]


def spec_for(
    model_name: str,
    backbone: Literal["default", "deep"] = "default",
    loc_mode: Literal["full_affine", "rotation_only"] = "full_affine",
    input_shape: Shape = (1, 42, 42),
    num_classes: int = 10,
) -> NetworkSpec:
    """Parse cnn | stn_c0 | stn_cX | stn_slX into a validated NetworkSpec"""
    match = MODEL_NAME.match(model_name)
    if match is None:
        raise RejectedSpecError(f"unknown model name {model_name!r}")
    if match.group("c"):
        variant, depth = "stn_cX", int(match.group("c"))
    elif match.group("sl") is not None:
        variant, depth = "stn_slX", int(match.group("sl"))
    else:
        variant, depth = ("plain", 0) if model_name == "cnn" else ("stn_c0", 0)
    layers = deep_backbone(num_classes) if backbone == "deep" else default_backbone(num_classes)
    spec = NetworkSpec(
        input_shape=input_shape,
        num_classes=num_classes,
        backbone=layers,
        variant=variant,
        depth=depth,
        loc_head=LocHeadSpec(mode=loc_mode),
    )
    validate_structure(spec)
    return spec


def split_blocks(backbone: Sequence[LayerSpec]) -> Tuple[List[List[LayerSpec]], List[LayerSpec]]:
    """Group layers into conv blocks and the dense tail"""
    blocks: List[List[LayerSpec]] = []
    tail: List[LayerSpec] = []
    for position, layer in enumerate(backbone):
        if tail or layer.kind == "dense":
            if layer.kind in ("conv", "pool"):
                raise RejectedSpecError(f"layer {position}: {layer.kind} after a dense layer")
            tail.append(layer)
        elif layer.kind == "conv":
            blocks.append([layer])
        elif layer.kind == "softmax":
            tail.append(layer)
        elif not blocks:
            raise RejectedSpecError(f"layer {position}: {layer.kind} before the first conv layer")
        else:
            blocks[-1].append(layer)
    if any(layer.kind == "softmax" for layer in tail[:-1]):
        raise RejectedSpecError("softmax is only allowed as the last layer")
    return blocks, tail


def _next_shape(layer: LayerSpec, shape: Shape, where: str) -> Shape:
    channels, height, width = shape
    if layer.kind == "conv":
        out = []
        for extent in (height, width):
            span = extent + 2 * layer.padding - layer.kernel
            if span < 0:
                raise RejectedSpecError(f"{where}: map {height}x{width} too small for kernel {layer.kernel}")
            out.append(span // layer.stride + 1)
        return (layer.width, out[0], out[1])
    if layer.kind == "pool":
        if layer.window > height or layer.window > width:
            raise RejectedSpecError(f"{where}: map {height}x{width} too small for pool {layer.window}")
        return (
            channels,
            (height - layer.window) // layer.stride + 1,
            (width - layer.window) // layer.stride + 1,
        )
    return shape


@dataclass(frozen=True)
class LayerGeometry:
    """Shape of the layer-X map and where its pixels sit in input pixel coordinates.

    Feature pixel j is centered on input pixel offset + stride * j.
    """

    channels: int
    height: int
    width: int
    stride: float
    offset: float


def layer_geometry(spec: NetworkSpec, layer: int) -> LayerGeometry:
    blocks, _ = split_blocks(spec.backbone)
    if not 0 <= layer <= len(blocks):
        raise RejectedInputError(f"layer {layer} outside [0, {len(blocks)}]")
    shape: Shape = tuple(spec.input_shape)
    stride, offset = 1.0, 0.0
    for index, block in enumerate(blocks[:layer], start=1):
        for item in block:
            shape = _next_shape(item, shape, f"block {index}")
            if item.kind == "conv":
                offset += stride * ((item.kernel - 1) / 2.0 - item.padding)
                stride *= item.stride
            elif item.kind == "pool":
                offset += stride * (item.window - 1) / 2.0
                stride *= item.stride
    return LayerGeometry(shape[0], shape[1], shape[2], stride, offset)


def _loc_plan(spec: NetworkSpec) -> Tuple[List[Tuple[str, int]], Shape]:
    """Private conv steps of a separate localization net and the shape they produce"""
    if spec.variant == "stn_slX":
        return [], tuple(_block_shape(spec, spec.depth))
    shape = _block_shape(spec, 0 if spec.variant == "stn_c0" else spec.depth)
    steps: List[Tuple[str, int]] = []
    for index, width in enumerate(spec.loc_head.conv_channels, start=1):
        steps.append(("conv", index))
        shape = (width, shape[1], shape[2])
        if shape[1] >= LOC_POOL_MIN_EXTENT and shape[2] >= LOC_POOL_MIN_EXTENT:
            steps.append(("pool", index))
            shape = (width, shape[1] // 2, shape[2] // 2)
    return steps, shape


def _block_shape(spec: NetworkSpec, layer: int) -> Shape:
    geometry = layer_geometry(spec, layer)
    return (geometry.channels, geometry.height, geometry.width)


def _tail_dense(spec: NetworkSpec) -> List[LayerSpec]:
    _, tail = split_blocks(spec.backbone)
    return [layer for layer in tail if layer.kind == "dense"]


def validate_structure(spec: NetworkSpec) -> None:
    """Raise RejectedSpecError unless the spec describes a buildable network"""
    blocks, _ = split_blocks(spec.backbone)
    if not blocks:
        raise RejectedSpecError("backbone has no conv layer")
    if spec.variant in ("plain", "stn_c0") and spec.depth != 0:
        raise RejectedSpecError(f"{spec.variant} takes no depth, got X={spec.depth}")
    if spec.variant in ("stn_cX", "stn_slX"):
        if spec.depth == 0:
            raise RejectedSpecError("X=0 is the stn_c0 configuration")
        if spec.depth > len(blocks):
            raise RejectedSpecError(
                f"X={spec.depth} exceeds the backbone's {len(blocks)} conv layers"
            )
    final = _block_shape(spec, len(blocks))
    dense = _tail_dense(spec)
    outputs = dense[-1].width if dense else final[0]
    if outputs != spec.num_classes:
        raise RejectedSpecError(f"backbone emits {outputs} outputs for {spec.num_classes} classes")
    if spec.variant != "plain":
        _loc_plan(spec)


@dataclass
class ModelInstance:
    """Named parameters plus the spec they were built for.

    Shared tensors (stn_slX) appear once, under their backbone name.
    """

    spec: NetworkSpec
    params: Dict[str, Tensor] = field(default_factory=dict)

    def parameters(self) -> List[Tensor]:
        return list(self.params.values())

    def parameter_count(self) -> int:
        return sum(p.size for p in self.params.values())

    def predict(self, images: np.ndarray, batch_size: int = 256) -> np.ndarray:
        images = np.asarray(images, dtype=np.float64)
        labels = []
        for start in range(0, images.shape[0], batch_size):
            logits = forward(self, Tensor(images[start : start + batch_size])).logits
            labels.append(np.argmax(logits.data, axis=1))
        return np.concatenate(labels) if labels else np.zeros(0, dtype=np.int64)


@dataclass
class ForwardResult:
    logits: Tensor
    theta: Optional[AffineParams] = None
    features: Dict[str, Tensor] = field(default_factory=dict)


def _he_uniform(seed: int, name: str, shape: Tuple[int, ...], fan_in: int) -> Tensor:
    limit = math.sqrt(6.0 / fan_in)
    values = stream(seed, f"init/{name}").uniform(-limit, limit, size=shape)
    return Tensor(values, requires_grad=True, name=name)


def _zeros(name: str, shape: Tuple[int, ...]) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True, name=name)


def build(spec: NetworkSpec, seed: int) -> ModelInstance:
    """Initialize every parameter from its own named stream under ``seed``"""
    validate_structure(spec)
    model = ModelInstance(spec=spec)
    params = model.params
    blocks, _ = split_blocks(spec.backbone)

    channels = spec.input_shape[0]
    for index, block in enumerate(blocks, start=1):
        conv = block[0]
        name = f"backbone.conv{index}"
        fan_in = channels * conv.kernel * conv.kernel
        params[f"{name}.weight"] = _he_uniform(seed, f"{name}.weight", (conv.width, channels, conv.kernel, conv.kernel), fan_in)
        params[f"{name}.bias"] = _zeros(f"{name}.bias", (conv.width,))
        channels = conv.width
    final = _block_shape(spec, len(blocks))
    features = final[0] * final[1] * final[2]
    for index, layer in enumerate(_tail_dense(spec), start=1):
        name = f"backbone.dense{index}"
        params[f"{name}.weight"] = _he_uniform(seed, f"{name}.weight", (layer.width, features), features)
        params[f"{name}.bias"] = _zeros(f"{name}.bias", (layer.width,))
        features = layer.width

    if spec.variant != "plain":
        steps, loc_shape = _loc_plan(spec)
        loc_channels = _block_shape(spec, 0 if spec.variant in ("stn_c0", "stn_slX") else spec.depth)[0]
        for kind, index in steps:
            if kind != "conv":
                continue
            width = spec.loc_head.conv_channels[index - 1]
            name = f"loc.conv{index}"
            params[f"{name}.weight"] = _he_uniform(seed, f"{name}.weight", (width, loc_channels, 3, 3), loc_channels * 9)
            params[f"{name}.bias"] = _zeros(f"{name}.bias", (width,))
            loc_channels = width
        features = loc_shape[0] * loc_shape[1] * loc_shape[2]
        for index, width in enumerate(spec.loc_head.hidden, start=1):
            name = f"loc.dense{index}"
            params[f"{name}.weight"] = _he_uniform(seed, f"{name}.weight", (width, features), features)
            params[f"{name}.bias"] = _zeros(f"{name}.bias", (width,))
            features = width
        head = init_head_weights(features, spec.loc_head.mode)
        head.weight.name, head.bias.name = "loc.head.weight", "loc.head.bias"
        params["loc.head.weight"], params["loc.head.bias"] = head.weight, head.bias

    logger.debug(
        "Built model",
        extra={"model": spec.name, "seed": seed, "parameters": model.parameter_count()},
    )
    return model


def _run_blocks(model: ModelInstance, x: Tensor, start: int, stop: int) -> Tensor:
    """Apply backbone blocks start+1 .. stop"""
    blocks, _ = split_blocks(model.spec.backbone)
    for index in range(start + 1, stop + 1):
        for layer in blocks[index - 1]:
            if layer.kind == "conv":
                name = f"backbone.conv{index}"
                x = ops.conv2d(
                    x,
                    model.params[f"{name}.weight"],
                    model.params[f"{name}.bias"],
                    stride=layer.stride,
                    padding=layer.padding,
                )
            elif layer.kind == "relu":
                x = ops.relu(x)
            elif layer.kind == "pool":
                x = ops.max_pool2d(x, layer.window, layer.stride)
    return x


def _run_tail(model: ModelInstance, x: Tensor) -> Tensor:
    _, tail = split_blocks(model.spec.backbone)
    if not any(layer.kind == "dense" for layer in tail):
        return ops.spatial_max(x)
    x = ops.flatten(x)
    dense_index = 0
    for layer in tail:
        if layer.kind == "dense":
            dense_index += 1
            name = f"backbone.dense{dense_index}"
            x = ops.dense(x, model.params[f"{name}.weight"], model.params[f"{name}.bias"])
        elif layer.kind == "relu":
            x = ops.relu(x)
    return x


def _localize(model: ModelInstance, x: Tensor) -> AffineParams:
    spec = model.spec
    steps, _ = _loc_plan(spec)
    if spec.variant == "stn_slX":
        x = _run_blocks(model, x, 0, spec.depth)
    for kind, index in steps:
        if kind == "conv":
            name = f"loc.conv{index}"
            x = ops.relu(
                ops.conv2d(x, model.params[f"{name}.weight"], model.params[f"{name}.bias"], padding=1)
            )
        else:
            x = ops.max_pool2d(x, 2)
    h = ops.flatten(x)
    for index in range(1, len(spec.loc_head.hidden) + 1):
        name = f"loc.dense{index}"
        h = ops.relu(ops.dense(h, model.params[f"{name}.weight"], model.params[f"{name}.bias"]))
    head = HeadWeights(model.params["loc.head.weight"], model.params["loc.head.bias"])
    return localization_head(h, spec.loc_head.mode, head)


def forward(model: ModelInstance, batch: Tensor, tap: bool = False) -> ForwardResult:
    """Logits, the predicted transforms of ST variants and, with ``tap``, the
    feature maps right before and after warping"""
    spec = model.spec
    expected = tuple(spec.input_shape)
    if batch.ndim != 4 or tuple(batch.shape[1:]) != expected:
        raise RejectedInputError(f"batch shape {batch.shape} does not match input [B, {expected}]")
    n_blocks = len(split_blocks(spec.backbone)[0])

    if spec.variant == "plain":
        return ForwardResult(_run_tail(model, _run_blocks(model, batch, 0, n_blocks)))

    if spec.variant == "stn_cX":
        pre = _run_blocks(model, batch, 0, spec.depth)
        theta = _localize(model, pre)
        post = warp(pre, theta)
        x = _run_blocks(model, post, spec.depth, n_blocks)
    else:
        pre = batch
        theta = _localize(model, batch)
        post = warp(batch, theta)
        x = _run_blocks(model, post, 0, n_blocks)

    features = {"pre_warp": pre, "post_warp": post} if tap else {}
    return ForwardResult(_run_tail(model, x), theta, features)


def features_at(model: ModelInstance, images: Tensor, layer: int) -> Tensor:
    """Backbone feature map at ``layer`` with no transformer applied"""
    n_blocks = len(split_blocks(model.spec.backbone)[0])
    if not 0 <= layer <= n_blocks:
        raise RejectedInputError(f"layer {layer} outside [0, {n_blocks}]")
    return _run_blocks(model, images, 0, layer)


def localization_parameter_names(model: ModelInstance) -> List[str]:
    return [name for name in model.params if name.startswith("loc.")]
