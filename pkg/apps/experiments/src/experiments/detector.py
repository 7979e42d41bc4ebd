"""Hand-built two-channel matched filter for W and M glyphs.

Channel 0 correlates with the W template, channel 1 with its half-turn (the
M template). Responses below half of the template's self-response are cut
by the relu, and the class is read out as the strongest channel anywhere.
"""

import numpy as np

from stnlab_common.errors import RejectedInputError
from stnlab_common.models import LayerSpec, NetworkSpec
from stnlab_core.glyphs import MIN_SIZE, render_w
from stnlab_core.networks import ModelInstance, build

DEFAULT_THRESHOLD = 0.5


def glyph_template(size: int) -> np.ndarray:
    """Zero-mean W template on an odd canvas so the kernel has a center pixel"""
    extent = size if size % 2 else size + 1
    template = render_w(extent)
    return template - template.mean()


def detector_spec(size: int) -> NetworkSpec:
    kernel = size if size % 2 else size + 1
    return NetworkSpec(
        input_shape=(1, size, size),
        num_classes=2,
        backbone=[LayerSpec.conv(2, kernel=kernel, padding=kernel // 2), LayerSpec.relu()],
    )


def build_glyph_detector(size: int, threshold: float = DEFAULT_THRESHOLD) -> ModelInstance:
    if size < MIN_SIZE:
        raise RejectedInputError(f"glyph size {size} below minimum {MIN_SIZE}")
    if not 0.0 <= threshold < 1.0:
        raise RejectedInputError(f"threshold {threshold} outside [0, 1)")
    model = build(detector_spec(size), seed=0)
    w_kernel = glyph_template(size)
    # response of the zero-mean kernel to its own stroke
    self_response = float(np.sum(w_kernel * w_kernel))
    weight = np.stack([w_kernel, np.rot90(w_kernel, 2)])[:, None]
    model.params["backbone.conv1.weight"].data = weight
    model.params["backbone.conv1.bias"].data = np.full(2, -threshold * self_response)
    return model
