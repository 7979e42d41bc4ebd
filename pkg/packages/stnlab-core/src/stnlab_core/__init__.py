"""stnlab core: tensors, gradients, spatial transformer, data and networks"""

from stnlab_core.data import LabeledDataset, apply_random_transform, load_mnist_idx
from stnlab_core.glyphs import GlyphPair, make_glyph_dataset
from stnlab_core.networks import ForwardResult, ModelInstance, build, forward, spec_for
from stnlab_core.tensor import Tape, Tensor, backward
from stnlab_core.transformer import AffineParams, SamplingGrid, affine_grid, bilinear_sample

__all__ = [
    "AffineParams",
    "ForwardResult",
    "GlyphPair",
    "LabeledDataset",
    "ModelInstance",
    "SamplingGrid",
    "Tape",
    "Tensor",
    "affine_grid",
    "apply_random_transform",
    "backward",
    "bilinear_sample",
    "build",
    "forward",
    "load_mnist_idx",
    "make_glyph_dataset",
    "spec_for",
]
