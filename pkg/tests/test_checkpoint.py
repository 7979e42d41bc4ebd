"""Tests for the checkpoint container"""

import struct

import numpy as np
import pytest

from stnlab_common.errors import CheckpointVersionError, CorruptCheckpointError, UnknownLayerError
from stnlab_core import checkpoint
from stnlab_core.networks import build, forward, spec_for
from stnlab_core.tensor import Tensor

SHAPE = (1, 12, 12)


def trained_looking(name: str, seed: int = 3):
    model = build(spec_for(name, input_shape=SHAPE), seed)
    rng = np.random.default_rng(seed)
    for tensor in model.params.values():
        tensor.data = tensor.data + rng.normal(scale=0.01, size=tensor.shape)
    return model


@pytest.mark.parametrize("name", ["cnn", "stn_c0", "stn_c1", "stn_sl1"])
def test_round_trip_is_bit_exact(tmp_path, name):
    """Test saved and reloaded models agree on parameters and outputs"""
    model = trained_looking(name)
    path = tmp_path / "model.ckpt"
    checkpoint.save(model, path)
    loaded = checkpoint.load(path)
    assert loaded.spec == model.spec
    assert list(loaded.params) == list(model.params)
    for key, tensor in model.params.items():
        np.testing.assert_array_equal(loaded.params[key].data, tensor.data)
    images = Tensor(np.random.default_rng(0).uniform(size=(2,) + SHAPE))
    np.testing.assert_array_equal(forward(loaded, images).logits.data, forward(model, images).logits.data)


def test_truncated_file_is_corrupt():
    """Test a checkpoint cut short is rejected"""
    payload = checkpoint.encode(trained_looking("cnn"))
    with pytest.raises(CorruptCheckpointError, match="file ends"):
        checkpoint.decode(payload[: len(payload) - 7])


def test_bad_magic_is_corrupt():
    """Test non-checkpoint bytes"""
    with pytest.raises(CorruptCheckpointError, match="bad magic"):
        checkpoint.decode(b"NOTACKPT" + bytes(16))


def test_version_mismatch():
    """Test an unsupported container version"""
    payload = bytearray(checkpoint.encode(trained_looking("cnn")))
    payload[8:12] = struct.pack("<I", checkpoint.VERSION + 1)
    with pytest.raises(CheckpointVersionError):
        checkpoint.decode(bytes(payload))


def test_unknown_parameter():
    """Test a parameter the spec does not define"""
    model = trained_looking("cnn")
    model.params["backbone.conv9.weight"] = model.params.pop("backbone.conv2.weight")
    with pytest.raises(UnknownLayerError, match="conv9"):
        checkpoint.decode(checkpoint.encode(model))


def test_missing_parameter():
    """Test a checkpoint lacking one of the spec's parameters"""
    model = trained_looking("stn_sl1")
    del model.params["loc.head.bias"]
    with pytest.raises(CorruptCheckpointError, match="loc.head.bias"):
        checkpoint.decode(checkpoint.encode(model))


def test_trailing_bytes():
    """Test junk after the last parameter"""
    payload = checkpoint.encode(trained_looking("cnn")) + b"\x00"
    with pytest.raises(CorruptCheckpointError, match="trailing"):
        checkpoint.decode(payload)
