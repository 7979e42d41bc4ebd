"""Tests for Pydantic models"""

import math

import pytest
from pydantic import ValidationError
from stnlab_common.models import AppliedTransform, LayerSpec, NetworkSpec, RunManifest, TrainConfig


def test_applied_transform():
    """Test AppliedTransform model"""
    record = AppliedTransform(kind="rotation", angle=math.pi)
    assert record.angle == math.pi
    assert record.shift == (0, 0)
    assert AppliedTransform().kind == "none"


def test_applied_transform_angle_range():
    """Test angles outside (-pi, pi] are refused"""
    with pytest.raises(ValidationError):
        AppliedTransform(kind="rotation", angle=-math.pi)


def test_layer_spec():
    """Test LayerSpec model"""
    conv = LayerSpec.conv(32)
    assert (conv.kernel, conv.stride, conv.padding) == (3, 1, 1)
    assert LayerSpec.pool(2).stride == 2
    with pytest.raises(ValidationError):
        LayerSpec(kind="dense")


def test_network_spec_names():
    """Test NetworkSpec name rendering"""
    layers = [LayerSpec.conv(4), LayerSpec.dense(10)]
    assert NetworkSpec(backbone=layers).name == "cnn"
    assert NetworkSpec(backbone=layers, variant="stn_c0").name == "stn_c0"
    assert NetworkSpec(backbone=layers, variant="stn_cX", depth=1).name == "stn_c1"
    assert NetworkSpec(backbone=layers, variant="stn_slX", depth=1).name == "stn_sl1"
    assert NetworkSpec(backbone=layers).conv_count() == 1


def test_network_spec_json_round_trip():
    """Test the spec survives its JSON form"""
    spec = NetworkSpec(backbone=[LayerSpec.conv(4), LayerSpec.relu(), LayerSpec.dense(10)], variant="stn_c0")
    assert NetworkSpec.model_validate_json(spec.model_dump_json()) == spec


def test_train_config_defaults():
    """Test TrainConfig model"""
    cfg = TrainConfig(
        seed=1,
        model="cnn",
        epochs=1,
        batch_size=8,
        learning_rate=0.01,
        optimizer="adam",
        dataset="mnist",
        augmentation="rotation",
    )
    assert cfg.canvas == 42
    assert cfg.resolved_range() == pytest.approx(math.pi / 2)
    translated = cfg.model_copy(update={"augmentation": "translation"})
    assert translated.resolved_range() == 8.0


def test_train_config_rejects_unknown_fields():
    """Test extra keys are not silently accepted"""
    with pytest.raises(ValidationError):
        TrainConfig(
            seed=1,
            model="cnn",
            epochs=1,
            batch_size=8,
            learning_rate=0.01,
            optimizer="adam",
            dataset="mnist",
            augmentation="none",
            dropout=0.5,
        )


def test_run_manifest():
    """Test RunManifest model"""
    manifest = RunManifest(command="train", code_version="0.1.0")
    assert manifest.outputs == {}
    assert manifest.seed is None
