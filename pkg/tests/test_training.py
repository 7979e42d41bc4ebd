"""Tests for the training loop and dataset preparation"""

import os

import numpy as np
import pytest

from stnlab_common.errors import DivergenceError, RejectedInputError
from stnlab_common.models import TrainConfig
from stnlab_core.data import LabeledDataset
from stnlab_core.networks import build, spec_for
from stnlab_core.tensor import Tensor

from experiments.datasets import base_split, prepare_datasets, random_subset
from experiments.evaluation import evaluate
from experiments.trainer import train


def glyph_config(**overrides) -> TrainConfig:
    values = dict(
        seed=5,
        model="cnn",
        epochs=2,
        batch_size=8,
        learning_rate=1e-3,
        optimizer="adam",
        dataset="glyphs",
        augmentation="none",
        canvas=16,
        train_limit=24,
        test_limit=8,
    )
    values.update(overrides)
    return TrainConfig(**values)


def glyph_spec(name="cnn"):
    return spec_for(name, input_shape=(1, 16, 16), num_classes=2)


def test_zero_epochs_returns_initialization():
    """Test no epochs leaves the built parameters untouched"""
    cfg = glyph_config(epochs=0)
    train_data, _ = prepare_datasets(cfg)
    result = train(glyph_spec(), cfg, train_data)
    reference = build(glyph_spec(), cfg.seed)
    assert result.history == []
    for name, tensor in reference.params.items():
        np.testing.assert_array_equal(result.model.params[name].data, tensor.data)


def test_training_is_deterministic():
    """Test two runs of the same configuration end bit-identical"""
    cfg = glyph_config(model="stn_sl1")
    train_data, _ = prepare_datasets(cfg)
    first = train(glyph_spec("stn_sl1"), cfg, train_data)
    second = train(glyph_spec("stn_sl1"), cfg, train_data)
    assert first.history == second.history
    for name, tensor in first.model.params.items():
        np.testing.assert_array_equal(second.model.params[name].data, tensor.data)


def test_training_reduces_loss():
    """Test the loss falls on an easy two-class problem"""
    cfg = glyph_config(epochs=6)
    train_data, _ = prepare_datasets(cfg)
    seen = []
    result = train(glyph_spec(), cfg, train_data, on_epoch=seen.append)
    assert [record.epoch for record in result.history] == list(range(1, 7))
    assert seen == result.history
    assert result.history[-1].loss < result.history[0].loss


def test_divergence_raises():
    """Test a non-finite loss stops training in the epoch it appears"""
    cfg = glyph_config()
    train_data, _ = prepare_datasets(cfg)
    images = train_data.images.data.copy()
    images[0, 0, 8, 8] = np.nan
    poisoned = LabeledDataset(Tensor(images), train_data.labels, num_classes=2)
    with pytest.raises(DivergenceError) as info:
        train(glyph_spec(), cfg, poisoned)
    assert info.value.epoch == 1


def test_rejects_mismatched_data():
    """Test empty data and wrong image sizes"""
    cfg = glyph_config()
    with pytest.raises(RejectedInputError):
        train(glyph_spec(), cfg, LabeledDataset(Tensor(np.zeros((0, 1, 16, 16))), [], num_classes=2))
    with pytest.raises(RejectedInputError):
        train(spec_for("cnn", input_shape=(1, 20, 20), num_classes=2), cfg, prepare_datasets(cfg)[0])


def test_splits_use_independent_streams():
    """Test train and test glyphs differ but each split is reproducible"""
    cfg = glyph_config(augmentation="rotation", augmentation_range=1.0)
    train_a, test_a = prepare_datasets(cfg)
    train_b, _ = prepare_datasets(cfg)
    np.testing.assert_array_equal(train_a.images.data, train_b.images.data)
    assert train_a.transforms[0] != test_a.transforms[0]
    assert all(abs(record.angle) <= 1.0 for record in train_a.transforms)


def test_random_subset_keeps_file_order():
    """Test subset sizes and the glyph test split"""
    ds = LabeledDataset(Tensor(np.zeros((50, 1, 2, 2))), np.arange(50) % 10)
    first = random_subset(ds, 10, 1, "subset/train")
    assert len(first) == 10
    assert random_subset(ds, 100, 1, "subset/train") is ds
    assert base_split(glyph_config(test_limit=3), "test").labels.tolist() == [0, 1, 0]


@pytest.mark.slow
@pytest.mark.skipif(not os.environ.get("STNLAB_DATA"), reason="STNLAB_DATA not set")
def test_plain_cnn_overfits_small_mnist_subset():
    """Test the plain CNN memorizes 200 rotated digits"""
    cfg = TrainConfig(
        seed=1,
        model="cnn",
        epochs=30,
        batch_size=32,
        learning_rate=1e-3,
        optimizer="adam",
        dataset="mnist",
        augmentation="rotation",
        train_limit=200,
        test_limit=200,
    )
    train_data, _ = prepare_datasets(cfg)
    result = train(spec_for("cnn"), cfg, train_data)
    assert evaluate(result.model, train_data).error_rate < 0.05
