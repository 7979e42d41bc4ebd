"""Tests for the predicted-versus-applied rotation sweep"""

import math

import numpy as np
import pytest

from stnlab_common.errors import RejectedInputError
from stnlab_core.data import LabeledDataset
from stnlab_core.glyphs import glyphs_as_dataset, make_glyph_dataset
from stnlab_core.networks import ForwardResult, build, spec_for
from stnlab_core.tensor import Tensor
from stnlab_core.transformer import AffineParams, lattice, wrap_angle

from experiments import sweep as sweep_module

from experiments.sweep import (
    SIGN_CONVENTION,
    angle_sweep,
    circular_correlation,
    predicted_angles,
    sweep_angles,
)


def test_sweep_angles_cover_full_turn():
    """Test 72 angles in 5 degree steps from -pi"""
    angles = sweep_angles(72)
    assert angles.size == 72
    assert angles[0] == pytest.approx(-math.pi)
    np.testing.assert_allclose(np.diff(angles), math.radians(5))
    assert angles.max() < math.pi
    with pytest.raises(RejectedInputError):
        sweep_angles(0)


def test_undoing_transform_predicts_applied_angle():
    """Test the inverse rotation reads back as the applied angle"""
    applied = sweep_angles(36)
    predicted = predicted_angles(AffineParams.rotation(-applied).numpy())
    np.testing.assert_allclose(wrap_angle(predicted - applied), 0.0, atol=1e-12)
    assert circular_correlation(applied, predicted) == pytest.approx(1.0)


def test_scale_does_not_change_prediction():
    """Test uniformly scaled transforms give the same angle"""
    theta = AffineParams.rotation([0.4, -2.0]).numpy()
    np.testing.assert_allclose(predicted_angles(theta * 3.0), predicted_angles(theta))


def test_degenerate_transform_is_missing():
    """Test a vanishing first column yields NaN"""
    theta = np.zeros((2, 2, 3))
    theta[1] = AffineParams.rotation([0.2]).numpy()[0]
    predicted = predicted_angles(theta)
    assert np.isnan(predicted[0])
    assert predicted[1] == pytest.approx(-0.2)


def test_circular_correlation_cases():
    """Test constant inputs give 0 and mirrored angles only correlate up to sign"""
    applied = sweep_angles(24)
    assert circular_correlation(applied, np.zeros(24)) == 0.0
    assert circular_correlation([], []) == 0.0
    assert circular_correlation(applied, -applied) < 1e-9
    assert circular_correlation(applied, applied + 0.7) == pytest.approx(1.0)


def test_identity_localization_predicts_zero():
    """Test an untrained transformer predicts no rotation for any input"""
    model = build(spec_for("stn_sl1", input_shape=(1, 16, 16), num_classes=2), 0)
    digits = glyphs_as_dataset(make_glyph_dataset(2, 16, seed=0))
    sweep = angle_sweep(model, digits, sweep_angles(8), workers=2)
    assert len(sweep.rows) == 16
    assert sweep.missing == 0
    assert all(row.predicted_angle == 0.0 for row in sweep.rows)
    assert all(row.sign_convention == SIGN_CONVENTION for row in sweep.rows)
    assert sweep.correlation == 0.0
    assert sweep.correlation_any_sign == 0.0
    assert [row.example for row in sweep.rows[:9]] == [0] * 8 + [1]


def test_plain_network_rejected():
    """Test the sweep needs a transformer"""
    model = build(spec_for("cnn", input_shape=(1, 16, 16), num_classes=2), 0)
    digits = glyphs_as_dataset(make_glyph_dataset(2, 16, seed=0))
    with pytest.raises(RejectedInputError):
        angle_sweep(model, digits, [0.0])


def blob_digits(count=3, size=21) -> LabeledDataset:
    """Gaussian blobs on the positive x axis at different radii"""
    coords = lattice(size)
    ys, xs = np.meshgrid(coords, coords, indexing="ij")
    images = np.stack([np.exp(-((xs - r) ** 2 + ys**2) / 0.02) for r in np.linspace(0.4, 0.6, count)])
    return LabeledDataset(Tensor(images[:, None]), np.zeros(count, dtype=np.int64), num_classes=2)


def centroid_forward(model, batch):
    """Localization that reads the rotation off the blob centroid and undoes it"""
    coords = lattice(batch.shape[-1])
    ys, xs = np.meshgrid(coords, coords, indexing="ij")
    mass = batch.data[:, 0]
    cx = (mass * xs).sum(axis=(1, 2)) / mass.sum(axis=(1, 2))
    cy = (mass * ys).sum(axis=(1, 2)) / mass.sum(axis=(1, 2))
    estimate = -np.arctan2(cy, cx)
    return ForwardResult(logits=Tensor(np.zeros((batch.shape[0], 2))), theta=AffineParams.rotation(-estimate))


def test_localization_that_undoes_rotation_correlates_fully(monkeypatch):
    """Test a localization recovering each applied angle gives correlation 1"""
    monkeypatch.setattr(sweep_module, "forward", centroid_forward)
    model = build(spec_for("stn_c0", input_shape=(1, 21, 21), num_classes=2), 0)
    applied = sweep_angles(24)
    sweep = angle_sweep(model, blob_digits(), applied)
    assert sweep.missing == 0
    errors = [wrap_angle(row.predicted_angle - row.applied_angle) for row in sweep.rows]
    assert np.abs(errors).max() < 0.05
    assert sweep.correlation > 0.999
    assert sweep.correlation_any_sign == pytest.approx(sweep.correlation)
