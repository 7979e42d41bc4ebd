"""Predicted rotation versus applied rotation"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from stnlab_common.errors import RejectedInputError
from stnlab_core.data import LabeledDataset, apply_transform
from stnlab_core.networks import ModelInstance, forward
from stnlab_core.tensor import Tensor
from stnlab_core.transformer import SINGULAR_TOLERANCE, wrap_angle

logger = logging.getLogger(__name__)

# An example rotated by a is resampled with the pull transform theta(a); a
# localization net that undoes it predicts theta(-a), so the recorded
# prediction is the negated angle of the predicted transform.
SIGN_CONVENTION = "pull_negated"
DEFAULT_ANGLES = 72


@dataclass
class SweepRow:
    example: int
    applied_angle: float
    predicted_angle: Optional[float]
    variant: str
    sign_convention: str = SIGN_CONVENTION


@dataclass
class AngleSweep:
    variant: str
    rows: List[SweepRow] = field(default_factory=list)
    correlation: float = 0.0
    correlation_any_sign: float = 0.0

    @property
    def missing(self) -> int:
        return sum(1 for row in self.rows if row.predicted_angle is None)


def sweep_angles(count: int = DEFAULT_ANGLES) -> np.ndarray:
    """``count`` evenly spaced angles covering [-pi, pi)"""
    if count < 1:
        raise RejectedInputError(f"angle count {count} must be positive")
    return np.arange(count) * (2.0 * math.pi / count) - math.pi


def circular_correlation(first: Sequence[float], second: Sequence[float]) -> float:
    """|complex correlation| of the angles embedded on the unit circle"""
    z = np.exp(1j * np.asarray(first, dtype=np.float64))
    w = np.exp(1j * np.asarray(second, dtype=np.float64))
    if z.size == 0:
        return 0.0
    dz, dw = z - z.mean(), w - w.mean()
    spread = math.sqrt(float(np.sum(np.abs(dz) ** 2)) * float(np.sum(np.abs(dw) ** 2)))
    if spread <= 1e-12:
        return 0.0
    return float(abs(np.sum(dz * np.conj(dw))) / spread)


def predicted_angles(theta: np.ndarray) -> np.ndarray:
    """Negated rotation angle of each [2, 3] transform; NaN where the first column vanishes"""
    a, c = theta[:, 0, 0], theta[:, 1, 0]
    angle = np.full(theta.shape[0], np.nan)
    ok = np.hypot(a, c) >= SINGULAR_TOLERANCE
    angle[ok] = wrap_angle(-np.arctan2(c[ok], a[ok])) + 0.0
    return angle


def angle_sweep(
    model: ModelInstance,
    digits: LabeledDataset,
    angles: Sequence[float],
    batch_size: int = 256,
    workers: int = 1,
) -> AngleSweep:
    """Rotate every digit by every angle and record the angle the ST module predicts"""
    if model.spec.variant == "plain":
        raise RejectedInputError("angle sweep needs a spatial transformer variant")
    angles = np.asarray(angles, dtype=np.float64)

    def one_angle(angle: float) -> np.ndarray:
        rotated = apply_transform(digits, "rotation", np.full(len(digits), angle))
        out = []
        for start in range(0, len(digits), batch_size):
            batch = Tensor(rotated.images.data[start : start + batch_size])
            out.append(predicted_angles(forward(model, batch).theta.numpy()))
        return np.concatenate(out) if out else np.zeros(0)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_angle = list(pool.map(one_angle, angles))
    else:
        per_angle = [one_angle(angle) for angle in angles]

    sweep = AngleSweep(variant=model.spec.name)
    applied, predicted = [], []
    for example in range(len(digits)):
        for angle, values in zip(angles, per_angle):
            value = values[example]
            recorded = wrap_angle(angle)
            sweep.rows.append(
                SweepRow(example, recorded, None if np.isnan(value) else float(value), sweep.variant)
            )
            if not np.isnan(value):
                applied.append(recorded)
                predicted.append(value)

    sweep.correlation = circular_correlation(applied, predicted)
    sweep.correlation_any_sign = max(sweep.correlation, circular_correlation(applied, np.negative(predicted)))
    logger.info(
        "Angle sweep complete",
        extra={
            "model": sweep.variant,
            "rows": len(sweep.rows),
            "missing": sweep.missing,
            "correlation": sweep.correlation,
            "correlation_any_sign": sweep.correlation_any_sign,
        },
    )
    return sweep
