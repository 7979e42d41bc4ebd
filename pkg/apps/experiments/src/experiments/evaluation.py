"""Classification error and confusion counts"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from stnlab_core.data import LabeledDataset

logger = logging.getLogger(__name__)


class Predictor(Protocol):
    def predict(self, images: np.ndarray) -> np.ndarray: ...


@dataclass
class Evaluation:
    error_rate: float
    confusion: np.ndarray  # [K, K], rows = true label, columns = prediction


def confusion_matrix(labels: np.ndarray, predicted: np.ndarray, num_classes: int) -> np.ndarray:
    flat = labels.astype(np.int64) * num_classes + predicted.astype(np.int64)
    return np.bincount(flat, minlength=num_classes * num_classes).reshape(num_classes, num_classes)


def evaluate(model: Predictor, data: LabeledDataset, workers: int = 1, chunk: int = 512) -> Evaluation:
    """Predictions fan out over chunks; they are merged back in dataset order"""
    images = data.images.data
    starts = list(range(0, len(data), chunk))
    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda s: np.asarray(model.predict(images[s : s + chunk])), starts))
    else:
        parts = [np.asarray(model.predict(images[s : s + chunk])) for s in starts]
    predicted = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)

    num_classes = max(data.num_classes, int(predicted.max()) + 1 if predicted.size else 0)
    confusion = confusion_matrix(data.labels, predicted, num_classes)
    error_rate = float(np.mean(predicted != data.labels)) if len(data) else 0.0
    logger.info("Evaluated", extra={"examples": len(data), "error_rate": error_rate})
    return Evaluation(error_rate=error_rate, confusion=confusion)
