"""Minibatch training loop"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from stnlab_common.errors import DivergenceError, RejectedInputError
from stnlab_common.models import EpochRecord, NetworkSpec, TrainConfig
from stnlab_common.seeding import stream
from stnlab_core import ops
from stnlab_core.data import LabeledDataset
from stnlab_core.networks import ModelInstance, build, forward
from stnlab_core.optim import make_optimizer
from stnlab_core.tensor import Tape, backward

logger = logging.getLogger(__name__)


@dataclass
class TrainResult:
    model: ModelInstance
    history: List[EpochRecord] = field(default_factory=list)


def train(
    spec: NetworkSpec,
    cfg: TrainConfig,
    data: LabeledDataset,
    on_epoch: Optional[Callable[[EpochRecord], None]] = None,
) -> TrainResult:
    """Train a freshly built model; identical (spec, cfg, data) give identical parameters.

    Loss and accuracy in the history are averaged over the epoch's batches as
    they were seen, before each update.
    """
    if len(data) == 0:
        raise RejectedInputError("training data is empty")
    if tuple(data.image_shape) != tuple(spec.input_shape):
        raise RejectedInputError(
            f"data images {data.image_shape} do not match network input {spec.input_shape}"
        )
    model = build(spec, cfg.seed)
    optimizer = make_optimizer(cfg.optimizer, model.params, cfg.learning_rate, cfg.momentum)
    shuffle = stream(cfg.seed, "shuffle")
    result = TrainResult(model)

    for epoch in range(1, cfg.epochs + 1):
        order = shuffle.permutation(len(data))
        total_loss, correct = 0.0, 0
        for images, labels in data.batches(cfg.batch_size, order):
            optimizer.zero_grad()
            with Tape() as tape:
                logits = forward(model, images).logits
                loss = ops.softmax_cross_entropy(logits, labels)
            value = loss.item()
            if not np.isfinite(value):
                logger.error("Training diverged", extra={"epoch": epoch, "loss": value})
                raise DivergenceError(epoch, value)
            backward(loss, tape)
            optimizer.step()
            total_loss += value * len(labels)
            correct += int(np.sum(np.argmax(logits.data, axis=1) == labels))

        record = EpochRecord(epoch=epoch, loss=total_loss / len(data), accuracy=correct / len(data))
        result.history.append(record)
        logger.info(
            "Epoch complete",
            extra={"model": spec.name, "epoch": epoch, "loss": record.loss, "accuracy": record.accuracy},
        )
        if on_epoch is not None:
            on_epoch(record)
    return result
