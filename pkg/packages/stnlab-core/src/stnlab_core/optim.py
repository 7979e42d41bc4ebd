"""First-order optimizers over a model's named parameters"""

from typing import Dict, Literal, Union

import numpy as np

from stnlab_common.errors import RejectedInputError
from stnlab_core.tensor import Tensor


class SGDMomentum:
    """v <- momentum * v + g ;  p <- p - lr * v"""

    def __init__(self, params: Dict[str, Tensor], learning_rate: float, momentum: float = 0.9):
        if learning_rate <= 0:
            raise RejectedInputError(f"learning rate {learning_rate} must be positive")
        self.params = params
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.velocity = {name: np.zeros_like(p.data) for name, p in params.items()}

    def step(self) -> None:
        for name, param in self.params.items():
            if param.grad is None:
                continue
            velocity = self.velocity[name]
            velocity *= self.momentum
            velocity += param.grad
            param.data -= self.learning_rate * velocity

    def zero_grad(self) -> None:
        for param in self.params.values():
            param.zero_grad()


class Adam:
    def __init__(
        self,
        params: Dict[str, Tensor],
        learning_rate: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        if learning_rate <= 0:
            raise RejectedInputError(f"learning rate {learning_rate} must be positive")
        self.params = params
        self.learning_rate = learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.first = {name: np.zeros_like(p.data) for name, p in params.items()}
        self.second = {name: np.zeros_like(p.data) for name, p in params.items()}
        self.steps = 0

    def step(self) -> None:
        self.steps += 1
        correction1 = 1.0 - self.beta1**self.steps
        correction2 = 1.0 - self.beta2**self.steps
        for name, param in self.params.items():
            if param.grad is None:
                continue
            m, v = self.first[name], self.second[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * param.grad
            v *= self.beta2
            v += (1.0 - self.beta2) * param.grad**2
            param.data -= self.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + self.eps)

    def zero_grad(self) -> None:
        for param in self.params.values():
            param.zero_grad()


Optimizer = Union[Adam, SGDMomentum]


def make_optimizer(
    kind: Literal["adam", "sgd_momentum"],
    params: Dict[str, Tensor],
    learning_rate: float,
    momentum: float = 0.9,
) -> Optimizer:
    if kind == "adam":
        return Adam(params, learning_rate)
    if kind == "sgd_momentum":
        return SGDMomentum(params, learning_rate, momentum)
    raise RejectedInputError(f"unknown optimizer {kind!r}")
