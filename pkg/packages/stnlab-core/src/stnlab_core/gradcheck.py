"""Central-difference gradient verification"""

from typing import Callable, Optional

import numpy as np

from stnlab_common.errors import RejectedInputError
from stnlab_core.tensor import Tape, Tensor, backward


def _check_epsilon(epsilon: float) -> None:
    if not (0.0 < epsilon <= 1e-2):
        raise RejectedInputError(f"epsilon {epsilon} outside (0, 1e-2]")


def _relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    if analytic.size == 0:
        return 0.0
    return float(np.max(np.abs(analytic - numeric) / np.maximum(1.0, np.abs(numeric))))


def numeric_gradient(fn: Callable[[Tensor], Tensor], point: np.ndarray, epsilon: float) -> np.ndarray:
    """(fn(x + eps e_i) - fn(x - eps e_i)) / 2 eps for every coordinate i"""
    base = np.array(point, dtype=np.float64)
    grad = np.zeros_like(base)
    flat = base.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + epsilon
        plus = fn(Tensor(base.copy())).item()
        flat[i] = original - epsilon
        minus = fn(Tensor(base.copy())).item()
        flat[i] = original
        out[i] = (plus - minus) / (2.0 * epsilon)
    return grad


def numeric_grad_check(
    fn: Callable[[Tensor], Tensor], point: Tensor, epsilon: float = 1e-4
) -> float:
    """Max over coordinates of |analytic - numeric| / max(1, |numeric|)"""
    _check_epsilon(epsilon)
    leaf = Tensor(point.data.copy(), requires_grad=True)
    with Tape() as tape:
        loss = fn(leaf)
    backward(loss, tape)
    analytic = leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data)
    numeric = numeric_gradient(fn, point.data, epsilon)
    return _relative_error(analytic, numeric)


def parameter_grad_check(
    loss_fn: Callable[[], Tensor],
    param: Tensor,
    epsilon: float = 1e-4,
    max_coords: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Same check for a tensor the loss closes over (e.g. a model parameter).

    The parameter is perturbed in place and restored afterwards. With
    ``max_coords`` only a random subset of coordinates is checked.
    """
    _check_epsilon(epsilon)
    previous_flag, previous_grad = param.requires_grad, param.grad
    param.requires_grad = True
    param.grad = None
    try:
        with Tape() as tape:
            loss = loss_fn()
        backward(loss, tape)
        analytic = param.grad if param.grad is not None else np.zeros_like(param.data)
    finally:
        param.grad = previous_grad
        param.requires_grad = previous_flag

    flat = param.data.reshape(-1)
    coords = np.arange(flat.size)
    if max_coords is not None and max_coords < flat.size:
        coords = (rng or np.random.default_rng(0)).choice(flat.size, max_coords, replace=False)
    numeric = np.zeros(coords.size)
    for k, i in enumerate(coords):
        original = flat[i]
        flat[i] = original + epsilon
        plus = loss_fn().item()
        flat[i] = original - epsilon
        minus = loss_fn().item()
        flat[i] = original
        numeric[k] = (plus - minus) / (2.0 * epsilon)
    return _relative_error(analytic.reshape(-1)[coords], numeric)
