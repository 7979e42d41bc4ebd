"""Dense float64 tensors and the reverse-mode tape"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from stnlab_common.errors import RejectedInputError

BackwardRule = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tensor:
    """N-dimensional float64 array with an optional gradient buffer.

    Values are treated as immutable once an op has consumed them; only
    ``grad`` and optimizer updates of parameter leaves write in place.
    """

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        self.data: np.ndarray = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, grad: np.ndarray) -> None:
        if grad.shape != self.data.shape:
            raise RejectedInputError(
                f"gradient shape {grad.shape} does not match tensor shape {self.data.shape}"
            )
        if self.grad is None:
            self.grad = np.array(grad, dtype=np.float64)
        else:
            self.grad += grad

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"<Tensor{label} shape={self.shape} requires_grad={self.requires_grad}>"


@dataclass(frozen=True)
class Node:
    """One recorded operation: inputs, output and how to push gradients back"""

    op: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    backward: BackwardRule


class Tape:
    """Ordered record of operations executed while the tape is active.

    A tape is active inside ``with Tape() as tape:`` on the current thread
    only; other threads keep their own tapes.
    """

    def __init__(self) -> None:
        self.nodes: List[Node] = []

    def __enter__(self) -> "Tape":
        _stack().append(self)
        return self

    def __exit__(self, *exc_info) -> None:
        _stack().pop()

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self) -> Iterator[Node]:
        return iter(self.nodes)

    def produced(self) -> set:
        return {id(node.output) for node in self.nodes}


_local = threading.local()


def _stack() -> List[Tape]:
    if not hasattr(_local, "tapes"):
        _local.tapes = []
    return _local.tapes


def active_tape() -> Optional[Tape]:
    tapes = _stack()
    return tapes[-1] if tapes else None


def record(op: str, inputs: Sequence[Tensor], output: Tensor, rule: BackwardRule) -> Tensor:
    """Attach ``output`` to the active tape when any input needs a gradient"""
    tape = active_tape()
    if tape is None or not any(t.requires_grad for t in inputs):
        return output
    output.requires_grad = True
    tape.nodes.append(Node(op=op, inputs=tuple(inputs), output=output, backward=rule))
    return output


def backward(loss: Tensor, tape: Tape) -> None:
    """Accumulate d(loss)/d(leaf) into every reachable leaf's ``grad``.

    Gradients add into existing buffers; callers zero them between steps.
    """
    if loss.size != 1:
        raise RejectedInputError(f"backward needs a scalar loss, got shape {loss.shape}")
    produced = tape.produced()
    seed = np.ones_like(loss.data)
    if id(loss) not in produced:
        if not loss.requires_grad:
            raise RejectedInputError("loss was not recorded on this tape")
        loss.accumulate_grad(seed)
        return

    pending = {id(loss): seed}
    for node in reversed(tape.nodes):
        upstream = pending.pop(id(node.output), None)
        if upstream is None:
            continue
        for tensor, grad in zip(node.inputs, node.backward(upstream)):
            if grad is None or not tensor.requires_grad:
                continue
            key = id(tensor)
            if key in produced:
                pending[key] = pending[key] + grad if key in pending else grad
            else:
                tensor.accumulate_grad(grad)


def zero_grads(tensors) -> None:
    for tensor in tensors:
        tensor.zero_grad()
