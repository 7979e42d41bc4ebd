"""Differentiable tensor operations.

Every op computes its forward value with numpy and, when a tape is active
and an input requires a gradient, records a backward rule on that tape.
There is no broadcasting beyond bias addition.
"""

from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from stnlab_common.errors import RejectedInputError
from stnlab_core.tensor import Tensor, record


def _require_ndim(t: Tensor, ndim: int, op: str, what: str) -> None:
    if t.ndim != ndim:
        raise RejectedInputError(f"{op}: {what} must be {ndim}-D, got shape {t.shape}")


def _out_extent(extent: int, kernel: int, stride: int, padding: int, op: str, axis: str) -> int:
    span = extent + 2 * padding - kernel
    if span < 0:
        raise RejectedInputError(
            f"{op}: {axis} extent {extent} (padding {padding}) is smaller than window {kernel}"
        )
    return span // stride + 1


def conv2d(input: Tensor, kernel: Tensor, bias: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of [B,Cin,H,W] with [Cout,Cin,kH,kW] plus per-channel bias"""
    _require_ndim(input, 4, "conv2d", "input")
    _require_ndim(kernel, 4, "conv2d", "kernel")
    if stride < 1 or padding < 0:
        raise RejectedInputError(f"conv2d: bad stride {stride} / padding {padding}")
    batch, cin, height, width = input.shape
    cout, kcin, kh, kw = kernel.shape
    if cin != kcin:
        raise RejectedInputError(f"conv2d: input channels {cin} != kernel channels {kcin}")
    if bias.shape != (cout,):
        raise RejectedInputError(f"conv2d: bias shape {bias.shape} != output channels ({cout},)")
    out_h = _out_extent(height, kh, stride, padding, "conv2d", "height")
    out_w = _out_extent(width, kw, stride, padding, "conv2d", "width")

    x = input.data
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    # [B, Cin, Ho, Wo, kH, kW]
    windows = sliding_window_view(x, (kh, kw), axis=(2, 3))[
        :, :, : stride * (out_h - 1) + 1 : stride, : stride * (out_w - 1) + 1 : stride
    ]
    out = np.tensordot(windows, kernel.data, axes=([1, 4, 5], [1, 2, 3]))
    out = out.transpose(0, 3, 1, 2) + bias.data[None, :, None, None]
    padded_shape = x.shape

    def rule(grad: np.ndarray):
        grad_kernel = np.tensordot(grad, windows, axes=([0, 2, 3], [0, 2, 3]))
        grad_bias = grad.sum(axis=(0, 2, 3))
        # [B, Ho, Wo, Cin, kH, kW]
        cols = np.tensordot(grad, kernel.data, axes=([1], [0]))
        grad_x = np.zeros(padded_shape)
        for i in range(kh):
            for j in range(kw):
                grad_x[
                    :, :, i : i + stride * out_h : stride, j : j + stride * out_w : stride
                ] += cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        if padding:
            grad_x = grad_x[:, :, padding:-padding, padding:-padding]
        return grad_x, grad_kernel, grad_bias

    return record("conv2d", (input, kernel, bias), Tensor(out), rule)


def max_pool2d(input: Tensor, window: int, stride: Optional[int] = None) -> Tensor:
    """Per-window maximum; ties route the gradient to the first element in row-major order"""
    _require_ndim(input, 4, "max_pool2d", "input")
    stride = window if stride is None else stride
    if window < 1 or stride < 1:
        raise RejectedInputError(f"max_pool2d: bad window {window} / stride {stride}")
    batch, channels, height, width = input.shape
    if window > height or window > width:
        raise RejectedInputError(
            f"max_pool2d: window {window} larger than spatial extent {height}x{width}"
        )
    out_h = (height - window) // stride + 1
    out_w = (width - window) // stride + 1
    windows = sliding_window_view(input.data, (window, window), axis=(2, 3))[
        :, :, : stride * (out_h - 1) + 1 : stride, : stride * (out_w - 1) + 1 : stride
    ].reshape(batch, channels, out_h, out_w, window * window)
    arg = windows.argmax(axis=-1)
    out = np.take_along_axis(windows, arg[..., None], axis=-1)[..., 0]

    def rule(grad: np.ndarray):
        rows = np.arange(out_h)[:, None] * stride + arg // window
        cols = np.arange(out_w)[None, :] * stride + arg % window
        planes = np.arange(batch * channels).reshape(batch, channels, 1, 1)
        flat = (planes * height + rows) * width + cols
        grad_x = np.bincount(
            flat.ravel(), weights=grad.ravel(), minlength=batch * channels * height * width
        )
        return (grad_x.reshape(input.shape),)

    return record("max_pool2d", (input,), Tensor(out), rule)


def spatial_max(input: Tensor) -> Tensor:
    """[B,C,H,W] -> [B,C] maximum over all spatial sites (first occurrence wins ties)"""
    _require_ndim(input, 4, "spatial_max", "input")
    batch, channels, height, width = input.shape
    flat = input.data.reshape(batch, channels, height * width)
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]

    def rule(grad: np.ndarray):
        grad_x = np.zeros_like(flat)
        np.put_along_axis(grad_x, arg[..., None], grad[..., None], axis=-1)
        return (grad_x.reshape(input.shape),)

    return record("spatial_max", (input,), Tensor(out), rule)


def dense(input: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine map input @ weight.T + bias"""
    _require_ndim(input, 2, "dense", "input")
    _require_ndim(weight, 2, "dense", "weight")
    if input.shape[1] != weight.shape[1]:
        raise RejectedInputError(
            f"dense: input features {input.shape[1]} != weight inner extent {weight.shape[1]}"
        )
    if bias.shape != (weight.shape[0],):
        raise RejectedInputError(f"dense: bias shape {bias.shape} != ({weight.shape[0]},)")
    x, w = input.data, weight.data
    out = x @ w.T + bias.data

    def rule(grad: np.ndarray):
        return grad @ w, grad.T @ x, grad.sum(axis=0)

    return record("dense", (input, weight, bias), Tensor(out), rule)


def relu(input: Tensor) -> Tensor:
    mask = input.data > 0
    out = np.maximum(input.data, 0.0)
    return record("relu", (input,), Tensor(out), lambda grad: (grad * mask,))


def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean over the batch of -log softmax(logits)[label]"""
    _require_ndim(logits, 2, "softmax_cross_entropy", "logits")
    labels = np.asarray(labels)
    batch, classes = logits.shape
    if labels.shape != (batch,):
        raise RejectedInputError(
            f"softmax_cross_entropy: labels shape {labels.shape} != batch ({batch},)"
        )
    if labels.size and (labels.min() < 0 or labels.max() >= classes):
        raise RejectedInputError(
            f"softmax_cross_entropy: label out of range [0, {classes}): "
            f"{labels.min()}..{labels.max()}"
        )
    labels = labels.astype(np.int64)
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(batch)
    loss = np.mean(log_norm - shifted[rows, labels])

    def rule(grad: np.ndarray):
        probs = np.exp(shifted - log_norm[:, None])
        probs[rows, labels] -= 1.0
        return (probs * (grad / batch),)

    return record("softmax_cross_entropy", (logits,), Tensor(loss), rule)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise RejectedInputError(f"add: shape {a.shape} != {b.shape}")
    return record("add", (a, b), Tensor(a.data + b.data), lambda grad: (grad, grad))


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise RejectedInputError(f"mul: shape {a.shape} != {b.shape}")
    x, y = a.data, b.data
    return record("mul", (a, b), Tensor(x * y), lambda grad: (grad * y, grad * x))


def scale(a: Tensor, factor: float) -> Tensor:
    return record("scale", (a,), Tensor(a.data * factor), lambda grad: (grad * factor,))


def tensor_sum(a: Tensor) -> Tensor:
    shape = a.shape
    return record(
        "sum", (a,), Tensor(a.data.sum()), lambda grad: (np.broadcast_to(grad, shape).copy(),)
    )


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    original: Tuple[int, ...] = a.shape
    try:
        out = a.data.reshape(tuple(shape))
    except ValueError as exc:
        raise RejectedInputError(f"reshape: cannot view {original} as {tuple(shape)}") from exc
    return record("reshape", (a,), Tensor(out), lambda grad: (grad.reshape(original),))


def flatten(a: Tensor) -> Tensor:
    """[B, ...] -> [B, N]"""
    return reshape(a, (a.shape[0], -1))
