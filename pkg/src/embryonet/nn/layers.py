"""Forward and backward passes for the layer primitives.

Tensors are plain ``numpy.ndarray`` values in float64. Image-like inputs are
``(C, H, W)`` or batched ``(N, C, H, W)``; every function accepts both and
returns the matching rank. Nothing here mutates its arguments.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeError


def _batched(x: np.ndarray, rank: int = 4) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == rank - 1:
        return x[None], True
    if x.ndim != rank:
        raise ShapeError(f"expected a rank-{rank - 1} or rank-{rank} tensor", x.shape)
    return x, False


def conv_output_size(size: int, k: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - k) // stride + 1


def _check_conv(x: np.ndarray, kernel: np.ndarray, stride: int, padding: int) -> None:
    if kernel.ndim != 4:
        raise ShapeError("kernel must be (C_out, C_in, kH, kW)", kernel.shape)
    if x.shape[1] != kernel.shape[1]:
        raise ShapeError("input channels do not match kernel C_in", x.shape[1:], kernel.shape)
    if stride < 1 or padding < 0:
        raise ValueError(f"stride must be >= 1 and padding >= 0, got {stride}, {padding}")
    _, _, h, w = x.shape
    if kernel.shape[2] > h + 2 * padding or kernel.shape[3] > w + 2 * padding:
        raise ShapeError("kernel larger than padded input", x.shape[1:], kernel.shape)


def _windows(x: np.ndarray, kh: int, kw: int, stride: int, padding: int) -> np.ndarray:
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    return win[:, :, ::stride, ::stride]  # (N, C, H', W', kH, kW)


def conv2d(x, kernel, stride: int = 1, padding: int = 0, bias=None) -> np.ndarray:
    """Cross-correlate ``x`` with ``kernel`` using zero padding.

    Output spatial size is ``floor((H + 2*padding - kH) / stride) + 1``.
    """
    x, squeeze = _batched(x)
    kernel = np.asarray(kernel, dtype=np.float64)
    _check_conv(x, kernel, stride, padding)
    win = _windows(x, kernel.shape[2], kernel.shape[3], stride, padding)
    out = np.tensordot(win, kernel, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    if bias is not None:
        out = out + np.asarray(bias, dtype=np.float64)[None, :, None, None]
    out = np.ascontiguousarray(out)
    return out[0] if squeeze else out


def conv2d_backward(grad_out, x, kernel, stride: int = 1, padding: int = 0):
    """Gradients of ``sum(grad_out * conv2d(x, kernel))`` w.r.t. input and kernel."""
    x, squeeze = _batched(x)
    kernel = np.asarray(kernel, dtype=np.float64)
    _check_conv(x, kernel, stride, padding)
    g, _ = _batched(grad_out)
    n, c, h, w = x.shape
    c_out, _, kh, kw = kernel.shape
    ho = conv_output_size(h, kh, stride, padding)
    wo = conv_output_size(w, kw, stride, padding)
    if g.shape != (n, c_out, ho, wo):
        raise ShapeError("grad_out does not match conv2d output", g.shape, (n, c_out, ho, wo))

    win = _windows(x, kh, kw, stride, padding)
    grad_kernel = np.tensordot(g, win, axes=([0, 2, 3], [0, 2, 3]))
    grad_input = _input_grad(g, kernel, (h, w), stride, padding)
    return (grad_input[0] if squeeze else grad_input), grad_kernel


def _input_grad(g, kernel, hw, stride, padding):
    n, _, ho, wo = g.shape
    _, c, kh, kw = kernel.shape
    h, w = hw
    gp = np.zeros((n, c, h + 2 * padding, w + 2 * padding))
    for i in range(kh):
        for j in range(kw):
            contrib = np.tensordot(g, kernel[:, :, i, j], axes=([1], [0]))  # (N, H', W', C)
            gp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += contrib.transpose(0, 3, 1, 2)
    return np.ascontiguousarray(gp[:, :, padding:padding + h, padding:padding + w])


def conv_transpose2d(x, kernel, stride: int, padding: int, output_hw: tuple[int, int], bias=None):
    """Transposed convolution: the adjoint of ``conv2d`` with the same kernel.

    ``kernel`` has the layout of the forward conv it undoes,
    ``(C_x, C_out, kH, kW)``, so channels go from ``kernel.shape[0]`` to
    ``kernel.shape[1]``. ``output_hw`` pins the spatial size, which stride
    alone leaves ambiguous.
    """
    x, squeeze = _batched(x)
    kernel = np.asarray(kernel, dtype=np.float64)
    if x.shape[1] != kernel.shape[0]:
        raise ShapeError("input channels do not match transposed kernel", x.shape[1:], kernel.shape)
    ho = conv_output_size(output_hw[0], kernel.shape[2], stride, padding)
    wo = conv_output_size(output_hw[1], kernel.shape[3], stride, padding)
    if x.shape[2:] != (ho, wo):
        raise ShapeError("output_hw inconsistent with input size", x.shape, output_hw)
    out = _input_grad(x, kernel, output_hw, stride, padding)
    if bias is not None:
        out = out + np.asarray(bias, dtype=np.float64)[None, :, None, None]
    return out[0] if squeeze else out


def conv_transpose2d_backward(grad_out, x, kernel, stride: int, padding: int):
    """Gradients of ``sum(grad_out * conv_transpose2d(x, kernel, ...))``."""
    x, squeeze = _batched(x)
    g, _ = _batched(grad_out)
    grad_x = conv2d(g, kernel, stride, padding)
    if grad_x.shape != x.shape:
        raise ShapeError("grad_out does not match conv_transpose2d output", g.shape, x.shape)
    _, grad_kernel = conv2d_backward(x, g, kernel, stride, padding)
    return (grad_x[0] if squeeze else grad_x), grad_kernel


def dense(x, weight, bias=None) -> np.ndarray:
    """Affine map over the last axis: ``x @ weight.T + bias``."""
    x = np.asarray(x, dtype=np.float64)
    weight = np.asarray(weight, dtype=np.float64)
    if x.shape[-1] != weight.shape[1]:
        raise ShapeError("dense input width does not match weight", x.shape, weight.shape)
    out = x @ weight.T
    if bias is not None:
        out = out + bias
    return out


def dense_backward(grad_out, x, weight):
    """Returns ``(grad_x, grad_weight, grad_bias)``; leading axes are summed out."""
    x = np.asarray(x, dtype=np.float64)
    g = np.asarray(grad_out, dtype=np.float64)
    grad_x = g @ weight
    g2 = g.reshape(-1, g.shape[-1])
    x2 = x.reshape(-1, x.shape[-1])
    return grad_x, g2.T @ x2, g2.sum(axis=0)


def _check_pool(x: np.ndarray, size: int) -> None:
    if x.shape[2] % size or x.shape[3] % size:
        raise ShapeError(f"pool size {size} does not divide the spatial dims", x.shape)


def max_pool2d(x, size: int = 2) -> np.ndarray:
    """Non-overlapping max pooling with a ``size x size`` window."""
    x, squeeze = _batched(x)
    _check_pool(x, size)
    n, c, h, w = x.shape
    out = x.reshape(n, c, h // size, size, w // size, size).max(axis=(3, 5))
    return out[0] if squeeze else out


def max_pool2d_backward(grad_out, x, size: int = 2) -> np.ndarray:
    x, squeeze = _batched(x)
    _check_pool(x, size)
    g, _ = _batched(grad_out)
    n, c, h, w = x.shape
    blocks = x.reshape(n, c, h // size, size, w // size, size).transpose(0, 1, 2, 4, 3, 5)
    blocks = blocks.reshape(n, c, h // size, w // size, size * size)
    # ties route the gradient to the first maximum only
    idx = blocks.argmax(axis=-1)
    mask = np.zeros_like(blocks)
    np.put_along_axis(mask, idx[..., None], 1.0, axis=-1)
    grad = mask * g[..., None]
    grad = grad.reshape(n, c, h // size, w // size, size, size).transpose(0, 1, 2, 4, 3, 5)
    grad = grad.reshape(n, c, h, w)
    return grad[0] if squeeze else grad


def avg_pool2d(x, size: int = 2) -> np.ndarray:
    x, squeeze = _batched(x)
    _check_pool(x, size)
    n, c, h, w = x.shape
    out = x.reshape(n, c, h // size, size, w // size, size).mean(axis=(3, 5))
    return out[0] if squeeze else out


def avg_pool2d_backward(grad_out, x, size: int = 2) -> np.ndarray:
    x, squeeze = _batched(x)
    _check_pool(x, size)
    g, _ = _batched(grad_out)
    grad = upsample2d(g, size) / (size * size)
    if grad.shape != x.shape:
        raise ShapeError("grad_out does not match avg_pool2d output", g.shape, x.shape)
    return grad[0] if squeeze else grad


def upsample2d(x, factor: int = 2) -> np.ndarray:
    """Nearest-neighbour upsampling; the decoder's mirror of pooling."""
    x, squeeze = _batched(x)
    out = x.repeat(factor, axis=2).repeat(factor, axis=3)
    return out[0] if squeeze else out


def upsample2d_backward(grad_out, factor: int = 2) -> np.ndarray:
    g, squeeze = _batched(grad_out)
    n, c, h, w = g.shape
    grad = g.reshape(n, c, h // factor, factor, w // factor, factor).sum(axis=(3, 5))
    return grad[0] if squeeze else grad


def relu(x):
    return np.maximum(x, 0.0)


def relu_backward(grad_out, x):
    return grad_out * (np.asarray(x) > 0)


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    # split by sign so exp never overflows
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid_backward(grad_out, y):
    """``y`` is the sigmoid output, not its input."""
    return grad_out * y * (1.0 - y)


def tanh(x):
    return np.tanh(x)


def tanh_backward(grad_out, y):
    return grad_out * (1.0 - y * y)


def log_softmax(logits, axis: int = -1):
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def softmax(logits, axis: int = -1):
    return np.exp(log_softmax(logits, axis=axis))


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)
