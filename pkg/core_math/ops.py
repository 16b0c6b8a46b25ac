"""
Differentiable Operations

Primitive operations over Tensor. Every forward computation is paired with
its analytic gradient; composite layers in core_math.layers are built only
from these primitives.
"""

from __future__ import annotations

import math
from typing import Any, Optional, Sequence

import numpy as np
from scipy import special

from core_math.tensor import Tensor, as_tensor, unbroadcast

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _pair(a: Any, b: Any) -> tuple[Tensor, Tensor]:
    """Coerce operands to tensors, casting constants to the tensor's dtype."""
    if isinstance(a, Tensor) and not isinstance(b, Tensor):
        return a, Tensor(b, dtype=a.dtype)
    if isinstance(b, Tensor) and not isinstance(a, Tensor):
        return Tensor(a, dtype=b.dtype), b
    return as_tensor(a), as_tensor(b)


def _normalize_axes(axis: Any, ndim: int) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


# --- Elementwise arithmetic ---


def add(a: Any, b: Any) -> Tensor:
    a, b = _pair(a, b)

    def backward(g: np.ndarray):
        return unbroadcast(g, a.shape), unbroadcast(g, b.shape)

    return Tensor.from_op(a.data + b.data, (a, b), backward)


def sub(a: Any, b: Any) -> Tensor:
    a, b = _pair(a, b)

    def backward(g: np.ndarray):
        return unbroadcast(g, a.shape), unbroadcast(-g, b.shape)

    return Tensor.from_op(a.data - b.data, (a, b), backward)


def mul(a: Any, b: Any) -> Tensor:
    a, b = _pair(a, b)

    def backward(g: np.ndarray):
        return unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)

    return Tensor.from_op(a.data * b.data, (a, b), backward)


def div(a: Any, b: Any) -> Tensor:
    a, b = _pair(a, b)
    out = a.data / b.data

    def backward(g: np.ndarray):
        return (
            unbroadcast(g / b.data, a.shape),
            unbroadcast(-g * out / b.data, b.shape),
        )

    return Tensor.from_op(out, (a, b), backward)


def neg(a: Tensor) -> Tensor:
    return Tensor.from_op(-a.data, (a,), lambda g: (-g,))


def where(condition: np.ndarray, a: Any, b: Any) -> Tensor:
    """Select from a where condition holds, else from b (condition is constant)."""
    a, b = _pair(a, b)
    cond = np.asarray(condition, dtype=bool)

    def backward(g: np.ndarray):
        zeros = np.zeros_like(g)
        return (
            unbroadcast(np.where(cond, g, zeros), a.shape),
            unbroadcast(np.where(cond, zeros, g), b.shape),
        )

    return Tensor.from_op(np.where(cond, a.data, b.data), (a, b), backward)


# --- Linear algebra ---


def matmul(a: Any, b: Any) -> Tensor:
    """
    Batched matrix product with numpy broadcasting over leading axes.

    Both operands must be at least 2-D.
    """
    a, b = _pair(a, b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError("matmul operands must be at least 2-D")

    def backward(g: np.ndarray):
        if b.ndim == 2:
            ga = g @ b.data.T
            gb = a.data.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        else:
            ga = unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape)
            gb = unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape)
        return unbroadcast(ga, a.shape), gb

    return Tensor.from_op(a.data @ b.data, (a, b), backward)


# --- Reductions and shape ---


def sum(a: Tensor, axis: Any = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    axes = _normalize_axes(axis, a.ndim)

    def backward(g: np.ndarray):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, a.shape),)

    return Tensor.from_op(
        np.asarray(a.data.sum(axis=axes, keepdims=keepdims)), (a,), backward
    )


def mean(a: Tensor, axis: Any = None, keepdims: bool = False) -> Tensor:
    axes = _normalize_axes(axis, a.ndim)
    count = int(np.prod([a.shape[i] for i in axes])) if axes else 1
    return mul(sum(a, axis=axes, keepdims=keepdims), 1.0 / count)


def amax(a: Tensor, axis: int = -1, keepdims: bool = False) -> Tensor:
    """Maximum along one axis; ties share the gradient equally."""
    out = a.data.max(axis=axis, keepdims=True)

    def backward(g: np.ndarray):
        hit = (a.data == out).astype(a.dtype)
        hit /= hit.sum(axis=axis, keepdims=True)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (hit * g,)

    data = out if keepdims else np.squeeze(out, axis=axis)
    return Tensor.from_op(np.asarray(data), (a,), backward)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    return Tensor.from_op(
        a.data.reshape(tuple(shape)), (a,), lambda g: (g.reshape(a.shape),)
    )


def swapaxes(a: Tensor, axis1: int, axis2: int) -> Tensor:
    return Tensor.from_op(
        np.swapaxes(a.data, axis1, axis2),
        (a,),
        lambda g: (np.swapaxes(g, axis1, axis2),),
    )


def broadcast_to(a: Tensor, shape: Sequence[int]) -> Tensor:
    return Tensor.from_op(
        np.broadcast_to(a.data, tuple(shape)).copy(),
        (a,),
        lambda g: (unbroadcast(g, a.shape),),
    )


def index(a: Tensor, key: Any) -> Tensor:
    """Basic or advanced indexing; repeated indices accumulate gradient."""

    def backward(g: np.ndarray):
        grad = np.zeros_like(a.data)
        np.add.at(grad, key, g)
        return (grad,)

    return Tensor.from_op(np.asarray(a.data[key]), (a,), backward)


def concat(tensors: Sequence[Any], axis: int = -1) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    dtype = next((p.dtype for p in parts if p.requires_grad), parts[0].dtype)
    parts = [p if p.dtype == dtype else Tensor(p.data, dtype=dtype) for p in parts]
    sizes = [p.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def backward(g: np.ndarray):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor.from_op(np.concatenate([p.data for p in parts], axis=axis), parts, backward)


def stack(tensors: Sequence[Any], axis: int = 0) -> Tensor:
    parts = [as_tensor(t) for t in tensors]

    def backward(g: np.ndarray):
        return tuple(np.take(g, i, axis=axis) for i in range(len(parts)))

    return Tensor.from_op(np.stack([p.data for p in parts], axis=axis), parts, backward)


def cumsum(a: Tensor, axis: int) -> Tensor:
    def backward(g: np.ndarray):
        return (np.flip(np.cumsum(np.flip(g, axis=axis), axis=axis), axis=axis),)

    return Tensor.from_op(np.cumsum(a.data, axis=axis), (a,), backward)


def detach(a: Tensor) -> Tensor:
    return a.detach()


# --- Pointwise functions ---


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return Tensor.from_op(out, (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    return Tensor.from_op(np.log(a.data), (a,), lambda g: (g / a.data,))


def abs(a: Tensor) -> Tensor:  # noqa: A001
    return Tensor.from_op(np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),))


def sqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)
    return Tensor.from_op(out, (a,), lambda g: (g / (2.0 * out),))


def square(a: Tensor) -> Tensor:
    return Tensor.from_op(a.data * a.data, (a,), lambda g: (2.0 * g * a.data,))


def sin(a: Tensor) -> Tensor:
    return Tensor.from_op(np.sin(a.data), (a,), lambda g: (g * np.cos(a.data),))


def cos(a: Tensor) -> Tensor:
    return Tensor.from_op(np.cos(a.data), (a,), lambda g: (-g * np.sin(a.data),))


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return Tensor.from_op(out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a: Tensor) -> Tensor:
    out = special.expit(a.data)
    return Tensor.from_op(out, (a,), lambda g: (g * out * (1.0 - out),))


def softplus(a: Tensor) -> Tensor:
    out = np.logaddexp(0.0, a.data).astype(a.dtype, copy=False)
    return Tensor.from_op(out, (a,), lambda g: (g * special.expit(a.data),))


def gelu(a: Tensor) -> Tensor:
    """Exact Gaussian-error linear unit x * Phi(x)."""
    cdf = special.ndtr(a.data).astype(a.dtype, copy=False)
    pdf = np.exp(-0.5 * a.data * a.data) / _SQRT_2PI

    def backward(g: np.ndarray):
        return (g * (cdf + a.data * pdf),)

    return Tensor.from_op(a.data * cdf, (a,), backward)


# --- Normalized exponentials ---


def masked_softmax(a: Tensor, mask: Optional[np.ndarray] = None, axis: int = -1) -> Tensor:
    """
    Softmax along axis restricted to entries where mask is true.

    Fully masked slices produce all-zero weights.
    """
    if mask is None:
        mask = np.ones(a.shape, dtype=bool)
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), a.shape)
    logits = np.where(mask, a.data, -np.inf)
    peak = logits.max(axis=axis, keepdims=True)
    peak = np.where(np.isfinite(peak), peak, 0.0)
    weights = np.where(mask, np.exp(logits - peak), 0.0)
    total = weights.sum(axis=axis, keepdims=True)
    out = (weights / np.where(total > 0.0, total, 1.0)).astype(a.dtype, copy=False)

    def backward(g: np.ndarray):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return Tensor.from_op(out, (a,), backward)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    return masked_softmax(a, None, axis=axis)


def logsumexp(a: Tensor, axis: int = -1, keepdims: bool = False) -> Tensor:
    peak = a.data.max(axis=axis, keepdims=True)
    peak = np.where(np.isfinite(peak), peak, 0.0)
    shifted = np.exp(a.data - peak)
    total = shifted.sum(axis=axis, keepdims=True)
    out = np.log(total) + peak

    def backward(g: np.ndarray):
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (g * shifted / total,)

    data = out if keepdims else np.squeeze(out, axis=axis)
    return Tensor.from_op(np.asarray(data, dtype=a.dtype), (a,), backward)


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    return sub(a, logsumexp(a, axis=axis, keepdims=True))


def dropout(a: Tensor, rate: float, rng: np.random.Generator, training: bool) -> Tensor:
    """Inverted dropout; identity when not training or rate is zero."""
    if not training or rate <= 0.0:
        return a
    keep = (rng.random(a.shape) >= rate).astype(a.dtype) / (1.0 - rate)
    return mul(a, Tensor(keep, dtype=a.dtype))
