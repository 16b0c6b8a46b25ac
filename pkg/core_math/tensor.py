"""
Reverse-Mode Tensor

A numpy-backed array with an optional gradient buffer. Operations in
core_math.ops record a backward closure on their output; calling
backward() on a scalar walks the recorded graph in reverse topological
order and accumulates gradients into the leaves.
"""

from __future__ import annotations

import contextlib
import contextvars
from typing import Any, Callable, Iterator, Optional, Sequence

import numpy as np

_grad_enabled: contextvars.ContextVar[bool] = contextvars.ContextVar(
    "jointcast_grad_enabled", default=True
)

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


def is_grad_enabled() -> bool:
    """Whether new operations record a backward graph."""
    return _grad_enabled.get()


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph construction inside the block (inference paths)."""
    token = _grad_enabled.set(False)
    try:
        yield
    finally:
        _grad_enabled.reset(token)


def unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """
    Reduce a broadcast gradient back to an operand's shape.

    Args:
        grad: Gradient with the broadcast (output) shape
        shape: Shape of the operand that was broadcast

    Returns:
        Gradient summed over broadcast axes, with the operand's shape
    """
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """
    Array with value semantics and an optional gradient slot.

    Attributes:
        data: The values (float64 in tests, float32 in training)
        grad: Accumulated gradient, same shape as data, or None
        requires_grad: Whether gradients flow to this tensor
        name: Optional label, set for parameters
    """

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")
    __array_priority__ = 100.0

    def __init__(
        self,
        data: Any,
        requires_grad: bool = False,
        name: Optional[str] = None,
        dtype: Optional[np.dtype] = None,
    ):
        array = np.asarray(data, dtype=dtype)
        if dtype is None and not np.issubdtype(array.dtype, np.floating):
            array = array.astype(np.float64)
        self.data: np.ndarray = array
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Optional[BackwardFn] = None

    @classmethod
    def from_op(
        cls,
        data: np.ndarray,
        parents: Sequence["Tensor"],
        backward: BackwardFn,
    ) -> "Tensor":
        """Wrap an op result, recording the graph edge when gradients are live."""
        out = cls(data, dtype=data.dtype)
        if is_grad_enabled() and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    # --- Array protocol ---

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def numpy(self) -> np.ndarray:
        """Return a copy of the values."""
        return self.data.copy()

    def item(self) -> float:
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        """Same values, severed from the graph."""
        return Tensor(self.data, dtype=self.data.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad.reshape(self.data.shape).astype(self.data.dtype, copy=False)

    # --- Backpropagation ---

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """
        Accumulate d(self)/d(leaf) into every leaf that requires gradients.

        Args:
            grad: Seed gradient; defaults to ones for a scalar output
        """
        if not self.requires_grad:
            return
        if grad is None:
            grad = np.ones_like(self.data)

        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))

        grads: dict[int, np.ndarray] = {id(self): np.asarray(grad, dtype=self.data.dtype)}
        for node in reversed(order):
            node_grad = grads.pop(id(node), None)
            if node_grad is None:
                continue
            if node._backward is None:
                node.accumulate_grad(node_grad)
                continue
            parent_grads = node._backward(node_grad)
            for parent, parent_grad in zip(node._parents, parent_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + parent_grad
                else:
                    grads[key] = parent_grad

    # --- Operators ---

    def __add__(self, other: Any) -> "Tensor":
        from core_math import ops

        return ops.add(self, other)

    def __radd__(self, other: Any) -> "Tensor":
        from core_math import ops

        return ops.add(other, self)

    def __sub__(self, other: Any) -> "Tensor":
        from core_math import ops

        return ops.sub(self, other)

    def __rsub__(self, other: Any) -> "Tensor":
        from core_math import ops

        return ops.sub(other, self)

    def __mul__(self, other: Any) -> "Tensor":
        from core_math import ops

        return ops.mul(self, other)

    def __rmul__(self, other: Any) -> "Tensor":
        from core_math import ops

        return ops.mul(other, self)

    def __truediv__(self, other: Any) -> "Tensor":
        from core_math import ops

        return ops.div(self, other)

    def __rtruediv__(self, other: Any) -> "Tensor":
        from core_math import ops

        return ops.div(other, self)

    def __neg__(self) -> "Tensor":
        from core_math import ops

        return ops.neg(self)

    def __matmul__(self, other: Any) -> "Tensor":
        from core_math import ops

        return ops.matmul(self, other)

    def __getitem__(self, index: Any) -> "Tensor":
        from core_math import ops

        return ops.index(self, index)

    def sum(self, axis: Any = None, keepdims: bool = False) -> "Tensor":
        from core_math import ops

        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: Any = None, keepdims: bool = False) -> "Tensor":
        from core_math import ops

        return ops.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape: Any) -> "Tensor":
        from core_math import ops

        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def swapaxes(self, axis1: int, axis2: int) -> "Tensor":
        from core_math import ops

        return ops.swapaxes(self, axis1, axis2)

    def __repr__(self) -> str:
        label = f", name='{self.name}'" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{label})"


def as_tensor(value: Any, dtype: Optional[np.dtype] = None) -> Tensor:
    """Wrap a constant as a Tensor, passing existing tensors through."""
    if isinstance(value, Tensor):
        return value
    if dtype is None and isinstance(value, np.ndarray) and np.issubdtype(value.dtype, np.floating):
        dtype = value.dtype
    return Tensor(value, dtype=dtype)
