"""
Finite-Difference Gradient Check

Compares analytic gradients from the backward pass against central
differences, coordinate by coordinate.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from core_math.tensor import Tensor, no_grad
from jointcast_core.errors import InputError, NumericError


def _evaluate(f: Callable[[], Tensor]) -> float:
    with no_grad():
        value = f()
    result = float(np.asarray(value.data).reshape(()))
    if not np.isfinite(result):
        raise NumericError("Function under check returned a non-finite value", stage="gradcheck")
    return result


def finite_diff_check(
    f: Callable[[], Tensor],
    inputs: Sequence[Tensor],
    eps: float = 1e-6,
    max_coords: Optional[int] = None,
    seed: int = 0,
) -> float:
    """
    Maximum relative error between analytic and central-difference gradients.

    The error per coordinate is |analytic - central| / max(1, |central|).

    Args:
        f: Zero-argument closure returning a scalar Tensor built from inputs
        inputs: Leaf tensors to differentiate with respect to (mutated in place
                during the check and restored afterwards)
        eps: Central-difference step, within [1e-7, 1e-4]
        max_coords: Check at most this many randomly chosen coordinates per input
        seed: Seed for coordinate sampling

    Returns:
        The maximum relative error over all checked coordinates

    Raises:
        InputError: If eps is out of range or f is not scalar-valued
        NumericError: If f evaluates to a non-finite value
    """
    if not 1e-7 <= eps <= 1e-4:
        raise InputError(f"Finite-difference step {eps} outside [1e-7, 1e-4]")

    for tensor in inputs:
        tensor.data = np.ascontiguousarray(tensor.data).copy()
        tensor.requires_grad = True
        tensor.zero_grad()

    output = f()
    if output.size != 1:
        raise InputError("Function under check must be scalar-valued", shape=output.shape)
    if not np.all(np.isfinite(output.data)):
        raise NumericError("Function under check returned a non-finite value", stage="gradcheck")
    output.backward()
    analytic = [
        (t.grad.copy() if t.grad is not None else np.zeros_like(t.data)).reshape(-1)
        for t in inputs
    ]

    rng = np.random.default_rng(seed)
    worst = 0.0
    for tensor, grad in zip(inputs, analytic):
        flat = tensor.data.reshape(-1)
        coords: Sequence[int] = range(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
        for i in coords:
            original = flat[i]
            flat[i] = original + eps
            plus = _evaluate(f)
            flat[i] = original - eps
            minus = _evaluate(f)
            flat[i] = original
            central = (plus - minus) / (2.0 * eps)
            error = abs(float(grad[i]) - central) / max(1.0, abs(central))
            worst = max(worst, error)
    return worst
