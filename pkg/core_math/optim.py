"""
Optimizer

AdamW with decoupled weight decay and the cosine annealing learning rate
schedule. Moment buffers live in the ParameterStore so they are saved and
restored with the checkpoint.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from core_math.params import ParameterStore
from jointcast_core.errors import NumericError, StateError

logger = logging.getLogger(__name__)


class AdamW:
    """
    Adam with weight decay applied directly to the parameters.

    The decay multiplies each parameter by (1 - lr * weight_decay) before
    the bias-corrected Adam step, so it never passes through the moment
    estimates.
    """

    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps

    def step(self, store: ParameterStore, lr: float, weight_decay: float) -> None:
        """
        Apply one update to every parameter in the store.

        Raises:
            StateError: If any parameter has no gradient
            NumericError: If an update produces non-finite values
        """
        missing = [name for name, p in store.items() if p.grad is None]
        if missing:
            raise StateError(
                "Optimizer step requires gradients for every parameter",
                missing=missing[:5],
                count=len(missing),
            )

        t = store.step + 1
        correction1 = 1.0 - self.beta1**t
        correction2 = 1.0 - self.beta2**t
        decay = 1.0 - lr * weight_decay

        staged: dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
        for name, param in store.items():
            grad = param.grad
            m1, m2 = store.moments.get(name, (np.zeros_like(param.data), np.zeros_like(param.data)))
            m1 = self.beta1 * m1 + (1.0 - self.beta1) * grad
            m2 = self.beta2 * m2 + (1.0 - self.beta2) * grad * grad
            update = (m1 / correction1) / (np.sqrt(m2 / correction2) + self.eps)
            data = (param.data * decay - lr * update).astype(store.dtype)
            if not np.all(np.isfinite(data)):
                raise NumericError(
                    "Optimizer step produced non-finite parameters",
                    stage="optimizer",
                    parameter=name,
                )
            staged[name] = (data, m1.astype(store.dtype), m2.astype(store.dtype))

        # commit only once every update is finite
        for name, param in store.items():
            data, m1, m2 = staged[name]
            param.data = data
            store.moments[name] = (m1, m2)
        store.step = t
        logger.debug(f"AdamW step {t} applied (lr={lr:.3e}, wd={weight_decay})")


def optimizer_step(store: ParameterStore, lr: float, wd: float) -> None:
    """Apply one AdamW step with default moment coefficients."""
    AdamW().step(store, lr, wd)


def cosine_lr(epoch: float, total_epochs: int, base_lr: float = 5e-4) -> float:
    """
    Cosine annealing from base_lr at epoch 0 down to 0 at total_epochs.

    lr(e) = 0.5 * base_lr * (1 + cos(pi * e / E))
    """
    if total_epochs <= 0:
        return base_lr
    return 0.5 * base_lr * (1.0 + math.cos(math.pi * epoch / total_epochs))
