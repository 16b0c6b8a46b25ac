"""
Parameter Store

Central registry of named, shaped, trainable arrays. Provides
deterministic initialization, ordered iteration, gradient bookkeeping and
the optimizer moment buffers that make up a checkpointable model state.
"""

from __future__ import annotations

import logging
from typing import Iterator, Literal, Optional, Sequence

import numpy as np

from core_math.tensor import Tensor
from jointcast_core.errors import CheckpointError, ConfigurationError, StateError

logger = logging.getLogger(__name__)

InitScheme = Literal["fan_in", "zeros", "ones", "normal"]


class ParameterStore:
    """
    Ordered mapping from parameter name to trainable Tensor.

    Names are unique and iteration follows insertion order, so two stores
    built by the same model code with the same seed are identical.

    Attributes:
        rng_seed: Seed of the initialization generator
        dtype: Floating point type of every entry
        moments: AdamW first/second moment buffers keyed by parameter name
        step: Number of optimizer steps applied
    """

    def __init__(self, rng_seed: int = 0, dtype: str | np.dtype = "float64") -> None:
        self.rng_seed = rng_seed
        self.dtype = np.dtype(dtype)
        self._entries: dict[str, Tensor] = {}
        self._rng = np.random.default_rng(rng_seed)
        self.dropout_rng = np.random.default_rng([rng_seed, 1])
        self.moments: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        self.step = 0
        logger.debug(f"Initialized ParameterStore (seed={rng_seed}, dtype={self.dtype})")

    def register(
        self,
        name: str,
        shape: Sequence[int],
        init: InitScheme = "fan_in",
        fan_in: Optional[int] = None,
    ) -> Tensor:
        """
        Create and register a parameter.

        Args:
            name: Unique dotted name (e.g. "encoder.map.0.to_q.weight")
            shape: Extents of the array
            init: "fan_in" draws N(0, 1/fan_in); "normal" draws N(0, 1)
            fan_in: Fan-in for scaling; defaults to shape[0]

        Returns:
            The registered Tensor

        Raises:
            ConfigurationError: If the name is already registered
        """
        if name in self._entries:
            raise ConfigurationError(
                f"Parameter '{name}' is already registered",
                parameter=name,
            )
        shape = tuple(int(n) for n in shape)
        if init == "zeros":
            data = np.zeros(shape)
        elif init == "ones":
            data = np.ones(shape)
        elif init == "normal":
            data = self._rng.standard_normal(shape)
        else:
            scale = 1.0 / np.sqrt(fan_in if fan_in is not None else shape[0])
            data = self._rng.standard_normal(shape) * scale
        param = Tensor(data.astype(self.dtype), requires_grad=True, name=name)
        self._entries[name] = param
        return param

    def get(self, name: str) -> Tensor:
        """
        Look up a parameter by name.

        Raises:
            StateError: If the name is not registered
        """
        if name not in self._entries:
            raise StateError(f"Parameter '{name}' not found in store", parameter=name)
        return self._entries[name]

    def has(self, name: str) -> bool:
        return name in self._entries

    def names(self, prefix: str = "") -> list[str]:
        """Registered names in insertion order, optionally filtered by prefix."""
        return [n for n in self._entries if n.startswith(prefix)]

    def items(self) -> Iterator[tuple[str, Tensor]]:
        return iter(self._entries.items())

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, name: object) -> bool:
        return name in self._entries

    @property
    def num_values(self) -> int:
        return sum(p.size for p in self._entries.values())

    def zero_grad(self) -> None:
        for param in self._entries.values():
            param.zero_grad()

    def fill_missing_grads(self) -> None:
        """Give untouched parameters an explicit zero gradient."""
        for param in self._entries.values():
            if param.grad is None:
                param.grad = np.zeros_like(param.data)

    # --- State transfer ---

    def state_arrays(self) -> dict[str, np.ndarray]:
        """
        Flatten the store into named arrays.

        Moment buffers appear as "<name>.m1" / "<name>.m2" and the step
        counter as "adamw.step".
        """
        arrays: dict[str, np.ndarray] = {}
        for name, param in self._entries.items():
            arrays[name] = param.data
        for name, (m1, m2) in self.moments.items():
            arrays[f"{name}.m1"] = m1
            arrays[f"{name}.m2"] = m2
        if self.moments:
            arrays["adamw.step"] = np.asarray(float(self.step))
        return arrays

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        """
        Restore parameter values and moment buffers.

        Raises:
            CheckpointError: If names or shapes disagree with the registered layout
        """
        missing = [n for n in self._entries if n not in arrays]
        if missing:
            raise CheckpointError(
                "Checkpoint lacks parameters required by the configuration",
                missing=missing[:5],
                count=len(missing),
            )
        for name, param in self._entries.items():
            value = arrays[name]
            if tuple(value.shape) != param.shape:
                raise CheckpointError(
                    f"Shape mismatch for '{name}'",
                    expected=param.shape,
                    found=tuple(value.shape),
                )
            param.data = np.asarray(value, dtype=self.dtype).copy()
            param.grad = None

        self.moments = {}
        for name in self._entries:
            if f"{name}.m1" in arrays and f"{name}.m2" in arrays:
                self.moments[name] = (
                    np.asarray(arrays[f"{name}.m1"], dtype=self.dtype).copy(),
                    np.asarray(arrays[f"{name}.m2"], dtype=self.dtype).copy(),
                )
        self.step = int(arrays["adamw.step"]) if "adamw.step" in arrays else 0
        logger.info(f"Loaded state for {len(self._entries)} parameters (step={self.step})")

    def __repr__(self) -> str:
        return (
            f"ParameterStore(entries={len(self._entries)}, values={self.num_values}, "
            f"dtype={self.dtype})"
        )
