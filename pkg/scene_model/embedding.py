"""
Descriptor Embedding

Maps relative descriptors (distance, bearing, heading difference, time
difference) to width-D positional embeddings: sin/cos Fourier features
followed by an MLP. Angles use integer frequencies so the features are
continuous across the +-pi wrap; distance and time use log-spaced
wavelengths.
"""

from __future__ import annotations

import numpy as np

from core_math import ops
from core_math.layers import MLP, Module
from core_math.params import ParameterStore
from core_math.tensor import Tensor
from scene_model.geometry import RelDescriptor

DISTANCE_WAVELENGTHS = (1.0, 1000.0)
TIME_WAVELENGTHS = (0.1, 100.0)


def fourier_frequencies(num_bands: int) -> np.ndarray:
    """Angular frequencies [4, num_bands] for the four descriptor channels."""
    angle = np.arange(1, num_bands + 1, dtype=np.float64)
    distance = 2.0 * np.pi / np.geomspace(*DISTANCE_WAVELENGTHS, num_bands)
    time = 2.0 * np.pi / np.geomspace(*TIME_WAVELENGTHS, num_bands)
    return np.stack([distance, angle, angle, time])


class DescriptorEmbedding(Module):
    """Fourier features of [..., 4] descriptors passed through an MLP to [..., D]."""

    def __init__(
        self,
        store: ParameterStore,
        name: str,
        dim: int,
        num_bands: int = 8,
        activation: str = "gelu",
    ) -> None:
        super().__init__(store, name)
        self.dim = dim
        self.num_bands = num_bands
        self.frequencies = fourier_frequencies(num_bands)
        self.mlp = self.child(MLP(store, f"{name}.mlp", 8 * num_bands, [dim, dim], activation))

    def features(self, descriptors: Tensor | np.ndarray) -> Tensor:
        d = descriptors if isinstance(descriptors, Tensor) else self.const(descriptors)
        phase = ops.mul(ops.reshape(d, d.shape + (1,)), self.const(self.frequencies))
        waves = ops.concat([ops.sin(phase), ops.cos(phase)], axis=-1)
        return ops.reshape(waves, d.shape[:-1] + (8 * self.num_bands,))

    def __call__(self, descriptors: Tensor | np.ndarray) -> Tensor:
        return self.mlp(self.features(descriptors))


def embed_descriptor(embedding: DescriptorEmbedding, descriptor: RelDescriptor) -> Tensor:
    """Embed a single descriptor to a [D] vector."""
    return embedding(descriptor.as_array())
