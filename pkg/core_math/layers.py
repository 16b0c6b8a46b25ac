"""
Layers

Parameterized building blocks over the ParameterStore: linear maps, MLPs,
layer normalization, gated multi-head attention with relative positional
embeddings, and the residual attention block used for every information
fusion step of the encoder and decoder.
"""

from __future__ import annotations

import math
from typing import Any, Callable, Optional, Sequence

import numpy as np

from core_math import ops
from core_math.params import InitScheme, ParameterStore
from core_math.tensor import Tensor
from jointcast_core.errors import ConfigurationError, DimensionError, NumericError

ACTIVATIONS: dict[str, Callable[[Tensor], Tensor]] = {
    "gelu": ops.gelu,
    "tanh": ops.tanh,
    "softplus": ops.softplus,
}


class Module:
    """
    Base class for parameterized components.

    A module owns a dotted name prefix in the store, tracks its child
    modules for train/eval switching, and creates constants in the store's
    dtype.
    """

    def __init__(self, store: ParameterStore, name: str) -> None:
        self.store = store
        self.name = name
        self.training = False
        self._children: list[Module] = []

    @property
    def dtype(self) -> np.dtype:
        return self.store.dtype

    def param(
        self,
        local_name: str,
        shape: Sequence[int],
        init: InitScheme = "fan_in",
        fan_in: Optional[int] = None,
    ) -> Tensor:
        return self.store.register(f"{self.name}.{local_name}", shape, init=init, fan_in=fan_in)

    def child(self, module: "Module") -> "Module":
        self._children.append(module)
        return module

    def const(self, value: Any) -> Tensor:
        return Tensor(np.asarray(value), dtype=self.dtype)

    def train(self, mode: bool = True) -> "Module":
        self.training = mode
        for child in self._children:
            child.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def parameter_names(self) -> list[str]:
        return self.store.names(prefix=f"{self.name}.")

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(name='{self.name}')"


def linear(
    x: Tensor, weight: Tensor, bias: Optional[Tensor] = None, name: str = "linear"
) -> Tensor:
    """
    Affine map y = xW + b over the last axis.

    Raises:
        DimensionError: If x's last extent differs from W's input extent
    """
    if x.shape[-1] != weight.shape[0]:
        raise DimensionError(
            f"Input width {x.shape[-1]} does not match weight rows {weight.shape[0]}",
            operand=f"{name}.input",
        )
    if bias is not None and bias.shape != (weight.shape[1],):
        raise DimensionError(
            f"Bias shape {bias.shape} does not match weight columns {weight.shape[1]}",
            operand=f"{name}.bias",
        )
    if x.ndim == 1:
        y = ops.reshape(ops.matmul(ops.reshape(x, (1, -1)), weight), (weight.shape[1],))
    else:
        y = ops.matmul(x, weight)
    return y if bias is None else ops.add(y, bias)


class Linear(Module):
    """Affine layer with weights scaled by 1/sqrt(fan_in) and zero bias."""

    def __init__(
        self,
        store: ParameterStore,
        name: str,
        in_dim: int,
        out_dim: int,
        bias: bool = True,
        zero_init: bool = False,
    ) -> None:
        super().__init__(store, name)
        self.in_dim = in_dim
        self.out_dim = out_dim
        init: InitScheme = "zeros" if zero_init else "fan_in"
        self.weight = self.param("weight", (in_dim, out_dim), init=init)
        self.bias = self.param("bias", (out_dim,), init="zeros") if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        return linear(x, self.weight, self.bias, name=self.name)


class MLP(Module):
    """
    Alternating linear layers and nonlinearities; the final layer is linear.

    Args:
        sizes: Output widths of each layer, e.g. [D, D] for one hidden layer
        zero_init_last: Start the final layer at zero (heads that must begin
            as the identity offset)
    """

    def __init__(
        self,
        store: ParameterStore,
        name: str,
        in_dim: int,
        sizes: Sequence[int],
        activation: str = "gelu",
        zero_init_last: bool = False,
    ) -> None:
        super().__init__(store, name)
        if not sizes:
            raise ConfigurationError("MLP needs at least one layer", module=name)
        if activation not in ACTIVATIONS:
            raise ConfigurationError(
                f"Unknown activation '{activation}'",
                available=sorted(ACTIVATIONS),
            )
        self.activation = ACTIVATIONS[activation]
        self.layers: list[Linear] = []
        width = in_dim
        for i, size in enumerate(sizes):
            last = i == len(sizes) - 1
            layer = Linear(store, f"{name}.{i}", width, size, zero_init=last and zero_init_last)
            self.layers.append(self.child(layer))  # type: ignore[arg-type]
            width = size
        self.out_dim = width

    def __call__(self, x: Tensor) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = self.activation(x)
        return x


class LayerNorm(Module):
    """Normalization over the last axis with learned gain and shift."""

    def __init__(self, store: ParameterStore, name: str, dim: int, eps: float = 1e-5) -> None:
        super().__init__(store, name)
        self.eps = eps
        self.gain = self.param("gain", (dim,), init="ones")
        self.shift = self.param("shift", (dim,), init="zeros")

    def __call__(self, x: Tensor) -> Tensor:
        centered = ops.sub(x, ops.mean(x, axis=-1, keepdims=True))
        variance = ops.mean(ops.square(centered), axis=-1, keepdims=True)
        normed = ops.div(centered, ops.sqrt(ops.add(variance, self.eps)))
        return ops.add(ops.mul(normed, self.gain), self.shift)


class GatedAttention(Module):
    """
    Multi-head attention whose output is fused with the query through a
    learned sigmoid gate.

    Keys and values are affine maps of the concatenation [kv || rel_pe];
    the concatenation is realized by separate weight blocks for the two
    halves so the key set need not be materialized per query. The output
    is g * attn + (1 - g) * mlp(q) with g = sigmoid(W [q || attn] + b).
    Queries whose mask row is all false return mlp(q).

    Shapes (leading batch axes broadcast):
        q: [..., Nq, D]; kv: [..., Nk, D]; rel_pe: [..., Nq, Nk, D];
        mask: bool [..., Nq, Nk], true = attend
    """

    def __init__(
        self,
        store: ParameterStore,
        name: str,
        dim: int,
        num_heads: int = 8,
        dropout: float = 0.0,
        use_rel: bool = True,
    ) -> None:
        super().__init__(store, name)
        if num_heads <= 0 or dim % num_heads != 0:
            raise ConfigurationError(
                f"Head count {num_heads} does not divide hidden size {dim}",
                module=name,
            )
        self.dim = dim
        self.num_heads = num_heads
        self.head_dim = dim // num_heads
        self.dropout = dropout
        self.use_rel = use_rel
        self.to_q = self.child(Linear(store, f"{name}.to_q", dim, dim))
        self.to_k = self.child(Linear(store, f"{name}.to_k", dim, dim))
        self.to_v = self.child(Linear(store, f"{name}.to_v", dim, dim))
        if use_rel:
            self.to_k_rel = self.child(Linear(store, f"{name}.to_k_rel", dim, dim, bias=False))
            self.to_v_rel = self.child(Linear(store, f"{name}.to_v_rel", dim, dim, bias=False))
        self.to_out = self.child(Linear(store, f"{name}.to_out", dim, dim))
        self.to_gate = self.child(Linear(store, f"{name}.to_gate", 2 * dim, dim))
        self.self_path = self.child(MLP(store, f"{name}.self_path", dim, [dim, dim]))
        self.calls = 0
        self.last_weights: Optional[np.ndarray] = None

    def _check(self, value: Optional[Tensor], operand: str) -> None:
        if value is None:
            return
        if value.shape[-1] != self.dim:
            raise DimensionError(
                f"Expected feature width {self.dim}, got {value.shape[-1]}",
                operand=f"{self.name}.{operand}",
            )
        if not np.all(np.isfinite(value.data)):
            raise NumericError(f"Non-finite values in attention {operand}", stage=self.name)

    def _heads(self, x: Tensor) -> Tensor:
        return ops.reshape(x, x.shape[:-1] + (self.num_heads, self.head_dim))

    def __call__(
        self,
        q: Tensor,
        kv: Tensor,
        rel_pe: Optional[Tensor] = None,
        mask: Optional[np.ndarray] = None,
    ) -> Tensor:
        self._check(q, "query")
        self._check(kv, "kv")
        self._check(rel_pe, "rel_pe")
        self.calls += 1

        nq = q.shape[-2]
        nk = kv.shape[-2]
        query = self._heads(self.to_q(q))
        query = ops.reshape(query, query.shape[:-3] + (nq, 1, self.num_heads, self.head_dim))
        key = self._heads(self.to_k(kv))
        key = ops.reshape(key, key.shape[:-3] + (1, nk, self.num_heads, self.head_dim))
        value = self._heads(self.to_v(kv))
        value = ops.reshape(value, value.shape[:-3] + (1, nk, self.num_heads, self.head_dim))
        if rel_pe is not None:
            if not self.use_rel:
                raise ConfigurationError(
                    "Layer built without relative embeddings", module=self.name
                )
            key = ops.add(key, self._heads(self.to_k_rel(rel_pe)))
            value = ops.add(value, self._heads(self.to_v_rel(rel_pe)))

        scores = ops.mul(ops.sum(ops.mul(query, key), axis=-1), 1.0 / math.sqrt(self.head_dim))
        if mask is not None:
            mask = np.asarray(mask, dtype=bool)
            head_mask = np.broadcast_to(mask[..., None], scores.shape)
        else:
            head_mask = None
        weights = ops.masked_softmax(scores, head_mask, axis=-2)
        self.last_weights = weights.data
        context = ops.sum(ops.mul(ops.reshape(weights, weights.shape + (1,)), value), axis=-3)
        context = ops.reshape(context, context.shape[:-2] + (self.dim,))
        rng = self.store.dropout_rng
        attn_out = ops.dropout(self.to_out(context), self.dropout, rng, self.training)

        query_in = q if q.shape == attn_out.shape else ops.broadcast_to(q, attn_out.shape)
        self_out = self.self_path(query_in)
        gate = ops.sigmoid(self.to_gate(ops.concat([query_in, attn_out], axis=-1)))
        fused = ops.add(ops.mul(gate, attn_out), ops.mul(ops.sub(1.0, gate), self_out))
        if mask is None:
            return fused
        row_valid = np.broadcast_to(mask.any(axis=-1)[..., None], fused.shape)
        return ops.where(row_valid, fused, self_out)


class AttentionBlock(Module):
    """
    Pre-norm residual block: gated attention followed by a feed-forward MLP.

    Self-attention when kv is omitted; cross-attention otherwise.
    """

    def __init__(
        self,
        store: ParameterStore,
        name: str,
        dim: int,
        num_heads: int,
        dropout: float = 0.0,
        use_rel: bool = True,
        cross: bool = False,
        ff_hidden: Optional[int] = None,
    ) -> None:
        super().__init__(store, name)
        self.dropout = dropout
        self.cross = cross
        self.norm_q = self.child(LayerNorm(store, f"{name}.norm_q", dim))
        self.norm_kv = self.child(LayerNorm(store, f"{name}.norm_kv", dim)) if cross else None
        self.attn = self.child(
            GatedAttention(store, f"{name}.attn", dim, num_heads, dropout=dropout, use_rel=use_rel)
        )
        self.norm_ff = self.child(LayerNorm(store, f"{name}.norm_ff", dim))
        self.ff = self.child(MLP(store, f"{name}.ff", dim, [ff_hidden or dim, dim]))

    def __call__(
        self,
        x: Tensor,
        kv: Optional[Tensor] = None,
        rel_pe: Optional[Tensor] = None,
        mask: Optional[np.ndarray] = None,
    ) -> Tensor:
        x_n = self.norm_q(x)
        if self.cross:
            if kv is None:
                raise ConfigurationError("Cross-attention block needs kv", module=self.name)
            kv_n = self.norm_kv(kv)
        else:
            kv_n = x_n
        x = ops.add(x, self.attn(x_n, kv_n, rel_pe, mask))
        rng = self.store.dropout_rng
        update = ops.dropout(self.ff(self.norm_ff(x)), self.dropout, rng, self.training)
        return ops.add(x, update)
