"""
Core Math

Minimal differentiable computation substrate: a reverse-mode Tensor over
numpy, primitive operations with analytic gradients, standard layers,
gated relative-positional attention, AdamW, checkpoints and a
finite-difference gradient check.
"""

from core_math.checkpoint import load_checkpoint, save_checkpoint
from core_math.gradcheck import finite_diff_check
from core_math.layers import MLP, AttentionBlock, GatedAttention, LayerNorm, Linear, Module, linear
from core_math.optim import AdamW, cosine_lr, optimizer_step
from core_math.params import ParameterStore
from core_math.tensor import Tensor, as_tensor, no_grad

__all__ = [
    "AdamW",
    "AttentionBlock",
    "GatedAttention",
    "LayerNorm",
    "Linear",
    "MLP",
    "Module",
    "ParameterStore",
    "Tensor",
    "as_tensor",
    "cosine_lr",
    "finite_diff_check",
    "linear",
    "load_checkpoint",
    "no_grad",
    "optimizer_step",
    "save_checkpoint",
]
