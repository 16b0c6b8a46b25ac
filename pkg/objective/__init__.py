"""
Objective

Laplace mixture likelihood, scene-level winner-take-all, and the
composite training loss.
"""

from objective.losses import (
    LossBreakdown,
    laplace_nll,
    mixture_nll,
    mode_log_likelihoods,
    select_winner,
    total_loss,
    wta_regression,
)

__all__ = [
    "LossBreakdown",
    "laplace_nll",
    "mixture_nll",
    "mode_log_likelihoods",
    "select_winner",
    "total_loss",
    "wta_regression",
]
