"""
Training Objective

Laplace mixture likelihood over joint worlds, scene-level winner-take-all
selection, and the composite loss: winner NLL of the proposals, winner NLL
of the refinements, and the mixture NLL that trains the mode scores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from core_math import ops
from core_math.tensor import Tensor
from decoder.joint import DecoderOutput
from jointcast_core.config import LossWeights
from jointcast_core.errors import DomainError, NumericError
from scoring.scorer import SceneScores

_LOG2 = math.log(2.0)


def _values(x: Tensor | np.ndarray) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x)


def laplace_nll(
    x: Tensor | np.ndarray, mu: Tensor | np.ndarray, b: Tensor | np.ndarray
) -> Tensor:
    """
    Sum over all coordinates of log(2b) + |x - mu| / b.

    Raises:
        DomainError: If any scale is not strictly positive
    """
    if not np.all(_values(b) > 0.0):
        raise DomainError(
            "Laplace scale must be strictly positive", min_scale=float(_values(b).min())
        )
    dtype = next((t.dtype for t in (mu, b, x) if isinstance(t, Tensor)), np.dtype(np.float64))
    x, mu, b = (t if isinstance(t, Tensor) else Tensor(t, dtype=dtype) for t in (x, mu, b))
    return ops.sum(ops.add(ops.log(ops.mul(b, 2.0)), ops.div(ops.abs(ops.sub(x, mu)), b)))


def select_winner(proposal_traj: Tensor | np.ndarray, gt: np.ndarray) -> int:
    """
    Mode with the smallest summed L2 displacement error over agents and steps.

    Ties go to the smallest mode index.

    Args:
        proposal_traj: [K, A', T', 2]
        gt: [A', T', 2]
    """
    traj = _values(proposal_traj).astype(np.float64)
    errors = np.linalg.norm(traj - np.asarray(gt, dtype=np.float64)[None], axis=-1).sum(axis=(1, 2))
    return int(np.argmin(errors))


def mode_log_likelihoods(traj: np.ndarray, scales: np.ndarray, gt: np.ndarray) -> np.ndarray:
    """Joint Laplace log-likelihood of gt under each of K worlds, [K]."""
    traj = np.asarray(traj, dtype=np.float64)
    scales = np.asarray(scales, dtype=np.float64)
    if not np.all(scales > 0.0):
        raise DomainError("Laplace scale must be strictly positive")
    residual = np.abs(np.asarray(gt, dtype=np.float64)[None] - traj)
    per_coord = -np.log(2.0 * scales) - residual / scales
    return per_coord.reshape(per_coord.shape[0], -1).sum(axis=-1)


def mixture_nll(
    refined_traj: Tensor | np.ndarray,
    scales: Tensor | np.ndarray,
    log_pi: Tensor | np.ndarray,
    gt: np.ndarray,
) -> Tensor:
    """
    Negative log-likelihood of gt under the K-world Laplace mixture.

    Locations and scales enter as constants, so gradients reach only the
    mixing coefficients through log_pi.

    Args:
        refined_traj: [K, A', T', 2] locations
        scales: [K, A', T', 2]
        log_pi: [K] log mixing coefficients
        gt: [A', T', 2]

    Raises:
        NumericError: If every world assigns zero likelihood
    """
    log_lik = mode_log_likelihoods(_values(refined_traj), _values(scales), gt)
    if not np.any(np.isfinite(log_lik)):
        raise NumericError("All mixture components have zero likelihood", stage="mixture_nll")
    log_pi = log_pi if isinstance(log_pi, Tensor) else Tensor(log_pi)
    joint = ops.add(log_pi, Tensor(log_lik, dtype=log_pi.dtype))
    return ops.neg(ops.logsumexp(joint, axis=-1))


def wta_regression(traj: Tensor, scales: Tensor, gt: np.ndarray, winner: int) -> Tensor:
    """Laplace NLL of the winner world only; other worlds receive no gradient."""
    return laplace_nll(gt, ops.index(traj, winner), ops.index(scales, winner))


@dataclass
class LossBreakdown:
    """
    Weighted loss terms of one scene.

    Each l_* already carries its LossWeights multiplier, so the three terms
    sum to total; objective is the differentiable counterpart of total.
    """

    l_propose: float
    l_refine: float
    l_cls: float
    total: float
    winner_index: int
    objective: Tensor


def total_loss(
    output: DecoderOutput,
    scores: SceneScores,
    gt_local: np.ndarray,
    weights: Optional[LossWeights] = None,
) -> LossBreakdown:
    """
    Composite scene loss.

    The winner is chosen by proposal error and reused for the refinement
    term. All trajectories and gt are in the targets' current frames.

    Args:
        output: Decoder output for the scene
        scores: Scene scores over the same K worlds
        gt_local: [A', T', 2] ground truth in the targets' frames
        weights: Term multipliers; the plain sum by default
    """
    weights = weights or LossWeights()
    proposal_traj = output.proposal_traj
    refined_traj = output.refined_traj
    winner = select_winner(proposal_traj, gt_local)

    l_propose = wta_regression(proposal_traj, output.proposal_scales, gt_local, winner)
    l_refine = wta_regression(refined_traj, output.refined_scales, gt_local, winner)
    l_cls = mixture_nll(refined_traj, output.refined_scales, scores.log_pi, gt_local)

    objective = ops.add(
        ops.add(ops.mul(l_propose, weights.propose), ops.mul(l_refine, weights.refine)),
        ops.mul(l_cls, weights.cls),
    )
    parts = [
        weights.propose * l_propose.item(),
        weights.refine * l_refine.item(),
        weights.cls * l_cls.item(),
    ]
    if not all(math.isfinite(p) for p in parts):
        raise NumericError("Non-finite loss term", stage="total_loss")
    return LossBreakdown(
        l_propose=parts[0],
        l_refine=parts[1],
        l_cls=parts[2],
        total=parts[0] + parts[1] + parts[2],
        winner_index=winner,
        objective=objective,
    )
