"""
Scene-Level Ensembling

Joint predictions from several models are clustered by the flattened
final positions of all target agents, using their scene scores as sample
weights. Each cluster becomes one output world: the (weighted) average of
its member trajectories, scored by its share of the total weight.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ensemble.kmeans import weighted_kmeans
from jointcast_core.errors import InputError, SceneValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class WorldSet:
    """Scored joint worlds of one scenario: traj [N, A', T', 2], scores [N]."""

    scenario_id: str
    agent_ids: list[str]
    traj: np.ndarray
    scores: np.ndarray

    def __post_init__(self) -> None:
        traj = np.asarray(self.traj, dtype=np.float64)
        scores = np.asarray(self.scores, dtype=np.float64)
        object.__setattr__(self, "traj", traj)
        object.__setattr__(self, "scores", scores)
        if traj.ndim != 4 or traj.shape[1] != len(self.agent_ids) or traj.shape[-1] != 2:
            raise SceneValidationError(
                f"Trajectories {traj.shape} do not match {len(self.agent_ids)} agents",
                scenario_id=self.scenario_id,
            )
        if scores.shape != (traj.shape[0],):
            raise SceneValidationError(
                f"Scores {scores.shape} do not match {traj.shape[0]} worlds",
                scenario_id=self.scenario_id,
            )

    @property
    def num_worlds(self) -> int:
        return int(self.traj.shape[0])


EnsembleInput = WorldSet


def gather_inputs(members: Sequence[WorldSet]) -> EnsembleInput:
    """
    Stack several models' worlds for one scenario into a single input.

    Members listing the same agents in another order are reordered to the
    first member's order.

    Raises:
        SceneValidationError: If scenario ids, agent sets or horizons disagree
    """
    if not members:
        raise InputError("No predictions to ensemble")
    first = members[0]
    trajectories, scores = [], []
    for member in members:
        if member.scenario_id != first.scenario_id:
            raise SceneValidationError(
                "Predictions belong to different scenarios",
                scenario_ids=sorted({first.scenario_id, member.scenario_id}),
            )
        if sorted(member.agent_ids) != sorted(first.agent_ids):
            raise SceneValidationError(
                "Predictions cover different agent sets",
                scenario_id=first.scenario_id,
                expected=first.agent_ids,
                got=member.agent_ids,
            )
        order = [member.agent_ids.index(agent) for agent in first.agent_ids]
        traj = member.traj[:, order]
        if traj.shape[2:] != first.traj.shape[2:]:
            raise SceneValidationError(
                "Predictions disagree on horizon", scenario_id=first.scenario_id
            )
        trajectories.append(traj)
        scores.append(member.scores)
    return WorldSet(
        scenario_id=first.scenario_id,
        agent_ids=list(first.agent_ids),
        traj=np.concatenate(trajectories),
        scores=np.concatenate(scores),
    )


def ensemble_scene(
    inputs: EnsembleInput,
    k: int = 6,
    iters: int = 50,
    seed: int = 0,
    weighted_average: bool = True,
) -> WorldSet:
    """
    Reduce N scored worlds to k.

    Args:
        inputs: N worlds with positive scene scores as weights
        k: Output world count
        iters: Maximum Lloyd iterations
        seed: k-means++ seed
        weighted_average: Average member trajectories by weight; plain mean otherwise

    Returns:
        k worlds whose scores are normalized cluster weight masses

    Raises:
        InputError: If fewer than k worlds are given or a weight is not positive
    """
    num_worlds, num_agents = inputs.traj.shape[:2]
    endpoints = inputs.traj[:, :, -1, :].reshape(num_worlds, num_agents * 2)
    result = weighted_kmeans(endpoints, inputs.scores, k, iters=iters, seed=seed)

    worlds = np.zeros((k,) + inputs.traj.shape[1:])
    mass = np.zeros(k)
    for cluster in range(k):
        members = result.assignments == cluster
        member_weights = inputs.scores[members]
        mass[cluster] = member_weights.sum()
        averaging = member_weights if weighted_average else np.ones_like(member_weights)
        worlds[cluster] = np.tensordot(averaging / averaging.sum(), inputs.traj[members], axes=1)
    pi = mass / mass.sum()
    logger.debug(
        f"Ensembled {num_worlds} worlds of {inputs.scenario_id} into {k} "
        f"({result.iterations} iterations)"
    )
    return WorldSet(
        scenario_id=inputs.scenario_id,
        agent_ids=list(inputs.agent_ids),
        traj=worlds,
        scores=pi,
    )
