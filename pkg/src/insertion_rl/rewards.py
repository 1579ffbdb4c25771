"""Reward functions over plant states and image observations.

All rewards are computed from what the robot can measure: the sparse
and dense rewards read the calibrated force and the position relative
to the goal estimate, the image reward compares the current frame to a
stored goal frame. None of them peek at the true goal.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import EnvState


@dataclass(frozen=True)
class DenseRewardParams:
    alpha: float = 100.0
    beta: float = 2e-3
    phi: float = 0.1
    epsilon: float = 1e-3

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0 or self.phi <= 0:
            raise ValueError("alpha, beta and phi must be strictly positive")
        if not 0.0 < self.epsilon <= 0.01:
            raise ValueError("epsilon must lie in (0, 0.01]")


def sparse_reward(state: EnvState) -> float:
    return 1.0 if state.inserted else 0.0


def dense_reward(
    pos: np.ndarray,
    f_z: float,
    inserted: bool,
    goal_estimate: np.ndarray,
    params: DenseRewardParams = DenseRewardParams(),
) -> float:
    """Shaped reward from distance-to-estimate and the force reading.

    The force penalty flips sign once inserted, so seating pressure is
    rewarded instead of punished.
    """
    diff = np.asarray(pos, dtype=np.float64).reshape(3) - np.asarray(
        goal_estimate, dtype=np.float64
    ).reshape(3)
    l1 = float(np.sum(np.abs(diff)))
    l2 = float(np.sqrt(np.sum(diff * diff)))
    phi_eff = -params.phi if inserted else params.phi
    return -params.alpha * l1 - params.beta / (l2 + params.epsilon) - phi_eff * float(f_z)


def image_reward(frame: np.ndarray, goal_frame: np.ndarray) -> float:
    """Negative mean absolute pixel difference, in [-1, 0]."""
    frame = np.asarray(frame, dtype=np.float64)
    goal_frame = np.asarray(goal_frame, dtype=np.float64)
    if frame.shape != goal_frame.shape:
        raise ValueError(f"frame shapes differ: {frame.shape} vs {goal_frame.shape}")
    return -float(np.mean(np.abs(frame - goal_frame)))
