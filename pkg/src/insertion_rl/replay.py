"""Fixed-capacity ring replay buffer with uniform resampling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Transition:
    obs: np.ndarray
    action: np.ndarray
    reward: float
    next_obs: np.ndarray
    done: bool

    def __post_init__(self):
        object.__setattr__(self, "obs", np.asarray(self.obs, dtype=np.float64))
        object.__setattr__(self, "action", np.asarray(self.action, dtype=np.float64))
        object.__setattr__(self, "next_obs", np.asarray(self.next_obs, dtype=np.float64))
        if self.obs.shape != self.next_obs.shape:
            raise ValueError("obs and next_obs shapes differ")
        if not np.isfinite(self.reward):
            raise ValueError("non-finite reward")


@dataclass(frozen=True)
class Batch:
    obs: np.ndarray
    action: np.ndarray
    reward: np.ndarray
    next_obs: np.ndarray
    done: np.ndarray

    def __len__(self) -> int:
        return self.obs.shape[0]


class ReplayBuffer:
    """Preallocated float64 storage; oldest rows are overwritten first."""

    def __init__(self, capacity: int, obs_dim: int, act_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self._obs = np.zeros((capacity, obs_dim))
        self._action = np.zeros((capacity, act_dim))
        self._reward = np.zeros(capacity)
        self._next_obs = np.zeros((capacity, obs_dim))
        self._done = np.zeros(capacity)
        self._ptr = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def add(self, obs, action, reward, next_obs, done) -> None:
        obs = np.asarray(obs, dtype=np.float64).reshape(self.obs_dim)
        action = np.asarray(action, dtype=np.float64).reshape(self.act_dim)
        next_obs = np.asarray(next_obs, dtype=np.float64).reshape(self.obs_dim)
        reward = float(reward)
        if not (
            np.all(np.isfinite(obs))
            and np.all(np.isfinite(action))
            and np.all(np.isfinite(next_obs))
            and np.isfinite(reward)
        ):
            raise ValueError("non-finite transition rejected")
        i = self._ptr
        self._obs[i] = obs
        self._action[i] = action
        self._reward[i] = reward
        self._next_obs[i] = next_obs
        self._done[i] = 1.0 if done else 0.0
        self._ptr = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        """Uniform sample with replacement over the stored rows."""
        if self._size == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, self._size, size=batch_size)
        return Batch(
            obs=self._obs[idx].copy(),
            action=self._action[idx].copy(),
            reward=self._reward[idx].copy(),
            next_obs=self._next_obs[idx].copy(),
            done=self._done[idx].copy(),
        )
