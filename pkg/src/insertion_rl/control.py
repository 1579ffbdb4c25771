"""Hand-designed controllers: proportional descent, residual
composition, and a scripted demonstrator for the RLfD baselines.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import A_MAX, InsertionEnv, clamp_action
from .replay import Transition

K_P_DEFAULT = (1.0, 1.0, 0.3)


class DemoFailed(RuntimeError):
    """The scripted demonstrator missed on every allowed attempt."""


def p_control(pos, goal, k_p=K_P_DEFAULT, bound: float = A_MAX) -> np.ndarray:
    """u = clip(-k_p * (pos - goal)); bound may be inf for the raw law."""
    k_p = np.asarray(k_p, dtype=np.float64)
    u = -k_p * (np.asarray(pos, dtype=np.float64) - np.asarray(goal, dtype=np.float64))
    return np.clip(u, -bound, bound)


@dataclass(frozen=True)
class PController:
    """Proportional controller toward a fixed goal estimate.

    The vertical gain is softer than the lateral gains, so the plug
    re-centres laterally before it finishes its descent.
    """

    k_p: tuple[float, float, float] = K_P_DEFAULT
    bound: float = A_MAX

    def __post_init__(self):
        if any(k <= 0 for k in self.k_p) or not self.bound > 0:
            raise ValueError("gains and bound must be positive")

    def act(self, pos, goal) -> np.ndarray:
        return p_control(pos, goal, self.k_p, self.bound)


def residual_action(hand_u, policy_u) -> np.ndarray:
    """Composite command: the sum, re-clamped to the actuator bound."""
    return clamp_action(np.asarray(hand_u) + np.asarray(policy_u))


def scripted_demo(
    env: InsertionEnv,
    observe_fn,
    reward_fn,
    rng: np.random.Generator,
    max_retries: int = 5,
    jitter_std: float = 2e-4,
    wiggle: float = 5e-4,
    force_threshold: float = 1.0,
    k_p=K_P_DEFAULT,
) -> list[Transition]:
    """One successful demonstration episode as a transition list.

    The demonstrator descends proportionally toward the true goal with
    small command jitter; under contact force it wiggles laterally with
    alternating sign, mimicking a human seating a connector. Episodes
    that never insert are retried; DemoFailed after `max_retries`.
    `observe_fn(env)` supplies observations, `reward_fn(state, next_obs)`
    the recorded reward.
    """
    for _ in range(max_retries):
        env.reset()
        transitions: list[Transition] = []
        success = env.state.inserted
        obs = observe_fn(env)
        sign = 1.0
        for _t in range(env.config.horizon):
            u = p_control(env.state.pos, env.config.goal, k_p, A_MAX)
            if jitter_std > 0:
                u = u + rng.normal(0.0, jitter_std, size=3)
            if env.state.f_z > force_threshold:
                u = u + np.array([sign * wiggle, 0.0, 0.0])
                sign = -sign
            u = clamp_action(u)
            state, info = env.step(u)
            next_obs = observe_fn(env)
            reward = reward_fn(state, next_obs)
            transitions.append(Transition(obs, u, reward, next_obs, info.done))
            success = success or state.inserted
            obs = next_obs
        if success:
            return transitions
    raise DemoFailed(f"no successful episode in {max_retries} attempts")
