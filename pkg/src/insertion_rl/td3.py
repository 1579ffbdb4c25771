"""Twin-delayed deterministic policy gradient, with an optional
behaviour-cloning term for learning from demonstrations.

The actor is a linear map clipped to the action bound, so a saturated
action rests exactly on the bound. Critic targets use clipped Gaussian
policy smoothing; the actor and all target networks move only every
`policy_delay` updates.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Var
from .nets import (
    AdamState,
    Network,
    PolicySpec,
    adam_step,
    backward,
    gather_grads,
    mlp_forward,
)


@dataclass
class Td3Config:
    gamma: float = 0.99
    tau: float = 0.005
    lr: float = 3e-4
    batch_size: int = 128
    policy_delay: int = 2
    target_noise_std: float = 0.2  # fraction of the action scale
    target_noise_clip: float = 0.5
    exploration_noise_std: float = 0.1
    bc_weight: float = 1.0
    hidden: tuple[int, ...] = (64, 64)

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must be in [0, 1)")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must be in (0, 1]")
        if self.lr <= 0 or self.batch_size < 1 or self.policy_delay < 1:
            raise ValueError("lr, batch_size and policy_delay must be positive")
        if min(self.target_noise_std, self.target_noise_clip, self.exploration_noise_std) < 0:
            raise ValueError("noise scales must be non-negative")
        if self.bc_weight < 0:
            raise ValueError("bc_weight must be non-negative")


class Td3Agent:
    def __init__(
        self,
        obs_dim: int,
        act_dim: int,
        act_scale: float,
        config: Td3Config = Td3Config(),
        seed: int = 0,
    ):
        self.config = config
        self.act_dim = act_dim
        self.act_scale = float(act_scale)
        self._rng = np.random.default_rng(seed)
        # linear head + clip: a saturated eval action sits exactly on the
        # bound, unlike a tanh squash which only approaches it
        actor_spec = PolicySpec(obs_dim, config.hidden, act_dim, "linear", act_scale)
        critic_spec = PolicySpec(obs_dim + act_dim, config.hidden, 1, "linear")
        self.actor = Network.create(actor_spec, self._rng)
        self.q1 = Network.create(critic_spec, self._rng)
        self.q2 = Network.create(critic_spec, self._rng)
        self.actor_target = self.actor.clone()
        self.q1_target = self.q1.clone()
        self.q2_target = self.q2.clone()
        self._actor_opt = AdamState.like(self.actor.values)
        self._q1_opt = AdamState.like(self.q1.values)
        self._q2_opt = AdamState.like(self.q2.values)
        self._updates = 0
        self._last_actor_loss = float("nan")
        self._last_rl_term = float("nan")
        self._last_bc_term = float("nan")

    def networks(self) -> dict[str, Network]:
        return {
            "actor": self.actor,
            "q1": self.q1,
            "q2": self.q2,
            "actor_target": self.actor_target,
            "q1_target": self.q1_target,
            "q2_target": self.q2_target,
        }

    def extra_state(self) -> dict:
        return {"updates": self._updates}

    def load_extra_state(self, d: dict) -> None:
        self._updates = int(d["updates"])

    def select_action(self, obs: np.ndarray, deterministic: bool = False) -> np.ndarray:
        a = self.actor.forward(np.asarray(obs, dtype=np.float64))
        if not deterministic:
            a = a + self.config.exploration_noise_std * self.act_scale * (
                self._rng.standard_normal(a.shape)
            )
        return np.clip(a, -self.act_scale, self.act_scale)

    def td_target(self, batch) -> np.ndarray:
        """Target with clipped-noise policy smoothing on a'."""
        scale = self.act_scale
        a_next = self.actor_target.forward(batch.next_obs)
        noise = self.config.target_noise_std * scale * self._rng.standard_normal(a_next.shape)
        clip_at = self.config.target_noise_clip * scale
        a_next = np.clip(a_next + np.clip(noise, -clip_at, clip_at), -scale, scale)
        xq = np.concatenate([batch.next_obs, a_next], axis=1)
        q_min = np.minimum(
            self.q1_target.forward(xq)[:, 0], self.q2_target.forward(xq)[:, 0]
        )
        return batch.reward + self.config.gamma * (1.0 - batch.done) * q_min

    def update_critics(self, batch, y: np.ndarray) -> float:
        xq = np.concatenate([batch.obs, batch.action], axis=1)
        losses = []
        for net, opt in ((self.q1, self._q1_opt), (self.q2, self._q2_opt)):
            out, tape = mlp_forward(net, xq)
            err = out[:, 0] - y
            losses.append(float(np.mean(err * err)))
            seed = (2.0 * err / err.size)[:, None]
            grad = backward(tape, seed)
            adam_step(net.values, grad, opt, self.config.lr)
        return 0.5 * (losses[0] + losses[1])

    def _actor_grad_dpg(self, obs: np.ndarray) -> tuple[float, np.ndarray]:
        """Deterministic policy gradient of -mean Q1(s, pi(s))."""
        obs_v = Var(obs)
        action, leaves = self.actor.forward_graph(obs_v)
        xq = ad.concat_cols(obs_v, action)
        q1v, _ = self.q1.forward_graph(xq, trainable=False)
        loss = ad.vmean(ad.mul(q1v, -1.0))
        ad.backprop(loss)
        return float(loss.data), gather_grads(self.actor.spec, leaves)

    def _bc_grad(self, demo_batch) -> tuple[float, np.ndarray]:
        """Mean squared action error against demonstrator actions."""
        action, leaves = self.actor.forward_graph(Var(demo_batch.obs))
        diff = ad.sub(action, Var(demo_batch.action))
        per = ad.vsum(ad.square(diff), axis=1, keepdims=True)
        loss = ad.vmean(per)
        ad.backprop(loss)
        return float(loss.data), gather_grads(self.actor.spec, leaves)

    def polyak(self) -> None:
        tau = self.config.tau
        pairs = (
            (self.actor, self.actor_target),
            (self.q1, self.q1_target),
            (self.q2, self.q2_target),
        )
        for online, target in pairs:
            target.values *= 1.0 - tau
            target.values += tau * online.values

    def update(self, batch, demo_batch=None) -> dict:
        """One critic step; every `policy_delay` calls also one actor step.

        With `demo_batch` the actor objective gains
        bc_weight * mean || pi(s_d) - u_d ||^2; bc_weight = 0 reduces to
        the plain update exactly.
        """
        self._updates += 1
        y = self.td_target(batch)
        critic_loss = self.update_critics(batch, y)
        if self._updates % self.config.policy_delay == 0:
            loss, grad = self._actor_grad_dpg(batch.obs)
            self._last_rl_term = loss
            self._last_bc_term = float("nan")
            if demo_batch is not None and self.config.bc_weight > 0:
                bc_loss, bc_grad = self._bc_grad(demo_batch)
                self._last_bc_term = bc_loss
                loss = loss + self.config.bc_weight * bc_loss
                grad = grad + self.config.bc_weight * bc_grad
            adam_step(self.actor.values, grad, self._actor_opt, self.config.lr)
            self.polyak()
            self._last_actor_loss = loss
        return {
            "critic_loss": critic_loss,
            "actor_loss": self._last_actor_loss,
            "temperature": float("nan"),
        }

    def update_with_demos(self, batch, demo_batch) -> dict:
        return self.update(batch, demo_batch)
