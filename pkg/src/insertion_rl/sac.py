"""Soft actor-critic with a tanh-squashed Gaussian policy.

Twin critics with polyak-averaged targets, reparameterized actor
updates through frozen critics, and a learned temperature driven toward
a fixed target entropy. One `update` call performs one gradient step on
every component, matching the one-update-per-environment-step regime.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Var
from .nets import (
    LOG_STD_MAX,
    LOG_STD_MIN,
    AdamState,
    Network,
    PolicySpec,
    adam_step,
    backward,
    gather_grads,
    mlp_forward,
)

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class SacConfig:
    gamma: float = 0.99
    tau: float = 0.005
    lr: float = 3e-4
    batch_size: int = 128
    init_alpha: float = 0.1
    target_entropy: float = -3.0
    init_log_std: float = -1.2  # fresh actors explore with std ~ 0.3
    hidden: tuple[int, ...] = (64, 64)

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must be in [0, 1)")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must be in (0, 1]")
        if self.lr <= 0 or self.batch_size < 1 or self.init_alpha <= 0:
            raise ValueError("lr, batch_size and init_alpha must be positive")
        if not LOG_STD_MIN <= self.init_log_std <= LOG_STD_MAX:
            raise ValueError("init_log_std outside the clamp range")


def log1m_tanh2_np(z: np.ndarray) -> np.ndarray:
    return 2.0 * (np.log(2.0) - z - np.logaddexp(0.0, -2.0 * z))


def squashed_gaussian_logp(
    eps: np.ndarray, log_std: np.ndarray, z: np.ndarray, scale: float
) -> np.ndarray:
    """log pi(a|s) for a = scale * tanh(mu + std * eps), summed over dims."""
    per_dim = (
        -0.5 * eps * eps - log_std - 0.5 * LOG_2PI
        - log1m_tanh2_np(z) - np.log(scale)
    )
    return per_dim.sum(axis=-1)


class SacAgent:
    def __init__(
        self,
        obs_dim: int,
        act_dim: int,
        act_scale: float,
        config: SacConfig = SacConfig(),
        seed: int = 0,
    ):
        self.config = config
        self.act_dim = act_dim
        self.act_scale = float(act_scale)
        self._rng = np.random.default_rng(seed)
        actor_spec = PolicySpec(obs_dim, config.hidden, act_dim, "gaussian", act_scale)
        critic_spec = PolicySpec(obs_dim + act_dim, config.hidden, 1, "linear")
        self.actor = Network.create(actor_spec, self._rng)
        # bias the log-std head so early exploration is moderate
        self.actor.values[-act_dim:] = config.init_log_std
        self.q1 = Network.create(critic_spec, self._rng)
        self.q2 = Network.create(critic_spec, self._rng)
        self.q1_target = self.q1.clone()
        self.q2_target = self.q2.clone()
        self.log_alpha = np.array([np.log(config.init_alpha)])
        self._actor_opt = AdamState.like(self.actor.values)
        self._q1_opt = AdamState.like(self.q1.values)
        self._q2_opt = AdamState.like(self.q2.values)
        self._alpha_opt = AdamState.like(self.log_alpha)

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha[0]))

    def networks(self) -> dict[str, Network]:
        return {
            "actor": self.actor,
            "q1": self.q1,
            "q2": self.q2,
            "q1_target": self.q1_target,
            "q2_target": self.q2_target,
        }

    def extra_state(self) -> dict:
        return {"log_alpha": float(self.log_alpha[0])}

    def load_extra_state(self, d: dict) -> None:
        self.log_alpha[0] = d["log_alpha"]

    def select_action(self, obs: np.ndarray, deterministic: bool = False) -> np.ndarray:
        mu, log_std = self.actor.gaussian_heads(np.asarray(obs, dtype=np.float64))
        if deterministic:
            return self.act_scale * np.tanh(mu)
        eps = self._rng.standard_normal(mu.shape)
        return self.act_scale * np.tanh(mu + np.exp(log_std) * eps)

    def _sample_np(self, obs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        mu, log_std = self.actor.gaussian_heads(obs)
        eps = self._rng.standard_normal(mu.shape)
        z = mu + np.exp(log_std) * eps
        a = self.act_scale * np.tanh(z)
        return a, squashed_gaussian_logp(eps, log_std, z, self.act_scale)

    def td_target(self, batch) -> np.ndarray:
        """y = r + gamma (1 - done) (min_i Qi'(s', a') - alpha log pi(a'|s'))."""
        a_next, logp = self._sample_np(batch.next_obs)
        xq = np.concatenate([batch.next_obs, a_next], axis=1)
        q_min = np.minimum(
            self.q1_target.forward(xq)[:, 0], self.q2_target.forward(xq)[:, 0]
        )
        target_v = q_min - self.alpha * logp
        return batch.reward + self.config.gamma * (1.0 - batch.done) * target_v

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

    def update_actor(self, batch) -> tuple[float, float]:
        """One reparameterized step on the actor; returns (loss, mean log pi)."""
        obs_v = Var(batch.obs)
        heads, leaves = self.actor.forward_graph(obs_v)
        a = self.act_dim
        mu = ad.slice_cols(heads, 0, a)
        log_std = ad.slice_cols(heads, a, 2 * a)
        eps = self._rng.standard_normal((batch.obs.shape[0], a))
        z = ad.add(mu, ad.mul(ad.exp(log_std), eps))
        action = ad.mul(ad.tanh(z), self.act_scale)
        const = -0.5 * eps * eps - 0.5 * LOG_2PI - np.log(self.act_scale)
        logp_mat = ad.add(ad.sub(ad.mul(log_std, -1.0), ad.log1m_tanh2(z)), const)
        logp = ad.vsum(logp_mat, axis=1, keepdims=True)
        xq = ad.concat_cols(obs_v, action)
        q1v, _ = self.q1.forward_graph(xq, trainable=False)
        q2v, _ = self.q2.forward_graph(xq, trainable=False)
        q_min = ad.minimum(q1v, q2v)
        loss = ad.vmean(ad.sub(ad.mul(logp, self.alpha), q_min))
        ad.backprop(loss)
        grad = gather_grads(self.actor.spec, leaves)
        adam_step(self.actor.values, grad, self._actor_opt, self.config.lr)
        return float(loss.data), float(np.mean(logp.data))

    def update_alpha(self, mean_logp: float) -> float:
        """Gradient step on log alpha toward the entropy target."""
        err = mean_logp + self.config.target_entropy
        adam_step(self.log_alpha, np.array([-err]), self._alpha_opt, self.config.lr)
        return float(-self.log_alpha[0] * err)

    def polyak(self) -> None:
        tau = self.config.tau
        for online, target in ((self.q1, self.q1_target), (self.q2, self.q2_target)):
            target.values *= 1.0 - tau
            target.values += tau * online.values

    def update(self, batch) -> dict:
        y = self.td_target(batch)
        critic_loss = self.update_critics(batch, y)
        actor_loss, mean_logp = self.update_actor(batch)
        self.update_alpha(mean_logp)
        self.polyak()
        return {
            "critic_loss": critic_loss,
            "actor_loss": actor_loss,
            "temperature": self.alpha,
        }
