"""Experiment orchestration: training loops, the evaluation protocol,
and the method-by-task grid.

Agents act in a normalized action space, [-1, 1] per axis, which the
bench maps onto physical displacements via the actuator bound. State
observations are feature-scaled to order one before they reach a
network; image observations are already in [0, 1]. The replay buffer
stores the policy action, not the composite command, so a residual
agent learns values of its own corrections.
"""
from __future__ import annotations

import hashlib
import json
import traceback
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .control import PController, residual_action, scripted_demo
from .env import (
    A_MAX,
    EnvConfig,
    InsertionEnv,
    ObservationMode,
    PROFILES,
    clamp_action,
    seated_goal,
)
from .persist import MetricsWriter, save_demos, save_run
from .render import IMAGE_SIZE, capture_goal_image, render
from .replay import ReplayBuffer
from .rewards import DenseRewardParams, dense_reward, image_reward, sparse_reward
from .sac import SacAgent, SacConfig
from .td3 import Td3Agent, Td3Config

# lateral position errors are order millimetres, the vertical error is
# order the reset height, and forces are order tens of newtons
OBS_SCALE_STATE = np.array([1000.0, 1000.0, 20.0, 0.1])
# a residual policy only corrects the hand controller, so it gets a
# fraction of the actuator bound; pure RL keeps full authority
RESIDUAL_AUTHORITY = 0.6
STATE_DIM = 4
ACT_DIM = 3
HIDDEN_STATE = (64, 64)
HIDDEN_IMAGE = (128, 64)
PERTURB_OFFSET = 1e-3  # uniform per lateral axis, z never perturbed
REWARD_MODES = ("dense", "sparse", "image")
# learner-side reward scale per mode, keeping value magnitudes near one;
# logged returns stay in raw reward units
REWARD_SCALE = {"dense": 0.02, "sparse": 0.1, "image": 1.0}
# pure RL needs roughly twice the budget of the residual variants
DEFAULT_EPISODES = {"pure": 300, "residual": 150, "rlfd": 150, "p_only": 0}


class Method(str, Enum):
    PURE = "pure"
    RESIDUAL = "residual"
    RLFD = "rlfd"
    P_ONLY = "p_only"


class Algo(str, Enum):
    SAC = "sac"
    TD3 = "td3"


class Perturbation(str, Enum):
    PERFECT = "perfect"
    NOISY_1MM = "noisy_1mm"


def rng_from_token(*parts) -> np.random.Generator:
    """Generator derived from a stable string token via sha256."""
    token = "/".join(str(p) for p in parts)
    digest = hashlib.sha256(token.encode("utf-8")).digest()
    return np.random.default_rng(np.random.SeedSequence(int.from_bytes(digest, "little")))


def seed_from_token(*parts) -> int:
    digest = hashlib.sha256("/".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass
class ExperimentSpec:
    profile: str = "usb_like"
    method: Method = Method.RESIDUAL
    algo: Algo = Algo.SAC
    obs_mode: ObservationMode = ObservationMode.STATE_VECTOR
    reward_mode: str = "dense"
    perturbation: Perturbation = Perturbation.PERFECT
    episodes: int | None = None
    seed: int = 0
    n_demos: int = 10
    buffer_capacity: int = 100_000
    eval_episodes: int = 25
    store_executed: bool = False
    # optional environment overrides; None keeps the EnvConfig default
    horizon: int | None = None
    reset_height: float | None = None
    actuator_noise_std: float | None = None

    def __post_init__(self):
        self.method = Method(self.method)
        self.algo = Algo(self.algo)
        self.obs_mode = ObservationMode(self.obs_mode)
        self.perturbation = Perturbation(self.perturbation)
        if self.episodes is None:
            self.episodes = DEFAULT_EPISODES[self.method.value]
        if self.profile not in PROFILES:
            raise ValueError(f"unknown profile: {self.profile}")
        if self.reward_mode not in REWARD_MODES:
            raise ValueError(f"unknown reward_mode: {self.reward_mode}")
        if self.method == Method.RLFD and self.algo != Algo.TD3:
            raise ValueError("rlfd runs on td3 (behaviour cloning needs its actor)")
        if self.episodes < 0 or self.eval_episodes < 1:
            raise ValueError("episode counts must be non-negative")
        if self.n_demos < 1 or self.buffer_capacity < 1:
            raise ValueError("n_demos and buffer_capacity must be positive")
        if self.horizon is not None and self.horizon < 1:
            raise ValueError("horizon override must be >= 1")
        if self.reset_height is not None and self.reset_height <= 0:
            raise ValueError("reset_height override must be positive")
        if self.actuator_noise_std is not None and self.actuator_noise_std < 0:
            raise ValueError("actuator_noise_std override must be >= 0")

    @property
    def effective_horizon(self) -> int:
        if self.horizon is not None:
            return self.horizon
        return EnvConfig.__dataclass_fields__["horizon"].default

    @property
    def obs_dim(self) -> int:
        return STATE_DIM if self.obs_mode == ObservationMode.STATE_VECTOR else IMAGE_SIZE**2

    @property
    def cell_name(self) -> str:
        return "-".join(
            (
                self.profile,
                self.method.value,
                self.algo.value,
                self.obs_mode.value,
                self.reward_mode,
                self.perturbation.value,
            )
        )

    def to_json(self) -> dict:
        return {
            "profile": self.profile,
            "method": self.method.value,
            "algo": self.algo.value,
            "obs_mode": self.obs_mode.value,
            "reward_mode": self.reward_mode,
            "perturbation": self.perturbation.value,
            "episodes": self.episodes,
            "seed": self.seed,
            "n_demos": self.n_demos,
            "buffer_capacity": self.buffer_capacity,
            "eval_episodes": self.eval_episodes,
            "store_executed": self.store_executed,
            "horizon": self.horizon,
            "reset_height": self.reset_height,
            "actuator_noise_std": self.actuator_noise_std,
        }

    @staticmethod
    def from_json(d: dict) -> "ExperimentSpec":
        return ExperimentSpec(**d)


def make_env_config(
    spec: ExperimentSpec, phase: str, index: int, perfect: bool = False
) -> EnvConfig:
    """Per-episode environment: fresh plant seed, fresh goal estimate.

    Noisy1mm redraws an independent offset per episode, uniform in
    [-1 mm, +1 mm] on each lateral axis; z is never perturbed. `perfect`
    forces an exact estimate regardless of the spec (demo collection and
    goal-image capture happen under good conditions).
    """
    prof = PROFILES[spec.profile]
    goal = seated_goal(prof)
    estimate = goal.copy()
    if spec.perturbation == Perturbation.NOISY_1MM and not perfect:
        offs = rng_from_token(spec.seed, phase, "perturb", index).uniform(
            -PERTURB_OFFSET, PERTURB_OFFSET, size=2
        )
        estimate = goal + np.array([offs[0], offs[1], 0.0])
    overrides = {}
    if spec.horizon is not None:
        overrides["horizon"] = spec.horizon
    if spec.reset_height is not None:
        overrides["reset_height"] = spec.reset_height
    if spec.actuator_noise_std is not None:
        overrides["actuator_noise_std"] = spec.actuator_noise_std
    return EnvConfig(
        profile=prof,
        goal=goal,
        goal_estimate=estimate,
        rng_seed=seed_from_token(spec.seed, phase, "env", index),
        **overrides,
    )


def make_agent(spec: ExperimentSpec):
    if spec.method == Method.P_ONLY:
        return None
    hidden = HIDDEN_STATE if spec.obs_mode == ObservationMode.STATE_VECTOR else HIDDEN_IMAGE
    scale = RESIDUAL_AUTHORITY if spec.method == Method.RESIDUAL else 1.0
    agent_seed = seed_from_token(spec.seed, "agent")
    if spec.algo == Algo.SAC:
        return SacAgent(spec.obs_dim, ACT_DIM, scale, SacConfig(hidden=hidden), agent_seed)
    return Td3Agent(spec.obs_dim, ACT_DIM, scale, Td3Config(hidden=hidden), agent_seed)


def make_observer(spec: ExperimentSpec):
    if spec.obs_mode == ObservationMode.STATE_VECTOR:
        return lambda env: OBS_SCALE_STATE * env.observe(ObservationMode.STATE_VECTOR)
    return lambda env: env.observe(ObservationMode.IMAGE)


def make_reward_fn(spec: ExperimentSpec, cfg: EnvConfig, goal_frame: np.ndarray | None):
    """reward_fn(state, next_obs) for the configured reward mode.

    The image reward reuses the already-rendered next observation, so
    image cells rasterize each state exactly once.
    """
    if spec.reward_mode == "sparse":
        return lambda state, next_obs: sparse_reward(state)
    if spec.reward_mode == "dense":
        params = DenseRewardParams()
        est = cfg.goal_estimate

        def dense_fn(state, next_obs):
            return dense_reward(state.pos, state.f_z, state.inserted, est, params)

        return dense_fn
    if goal_frame is None:
        raise ValueError("image reward needs a goal frame")
    if spec.obs_mode == ObservationMode.IMAGE:
        return lambda state, next_obs: image_reward(next_obs, goal_frame)

    def fn(state, next_obs):
        return image_reward(render(state, cfg), goal_frame)

    return fn


@dataclass
class TrainResult:
    spec: ExperimentSpec
    agent: object
    episode_returns: list[float] = field(default_factory=list)
    episode_distances: list[float] = field(default_factory=list)
    first_success_episode: int | None = None
    total_steps: int = 0


def capture_run_goal_frame(spec: ExperimentSpec) -> np.ndarray | None:
    """One goal frame per run, recorded with a perfect estimate.

    Mirrors recording the goal image once during setup; training
    episodes under a noisy estimate keep using this reference frame.
    """
    if spec.reward_mode != "image":
        return None
    return capture_goal_image(make_env_config(spec, "goal-capture", 0, perfect=True))


def collect_demos(spec: ExperimentSpec, observe_fn, goal_frame=None) -> list:
    """n_demos scripted episodes, each on a fresh perfect-estimate plant."""
    if goal_frame is None:
        goal_frame = capture_run_goal_frame(spec)
    demo_rng = rng_from_token(spec.seed, "demo")
    transitions = []
    for i in range(spec.n_demos):
        cfg = make_env_config(spec, "demo", i, perfect=True)
        env = InsertionEnv(cfg)
        reward_fn = make_reward_fn(spec, cfg, goal_frame)
        transitions.extend(scripted_demo(env, observe_fn, reward_fn, demo_rng))
    return transitions


def train(spec: ExperimentSpec, out_dir=None) -> TrainResult:
    """Off-policy training, one gradient update per environment step.

    Episodes run to the fixed horizon on a fresh plant instance each
    time; the goal estimate is redrawn per episode under the configured
    perturbation. For residual methods the executed command is the
    clamped sum of the hand controller and the policy action, and the
    buffer stores only the policy action.
    """
    agent = make_agent(spec)
    observe_fn = make_observer(spec)
    hand = PController()
    train_rng = rng_from_token(spec.seed, "train")
    batch_size = agent.config.batch_size if agent is not None else 0
    goal_frame = capture_run_goal_frame(spec)

    needed = max((spec.episodes + spec.n_demos) * spec.effective_horizon, 1)
    buffer = ReplayBuffer(min(spec.buffer_capacity, needed), spec.obs_dim, ACT_DIM)

    demo_buffer = None
    demo_transitions = None
    if spec.method == Method.RLFD:
        demo_transitions = collect_demos(spec, observe_fn, goal_frame)
        demo_buffer = ReplayBuffer(len(demo_transitions), spec.obs_dim, ACT_DIM)
        r_scale = REWARD_SCALE[spec.reward_mode]
        for tr in demo_transitions:
            a_norm = np.clip(tr.action / A_MAX, -1.0, 1.0)
            buffer.add(tr.obs, a_norm, r_scale * tr.reward, tr.next_obs, tr.done)
            demo_buffer.add(tr.obs, a_norm, r_scale * tr.reward, tr.next_obs, tr.done)

    writer = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        writer = MetricsWriter(out_dir / "metrics.csv")
        if demo_transitions is not None:
            save_demos(out_dir / "demos.jsonl", demo_transitions)

    result = TrainResult(spec=spec, agent=agent)
    losses = {"critic_loss": float("nan"), "actor_loss": float("nan"),
              "temperature": float("nan")}
    try:
        for ep in range(spec.episodes):
            cfg = make_env_config(spec, "train", ep)
            env = InsertionEnv(cfg)
            reward_fn = make_reward_fn(spec, cfg, goal_frame)
            env.reset()
            obs = observe_fn(env)
            ep_return = 0.0
            ep_success = env.state.inserted
            for _t in range(cfg.horizon):
                if agent is None:
                    a_policy = np.zeros(ACT_DIM)
                else:
                    a_policy = agent.select_action(obs)
                u_policy = A_MAX * a_policy
                if spec.method in (Method.RESIDUAL, Method.P_ONLY):
                    u_hand = hand.act(env.state.pos, cfg.goal_estimate)
                    u_exec = residual_action(u_hand, u_policy)
                else:
                    u_exec = clamp_action(u_policy)
                state, info = env.step(u_exec)
                next_obs = observe_fn(env)
                reward = reward_fn(state, next_obs)
                a_stored = u_exec / A_MAX if spec.store_executed else a_policy
                buffer.add(
                    obs, a_stored, REWARD_SCALE[spec.reward_mode] * reward,
                    next_obs, info.done,
                )
                if agent is not None and len(buffer) >= batch_size:
                    if demo_buffer is not None:
                        demo_batch = demo_buffer.sample(batch_size, train_rng)
                        losses = agent.update_with_demos(
                            buffer.sample(batch_size, train_rng), demo_batch
                        )
                    else:
                        losses = agent.update(buffer.sample(batch_size, train_rng))
                ep_return += reward
                ep_success = ep_success or state.inserted
                obs = next_obs
                result.total_steps += 1
            final_distance = float(np.linalg.norm(env.state.pos - cfg.goal))
            result.episode_returns.append(ep_return)
            result.episode_distances.append(final_distance)
            if ep_success and result.first_success_episode is None:
                result.first_success_episode = ep
            if writer is not None:
                writer.write_row(
                    result.total_steps, ep, ep_return, final_distance,
                    losses["critic_loss"], losses["actor_loss"], losses["temperature"],
                )
    finally:
        if writer is not None:
            writer.close()

    if out_dir is not None:
        save_run(
            out_dir,
            {"experiment": spec.to_json()},
            networks=agent.networks() if agent is not None else None,
            extra=agent.extra_state() if agent is not None else None,
            step=result.total_steps,
        )
    return result


def restore_agent(spec: ExperimentSpec, networks: dict, extra: dict | None = None):
    """Fresh agent for `spec` with parameters copied from loaded nets."""
    agent = make_agent(spec)
    if agent is None:
        return None
    own = agent.networks()
    for name, net in networks.items():
        if name not in own:
            continue
        if net.values.shape != own[name].values.shape:
            raise ValueError(f"checkpoint {name}: parameter count mismatch")
        own[name].values[:] = net.values
    if extra:
        agent.load_extra_state(extra)
    return agent


@dataclass
class EvalResult:
    success_rate: float
    final_distances: np.ndarray
    mean_abs_action: float
    bound_hit_rate: float

    @property
    def mean_final_distance(self) -> float:
        return float(np.mean(self.final_distances))


def evaluate(agent, spec: ExperimentSpec, n_episodes: int | None = None) -> EvalResult:
    """Deterministic evaluation protocol.

    `n_episodes` rollouts on fresh plants; success means the plug was
    inserted at any step. Distances are measured to the true goal.
    Passing agent=None zeroes the policy term, which evaluates the hand
    controller alone for the residual and p_only methods.
    """
    if n_episodes is None:
        n_episodes = spec.eval_episodes
    hand = PController()
    observe_fn = make_observer(spec)
    bound = agent.act_scale if agent is not None else 1.0
    successes = 0
    distances = np.zeros(n_episodes)
    abs_actions: list[float] = []
    bound_hits = 0
    action_count = 0
    for i in range(n_episodes):
        cfg = make_env_config(spec, "eval", i)
        env = InsertionEnv(cfg)
        env.reset()
        obs = observe_fn(env)
        success = env.state.inserted
        for _t in range(cfg.horizon):
            if agent is None:
                a_policy = np.zeros(ACT_DIM)
            else:
                a_policy = agent.select_action(obs, deterministic=True)
            abs_actions.append(float(np.max(np.abs(a_policy))))
            bound_hits += int(np.max(np.abs(a_policy)) > 0.95 * bound)
            action_count += 1
            u_policy = A_MAX * a_policy
            if spec.method in (Method.RESIDUAL, Method.P_ONLY):
                u_exec = residual_action(hand.act(env.state.pos, cfg.goal_estimate), u_policy)
            else:
                u_exec = clamp_action(u_policy)
            state, _info = env.step(u_exec)
            success = success or state.inserted
            obs = observe_fn(env)
        successes += int(success)
        distances[i] = float(np.linalg.norm(env.state.pos - cfg.goal))
    return EvalResult(
        success_rate=successes / n_episodes,
        final_distances=distances,
        mean_abs_action=float(np.mean(abs_actions)) if abs_actions else 0.0,
        bound_hit_rate=bound_hits / action_count if action_count else 0.0,
    )


def default_grid(seed: int = 0, episodes: int | None = None) -> list[ExperimentSpec]:
    """The headline comparison: every method on every connector with
    state observations and sparse reward, plus the hand controller row.

    `episodes=None` keeps the per-method default budgets (pure RL gets
    twice the residual budget)."""
    specs = []
    for profile in PROFILES:
        for method in (Method.P_ONLY, Method.PURE, Method.RESIDUAL, Method.RLFD):
            algo = Algo.TD3 if method == Method.RLFD else Algo.SAC
            specs.append(
                ExperimentSpec(
                    profile=profile,
                    method=method,
                    algo=algo,
                    reward_mode="sparse",
                    episodes=episodes,
                    seed=seed,
                )
            )
    return specs


def run_grid(specs: list[ExperimentSpec], out_dir) -> list[dict]:
    """Train and evaluate every cell; one failure does not stop the grid.

    Writes per-cell run directories plus table.csv / table.json with the
    summary metrics.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for spec in specs:
        row = dict(spec.to_json())
        row["cell"] = spec.cell_name
        try:
            tr = train(spec, out_dir / spec.cell_name)
            ev = evaluate(tr.agent, spec)
            row.update(
                success_rate=ev.success_rate,
                mean_final_distance_m=ev.mean_final_distance,
                bound_hit_rate=ev.bound_hit_rate,
                mean_abs_action=ev.mean_abs_action,
                first_success_episode=tr.first_success_episode,
                error="",
            )
        except Exception:
            row.update(
                success_rate=float("nan"),
                mean_final_distance_m=float("nan"),
                bound_hit_rate=float("nan"),
                mean_abs_action=float("nan"),
                first_success_episode=None,
                error=traceback.format_exc(limit=3).strip().splitlines()[-1],
            )
        rows.append(row)
    columns = [
        "cell", "profile", "method", "algo", "obs_mode", "reward_mode",
        "perturbation", "episodes", "seed", "success_rate",
        "mean_final_distance_m", "bound_hit_rate", "first_success_episode",
        "error",
    ]
    lines = [",".join(columns)]
    for row in rows:
        vals = []
        for c in columns:
            v = row.get(c)
            if isinstance(v, float):
                vals.append(repr(v))
            elif v is None:
                vals.append("")
            else:
                vals.append(str(v))
        lines.append(",".join(vals))
    (out_dir / "table.csv").write_text("\n".join(lines) + "\n")
    (out_dir / "table.json").write_text(json.dumps(rows, indent=2, default=str))
    return rows
