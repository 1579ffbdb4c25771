"""Quasi-static 3-DoF connector-insertion plant.

The plug tip is a point moving against a rigid socket: a face plate at
`surface_height` with a square channel of half-width `clearance` under
it. Commanded motion acts like a stiff spring (`wall_stiffness`), so a
blocked vertical displacement is read out as force, and descent inside
the channel advances only once the commanded penalty force beats the
constant `resistance_force`, losing `resistance_force / wall_stiffness`
of travel to friction. The channel bottoms out `SEAT_MARGIN` below the
insertion threshold; the default goal is the fully seated tip position.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

A_MAX = 5e-3  # per-step action bound, metres per axis
SEAT_MARGIN = 6e-3  # channel travel below the insertion threshold

CONNECTOR_NAMES = ("usb_like", "dsub_like", "model_e_like")


class ObservationMode(str, Enum):
    STATE_VECTOR = "state_vector"
    IMAGE = "image"


class EpisodeOver(RuntimeError):
    """step() was called on a state at or past the horizon."""


@dataclass(frozen=True)
class ConnectorProfile:
    """Geometry and friction parameters for one insertion task."""

    name: str
    clearance: float
    socket_depth: float
    resistance_force: float
    wall_stiffness: float
    surface_height: float = 0.0

    def __post_init__(self):
        if self.name not in CONNECTOR_NAMES:
            raise ValueError(f"unknown connector name: {self.name}")
        if self.clearance <= 0 or self.socket_depth <= 0:
            raise ValueError("clearance and socket_depth must be positive")
        if self.resistance_force < 0:
            raise ValueError("resistance_force must be non-negative")
        if self.wall_stiffness <= 0:
            raise ValueError("wall_stiffness must be positive")

    @property
    def bottom_z(self) -> float:
        return self.surface_height - self.socket_depth - SEAT_MARGIN

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "clearance": self.clearance,
            "socket_depth": self.socket_depth,
            "resistance_force": self.resistance_force,
            "wall_stiffness": self.wall_stiffness,
            "surface_height": self.surface_height,
        }

    @staticmethod
    def from_json(d: dict) -> "ConnectorProfile":
        return ConnectorProfile(**d)


USB_LIKE = ConnectorProfile("usb_like", 1.0e-3, 10e-3, 3.0, 5000.0)
DSUB_LIKE = ConnectorProfile("dsub_like", 0.6e-3, 10e-3, 5.0, 5000.0)
MODEL_E_LIKE = ConnectorProfile("model_e_like", 0.4e-3, 10e-3, 8.0, 5000.0)
PROFILES = {p.name: p for p in (USB_LIKE, DSUB_LIKE, MODEL_E_LIKE)}


def seated_goal(profile: ConnectorProfile) -> np.ndarray:
    """Fully seated plug-tip position at the channel bottom."""
    return np.array([0.0, 0.0, profile.bottom_z])


@dataclass
class EnvConfig:
    profile: ConnectorProfile
    goal: np.ndarray
    goal_estimate: np.ndarray
    horizon: int = 50
    reset_height: float = 0.05
    actuator_noise_std: float = 1e-4
    sensor_bias_range: float = 2.0
    rng_seed: int = 0

    def __post_init__(self):
        self.goal = np.asarray(self.goal, dtype=np.float64).reshape(3)
        self.goal_estimate = np.asarray(self.goal_estimate, dtype=np.float64).reshape(3)
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.reset_height < 0 or self.actuator_noise_std < 0:
            raise ValueError("reset_height and actuator_noise_std must be >= 0")
        if self.sensor_bias_range < 0:
            raise ValueError("sensor_bias_range must be >= 0")

    def to_json(self) -> dict:
        return {
            "profile": self.profile.to_json(),
            "goal": [float(v) for v in self.goal],
            "goal_estimate": [float(v) for v in self.goal_estimate],
            "horizon": self.horizon,
            "reset_height": self.reset_height,
            "actuator_noise_std": self.actuator_noise_std,
            "sensor_bias_range": self.sensor_bias_range,
            "rng_seed": self.rng_seed,
        }

    @staticmethod
    def from_json(d: dict) -> "EnvConfig":
        d = dict(d)
        d["profile"] = ConnectorProfile.from_json(d["profile"])
        return EnvConfig(**d)


def default_config(profile: str | ConnectorProfile = "usb_like", **overrides) -> EnvConfig:
    prof = PROFILES[profile] if isinstance(profile, str) else profile
    goal = overrides.pop("goal", seated_goal(prof))
    estimate = overrides.pop("goal_estimate", np.array(goal, dtype=np.float64))
    return EnvConfig(profile=prof, goal=goal, goal_estimate=estimate, **overrides)


@dataclass(frozen=True)
class EnvState:
    pos: np.ndarray
    f_z: float
    inserted: bool
    step_index: int


@dataclass(frozen=True)
class StepInfo:
    done: bool
    realized_delta: np.ndarray
    blocked_down: float
    raw_f_z: float
    contact: bool


def clamp_action(delta) -> np.ndarray:
    """Clamp each component to [-A_MAX, A_MAX]; NaN maps to zero motion."""
    delta = np.nan_to_num(
        np.asarray(delta, dtype=np.float64).reshape(3),
        nan=0.0, posinf=A_MAX, neginf=-A_MAX,
    )
    return np.clip(delta, -A_MAX, A_MAX)


def is_inserted(pos: np.ndarray, profile: ConnectorProfile, goal: np.ndarray) -> bool:
    lateral = np.max(np.abs(pos[:2] - goal[:2]))
    return (profile.surface_height - pos[2]) >= profile.socket_depth and (
        lateral <= profile.clearance
    )


def resolve_motion(
    pos: np.ndarray,
    attempted: np.ndarray,
    profile: ConnectorProfile,
    goal: np.ndarray,
) -> tuple[np.ndarray, float]:
    """Project an attempted motion onto the feasible set.

    Lateral motion is resolved first, then vertical, which keeps each
    step's contact response in closed form. Returns the new position and
    the blocked downward displacement (force = stiffness * blocked).
    """
    surf = profile.surface_height
    cx, cy = goal[0], goal[1]
    hw = profile.clearance
    bottom = profile.bottom_z
    k = profile.wall_stiffness
    r_slip = profile.resistance_force / k

    new = np.array(attempted, dtype=np.float64)
    if pos[2] < surf:
        # inside the channel: walls confine lateral motion
        new[0] = min(max(new[0], cx - hw), cx + hw)
        new[1] = min(max(new[1], cy - hw), cy + hw)

    blocked = 0.0
    if new[2] >= pos[2]:
        return new, blocked  # ascent and lateral-only moves are free

    if pos[2] >= surf:
        if new[2] >= surf:
            return new, blocked  # still above the plate
        push = surf - new[2]
        aligned = abs(new[0] - cx) <= hw and abs(new[1] - cy) <= hw
        if not aligned:
            new[2] = surf  # blocked flat on the face plate
            return new, push
        top = surf
    else:
        push = pos[2] - new[2]
        top = pos[2]

    # in-channel descent against constant friction
    if np.isinf(r_slip) or push * k <= profile.resistance_force:
        advance = 0.0
    else:
        advance = push - r_slip
    new[2] = max(top - advance, bottom)
    blocked = new[2] - (top - push)
    return new, blocked


class InsertionEnv:
    """Single-episode-at-a-time plant; owns its RNG stream and sensor bias.

    A trajectory is a pure function of (config, rng_seed, action
    sequence). Instances share no global state and may live on any
    thread, one owner at a time.
    """

    def __init__(self, config: EnvConfig):
        self.config = config
        self._rng = np.random.default_rng(config.rng_seed)
        self._bias = 0.0
        self._bias_estimate = 0.0
        self._state: EnvState | None = None

    @property
    def state(self) -> EnvState:
        if self._state is None:
            raise RuntimeError("reset() has not been called")
        return self._state

    def reset(self) -> EnvState:
        cfg = self.config
        pos = cfg.goal + np.array([0.0, 0.0, cfg.reset_height])
        if cfg.actuator_noise_std > 0:
            pos = pos + self._rng.normal(0.0, cfg.actuator_noise_std, size=3)
        if cfg.sensor_bias_range > 0:
            self._bias = self._rng.uniform(-cfg.sensor_bias_range, cfg.sensor_bias_range)
        else:
            self._bias = 0.0
        # calibration: the raw reading at reset (contact-free) is taken as zero
        self._bias_estimate = self._bias
        self._state = EnvState(
            pos=pos,
            f_z=0.0,
            inserted=is_inserted(pos, cfg.profile, cfg.goal),
            step_index=0,
        )
        return self._state

    def step(self, action) -> tuple[EnvState, StepInfo]:
        cfg = self.config
        state = self.state
        if state.step_index >= cfg.horizon:
            raise EpisodeOver(f"episode ended at step {state.step_index}")
        delta = clamp_action(action)
        if cfg.actuator_noise_std > 0:
            delta = delta + self._rng.normal(0.0, cfg.actuator_noise_std, size=3)
        attempted = state.pos + delta
        new_pos, blocked = resolve_motion(state.pos, attempted, cfg.profile, cfg.goal)
        raw = cfg.profile.wall_stiffness * blocked + self._bias
        f_z = raw - self._bias_estimate
        step_index = state.step_index + 1
        self._state = EnvState(
            pos=new_pos,
            f_z=f_z,
            inserted=is_inserted(new_pos, cfg.profile, cfg.goal),
            step_index=step_index,
        )
        info = StepInfo(
            done=step_index >= cfg.horizon,
            realized_delta=new_pos - state.pos,
            blocked_down=blocked,
            raw_f_z=raw,
            contact=blocked > 0.0,
        )
        return self._state, info

    def observe(self, mode: ObservationMode = ObservationMode.STATE_VECTOR) -> np.ndarray:
        from .render import render  # local import: render depends on this module

        state = self.state
        if mode == ObservationMode.STATE_VECTOR:
            rel = state.pos - self.config.goal_estimate
            return np.array([rel[0], rel[1], rel[2], state.f_z])
        if mode == ObservationMode.IMAGE:
            return render(state, self.config)
        raise ValueError(f"unknown observation mode: {mode}")
