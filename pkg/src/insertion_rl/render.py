"""Orthographic side-view rasterizer for image observations.

The camera looks along +y, so the y coordinate is dropped; lateral
misalignment in y is invisible in this view, which is a deliberate
nullspace of the image observation. The view window is a square of
`WINDOW` metres centred on the socket mouth (true goal x, surface
height). Rectangles are drawn with analytic area coverage, so sub-pixel
motion changes intensities smoothly; values live in [0, 1].
"""
from __future__ import annotations

import numpy as np

from .env import A_MAX, EnvConfig, EnvState

IMAGE_SIZE = 32
WINDOW = 6e-2

BG_SHADE = 0.0
SOCKET_SHADE = 0.4
PLUG_SHADE = 0.9

# nominal plug body drawn with its lower edge at the tip position
PLUG_HALF_WIDTH = 3e-3
PLUG_HEIGHT = 10e-3


class GoalCaptureFailed(RuntimeError):
    """The scripted goal-capture rollout did not end inserted."""


def _interval_coverage(lo: float, hi: float, edges: np.ndarray) -> np.ndarray:
    """Fraction of each cell [edges[i], edges[i+1]] covered by [lo, hi]."""
    left = np.maximum(edges[:-1], lo)
    right = np.minimum(edges[1:], hi)
    return np.clip(right - left, 0.0, None) / (edges[1:] - edges[:-1])


def _rect_coverage(
    x0: float, x1: float, z0: float, z1: float,
    x_edges: np.ndarray, z_edges: np.ndarray,
) -> np.ndarray:
    """Per-pixel coverage of a world-space rectangle, rows top to bottom."""
    cov_x = _interval_coverage(x0, x1, x_edges)
    cov_z = _interval_coverage(z0, z1, z_edges)[::-1]  # row 0 is the top
    return np.outer(cov_z, cov_x)


def render_frame(state: EnvState, config: EnvConfig) -> np.ndarray:
    """Rasterize one state into a (IMAGE_SIZE, IMAGE_SIZE) float64 frame."""
    prof = config.profile
    cx = config.goal[0]
    cz = prof.surface_height
    half = WINDOW / 2.0
    x_edges = np.linspace(cx - half, cx + half, IMAGE_SIZE + 1)
    z_edges = np.linspace(cz - half, cz + half, IMAGE_SIZE + 1)

    block = _rect_coverage(cx - half, cx + half, cz - half, cz, x_edges, z_edges)
    channel = _rect_coverage(
        cx - prof.clearance, cx + prof.clearance, prof.bottom_z, cz, x_edges, z_edges
    )
    socket = np.clip(block - channel, 0.0, 1.0)
    frame = SOCKET_SHADE * socket + BG_SHADE * (1.0 - socket)

    px, pz = state.pos[0], state.pos[2]
    plug = _rect_coverage(
        px - PLUG_HALF_WIDTH, px + PLUG_HALF_WIDTH, pz, pz + PLUG_HEIGHT,
        x_edges, z_edges,
    )
    frame = PLUG_SHADE * plug + (1.0 - plug) * frame
    return frame


def render(state: EnvState, config: EnvConfig) -> np.ndarray:
    """Flat image observation vector of length IMAGE_SIZE ** 2."""
    return render_frame(state, config).reshape(-1)


def capture_goal_image(config: EnvConfig) -> np.ndarray:
    """Flat frame of the plug seated in the socket, recorded in the plant.

    Runs a scripted P-controller insertion toward the goal estimate and
    returns the final frame. Capturing through the plant rather than
    compositing a synthetic pose means the goal image is only available
    when the estimate is actually good enough to insert; a bad estimate
    raises GoalCaptureFailed instead of silently producing an image the
    reward would chase into the face plate. Deterministic per config, so
    a re-capture is bit-identical.
    """
    from .control import K_P_DEFAULT, p_control
    from .env import EpisodeOver, InsertionEnv

    env = InsertionEnv(config)
    state = env.reset()
    try:
        while True:
            act = p_control(state.pos, config.goal_estimate, K_P_DEFAULT, A_MAX)
            state, info = env.step(act)
            if info.done:
                break
    except EpisodeOver:
        pass
    if not state.inserted:
        raise GoalCaptureFailed(
            f"goal-capture rollout on {config.profile.name} ended at "
            f"{np.round(state.pos, 4).tolist()} without inserting"
        )
    return render(state, config)


def write_pgm(frame: np.ndarray, path) -> None:
    """Export a frame (flat or square, values in [0, 1]) as binary PGM."""
    img = np.asarray(frame, dtype=np.float64).reshape(IMAGE_SIZE, IMAGE_SIZE)
    levels = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    header = f"P5\n{IMAGE_SIZE} {IMAGE_SIZE}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header + levels.tobytes())
