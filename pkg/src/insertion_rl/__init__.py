"""Desk-scale connector-insertion simulator and RL toolkit."""

from .env import (
    A_MAX,
    DSUB_LIKE,
    MODEL_E_LIKE,
    PROFILES,
    SEAT_MARGIN,
    USB_LIKE,
    ConnectorProfile,
    EnvConfig,
    EnvState,
    InsertionEnv,
    ObservationMode,
    clamp_action,
    default_config,
    seated_goal,
)

__version__ = "0.1.0"

__all__ = [
    "A_MAX",
    "SEAT_MARGIN",
    "ConnectorProfile",
    "EnvConfig",
    "EnvState",
    "InsertionEnv",
    "ObservationMode",
    "PROFILES",
    "USB_LIKE",
    "DSUB_LIKE",
    "MODEL_E_LIKE",
    "clamp_action",
    "default_config",
    "seated_goal",
    "__version__",
]
