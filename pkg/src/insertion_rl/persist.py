"""Run-directory persistence: metrics CSV, demo files, checkpoints and
a hash manifest.

A run directory is self-describing: `config.json` holds the experiment
configuration, `checkpoints/` the network parameter files, `agent.json`
scalar agent state, `metrics.csv` the training log, and `manifest.json`
a sha256 inventory of all of the above. Floats are written with `repr`,
so identical runs produce byte-identical files.
"""
from __future__ import annotations

import csv
import hashlib
import json
import os
import warnings
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .nets import Network, load_network, save_network
from .replay import Transition

MANIFEST_FORMAT = 1

METRICS_COLUMNS = (
    "step",
    "episode",
    "return",
    "final_distance_m",
    "critic_loss",
    "actor_loss",
    "temperature",
)
MANIFEST_NAME = "manifest.json"


class CorruptRunError(RuntimeError):
    """A run directory failed its manifest check."""


class MetricsWriter:
    """Append-only CSV log; each row is one O_APPEND write, so partial
    rows cannot appear even if several processes share the file."""

    def __init__(self, path):
        self.path = Path(path)
        self._fd = os.open(self.path, os.O_WRONLY | os.O_CREAT | os.O_APPEND, 0o644)
        if os.fstat(self._fd).st_size == 0:
            os.write(self._fd, (",".join(METRICS_COLUMNS) + "\n").encode("ascii"))

    def write_row(
        self, step, episode, ret, final_distance_m, critic_loss, actor_loss, temperature
    ) -> None:
        floats = (ret, final_distance_m, critic_loss, actor_loss, temperature)
        fields = [str(int(step)), str(int(episode))]
        fields += [repr(float(v)) for v in floats]
        os.write(self._fd, (",".join(fields) + "\n").encode("ascii"))

    def close(self) -> None:
        if self._fd >= 0:
            os.close(self._fd)
            self._fd = -1

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_metrics(path) -> dict[str, np.ndarray]:
    """Load a metrics CSV into column arrays (ints for step/episode)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != METRICS_COLUMNS:
            raise ValueError(f"{path}: unexpected metrics header {header}")
        rows = [[float(v) for v in row] for row in reader]
    cols = np.array(rows, dtype=np.float64).reshape(len(rows), len(METRICS_COLUMNS))
    out: dict[str, np.ndarray] = {}
    for j, name in enumerate(METRICS_COLUMNS):
        col = cols[:, j]
        out[name] = col.astype(np.int64) if name in ("step", "episode") else col
    return out


def save_demos(path, transitions: list[Transition]) -> None:
    """JSON-lines demo file, one transition per line."""
    with open(path, "w") as fh:
        for tr in transitions:
            fh.write(
                json.dumps(
                    {
                        "obs": [float(v) for v in tr.obs],
                        "action": [float(v) for v in tr.action],
                        "reward": float(tr.reward),
                        "next_obs": [float(v) for v in tr.next_obs],
                        "done": bool(tr.done),
                    }
                )
                + "\n"
            )


def load_demos(path) -> list[Transition]:
    out = []
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            out.append(
                Transition(d["obs"], d["action"], d["reward"], d["next_obs"], d["done"])
            )
    return out


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(run_dir) -> dict[str, str]:
    """Hash every file under run_dir (except the manifest) and store the
    inventory as manifest.json, alongside a config snapshot and stamps."""
    from . import __version__

    run_dir = Path(run_dir)
    files = {}
    for p in sorted(run_dir.rglob("*")):
        if p.is_file() and p.name != MANIFEST_NAME:
            files[str(p.relative_to(run_dir))] = _sha256(p)
    config = None
    cfg_path = run_dir / "config.json"
    if cfg_path.is_file():
        config = json.loads(cfg_path.read_text())
    payload = {
        "format": MANIFEST_FORMAT,
        "code_version": __version__,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config": config,
        "files": files,
    }
    (run_dir / MANIFEST_NAME).write_text(json.dumps(payload, indent=2))
    return files


def verify_manifest(run_dir) -> None:
    run_dir = Path(run_dir)
    mpath = run_dir / MANIFEST_NAME
    if not mpath.is_file():
        raise CorruptRunError(f"{run_dir}: missing {MANIFEST_NAME}")
    files = json.loads(mpath.read_text())["files"]
    for rel, digest in files.items():
        p = run_dir / rel
        if not p.is_file():
            raise CorruptRunError(f"{run_dir}: missing file {rel}")
        if _sha256(p) != digest:
            raise CorruptRunError(f"{run_dir}: hash mismatch for {rel}")


@dataclass
class RunData:
    config: dict
    networks: dict[str, Network]
    steps: dict[str, int]
    extra: dict


def save_run(
    run_dir,
    config: dict,
    networks: dict[str, Network] | None = None,
    extra: dict | None = None,
    step: int = 0,
) -> None:
    """Write config, checkpoints and agent state, then seal the manifest."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.json").write_text(json.dumps(config, indent=2))
    if networks:
        ckpt_dir = run_dir / "checkpoints"
        ckpt_dir.mkdir(exist_ok=True)
        for name, net in networks.items():
            save_network(ckpt_dir / f"{name}.ckpt", net, step=step)
    if extra is not None:
        (run_dir / "agent.json").write_text(json.dumps(extra, indent=2))
    write_manifest(run_dir)


def load_run(run_dir, expected_config: dict | None = None) -> RunData:
    """Verify and load a run directory.

    Hash mismatches raise CorruptRunError; a config that differs from
    `expected_config` only warns, since reading old runs under newer
    defaults is legitimate.
    """
    run_dir = Path(run_dir)
    verify_manifest(run_dir)
    config = json.loads((run_dir / "config.json").read_text())
    if expected_config is not None and config != expected_config:
        warnings.warn(f"{run_dir}: stored config differs from the expected one")
    networks: dict[str, Network] = {}
    steps: dict[str, int] = {}
    ckpt_dir = run_dir / "checkpoints"
    if ckpt_dir.is_dir():
        for p in sorted(ckpt_dir.glob("*.ckpt")):
            net, step = load_network(p)
            networks[p.stem] = net
            steps[p.stem] = step
    extra = {}
    agent_path = run_dir / "agent.json"
    if agent_path.is_file():
        extra = json.loads(agent_path.read_text())
    return RunData(config=config, networks=networks, steps=steps, extra=extra)
