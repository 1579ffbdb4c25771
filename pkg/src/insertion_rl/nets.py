"""Multilayer perceptrons over flat float64 parameter vectors, plus Adam.

Three head types cover every network in the toolkit: `linear` (critics),
`tanh_action` (deterministic actors, squashed and scaled to the action
bound), and `gaussian` (stochastic actors; the output concatenates the
mean and the clamped log-std, each `out_dim` wide).
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import NonFiniteError, TapeConsumedError, Var

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
CHECKPOINT_MAGIC = b"NNCKPT1\n"


@dataclass(frozen=True)
class PolicySpec:
    """Architecture description: layer sizes plus head/activation tags."""

    in_dim: int
    hidden: tuple[int, ...]
    out_dim: int
    head: str = "linear"  # linear | tanh_action | gaussian
    act_scale: float = 1.0

    def __post_init__(self):
        if self.head not in ("linear", "tanh_action", "gaussian"):
            raise ValueError(f"unknown head: {self.head}")
        if self.in_dim < 1 or self.out_dim < 1 or any(h < 1 for h in self.hidden):
            raise ValueError("layer sizes must be positive")

    @property
    def final_width(self) -> int:
        return 2 * self.out_dim if self.head == "gaussian" else self.out_dim

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        widths = [self.in_dim, *self.hidden, self.final_width]
        return list(zip(widths[:-1], widths[1:]))

    @property
    def param_count(self) -> int:
        return sum(i * o + o for i, o in self.layer_dims)

    def to_json(self) -> dict:
        return {
            "in_dim": self.in_dim,
            "hidden": list(self.hidden),
            "out_dim": self.out_dim,
            "head": self.head,
            "act_scale": self.act_scale,
        }

    @staticmethod
    def from_json(d: dict) -> "PolicySpec":
        return PolicySpec(
            d["in_dim"], tuple(d["hidden"]), d["out_dim"], d["head"], d["act_scale"]
        )


def init_params(spec: PolicySpec, rng: np.random.Generator) -> np.ndarray:
    """Fan-in uniform init; the output layer is scaled down so fresh actors
    start close to the zero map."""
    chunks = []
    last = len(spec.layer_dims) - 1
    for k, (din, dout) in enumerate(spec.layer_dims):
        bound = 1.0 / np.sqrt(din)
        if k == last:
            bound *= 0.01
        chunks.append(rng.uniform(-bound, bound, size=din * dout))
        chunks.append(np.zeros(dout))
    return np.concatenate(chunks)


def _layer_views(spec: PolicySpec, values: np.ndarray):
    off = 0
    for din, dout in spec.layer_dims:
        w = values[off : off + din * dout].reshape(din, dout)
        off += din * dout
        b = values[off : off + dout]
        off += dout
        yield w, b


class Network:
    """An MLP bound to one flat parameter vector (shared, not copied)."""

    def __init__(self, spec: PolicySpec, values: np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (spec.param_count,):
            raise ValueError(
                f"expected {spec.param_count} parameters, got {values.shape}"
            )
        self.spec = spec
        self.values = values

    @classmethod
    def create(cls, spec: PolicySpec, rng: np.random.Generator) -> "Network":
        return cls(spec, init_params(spec, rng))

    def clone(self) -> "Network":
        return Network(self.spec, self.values.copy())

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Graph-free forward pass. Accepts (in_dim,) or (B, in_dim)."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        h = x[None, :] if single else x
        if h.shape[1] != self.spec.in_dim:
            raise ValueError(f"input width {h.shape[1]} != {self.spec.in_dim}")
        layers = list(_layer_views(self.spec, self.values))
        for w, b in layers[:-1]:
            h = np.tanh(h @ w + b)
        w, b = layers[-1]
        out = h @ w + b
        out = self._apply_head(out)
        return out[0] if single else out

    def _apply_head(self, out: np.ndarray) -> np.ndarray:
        if self.spec.head == "tanh_action":
            return self.spec.act_scale * np.tanh(out)
        if self.spec.head == "gaussian":
            a = self.spec.out_dim
            out = out.copy()
            out[..., a:] = np.clip(out[..., a:], LOG_STD_MIN, LOG_STD_MAX)
        return out

    def forward_graph(self, x, trainable: bool = True) -> tuple[Var, list[Var]]:
        """Forward pass recording the graph.

        Returns the head output node and the parameter leaves in layout
        order. With trainable=False the leaves take no gradient but the
        graph still propagates to the input (used when differentiating a
        critic with respect to its action input only).
        """
        xv = x if isinstance(x, Var) else Var(np.atleast_2d(np.asarray(x, dtype=np.float64)))
        if xv.data.shape[1] != self.spec.in_dim:
            raise ValueError(f"input width {xv.data.shape[1]} != {self.spec.in_dim}")
        leaves = []
        h = xv
        n_layers = len(self.spec.layer_dims)
        for k, (w, b) in enumerate(_layer_views(self.spec, self.values)):
            wv = Var(w, requires_grad=trainable)
            bv = Var(b, requires_grad=trainable)
            leaves.extend((wv, bv))
            h = ad.add(ad.matmul(h, wv), bv)
            if k < n_layers - 1:
                h = ad.tanh(h)
        if self.spec.head == "tanh_action":
            h = ad.mul(ad.tanh(h), self.spec.act_scale)
        elif self.spec.head == "gaussian":
            a = self.spec.out_dim
            mu = ad.slice_cols(h, 0, a)
            ls = ad.clip(ad.slice_cols(h, a, 2 * a), LOG_STD_MIN, LOG_STD_MAX)
            h = ad.concat_cols(mu, ls)
        return h, leaves

    def gaussian_heads(self, x) -> tuple[np.ndarray, np.ndarray]:
        if self.spec.head != "gaussian":
            raise ValueError("not a gaussian network")
        out = self.forward(x)
        a = self.spec.out_dim
        return out[..., :a], out[..., a:]


def zero_final_layer(net: Network) -> None:
    """Zero the output layer in place, making the network the zero map
    (up to head squashing); used to start residual actors at no-op."""
    *_, (w, b) = _layer_views(net.spec, net.values)
    w[:] = 0.0
    b[:] = 0.0


def gather_grads(spec: PolicySpec, leaves: list[Var]) -> np.ndarray:
    """Flatten leaf gradients back into the parameter layout."""
    flat = np.zeros(spec.param_count)
    off = 0
    for leaf in leaves:
        n = leaf.data.size
        if leaf.grad is not None:
            flat[off : off + n] = leaf.grad.ravel()
        off += n
    return flat


@dataclass
class Tape:
    """Recorded graph of one forward pass, consumable exactly once."""

    root: Var
    leaves: list[Var]
    spec: PolicySpec
    consumed: bool = False


def mlp_forward(net: Network, x: np.ndarray) -> tuple[np.ndarray, Tape]:
    root, leaves = net.forward_graph(x)
    out = root.data[0] if np.asarray(x).ndim == 1 else root.data
    return out.copy(), Tape(root, leaves, net.spec)


def backward(tape: Tape, output_grad: np.ndarray) -> np.ndarray:
    """Gradient of (output_grad . output) with respect to the flat parameters."""
    if tape.consumed:
        raise TapeConsumedError("tape was already differentiated")
    tape.consumed = True
    seed = np.asarray(output_grad, dtype=np.float64).reshape(tape.root.data.shape)
    ad.backprop(tape.root, seed)
    return gather_grads(tape.spec, tape.leaves)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def like(cls, values: np.ndarray) -> "AdamState":
        return cls(np.zeros_like(values), np.zeros_like(values))


def adam_step(
    values: np.ndarray,
    grad: np.ndarray,
    state: AdamState,
    lr: float,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> None:
    """Bias-corrected Adam update, in place on `values`."""
    if not np.all(np.isfinite(grad)):
        raise NonFiniteError("non-finite gradient")
    b1, b2 = betas
    state.t += 1
    state.m = b1 * state.m + (1.0 - b1) * grad
    state.v = b2 * state.v + (1.0 - b2) * grad * grad
    mhat = state.m / (1.0 - b1**state.t)
    vhat = state.v / (1.0 - b2**state.t)
    values -= lr * mhat / (np.sqrt(vhat) + eps)


def save_network(path, net: Network, step: int = 0) -> None:
    """JSON header + little-endian float64 blob of the flat parameters."""
    header = json.dumps({"spec": net.spec.to_json(), "step": step}).encode()
    blob = net.values.astype("<f8").tobytes()
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        f.write(blob)


def load_network(path) -> tuple[Network, int]:
    with open(path, "rb") as f:
        if f.read(len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        (hlen,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(hlen).decode())
        spec = PolicySpec.from_json(header["spec"])
        blob = f.read(spec.param_count * 8)
    values = np.frombuffer(blob, dtype="<f8").astype(np.float64)
    return Network(spec, values), header["step"]
