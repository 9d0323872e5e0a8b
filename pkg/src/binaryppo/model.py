"""Two-action policy network, scalar value network and frozen snapshots.

Both networks are dense tanh MLPs (linear output layer). The policy head emits
two logits; probabilities are the softmax pair mixed with the uniform
distribution so that each action keeps at least ``p_min`` mass::

    p_a = p_min + (1 - 2 * p_min) * softmax(logits)_a

which keeps the pair normalized, floors both entries at ``p_min`` and stays
differentiable everywhere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ContractViolation, DataError, ShapeError
from .linalg import Rng

DEFAULT_P_MIN = 1e-6
EXPLORE = "explore"
EXPLOIT = "exploit"
CHECKPOINT_MAGIC = "binaryppo-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class Network:
    """Dense tanh network; ``weights[i]`` has shape ``(fan_in, fan_out)``."""

    weights: list
    biases: list
    version: int = 0

    @property
    def sizes(self) -> tuple:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    def params(self) -> list:
        """Parameter arrays in canonical order ``[W0, b0, W1, b1, ...]``."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params())

    def copy(self) -> "Network":
        return Network([w.copy() for w in self.weights], [b.copy() for b in self.biases], self.version)

    def touch(self):
        """Mark parameters as modified; invalidates outstanding forward caches."""
        self.version += 1

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params()])

    def set_flat(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        if theta.size != self.n_params:
            raise ShapeError(f"expected {self.n_params} parameters, got {theta.size}")
        pos = 0
        for p in self.params():
            p[...] = theta[pos:pos + p.size].reshape(p.shape)
            pos += p.size
        self.touch()


def init_network(sizes, rng: Rng) -> Network:
    """Scaled-uniform (Glorot) weights, zero biases."""
    sizes = [int(s) for s in sizes]
    if len(sizes) < 2 or min(sizes) < 1:
        raise ValueError(f"invalid layer sizes {sizes}")
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        u = rng.uniforms(fan_in * fan_out).reshape(fan_in, fan_out)
        weights.append((2.0 * u - 1.0) * limit)
        biases.append(np.zeros(fan_out))
    return Network(weights, biases)


def mlp_forward(weights, biases, x):
    """Activations ``[x, h1, ..., logits]``; tanh hidden layers, linear output."""
    acts = [x]
    h = x
    last = len(weights) - 1
    for i, (w, b) in enumerate(zip(weights, biases)):
        z = h @ w + b
        h = z if i == last else np.tanh(z)
        acts.append(h)
    return acts


def mlp_backward(weights, acts, dout):
    """Weight and bias gradients for upstream gradient ``dout`` on the output."""
    n_layers = len(weights)
    dws = [None] * n_layers
    dbs = [None] * n_layers
    dz = dout
    for i in range(n_layers - 1, -1, -1):
        h_prev = acts[i]
        dws[i] = h_prev.T @ dz
        dbs[i] = dz.sum(axis=0)
        if i > 0:
            dz = (dz @ weights[i].T) * (1.0 - h_prev * h_prev)
    return dws, dbs


def _as_batch(x, dim) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != dim:
        raise ShapeError(f"expected inputs of dimension {dim}, got shape {x.shape}")
    return np.ascontiguousarray(x)


@dataclass
class ForwardCache:
    network: Network
    version: int
    acts: list
    extra: dict = field(default_factory=dict)

    def check(self, network):
        if network is not self.network or network.version != self.version:
            raise ContractViolation(
                "stale forward cache: parameters changed since the forward pass "
                f"(cache version {self.version}, current {network.version})"
            )


def action_probs(logits, p_min):
    """Floored two-action probabilities from an ``(n, 2)`` logit array.

    Returns ``(p0, p1, s0, s1)`` where ``s`` is the unfloored softmax pair.
    """
    d = logits[:, 1] - logits[:, 0]
    e = np.exp(-np.abs(d))
    hi = 1.0 / (1.0 + e)
    lo = e / (1.0 + e)
    s1 = np.where(d >= 0, hi, lo)
    s0 = np.where(d >= 0, lo, hi)
    k = 1.0 - 2.0 * p_min
    return p_min + k * s0, p_min + k * s1, s0, s1


class Policy:
    """Live policy pi_theta(a|x) over actions {0, 1}."""

    def __init__(self, network: Network, p_min: float = DEFAULT_P_MIN):
        if network.sizes[-1] != 2:
            raise ShapeError("policy network must emit 2 logits")
        if not 0.0 <= p_min < 0.5:
            raise ValueError("p_min must lie in [0, 0.5)")
        self.network = network
        self.p_min = float(p_min)

    @classmethod
    def create(cls, input_dim, hidden, rng, p_min=DEFAULT_P_MIN):
        return cls(init_network([input_dim, *hidden, 2], rng), p_min)

    def forward(self, x):
        net = self.network
        x = _as_batch(x, net.input_dim)
        acts = mlp_forward(net.weights, net.biases, x)
        p0, p1, s0, s1 = action_probs(acts[-1], self.p_min)
        cache = ForwardCache(net, net.version, acts, {"s0": s0, "s1": s1})
        return p0, p1, cache

    def probs(self, x):
        p0, p1, _ = self.forward(x)
        return p0, p1

    def logit_grad(self, cache, g0, g1):
        """Chain ``dL/dp0``, ``dL/dp1`` (per sample) to ``dL/dlogits``."""
        s0, s1 = cache.extra["s0"], cache.extra["s1"]
        dd = (np.asarray(g1) - np.asarray(g0)) * (1.0 - 2.0 * self.p_min) * s0 * s1
        return np.stack([-dd, dd], axis=1)

    def backward(self, cache, dlogits):
        """Parameter gradients ``[dW0, db0, ...]`` for upstream ``dL/dlogits``."""
        cache.check(self.network)
        dws, dbs = mlp_backward(self.network.weights, cache.acts, np.asarray(dlogits, dtype=np.float64))
        return _interleave(dws, dbs)

    def snapshot(self) -> "FrozenPolicy":
        return snapshot(self)


class ValueFunction:
    """Scalar baseline V_phi(x)."""

    def __init__(self, network: Network):
        if network.sizes[-1] != 1:
            raise ShapeError("value network must emit 1 output")
        self.network = network

    @classmethod
    def create(cls, input_dim, hidden, rng):
        return cls(init_network([input_dim, *hidden, 1], rng))

    def forward(self, x):
        net = self.network
        x = _as_batch(x, net.input_dim)
        acts = mlp_forward(net.weights, net.biases, x)
        return acts[-1][:, 0].copy(), ForwardCache(net, net.version, acts)

    def backward(self, cache, dv):
        cache.check(self.network)
        dout = np.asarray(dv, dtype=np.float64).reshape(-1, 1)
        dws, dbs = mlp_backward(self.network.weights, cache.acts, dout)
        return _interleave(dws, dbs)


def _interleave(dws, dbs):
    out = []
    for dw, db in zip(dws, dbs):
        out.extend((dw, db))
    return out


class FrozenPolicy:
    """Read-only copy of a policy taken at a refresh point."""

    def __init__(self, network: Network, p_min: float):
        net = network.copy()
        for p in net.params():
            p.setflags(write=False)
        self._policy = Policy(net, p_min)

    @property
    def p_min(self):
        return self._policy.p_min

    @property
    def network(self):
        return self._policy.network

    def probs(self, x):
        return self._policy.probs(x)

    def snapshot(self) -> "FrozenPolicy":
        return FrozenPolicy(self.network, self.p_min)


def snapshot(policy) -> FrozenPolicy:
    """Value copy of ``policy`` (a :class:`Policy` or :class:`FrozenPolicy`)."""
    return FrozenPolicy(policy.network, policy.p_min)


def sample_actions(p1, mode, rng: Rng) -> np.ndarray:
    """Vectorized action choice: Bernoulli(p1) when exploring, argmax when exploiting.

    Greedy ties (p1 == 0.5 exactly) go to action 0.
    """
    p1 = np.atleast_1d(np.asarray(p1, dtype=np.float64))
    if mode == EXPLORE:
        return (rng.uniforms(p1.shape[0]) < p1).astype(np.int64)
    if mode == EXPLOIT:
        return (p1 > 0.5).astype(np.int64)
    raise ValueError(f"unknown sampling mode {mode!r}")


def sample_action(p1: float, mode, rng: Rng) -> int:
    return int(sample_actions([p1], mode, rng)[0])


# -- checkpoints -------------------------------------------------------------
#
# Text format, one token group per line:
#
#   binaryppo-checkpoint 1
#   kind <policy|value>
#   p_min <float>                  (policy only)
#   layers <L>
#   weight <i> <rows> <cols>       followed by <rows> lines of <cols> floats
#   bias <i> <n>                   followed by one line of <n> floats
#
# Floats are written with repr(), which round-trips float64 exactly.


def save_checkpoint(path, model):
    net = model.network
    kind = "policy" if isinstance(model, (Policy, FrozenPolicy)) else "value"
    lines = [f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}", f"kind {kind}"]
    if kind == "policy":
        lines.append(f"p_min {model.p_min!r}")
    lines.append(f"layers {len(net.weights)}")
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        lines.append(f"weight {i} {w.shape[0]} {w.shape[1]}")
        lines.extend(" ".join(repr(v) for v in row) for row in w.tolist())
        lines.append(f"bias {i} {b.shape[0]}")
        lines.append(" ".join(repr(v) for v in b.tolist()))
    Path(path).write_text("\n".join(lines) + "\n")


def load_checkpoint(path):
    """Load a :class:`Policy` or :class:`ValueFunction` saved by :func:`save_checkpoint`."""
    lines = Path(path).read_text().splitlines()
    pos = 0

    def take(expected):
        nonlocal pos
        if pos >= len(lines):
            raise DataError(f"{path}: truncated checkpoint, expected {expected!r}")
        parts = lines[pos].split()
        pos += 1
        if not parts or parts[0] != expected:
            raise DataError(f"{path}:{pos}: expected {expected!r}, got {lines[pos - 1]!r}")
        return parts[1:]

    def floats(count):
        nonlocal pos
        if pos >= len(lines):
            raise DataError(f"{path}: truncated checkpoint")
        try:
            vals = [float(t) for t in lines[pos].split()]
        except ValueError:
            raise DataError(f"{path}:{pos + 1}: malformed number") from None
        pos += 1
        if len(vals) != count:
            raise DataError(f"{path}:{pos}: expected {count} values, got {len(vals)}")
        return vals

    version = take(CHECKPOINT_MAGIC)
    if version != [str(CHECKPOINT_VERSION)]:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    try:
        (kind,) = take("kind")
        p_min = float(take("p_min")[0]) if kind == "policy" else None
        return _read_layers(take, floats, kind, p_min, path)
    except (ValueError, IndexError) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"{path}: malformed checkpoint header ({exc})") from None


def _read_layers(take, floats, kind, p_min, path):
    n_layers = int(take("layers")[0])
    weights, biases = [], []
    for i in range(n_layers):
        _, rows, cols = (int(t) for t in take("weight"))
        weights.append(np.array([floats(cols) for _ in range(rows)], dtype=np.float64).reshape(rows, cols))
        _, n = (int(t) for t in take("bias"))
        biases.append(np.array(floats(n), dtype=np.float64))
    net = Network(weights, biases)
    if kind == "policy":
        return Policy(net, p_min)
    if kind == "value":
        return ValueFunction(net)
    raise DataError(f"{path}: unknown checkpoint kind {kind!r}")
