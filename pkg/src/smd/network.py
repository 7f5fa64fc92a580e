"""Minimal feed-forward network kernel operating on a flat parameter genome.

Parameters live in a single 1-D float64 vector with a canonical layout:
for each layer in order, the weight matrix of shape (fan_in, fan_out)
flattened row-major, followed by the bias vector of length fan_out. All
mutation and averaging algebra elsewhere in the package relies on this
layout being stable across runs and checkpoints.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ShapeError

ACTIVATIONS = ("relu", "tanh")

# Probability floor applied before any log.
EPS_PROB = 1e-12


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture description: layer sizes, hidden activation, init seed."""

    layer_sizes: tuple[int, ...]
    hidden_activation: str = "relu"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))
        if len(self.layer_sizes) < 2:
            raise ConfigurationError("layer_sizes needs at least input and output dims")
        if any(s < 1 for s in self.layer_sizes):
            raise ConfigurationError(f"layer sizes must be >= 1, got {self.layer_sizes}")
        if self.hidden_activation not in ACTIVATIONS:
            raise ConfigurationError(
                f"unknown hidden_activation {self.hidden_activation!r}, expected one of {ACTIVATIONS}"
            )
        if self.seed < 0:
            raise ConfigurationError("seed must be a nonnegative integer")

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_dim(self) -> int:
        return self.layer_sizes[-1]

    def layer_shapes(self) -> list[tuple[int, int]]:
        """(fan_in, fan_out) per layer in forward order."""
        return list(zip(self.layer_sizes[:-1], self.layer_sizes[1:]))

    def param_count(self) -> int:
        return sum(i * o + o for i, o in self.layer_shapes())


@dataclass
class ParamVector:
    """Flat genome of all trainable parameters in canonical order."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(self.values)):
            raise ConfigurationError("parameter vector contains non-finite entries")

    @property
    def w(self) -> int:
        return self.values.shape[0]

    def __len__(self) -> int:
        return self.w

    def copy(self) -> "ParamVector":
        return ParamVector(self.values.copy())


@dataclass
class Network:
    spec: NetworkSpec
    params: ParamVector = field(repr=False)

    def __post_init__(self):
        expected = self.spec.param_count()
        if self.params.w != expected:
            raise ShapeError(
                f"parameter vector has {self.params.w} entries, spec needs {expected}"
            )


def init_network(spec: NetworkSpec) -> Network:
    """He-initialized network: W ~ N(0, 2/fan_in), biases zero.

    Deterministic under spec.seed.
    """
    rng = np.random.default_rng(spec.seed)
    chunks = []
    for fan_in, fan_out in spec.layer_shapes():
        w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
        chunks.append(w.ravel())
        chunks.append(np.zeros(fan_out))
    return Network(spec, ParamVector(np.concatenate(chunks)))


def unflatten(spec: NetworkSpec, values: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Materialize (W, b) views per layer from a flat vector.

    Returned arrays are views; callers must not write through them.
    """
    values = np.asarray(values)
    if values.shape != (spec.param_count(),):
        raise ShapeError(
            f"expected flat vector of length {spec.param_count()}, got shape {values.shape}"
        )
    layers = []
    pos = 0
    for fan_in, fan_out in spec.layer_shapes():
        w = values[pos : pos + fan_in * fan_out].reshape(fan_in, fan_out)
        pos += fan_in * fan_out
        b = values[pos : pos + fan_out]
        pos += fan_out
        layers.append((w, b))
    return layers


def flatten(layers: list[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    chunks = []
    for w, b in layers:
        chunks.append(np.asarray(w, dtype=np.float64).ravel())
        chunks.append(np.asarray(b, dtype=np.float64).ravel())
    return np.concatenate(chunks)


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def forward(net: Network, inputs: np.ndarray) -> np.ndarray:
    """Logits for a batch of inputs, shape (n, output_dim)."""
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.spec.input_dim:
        raise ShapeError(
            f"inputs must be (n, {net.spec.input_dim}), got {x.shape}"
        )
    layers = unflatten(net.spec, net.params.values)
    a = x
    for i, (w, b) in enumerate(layers):
        z = a @ w + b
        a = _activate(z, net.spec.hidden_activation) if i < len(layers) - 1 else z
    return a


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, stabilized by max subtraction."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def nll_loss(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean negative log likelihood of the true labels.

    Probabilities are clamped to [EPS_PROB, 1] before the log, so the
    result is finite and nonnegative even for zero-probability labels.
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if probs.ndim != 2 or labels.shape != (probs.shape[0],):
        raise ShapeError(f"incompatible shapes {probs.shape} and {labels.shape}")
    p = np.clip(probs[np.arange(len(labels)), labels], EPS_PROB, 1.0)
    return float(-np.log(p).mean())
