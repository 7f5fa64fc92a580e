"""Gradient training for the feed-forward kernel: backprop, Adam/SGD loop.

Everything is plain float64 numpy. Training is single-threaded and fully
determined by (init seed, shuffle seed, data), so identical configs yield
bit-identical parameter vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import Dataset
from .errors import ConfigurationError, TrainingDivergenceError
from .network import Network, NetworkSpec, ParamVector, forward, softmax, unflatten

OPTIMIZERS = ("adam", "sgd")


@dataclass
class TrainConfig:
    optimizer: str = "adam"
    learning_rate: float = 0.001
    epochs: int = 10
    batch_size: int = 16
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    shuffle_seed: int = 0

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ConfigurationError(f"unknown optimizer {self.optimizer!r}")
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be positive")
        if self.epochs < 1:
            raise ConfigurationError("epochs must be a positive integer")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be a positive integer")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ConfigurationError("adam betas must lie in (0, 1)")
        if self.adam_eps <= 0:
            raise ConfigurationError("adam_eps must be positive")


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean cross-entropy from raw logits via a stable log-softmax."""
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    return float((log_norm - z[np.arange(len(labels)), labels]).mean())


def loss_and_grad(
    spec: NetworkSpec, values: np.ndarray, inputs: np.ndarray, labels: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and its gradient w.r.t. the flat parameter vector.

    Standard backprop: forward pass caching activations, then the softmax
    cross-entropy delta is pushed back through each layer.
    """
    layers = unflatten(spec, values)
    n = inputs.shape[0]

    acts = [np.asarray(inputs, dtype=np.float64)]
    pre = []
    a = acts[0]
    for i, (w, b) in enumerate(layers):
        z = a @ w + b
        pre.append(z)
        if i < len(layers) - 1:
            a = np.tanh(z) if spec.hidden_activation == "tanh" else np.maximum(z, 0.0)
        else:
            a = z
        acts.append(a)

    logits = acts[-1]
    loss = cross_entropy(logits, labels)

    probs = softmax(logits)
    delta = probs
    delta[np.arange(n), labels] -= 1.0
    delta /= n

    grads: list[np.ndarray | None] = [None] * len(layers)
    for i in range(len(layers) - 1, -1, -1):
        w, _ = layers[i]
        gw = acts[i].T @ delta
        gb = delta.sum(axis=0)
        grads[i] = np.concatenate([gw.ravel(), gb])
        if i > 0:
            delta = delta @ w.T
            if spec.hidden_activation == "tanh":
                delta = delta * (1.0 - np.tanh(pre[i - 1]) ** 2)
            else:
                delta = delta * (pre[i - 1] > 0)
    return loss, np.concatenate(grads)


def train_model(
    net: Network,
    data: Dataset,
    cfg: TrainConfig,
    history: list[dict] | None = None,
) -> Network:
    """Train a copy of `net` on `data`; the input network is left untouched.

    Appends one {"epoch", "loss", "accuracy"} record per epoch to `history`
    when given. Raises TrainingDivergenceError on the first non-finite
    batch loss.
    """
    if data.labels.max() >= net.spec.output_dim:
        raise ConfigurationError(
            f"labels reach {int(data.labels.max())} but network has "
            f"{net.spec.output_dim} outputs"
        )

    theta = net.params.values.copy()
    shuffle_rng = np.random.default_rng(cfg.shuffle_seed)
    n = data.inputs.shape[0]

    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    step = 0

    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        for batch_idx, start in enumerate(range(0, n, cfg.batch_size)):
            sel = order[start : start + cfg.batch_size]
            loss, grad = loss_and_grad(net.spec, theta, data.inputs[sel], data.labels[sel])
            if not np.isfinite(loss):
                raise TrainingDivergenceError(epoch, batch_idx)
            epoch_loss += loss * len(sel)
            step += 1
            if cfg.optimizer == "adam":
                m = cfg.adam_beta1 * m + (1 - cfg.adam_beta1) * grad
                v = cfg.adam_beta2 * v + (1 - cfg.adam_beta2) * grad**2
                m_hat = m / (1 - cfg.adam_beta1**step)
                v_hat = v / (1 - cfg.adam_beta2**step)
                theta = theta - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
            else:
                theta = theta - cfg.learning_rate * grad

        if history is not None:
            trained = Network(net.spec, ParamVector(theta))
            probs = softmax(forward(trained, data.inputs))
            acc = float((probs.argmax(axis=1) == data.labels).mean())
            history.append({"epoch": epoch, "loss": epoch_loss / n, "accuracy": acc})

    return Network(net.spec, ParamVector(theta))
