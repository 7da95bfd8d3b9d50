"""Small fully connected network with hand-written backpropagation.

Six layers total: the 3-wide input, four hidden layers (rectifier), and an
output head that is either a single logistic unit (classifier) or an identity
pair (regressor). Training is plain mini-batch gradient descent with
momentum, bit-deterministic for a given seed: weight init, shuffling and
batch order all come from one PCG64 generator.

Input (and, for the regressor, target) standardization lives inside the
network so a serialized file is self-contained; statistics must come from the
training split only.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError

DEFAULT_HIDDEN = (32, 32, 16, 8)


@dataclass(frozen=True)
class TrainConfig:
    """Knobs for one training run; defaults favor determinism over speed."""

    seed: int = 0
    epochs: int = 200
    learning_rate: float = 1e-3
    momentum: float = 0.9
    batch_size: int = 32
    hidden: tuple[int, ...] = DEFAULT_HIDDEN
    train_frac: float = 0.8  # chronological split, no shuffling across it
    decision_threshold: float = 0.5

    def to_dict(self) -> dict:
        return {
            "seed": self.seed, "epochs": self.epochs,
            "learning_rate": self.learning_rate, "momentum": self.momentum,
            "batch_size": self.batch_size, "hidden": list(self.hidden),
            "train_frac": self.train_frac,
            "decision_threshold": self.decision_threshold,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["hidden"] = tuple(d.get("hidden", DEFAULT_HIDDEN))
        return cls(**d)


def _relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    # saturation underflows to exactly 0/1 in float; keep strictly inside
    return np.clip(out, 1e-15, 1.0 - 1e-15)


class Mlp:
    """Feed-forward network; ``head`` is "sigmoid" or "identity"."""

    def __init__(self, layer_sizes: Sequence[int], head: str, seed: int = 0):
        if len(layer_sizes) < 2:
            raise ValidationError("need at least input and output layers")
        if head not in ("sigmoid", "identity"):
            raise ValidationError(f"unknown head {head!r}")
        self.layer_sizes = [int(s) for s in layer_sizes]
        self.head = head
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(self.layer_sizes, self.layer_sizes[1:]):
            scale = np.sqrt(2.0 / fan_in)
            self.weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))
        # identity scaling until fit() installs real statistics
        n_in, n_out = self.layer_sizes[0], self.layer_sizes[-1]
        self.x_mean = np.zeros(n_in)
        self.x_std = np.ones(n_in)
        self.y_mean = np.zeros(n_out)
        self.y_std = np.ones(n_out)

    # -- forward / backward -------------------------------------------------

    def _forward_scaled(self, xs: np.ndarray) -> list[np.ndarray]:
        """Activations per layer for already-standardized inputs."""
        acts = [xs]
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = acts[-1] @ w + b
            if i < last:
                acts.append(_relu(z))
            elif self.head == "sigmoid":
                acts.append(_sigmoid(z))
            else:
                acts.append(z)
        return acts

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Network output in natural units; accepts one row or a batch."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        xs = (x - self.x_mean) / self.x_std
        out = self._forward_scaled(xs)[-1]
        if self.head == "identity":
            out = out * self.y_std + self.y_mean
        return out

    def loss(self, x: np.ndarray, y: np.ndarray) -> float:
        """Mean loss in scaled space: cross-entropy or squared error."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.atleast_2d(np.asarray(y, dtype=float))
        xs = (x - self.x_mean) / self.x_std
        out = self._forward_scaled(xs)[-1]
        if self.head == "sigmoid":
            eps = 1e-12
            out = np.clip(out, eps, 1.0 - eps)
            return float(-np.mean(y * np.log(out) + (1 - y) * np.log(1 - out)))
        ys = (y - self.y_mean) / self.y_std
        return float(np.mean((out - ys) ** 2))

    def gradients(self, x: np.ndarray, y: np.ndarray
                  ) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Analytic gradients of the batch loss for every weight and bias."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.atleast_2d(np.asarray(y, dtype=float))
        xs = (x - self.x_mean) / self.x_std
        ys = y if self.head == "sigmoid" else (y - self.y_mean) / self.y_std
        return self._scaled_gradients(xs, ys)

    # -- training ------------------------------------------------------------

    def fit(self, x: np.ndarray, y: np.ndarray, config: TrainConfig) -> None:
        """Mini-batch gradient descent with momentum; deterministic per seed."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.atleast_2d(np.asarray(y, dtype=float))
        self.x_mean = x.mean(axis=0)
        self.x_std = x.std(axis=0)
        self.x_std[self.x_std == 0.0] = 1.0
        if self.head == "identity":
            self.y_mean = y.mean(axis=0)
            self.y_std = y.std(axis=0)
            self.y_std[self.y_std == 0.0] = 1.0
        xs = (x - self.x_mean) / self.x_std
        ys = y if self.head == "sigmoid" else (y - self.y_mean) / self.y_std

        rng = np.random.default_rng(config.seed)
        vel_w = [np.zeros_like(w) for w in self.weights]
        vel_b = [np.zeros_like(b) for b in self.biases]
        n = len(xs)
        for _ in range(config.epochs):
            order = rng.permutation(n)
            for lo in range(0, n, config.batch_size):
                idx = order[lo:lo + config.batch_size]
                gw, gb = self._scaled_gradients(xs[idx], ys[idx])
                for i in range(len(self.weights)):
                    vel_w[i] = config.momentum * vel_w[i] - config.learning_rate * gw[i]
                    vel_b[i] = config.momentum * vel_b[i] - config.learning_rate * gb[i]
                    self.weights[i] += vel_w[i]
                    self.biases[i] += vel_b[i]

    def _scaled_gradients(self, xs: np.ndarray, ys: np.ndarray):
        """Gradients for pre-standardized batches.

        The output delta is (prediction - target) scaled by the batch: the
        cross-entropy/sigmoid pair and the squared-error/identity pair both
        collapse to that form at the output pre-activation.
        """
        acts = self._forward_scaled(xs)
        n, m = xs.shape[0], self.layer_sizes[-1]
        if self.head == "sigmoid":
            delta = (acts[-1] - ys) / (n * m)
        else:
            delta = 2.0 * (acts[-1] - ys) / (n * m)
        gw = [None] * len(self.weights)
        gb = [None] * len(self.biases)
        for i in range(len(self.weights) - 1, -1, -1):
            gw[i] = acts[i].T @ delta
            gb[i] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.weights[i].T) * (acts[i] > 0)
        return gw, gb

    # -- serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "layer_sizes": self.layer_sizes,
            "head": self.head,
            "seed": self.seed,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "x_mean": self.x_mean.tolist(),
            "x_std": self.x_std.tolist(),
            "y_mean": self.y_mean.tolist(),
            "y_std": self.y_std.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Mlp":
        net = cls(d["layer_sizes"], d["head"], d.get("seed", 0))
        net.weights = [np.array(w, dtype=float) for w in d["weights"]]
        net.biases = [np.array(b, dtype=float) for b in d["biases"]]
        net.x_mean = np.array(d["x_mean"], dtype=float)
        net.x_std = np.array(d["x_std"], dtype=float)
        net.y_mean = np.array(d["y_mean"], dtype=float)
        net.y_std = np.array(d["y_std"], dtype=float)
        return net


def grad_check(net: Mlp, x: np.ndarray, y: np.ndarray, step: float = 1e-5) -> float:
    """Max relative deviation between analytic and central finite-difference
    gradients over every parameter."""
    gw, gb = net.gradients(x, y)
    worst = 0.0
    params = [(net.weights, gw), (net.biases, gb)]
    for arrays, grads in params:
        for arr, grad in zip(arrays, grads):
            flat = arr.reshape(-1)
            gflat = grad.reshape(-1)
            for k in range(flat.size):
                orig = flat[k]
                flat[k] = orig + step
                up = net.loss(x, y)
                flat[k] = orig - step
                down = net.loss(x, y)
                flat[k] = orig
                numeric = (up - down) / (2.0 * step)
                denom = max(abs(gflat[k]) + abs(numeric), 1e-8)
                worst = max(worst, abs(gflat[k] - numeric) / denom)
    return worst
