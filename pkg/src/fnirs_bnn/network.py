"""Multilayer perceptron forward pass and exact backpropagation.

Weights live in a single flat vector so the variational layer can treat
the whole network as one parameter block. Layout is layer-major: for each
layer, the weight matrix W (out x in) in row-major order, then the bias
vector. The default 120-5-5-1 architecture has 641 parameters.

The output unit is a sigmoid giving the probability of class 1 (RFT); the
Bernoulli log-likelihood clamps probabilities to [eps, 1-eps] inside the
logarithms only, so the forward output itself is never altered.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import ConfigError, DimensionMismatchError
from .features import FeatureSet

WEIGHT_LAYOUT_VERSION = "dense-rowmajor-bias-v1"

PROB_CLAMP = 1e-12

HIDDEN_ACTIVATIONS = ("tanh", "relu", "sigmoid")


@dataclass(frozen=True)
class Architecture:
    layer_sizes: tuple[int, ...] = (120, 5, 5, 1)
    hidden_activation: str = "tanh"
    output_activation: str = "sigmoid"  # fixed; binary output

    def validate(self) -> None:
        if len(self.layer_sizes) < 3:
            raise ConfigError(f"architecture needs >= 1 hidden layer, got sizes {self.layer_sizes}")
        if any(int(s) != s or s < 1 for s in self.layer_sizes):
            raise ConfigError(f"layer sizes must be positive integers, got {self.layer_sizes}")
        if self.layer_sizes[-1] != 1:
            raise ConfigError(f"output layer size must be 1, got {self.layer_sizes[-1]}")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ConfigError(
                f"hidden_activation must be one of {HIDDEN_ACTIVATIONS}, got '{self.hidden_activation}'"
            )
        if self.output_activation != "sigmoid":
            raise ConfigError(f"output_activation is fixed to 'sigmoid', got '{self.output_activation}'")

    @property
    def n_params(self) -> int:
        sizes = self.layer_sizes
        return sum((sizes[i] + 1) * sizes[i + 1] for i in range(len(sizes) - 1))


def _apply_hidden(name: str, z: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return np.tanh(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    return expit(z)  # sigmoid


def _hidden_deriv(name: str, a: np.ndarray) -> np.ndarray:
    # derivative expressed through the activation value
    if name == "tanh":
        return 1.0 - a**2
    if name == "relu":
        return (a > 0.0).astype(float)
    return a * (1.0 - a)


def unpack_weights(arch: Architecture, w: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split the flat vector into per-layer (W, b) views."""
    if w.shape != (arch.n_params,):
        raise DimensionMismatchError(
            f"weight vector has length {w.shape}, architecture needs {arch.n_params}"
        )
    layers = []
    offset = 0
    sizes = arch.layer_sizes
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        W = w[offset : offset + n_in * n_out].reshape(n_out, n_in)
        offset += n_in * n_out
        b = w[offset : offset + n_out]
        offset += n_out
        layers.append((W, b))
    return layers


def _forward_batch(arch: Architecture, w: np.ndarray, X: np.ndarray) -> list[np.ndarray]:
    """Return per-layer activations for a batch; last entry is p [n, 1]."""
    layers = unpack_weights(arch, w)
    activations = [X]
    A = X
    for li, (W, b) in enumerate(layers):
        Z = A @ W.T + b
        A = _apply_hidden(arch.hidden_activation, Z) if li < len(layers) - 1 else expit(Z)
        activations.append(A)
    return activations


def forward(arch: Architecture, w: np.ndarray, x: np.ndarray) -> float:
    """Probability of class 1 for a single feature vector."""
    x = np.asarray(x, dtype=float)
    if x.shape != (arch.layer_sizes[0],):
        raise DimensionMismatchError(
            f"input has shape {x.shape}, architecture expects ({arch.layer_sizes[0]},)"
        )
    return float(_forward_batch(arch, np.asarray(w, dtype=float), x[None, :])[-1][0, 0])


def _batch_arrays(arch: Architecture, batch: FeatureSet) -> tuple[np.ndarray, np.ndarray]:
    if batch.n_features != arch.layer_sizes[0]:
        raise DimensionMismatchError(
            f"batch has {batch.n_features} features, architecture expects {arch.layer_sizes[0]}"
        )
    return batch.values, batch.labels.astype(float)


def log_likelihood(arch: Architecture, w: np.ndarray, batch: FeatureSet) -> float:
    """Sum of Bernoulli log-likelihoods over the batch (0 for an empty batch)."""
    if len(batch) == 0:
        return 0.0
    X, y = _batch_arrays(arch, batch)
    p = _forward_batch(arch, w, X)[-1][:, 0]
    pc = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return float(np.sum(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)))


def backprop(arch: Architecture, w: np.ndarray, batch: FeatureSet) -> np.ndarray:
    """Exact gradient of log_likelihood with respect to the flat weights."""
    return log_likelihood_and_gradient(arch, w, batch)[1]


def log_likelihood_and_gradient(
    arch: Architecture, w: np.ndarray, batch: FeatureSet
) -> tuple[float, np.ndarray]:
    """Fused value+gradient; one forward pass, fixed-order batch reduction."""
    w = np.asarray(w, dtype=float)
    if len(batch) == 0:
        return 0.0, np.zeros(arch.n_params)
    X, y = _batch_arrays(arch, batch)
    activations = _forward_batch(arch, w, X)
    p = activations[-1][:, 0]
    pc = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    value = float(np.sum(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)))

    layers = unpack_weights(arch, w)
    # d(loglik)/d(output preactivation) = y - p where unclamped, 0 where clamped
    inside = (p > PROB_CLAMP) & (p < 1.0 - PROB_CLAMP)
    dZ = np.where(inside, y - p, 0.0)[:, None]
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(layers)  # type: ignore[list-item]
    for li in range(len(layers) - 1, -1, -1):
        W, _ = layers[li]
        grads[li] = (dZ.T @ activations[li], dZ.sum(axis=0))
        if li > 0:
            dA = dZ @ W
            dZ = dA * _hidden_deriv(arch.hidden_activation, activations[li])
    flat = np.concatenate([np.concatenate([dW.ravel(), db]) for dW, db in grads])
    return value, flat
