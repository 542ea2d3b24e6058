"""Dense layers with manual forward/backward.

Everything is float64.  Forward passes are pure functions of the inputs
and weights, so a trained model can serve concurrent readers; the training
path threads explicit cache objects through forward_cache/backward.
"""

from __future__ import annotations

import numpy as np

RELU = "relu"
SIGMOID = "sigmoid"
IDENTITY = "identity"
ACTIVATIONS = (RELU, SIGMOID, IDENTITY)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # Split by sign so the exponent is always <= 0; exp never overflows.
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _apply(activation: str, z: np.ndarray) -> np.ndarray:
    if activation == RELU:
        return np.maximum(z, 0.0)
    if activation == SIGMOID:
        return _sigmoid(z)
    return z


def _grad_from_output(activation: str, y: np.ndarray) -> np.ndarray:
    # All three activations have derivatives expressible from the output:
    # relu' = [y > 0], sigmoid' = y(1-y), identity' = 1.
    if activation == RELU:
        return (y > 0.0).astype(np.float64)
    if activation == SIGMOID:
        return y * (1.0 - y)
    return np.ones_like(y)


class DenseLayer:
    """y = activation(x @ W.T + b), with W of shape (n_out, n_in)."""

    def __init__(self, W: np.ndarray, b: np.ndarray, activation: str):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        if W.ndim != 2 or b.shape != (W.shape[0],):
            raise ValueError(f"inconsistent layer shapes W{W.shape} b{b.shape}")
        self.W = W
        self.b = b
        self.activation = activation

    @property
    def n_in(self) -> int:
        return self.W.shape[1]

    @property
    def n_out(self) -> int:
        return self.W.shape[0]

    def forward(self, x: np.ndarray) -> np.ndarray:
        return _apply(self.activation, x @ self.W.T + self.b)

    def forward_cache(self, x: np.ndarray):
        y = _apply(self.activation, x @ self.W.T + self.b)
        return y, (x, y)

    def backward(self, cache, dy: np.ndarray):
        """Given d(loss)/d(output), return (d(loss)/d(input), gW, gb)."""
        x, y = cache
        dz = dy * _grad_from_output(self.activation, y)
        return dz @ self.W, dz.T @ x, dz.sum(axis=0)


def init_layer(n_in: int, n_out: int, activation: str, rng: np.random.Generator) -> DenseLayer:
    """He-uniform for relu, Xavier-uniform otherwise, zero biases."""
    if activation == RELU:
        limit = np.sqrt(6.0 / n_in)
    else:
        limit = np.sqrt(6.0 / (n_in + n_out))
    W = rng.uniform(-limit, limit, size=(n_out, n_in))
    return DenseLayer(W=W, b=np.zeros(n_out), activation=activation)


class Stack:
    """A sequence of dense layers applied in order."""

    def __init__(self, layers: list[DenseLayer]):
        for a, b in zip(layers, layers[1:]):
            if a.n_out != b.n_in:
                raise ValueError(f"layer widths do not chain: {a.n_out} -> {b.n_in}")
        self.layers = layers

    @property
    def n_in(self) -> int:
        return self.layers[0].n_in

    @property
    def n_out(self) -> int:
        return self.layers[-1].n_out

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def forward_cache(self, x: np.ndarray):
        caches = []
        for layer in self.layers:
            x, c = layer.forward_cache(x)
            caches.append(c)
        return x, caches

    def backward(self, caches, dy: np.ndarray):
        """Returns (d(loss)/d(input), [(gW, gb) per layer in forward order])."""
        grads: list[tuple[np.ndarray, np.ndarray]] = []
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            dy, gW, gb = layer.backward(cache, dy)
            grads.append((gW, gb))
        grads.reverse()
        return dy, grads
