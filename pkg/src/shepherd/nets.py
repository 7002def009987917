"""Minimal dense networks with hand-written reverse-mode gradients.

The policy and value networks are four hidden layers of 64 ReLU units, small
enough that a framework dependency buys nothing. Everything runs in float64,
which keeps finite-difference gradient checks tight.
"""

from __future__ import annotations

import numpy as np


class DenseNet:
    """Fully connected ReLU network with a linear output layer.

    Weights are initialized from a uniform distribution scaled by fan-in:
    W ~ U(-a, a) with a = gain * sqrt(3 / fan_in), i.e. std = gain / sqrt(fan_in).
    Hidden layers use gain sqrt(2) (ReLU); the output layer gain is a
    constructor argument so policy heads can start near zero.
    """

    def __init__(self, sizes, rng: np.random.Generator, out_gain: float = 1.0):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.sizes = list(sizes)
        self.weights = []
        self.biases = []
        n_layers = len(sizes) - 1
        for layer in range(n_layers):
            fan_in = sizes[layer]
            gain = out_gain if layer == n_layers - 1 else np.sqrt(2.0)
            a = gain * np.sqrt(3.0 / fan_in)
            self.weights.append(rng.uniform(-a, a, size=(fan_in, sizes[layer + 1])))
            self.biases.append(np.zeros(sizes[layer + 1]))

    @property
    def in_dim(self) -> int:
        return self.sizes[0]

    @property
    def out_dim(self) -> int:
        return self.sizes[-1]

    def forward(self, x: np.ndarray):
        """Return (output, cache); accepts (B, in) or a single (in,) vector."""
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        h = x[None, :] if squeeze else x
        if h.shape[1] != self.in_dim:
            raise ValueError(f"input dim {h.shape[1]} != expected {self.in_dim}")
        activations = [h]
        for layer in range(len(self.weights) - 1):
            h = h @ self.weights[layer] + self.biases[layer]
            h = np.maximum(h, 0.0)
            activations.append(h)
        out = h @ self.weights[-1] + self.biases[-1]
        cache = (activations, squeeze)
        return (out[0] if squeeze else out), cache

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, cache, grad_out: np.ndarray):
        """Backpropagate d(loss)/d(output); returns (d(loss)/d(input), grads).

        ``grads`` is a list of (dW, db) pairs aligned with the layers.
        """
        activations, squeeze = cache
        g = np.asarray(grad_out, dtype=float)
        if squeeze:
            g = g[None, :]
        grads = [None] * len(self.weights)
        for layer in range(len(self.weights) - 1, -1, -1):
            a_in = activations[layer]
            grads[layer] = (a_in.T @ g, g.sum(axis=0))
            g = g @ self.weights[layer].T
            if layer > 0:
                g = g * (activations[layer] > 0.0)
        return (g[0] if squeeze else g), grads

    def parameters(self):
        """Flat list of parameter arrays (weights then bias per layer)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out


class Adam:
    """Standard Adam over a fixed list of parameter arrays, updated in place."""

    def __init__(self, params, lr=3e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p) for p in self.params]
        self.v = [np.zeros_like(p) for p in self.params]
        self.t = 0

    def step(self, grads):
        if len(grads) != len(self.params):
            raise ValueError("gradient list does not match parameter list")
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


def global_norm(grads) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))


def clip_grads_(grads, max_norm: float) -> float:
    """Scale the gradient list in place to the given global norm; returns the
    pre-clip norm."""
    norm = global_norm(grads)
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        for g in grads:
            g *= scale
    return norm
