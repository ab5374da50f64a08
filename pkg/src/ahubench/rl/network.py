"""Tanh multilayer perceptron with explicit backpropagation (float64 numpy)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def orthogonal(rng: np.random.Generator, n_in: int, n_out: int, gain: float) -> np.ndarray:
    """Orthogonal matrix of shape ``(n_in, n_out)`` scaled by ``gain``."""
    rows, cols = max(n_in, n_out), min(n_in, n_out)
    a = rng.standard_normal((rows, cols))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    if n_in < n_out:
        q = q.T
    return gain * q[:n_in, :n_out]


@dataclass
class MLP:
    """``y = W_L^T tanh(... tanh(W_1^T x + b_1) ...) + b_L`` with weights stored (in, out)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def init(cls, rng: np.random.Generator, sizes: list[int], out_gain: float,
             hidden_gain: float = np.sqrt(2.0)) -> MLP:
        weights, biases = [], []
        for k, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            gain = out_gain if k == len(sizes) - 2 else hidden_gain
            weights.append(orthogonal(rng, n_in, n_out, gain))
            biases.append(np.zeros(n_out))
        return cls(weights, biases)

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [W.shape[1] for W in self.weights]

    def params(self) -> list[np.ndarray]:
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def forward(self, x: np.ndarray) -> np.ndarray:
        h = x
        last = len(self.weights) - 1
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ W + b
            if k < last:
                h = np.tanh(h)
        return h

    def forward_cached(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Forward pass that also returns each layer's input for :meth:`backward`."""
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ W + b
            if k < last:
                h = np.tanh(h)
                acts.append(h)
        return h, acts

    def backward(self, acts: list[np.ndarray], grad_out: np.ndarray) -> list[np.ndarray]:
        """Gradients in :meth:`params` order given dLoss/dOutput."""
        grads: list[np.ndarray] = []
        g = grad_out
        for k in range(len(self.weights) - 1, -1, -1):
            a = acts[k]
            grads.append(g.sum(axis=0))
            grads.append(a.T @ g)
            if k > 0:
                g = (g @ self.weights[k].T) * (1.0 - a * a)
        grads.reverse()
        return grads

    def copy(self) -> MLP:
        return MLP([W.copy() for W in self.weights], [b.copy() for b in self.biases])
