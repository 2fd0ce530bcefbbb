"""
Small numpy function approximators with analytic gradients.

Multi-layer perceptrons with tanh hidden layers and a linear output
layer, trained with Adam. Parameters are kept as a flat list
[W0, b0, W1, b1, ...] so optimisers, target copies and checkpoints can
treat every network the same way.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)


class MLP:
    """Fully connected network: tanh hidden layers, linear output."""

    def __init__(self, sizes: Sequence[int], rng: Optional[np.random.Generator] = None,
                 output_scale: float = 1.0):
        """
        Args:
            sizes: layer widths including input and output, e.g. (12, 64, 64, 4)
            rng: generator used for weight initialisation
            output_scale: multiplier on the initial output-layer weights
        """
        if len(sizes) < 2:
            raise ValueError(f"an MLP needs at least input and output sizes, got {list(sizes)}")
        self.sizes = tuple(int(s) for s in sizes)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params: List[np.ndarray] = []
        for i, (fan_in, fan_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            bound = 1.0 / np.sqrt(fan_in)
            W = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            if i == len(self.sizes) - 2:
                W = W * output_scale
            self.params.append(W)
            self.params.append(np.zeros(fan_out))

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, List[np.ndarray]]:
        """Output and the per-layer activations needed by backward()."""
        h = np.asarray(x, dtype=float)
        if h.shape[-1] != self.sizes[0]:
            raise ValueError(f"input width {h.shape[-1]} does not match network input {self.sizes[0]}")
        cache = [h]
        for layer in range(self.n_layers):
            W, b = self.params[2 * layer], self.params[2 * layer + 1]
            h = h @ W + b
            if layer < self.n_layers - 1:
                h = np.tanh(h)
            cache.append(h)
        return h, cache

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache: List[np.ndarray], grad_out: np.ndarray) -> Tuple[List[np.ndarray], np.ndarray]:
        """
        Backpropagate dL/dy through the cached forward pass.

        Returns:
            (parameter gradients in params order, dL/dx)
        """
        grad = np.asarray(grad_out, dtype=float)
        if grad.shape != cache[-1].shape:
            raise ValueError(f"output gradient shape {grad.shape} does not match output {cache[-1].shape}")
        grads: List[Optional[np.ndarray]] = [None] * len(self.params)
        for layer in reversed(range(self.n_layers)):
            if layer < self.n_layers - 1:
                grad = grad * (1.0 - cache[layer + 1] ** 2)
            inputs = cache[layer]
            grads[2 * layer] = inputs.T @ grad
            grads[2 * layer + 1] = grad.sum(axis=0)
            grad = grad @ self.params[2 * layer].T
        return grads, grad

    def copy(self) -> "MLP":
        clone = MLP.__new__(MLP)
        clone.sizes = self.sizes
        clone.params = [p.copy() for p in self.params]
        return clone

    def soft_update(self, source: "MLP", tau: float) -> None:
        """Polyak averaging towards `source`."""
        for target, param in zip(self.params, source.params):
            target *= 1.0 - tau
            target += tau * param


def mlp_forward(net: MLP, x: np.ndarray) -> np.ndarray:
    return net(x)


def mlp_backward(net: MLP, x: np.ndarray, grad_out: np.ndarray) -> Tuple[List[np.ndarray], np.ndarray]:
    """Parameter and input gradients of <grad_out, net(x)>."""
    _, cache = net.forward(x)
    return net.backward(cache, grad_out)


@dataclass
class Adam:
    """Adam optimiser over a list of parameter arrays, updated in place."""
    params: List[np.ndarray]
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_grad_norm: Optional[float] = 10.0

    def __post_init__(self):
        self.m = [np.zeros_like(p) for p in self.params]
        self.v = [np.zeros_like(p) for p in self.params]
        self.t = 0

    def step(self, grads: List[np.ndarray]) -> None:
        if self.max_grad_norm is not None:
            norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
            if norm > self.max_grad_norm:
                grads = [g * (self.max_grad_norm / norm) for g in grads]
        self.t += 1
        correction1 = 1.0 - self.beta1 ** self.t
        correction2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / correction1) / (np.sqrt(v / correction2) + self.eps)

    def state_dict(self) -> dict:
        return {
            "t": self.t,
            "m": [m.tolist() for m in self.m],
            "v": [v.tolist() for v in self.v],
        }

    def load_state_dict(self, state: dict) -> None:
        self.t = int(state["t"])
        for target, values in zip(self.m, state["m"]):
            target[...] = np.asarray(values, dtype=float)
        for target, values in zip(self.v, state["v"]):
            target[...] = np.asarray(values, dtype=float)
