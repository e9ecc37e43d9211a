"""Dense networks with reverse-mode gradients, Adam, and Polyak averaging.

Parameters of a network are exposed as one flat vector, ordered layer by
layer as ``weights.ravel()`` then ``biases``.  ``forward`` accepts a single
input vector or a [batch, in] matrix; ``backward`` returns the exact
gradient of ``sum_b upstream_b . y_b`` (callers scale ``upstream`` by 1/B
for batch means).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

RELU = "relu"
IDENTITY = "identity"


@dataclass
class DenseLayer:
    weights: np.ndarray  # [out, in]
    biases: np.ndarray  # [out]
    activation: str


@dataclass
class DenseNet:
    layers: list[DenseLayer]


@dataclass
class Tape:
    records: list  # per layer: (input, pre_activation)
    single: bool  # input was a bare vector


def dense_net(sizes, rng: np.random.Generator, out_activation: str = IDENTITY) -> DenseNet:
    """MLP with ReLU hidden layers; weights and biases uniform +-1/sqrt(fan_in)."""
    layers = []
    for k in range(len(sizes) - 1):
        fan_in, fan_out = sizes[k], sizes[k + 1]
        bound = 1.0 / np.sqrt(fan_in)
        act = RELU if k < len(sizes) - 2 else out_activation
        layers.append(
            DenseLayer(
                weights=rng.uniform(-bound, bound, (fan_out, fan_in)),
                biases=rng.uniform(-bound, bound, fan_out),
                activation=act,
            )
        )
    return DenseNet(layers)


def n_params(net: DenseNet) -> int:
    return sum(l.weights.size + l.biases.size for l in net.layers)


def get_params(net: DenseNet) -> np.ndarray:
    return np.concatenate([np.concatenate([l.weights.ravel(), l.biases]) for l in net.layers])


def set_params(net: DenseNet, flat: np.ndarray) -> None:
    if flat.size != n_params(net):
        raise ValueError(f"expected {n_params(net)} parameters, got {flat.size}")
    k = 0
    for l in net.layers:
        w = l.weights.size
        l.weights = flat[k : k + w].reshape(l.weights.shape).copy()
        k += w
        l.biases = flat[k : k + l.biases.size].copy()
        k += l.biases.size


def clone(net: DenseNet) -> DenseNet:
    return DenseNet(
        [DenseLayer(l.weights.copy(), l.biases.copy(), l.activation) for l in net.layers]
    )


def forward(net: DenseNet, x: np.ndarray) -> tuple[np.ndarray, Tape]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.shape[1] != net.layers[0].weights.shape[1]:
        raise ValueError(
            f"input dimension {h.shape[1]} != {net.layers[0].weights.shape[1]}"
        )
    records = []
    for layer in net.layers:
        pre = h @ layer.weights.T + layer.biases
        records.append((h, pre))
        h = np.maximum(pre, 0.0) if layer.activation == RELU else pre
    y = h[0] if single else h
    return y, Tape(records, single)


def backward(net: DenseNet, tape: Tape, upstream: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of upstream . output w.r.t. (flat params, input)."""
    g = np.asarray(upstream, dtype=float)
    if tape.single:
        g = g[None, :]
    grads = [None] * len(net.layers)
    for k in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[k]
        x_in, pre = tape.records[k]
        if layer.activation == RELU:
            g = g * (pre > 0.0)
        grads[k] = (g.T @ x_in, g.sum(axis=0))
        g = g @ layer.weights
    flat = np.concatenate([np.concatenate([gw.ravel(), gb]) for gw, gb in grads])
    input_grad = g[0] if tape.single else g
    return flat, input_grad


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: np.ndarray = field(default=None)
    v: np.ndarray = field(default=None)


def adam_init(n: int, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    return AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps, t=0, m=np.zeros(n), v=np.zeros(n))


def adam_step(state: AdamState, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
    """One bias-corrected Adam update; mutates the state, returns new params."""
    if params.shape != grads.shape or params.size != state.m.size:
        raise ValueError("params, grads, and moments must have equal lengths")
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads**2
    m_hat = state.m / (1.0 - state.beta1**state.t)
    v_hat = state.v / (1.0 - state.beta2**state.t)
    return params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


def polyak_update(target: np.ndarray, online: np.ndarray, rho: float) -> np.ndarray:
    """Soft target update: rho * target + (1 - rho) * online."""
    if target.shape != online.shape:
        raise ValueError("target and online parameter vectors must have equal lengths")
    return rho * target + (1.0 - rho) * online
