"""Small feedforward networks with a flat parameter vector.

A network is a plain value: layer sizes, an output head and one float64
parameter vector. Layer ``i`` stores its ``(in, out)`` weight matrix
row-major followed by its ``out`` biases. Hidden layers use ReLU.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ShapeError

HEADS = ("sigmoid", "softmax", "linear")
PROB_EPS = 1e-7


def clamp_prob(p):
    """Clamp probabilities into ``[1e-7, 1 - 1e-7]`` before taking logs."""
    return np.clip(p, PROB_EPS, 1.0 - PROB_EPS)


def n_params(layer_sizes) -> int:
    return sum((a + 1) * b for a, b in zip(layer_sizes[:-1], layer_sizes[1:]))


@dataclass(eq=False)
class NeuralNet:
    layer_sizes: tuple[int, ...]
    params: np.ndarray
    head: str = "sigmoid"

    def __post_init__(self):
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise ShapeError(f"bad layer sizes {self.layer_sizes}")
        if self.head not in HEADS:
            raise ValueError(f"unknown head {self.head!r}")
        if self.head == "sigmoid" and self.layer_sizes[-1] != 1:
            raise ShapeError("sigmoid head needs exactly one output")
        self.params = np.asarray(self.params, dtype=np.float64)
        if self.params.shape != (n_params(self.layer_sizes),):
            raise ShapeError(
                f"parameter vector has shape {self.params.shape}, "
                f"expected ({n_params(self.layer_sizes)},)"
            )

    @property
    def n_in(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_out(self) -> int:
        return self.layer_sizes[-1]

    def layers(self):
        """Yield ``(W, b)`` views into the parameter vector."""
        off = 0
        for a, b in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            W = self.params[off:off + a * b].reshape(a, b)
            off += a * b
            yield W, self.params[off:off + b]
            off += b

    def copy(self) -> "NeuralNet":
        return NeuralNet(self.layer_sizes, self.params.copy(), self.head)

    def __eq__(self, other):
        return (
            isinstance(other, NeuralNet)
            and self.layer_sizes == other.layer_sizes
            and self.head == other.head
            and np.array_equal(self.params, other.params)
        )

    def to_dict(self) -> dict:
        return {
            "head": self.head,
            "layer_sizes": list(self.layer_sizes),
            "params": [float(x) for x in self.params],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NeuralNet":
        return cls(tuple(d["layer_sizes"]), np.array(d["params"], dtype=np.float64), d["head"])


def init_net(layer_sizes, head="sigmoid", seed=0, zeros=False) -> NeuralNet:
    """Glorot-uniform weights and zero biases, reproducible from ``seed``."""
    layer_sizes = tuple(int(s) for s in layer_sizes)
    params = np.zeros(n_params(layer_sizes))
    net = NeuralNet(layer_sizes, params, head)
    if not zeros:
        rng = np.random.default_rng(seed)
        for W, _ in net.layers():
            r = np.sqrt(6.0 / (W.shape[0] + W.shape[1]))
            W[...] = rng.uniform(-r, r, size=W.shape)
    return net


def _as_batch(net: NeuralNet, x):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != net.n_in:
        raise ShapeError(f"input shape {x.shape} does not match input size {net.n_in}")
    return X, single


def _forward_cache(net: NeuralNet, X):
    acts = [X]
    h = X
    layers = list(net.layers())
    for i, (W, b) in enumerate(layers):
        z = h @ W + b
        h = np.maximum(z, 0.0) if i < len(layers) - 1 else z
        acts.append(h)
    z = acts[-1]
    if net.head == "sigmoid":
        out = 1.0 / (1.0 + np.exp(-z))
    elif net.head == "softmax":
        e = np.exp(z - z.max(axis=1, keepdims=True))
        out = e / e.sum(axis=1, keepdims=True)
    else:
        out = z
    return out, acts


def forward(net: NeuralNet, x) -> np.ndarray:
    """Output probabilities for one input vector or a batch of rows."""
    X, single = _as_batch(net, x)
    out, _ = _forward_cache(net, X)
    return out[0] if single else out


def backward(net: NeuralNet, x, upstream, return_input_grad=False):
    """Gradient of ``sum(output * upstream)`` with respect to the parameters.

    For a batch, contributions are summed over rows. With
    ``return_input_grad`` the gradient with respect to ``x`` is returned too.
    """
    X, single = _as_batch(net, x)
    U = np.asarray(upstream, dtype=np.float64)
    U = U[None, :] if single and U.ndim == 1 else U
    if U.shape != (X.shape[0], net.n_out):
        raise ShapeError(f"upstream shape {np.shape(upstream)} does not match output")
    out, acts = _forward_cache(net, X)
    grad, dx = _backward_cache(net, out, acts, U)
    if return_input_grad:
        return grad, (dx[0] if single else dx)
    return grad


def _backward_cache(net, out, acts, U):
    if net.head == "sigmoid":
        dz = U * out * (1.0 - out)
    elif net.head == "softmax":
        dz = out * (U - (U * out).sum(axis=1, keepdims=True))
    else:
        dz = U
    layers = list(net.layers())
    grads = []
    for i in range(len(layers) - 1, -1, -1):
        W, _ = layers[i]
        h = acts[i]
        grads.append((dz.sum(axis=0), (h.T @ dz).ravel()))
        dh = dz @ W.T
        if i > 0:
            dz = dh * (acts[i] > 0.0)
    grad = np.empty_like(net.params)
    off = 0
    for gb, gW in reversed(grads):
        grad[off:off + gW.size] = gW
        off += gW.size
        grad[off:off + gb.size] = gb
        off += gb.size
    return grad, dh


class Evaluation:
    """Forward pass over a batch that keeps what backprop needs."""

    __slots__ = ("net", "out", "acts")

    def __init__(self, net: NeuralNet, X):
        X, _ = _as_batch(net, X)
        self.net = net
        self.out, self.acts = _forward_cache(net, X)

    def backward(self, U) -> np.ndarray:
        return self.backward_with_input(U)[0]

    def backward_with_input(self, U) -> tuple[np.ndarray, np.ndarray]:
        """Parameter gradient and gradient with respect to the input rows."""
        U = np.asarray(U, dtype=np.float64)
        if U.shape != self.out.shape:
            raise ShapeError(f"upstream shape {U.shape} does not match output {self.out.shape}")
        return _backward_cache(self.net, self.out, self.acts, U)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, size: int, lr: float = 1e-3) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size), 0, lr)


def adam_update(params: np.ndarray, state: AdamState, gradient):
    """One bias-corrected Adam update of a raw parameter vector."""
    g = np.asarray(gradient, dtype=np.float64)
    if g.shape != params.shape:
        raise ShapeError(f"gradient shape {g.shape} does not match {params.shape}")
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * g
    v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new, replace(state, m=m, v=v, t=t)


def adam_step(net: NeuralNet, state: AdamState, gradient):
    """Adam update of a network. Returns ``(new_net, new_state)``."""
    params, state = adam_update(net.params, state, gradient)
    return NeuralNet(net.layer_sizes, params, net.head), state
