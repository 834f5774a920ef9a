"""Feedforward state-transition networks with hand-rolled reverse mode.

A net maps the concatenation of state ``x`` (length ``state_dim``) and
exogenous input ``u`` (length ``input_dim``) to a state derivative of
length ``state_dim`` through ``depth`` affine layers with an elementwise
activation between them (none after the last layer).

All entry points accept a single vector ``(d,)`` or a batch ``(B, d)``;
gradients of batched calls are summed over the batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionError, ModelFormatError
from .serialize import load_json, write_json

_ACTIVATION_KINDS = ("relu", "elu", "tanh", "identity")


@dataclass(frozen=True)
class Activation:
    """Elementwise nonlinearity with unit slope at the origin.

    ``kappa`` is the linear-region slope used by the linearized analysis;
    it is 1 for every supported kind (elu uses alpha = 1, relu's slope is
    taken on its linear branch, tanh's is its maximum slope at 0).
    """

    kind: str

    def __post_init__(self):
        if self.kind not in _ACTIVATION_KINDS:
            raise ValueError(f"unknown activation {self.kind!r}")

    @property
    def kappa(self) -> float:
        return 1.0

    def __call__(self, z: np.ndarray) -> np.ndarray:
        if self.kind == "relu":
            return np.maximum(z, 0.0)
        if self.kind == "elu":
            return np.where(z > 0, z, np.expm1(np.minimum(z, 0.0)))
        if self.kind == "tanh":
            return np.tanh(z)
        return z

    def deriv(self, z: np.ndarray) -> np.ndarray:
        if self.kind == "relu":
            return np.where(z >= 0, 1.0, 0.0)
        if self.kind == "elu":
            return np.where(z > 0, 1.0, np.exp(np.minimum(z, 0.0)))
        if self.kind == "tanh":
            t = np.tanh(z)
            return 1.0 - t * t
        return np.ones_like(z)


RELU = Activation("relu")
ELU = Activation("elu")
TANH = Activation("tanh")
IDENTITY = Activation("identity")


def activation(kind: str) -> Activation:
    return Activation(kind)


@dataclass
class FeedforwardNet:
    """Weights, biases, and activation of a state-transition network."""

    state_dim: int
    input_dim: int
    hidden_dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: Activation

    def __post_init__(self):
        self.hidden_dims = tuple(int(d) for d in self.hidden_dims)
        dims = self.layer_dims
        if self.state_dim < 1 or self.input_dim < 0:
            raise DimensionError("state_dim must be >= 1 and input_dim >= 0")
        if any(d < self.state_dim for d in self.hidden_dims):
            raise DimensionError(
                "every hidden dimension must be at least the state dimension"
            )
        if len(self.weights) != self.depth or len(self.biases) != self.depth:
            raise DimensionError("weights/biases count must equal the depth")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            self.weights[i] = w = np.asarray(w, dtype=float)
            self.biases[i] = b = np.asarray(b, dtype=float)
            if w.shape != (dims[i + 1], dims[i]):
                raise DimensionError(
                    f"layer {i + 1} weight has shape {w.shape}, "
                    f"expected {(dims[i + 1], dims[i])}"
                )
            if b.shape != (dims[i + 1],):
                raise DimensionError(
                    f"layer {i + 1} bias has shape {b.shape}, "
                    f"expected {(dims[i + 1],)}"
                )

    @property
    def depth(self) -> int:
        return len(self.hidden_dims) + 1

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.state_dim + self.input_dim, *self.hidden_dims, self.state_dim)

    def copy(self) -> "FeedforwardNet":
        return FeedforwardNet(
            self.state_dim,
            self.input_dim,
            self.hidden_dims,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.activation,
        )


@dataclass
class Gradients:
    """Parameter cotangents mirroring a net's weights and biases."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def zeros_like(cls, net: FeedforwardNet) -> "Gradients":
        return cls(
            [np.zeros_like(w) for w in net.weights],
            [np.zeros_like(b) for b in net.biases],
        )

    def add_(self, other: "Gradients") -> None:
        for a, b in zip(self.weights, other.weights):
            a += b
        for a, b in zip(self.biases, other.biases):
            a += b

    def scale_(self, c: float) -> None:
        for a in self.weights:
            a *= c
        for a in self.biases:
            a *= c


def _stack_input(net: FeedforwardNet, x, u):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    if x2.shape[1] != net.state_dim:
        raise DimensionError(
            f"state has length {x2.shape[1]}, expected {net.state_dim}"
        )
    if net.input_dim == 0:
        xu = x2
    else:
        if u is None:
            raise DimensionError("net expects an input vector, got none")
        u2 = np.atleast_2d(np.asarray(u, dtype=float))
        if u2.shape[0] == 1 and x2.shape[0] > 1:
            u2 = np.broadcast_to(u2, (x2.shape[0], u2.shape[1]))
        if u2.shape != (x2.shape[0], net.input_dim):
            raise DimensionError(
                f"input has shape {u2.shape}, expected "
                f"{(x2.shape[0], net.input_dim)}"
            )
        xu = np.concatenate([x2, u2], axis=1)
    return xu, single


def forward_cached(net: FeedforwardNet, xu: np.ndarray):
    """Forward pass on a stacked (B, state+input) batch, keeping the
    per-layer values needed for the backward pass."""
    acts = [xu]
    pre = []
    a = xu
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        z = a @ w.T + b
        pre.append(z)
        a = net.activation(z)
        acts.append(a)
    out = a @ net.weights[-1].T + net.biases[-1]
    return out, (acts, pre)


def vjp_cached(net: FeedforwardNet, cache, upstream: np.ndarray):
    """Backward pass from a ``forward_cached`` cache.

    Returns parameter gradients (summed over the batch) and the cotangent
    of the stacked input, shape (B, state+input).
    """
    acts, pre = cache
    g = np.atleast_2d(np.asarray(upstream, dtype=float))
    grads = Gradients([None] * net.depth, [None] * net.depth)  # type: ignore[list-item]
    grads.weights[-1] = g.T @ acts[-1]
    grads.biases[-1] = g.sum(axis=0)
    da = g @ net.weights[-1]
    for i in range(net.depth - 2, -1, -1):
        dz = net.activation.deriv(pre[i]) * da
        grads.weights[i] = dz.T @ acts[i]
        grads.biases[i] = dz.sum(axis=0)
        da = dz @ net.weights[i]
    return grads, da


def forward(net: FeedforwardNet, x, u=None) -> np.ndarray:
    """State derivative f(x (+) u); accepts a vector or a batch of rows."""
    xu, single = _stack_input(net, x, u)
    out, _ = forward_cached(net, xu)
    return out[0] if single else out


def vjp(net: FeedforwardNet, x, u, upstream):
    """Reverse-mode derivatives of ``upstream . forward(net, x, u)``.

    Returns ``(grads, dx, du)``; ``du`` is an empty array when the net
    takes no input.
    """
    xu, single = _stack_input(net, x, u)
    upstream = np.asarray(upstream, dtype=float)
    if single and upstream.ndim != 1:
        raise DimensionError("upstream must match the output shape")
    up2 = np.atleast_2d(upstream)
    if up2.shape != (xu.shape[0], net.state_dim):
        raise DimensionError(
            f"upstream has shape {up2.shape}, expected "
            f"{(xu.shape[0], net.state_dim)}"
        )
    out, cache = forward_cached(net, xu)
    grads, dxu = vjp_cached(net, cache, up2)
    dx = dxu[:, : net.state_dim]
    du = dxu[:, net.state_dim :]
    if single:
        return grads, dx[0], du[0]
    return grads, dx, du


def jacobian_state(net: FeedforwardNet, x0, u0=None) -> np.ndarray:
    """Exact Jacobian of the state derivative w.r.t. the state at (x0, u0).

    Assembled from the chain of layer derivatives evaluated at the
    forward point; with zero biases and inputs this reduces to the
    product of the weight matrices restricted to the state columns.
    """
    xu, _ = _stack_input(net, np.atleast_1d(np.asarray(x0, dtype=float)), u0)
    _, (acts, pre) = forward_cached(net, xu)
    jac = net.weights[0][:, : net.state_dim].copy()
    for i in range(net.depth - 1):
        slope = net.activation.deriv(pre[i])[0]
        jac = net.weights[i + 1] @ (slope[:, None] * jac)
    return jac


def save_model(net: FeedforwardNet, path, meta: dict | None = None) -> None:
    """Write a net as JSON: dims, activation, row-major weight arrays."""
    obj = {
        "state_dim": net.state_dim,
        "input_dim": net.input_dim,
        "hidden_dims": list(net.hidden_dims),
        "activation": net.activation.kind,
        "weights": [w.ravel().tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
        "meta": meta or {},
    }
    write_json(path, obj)


def load_model(path) -> tuple[FeedforwardNet, dict]:
    """Read a model file written by ``save_model``; returns (net, meta)."""
    obj = load_json(path)
    try:
        state_dim = int(obj["state_dim"])
        input_dim = int(obj["input_dim"])
        hidden = tuple(int(d) for d in obj["hidden_dims"])
        act = Activation(str(obj["activation"]))
        dims = (state_dim + input_dim, *hidden, state_dim)
        weights = []
        for i, flat in enumerate(obj["weights"]):
            w = np.asarray(flat, dtype=float)
            if w.size != dims[i + 1] * dims[i]:
                raise ModelFormatError(
                    f"{path}: layer {i + 1} has {w.size} weight entries, "
                    f"expected {dims[i + 1] * dims[i]}"
                )
            weights.append(w.reshape(dims[i + 1], dims[i]))
        biases = [np.asarray(b, dtype=float) for b in obj["biases"]]
        net = FeedforwardNet(state_dim, input_dim, hidden, weights, biases, act)
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: malformed model file: {exc}") from exc
    return net, obj.get("meta", {})
