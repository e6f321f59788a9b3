"""Dense ReLU networks with explicit parameter storage."""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class ShapeError(ValueError):
    """Input or parameter dimensions do not match the network."""


@dataclass
class Dense:
    """Affine map ``x @ W + b`` with ``W`` of shape (in, out)."""

    W: np.ndarray
    b: np.ndarray

    @property
    def in_dim(self) -> int:
        return self.W.shape[0]

    @property
    def out_dim(self) -> int:
        return self.W.shape[1]

    def copy(self) -> "Dense":
        return Dense(self.W.copy(), self.b.copy())


def relu(z):
    return np.maximum(z, 0.0)


def relu_grad(z):
    # subgradient at 0 is 0
    return (z > 0.0).astype(z.dtype)


class Network:
    """Feed-forward stack: ReLU after every hidden layer, identity at the output."""

    def __init__(self, layers: Sequence[Dense]):
        if not layers:
            raise ShapeError("network needs at least one layer")
        for k in range(len(layers) - 1):
            if layers[k].out_dim != layers[k + 1].in_dim:
                raise ShapeError(
                    f"layer {k} outputs {layers[k].out_dim} but layer {k + 1} "
                    f"expects {layers[k + 1].in_dim}"
                )
        for k, layer in enumerate(layers):
            if layer.b.shape != (layer.out_dim,):
                raise ShapeError(f"layer {k} bias shape {layer.b.shape} != ({layer.out_dim},)")
        self.layers = list(layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def hidden_sizes(self) -> tuple[int, ...]:
        return tuple(layer.out_dim for layer in self.layers[:-1])

    def params(self) -> list[np.ndarray]:
        """Parameter arrays in a fixed order ``[W0, b0, W1, b1, ...]`` (views, not copies)."""
        out = []
        for layer in self.layers:
            out.extend((layer.W, layer.b))
        return out

    def num_params(self) -> int:
        return sum(p.size for p in self.params())

    def get_flat(self) -> np.ndarray:
        return flatten(self.params())

    def set_flat(self, theta: np.ndarray) -> None:
        unflatten_into(theta, self.params())

    def copy(self) -> "Network":
        return Network([layer.copy() for layer in self.layers])

    def __call__(self, x):
        return forward(self, x)

    def __repr__(self) -> str:
        sizes = [self.input_dim, *self.hidden_sizes, self.output_dim]
        return f"Network({'-'.join(map(str, sizes))})"


def flatten(arrays: Sequence[np.ndarray]) -> np.ndarray:
    if not arrays:
        return np.zeros(0)
    return np.concatenate([np.ravel(a) for a in arrays])


def unflatten_into(theta: np.ndarray, arrays: Sequence[np.ndarray]) -> None:
    theta = np.asarray(theta, dtype=float)
    total = sum(a.size for a in arrays)
    if theta.shape != (total,):
        raise ShapeError(f"flat vector has shape {theta.shape}, expected ({total},)")
    i = 0
    for a in arrays:
        a[...] = theta[i:i + a.size].reshape(a.shape)
        i += a.size


def init_network(sizes: Sequence[int], rng: np.random.Generator, bias_std: float = 0.0) -> Network:
    """He-normal weights (std ``sqrt(2 / fan_in)``); biases zero unless ``bias_std`` is set.

    ``sizes`` lists every width including input and output, e.g. ``(4, 32, 32, 3)``.
    """
    if len(sizes) < 2 or any(int(s) < 1 for s in sizes):
        raise ShapeError(f"invalid layer sizes {tuple(sizes)}")
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        std = np.sqrt(2.0 / fan_in)
        W = rng.normal(0.0, std, size=(fan_in, fan_out))
        if bias_std > 0:
            b = rng.normal(0.0, bias_std, size=fan_out)
        else:
            b = np.zeros(fan_out)
        layers.append(Dense(W, b))
    return Network(layers)


def prior_variances(net: Network, bias_var: float | None = None) -> list[np.ndarray]:
    """Per-parameter initialization variance, matching :func:`init_network`'s layout.

    Biases get ``bias_var`` if given, otherwise the weight variance of their layer.
    """
    out = []
    for layer in net.layers:
        v = 2.0 / layer.in_dim
        out.append(np.full(layer.W.shape, v))
        out.append(np.full(layer.b.shape, v if bias_var is None else bias_var))
    return out


def _as_batch(net_in_dim: int, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net_in_dim:
        raise ShapeError(f"input has shape {x.shape}; network expects width {net_in_dim}")
    return x, single


def forward(net: Network, x) -> np.ndarray:
    """Evaluate the network on one input vector or a batch of rows."""
    h, single = _as_batch(net.input_dim, x)
    last = len(net.layers) - 1
    for k, layer in enumerate(net.layers):
        h = h @ layer.W + layer.b
        if k < last:
            h = relu(h)
    return h[0] if single else h


def _dense_apply(inp, layer: Dense):
    # one flat gemm is much faster than numpy's stacked matmul; in-place bias
    # add avoids another large temporary
    z = inp.reshape(-1, inp.shape[-1]) @ layer.W
    z += layer.b
    return z.reshape(*inp.shape[:-1], -1)


def forward_cached(layers: Sequence[Dense], x: np.ndarray, input_scales=None):
    """Forward pass keeping what backprop needs.

    ``input_scales[k]``, when given, multiplies the input of layer ``k``
    elementwise (dropout masks times the keep rescaling). Returns the output
    and a list of ``(raw_input, scaled_input, pre_activation)`` per layer.
    """
    cache = []
    h = x
    last = len(layers) - 1
    for k, layer in enumerate(layers):
        inp = h if input_scales is None else h * input_scales[k]
        z = _dense_apply(inp, layer)
        cache.append((h, inp, z))
        h = relu(z) if k < last else z
    return h, cache


class Workspace:
    """Per-thread scratch arrays reused across calls.

    Large short-lived temporaries otherwise cost a fresh page-faulted
    allocation each time, which dominates batched inference.
    """

    max_entries = 64

    def __init__(self):
        self._local = threading.local()

    def get(self, key, shape) -> np.ndarray:
        store = self._local.__dict__.setdefault("arrays", {})
        k = (key, tuple(shape))
        arr = store.get(k)
        if arr is None:
            if len(store) >= self.max_entries:
                store.clear()
            arr = store[k] = np.empty(shape)
        return arr

    def __getstate__(self):
        return {}

    def __setstate__(self, state):
        self._local = threading.local()


def forward_scaled(layers: Sequence[Dense], x: np.ndarray, input_scales, ws: Workspace) -> np.ndarray:
    """Inference-only version of :func:`forward_cached` with scaled inputs.

    Same operations in the same order, so results match bit for bit. The
    return value lives in ``ws`` and is overwritten by the next call on this
    thread; copy or reduce it first.
    """
    h = x
    last = len(layers) - 1
    for k, layer in enumerate(layers):
        shape = np.broadcast_shapes(h.shape, np.shape(input_scales[k]))
        inp = ws.get(("in", k), shape)
        np.multiply(h, input_scales[k], out=inp)
        flat = inp.reshape(-1, shape[-1])
        z = ws.get(("z", k), (flat.shape[0], layer.W.shape[1]))
        np.matmul(flat, layer.W, out=z)
        z += layer.b
        if k < last:
            np.maximum(z, 0.0, out=z)
        h = z.reshape(*shape[:-1], layer.W.shape[1])
    return h


def backward_cached(layers: Sequence[Dense], cache, d_out: np.ndarray, input_scales=None):
    """Reverse pass for :func:`forward_cached`.

    Returns ``(grads, d_scales)``: ``grads`` in :meth:`Network.params` order and,
    when ``input_scales`` is given, the gradient w.r.t. each scale array
    (same shape as that scale array after broadcasting over the batch).
    """
    grads: list[np.ndarray] = [None] * (2 * len(layers))  # type: ignore[list-item]
    d_scales = [None] * len(layers) if input_scales is not None else None
    g = d_out
    last = len(layers) - 1
    for k in range(last, -1, -1):
        h, inp, z = cache[k]
        if k < last:
            g = g * relu_grad(z)
        W = layers[k].W
        grads[2 * k] = inp.T @ g
        grads[2 * k + 1] = g.sum(axis=0)
        d_inp = g @ W.T
        if input_scales is None:
            g = d_inp
        else:
            d_scales[k] = d_inp * h
            g = d_inp * input_scales[k]
    return grads, d_scales
