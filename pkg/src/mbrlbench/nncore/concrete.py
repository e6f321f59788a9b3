"""Concrete Dropout: a relaxed, learnable dropout rate per layer.

Each wrapped affine layer drops its *input* units. The keep mask is the
continuous relaxation

    z = sigmoid((log(1 - p) - log p + log u - log(1 - u)) / temperature)

with ``u ~ Uniform(0, 1)``, so ``z -> 1`` keeps a unit and ``z -> 0`` drops it,
and ``P(z > 1/2) = 1 - p`` for every temperature. Kept activations are
rescaled by ``1 / (1 - p)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit

from .network import Dense, ShapeError, backward_cached, forward_cached, init_network

_LOGIT_CLIP = 30.0


@dataclass(frozen=True)
class ConcreteDropoutConfig:
    temperature: float = 0.1
    weight_reg: float = 1e-6
    dropout_reg: float = 1e-5
    init_p: float = 0.1

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if not 0.0 < self.init_p < 1.0:
            raise ValueError("init_p must lie in (0, 1)")
        if self.weight_reg < 0 or self.dropout_reg < 0:
            raise ValueError("regularizer weights must be nonnegative")


@dataclass
class ConcreteDropoutLayer:
    dense: Dense
    # stored as a (1,) array so optimizers can update it in place
    logit: np.ndarray = field(default_factory=lambda: np.zeros(1))
    temperature: float = 0.1

    def __post_init__(self):
        self.logit = np.asarray(self.logit, dtype=float).reshape(1)
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")

    @property
    def dropout_logit(self) -> float:
        return float(self.logit[0])

    @property
    def p(self) -> float:
        """Drop probability ``sigmoid(dropout_logit)``."""
        return float(expit(np.clip(self.logit[0], -_LOGIT_CLIP, _LOGIT_CLIP)))

    def copy(self) -> "ConcreteDropoutLayer":
        return ConcreteDropoutLayer(self.dense.copy(), self.logit.copy(), self.temperature)


def _check_uniform(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if not np.all((u > 0.0) & (u < 1.0)):
        raise ValueError("uniform noise must lie strictly inside (0, 1)")
    return u


def concrete_dropout_mask(layer: ConcreteDropoutLayer, u) -> np.ndarray:
    """Soft keep mask for noise ``u``; entries in (0, 1)."""
    u = _check_uniform(u)
    rho = np.clip(layer.logit[0], -_LOGIT_CLIP, _LOGIT_CLIP)
    arg = (-rho + np.log(u) - np.log1p(-u)) / layer.temperature
    return expit(arg)


def draw_uniform(rng: np.random.Generator, shape) -> np.ndarray:
    u = rng.random(shape)
    # rng.random can return exactly 0.0
    return np.maximum(u, np.finfo(float).tiny)


class ConcreteDropoutNetwork:
    """ReLU MLP whose every layer is wrapped in Concrete Dropout."""

    def __init__(self, layers: Sequence[ConcreteDropoutLayer]):
        if not layers:
            raise ShapeError("network needs at least one layer")
        for k in range(len(layers) - 1):
            if layers[k].dense.out_dim != layers[k + 1].dense.in_dim:
                raise ShapeError(f"layer {k} and {k + 1} widths do not compose")
        self.layers = list(layers)

    @classmethod
    def init(cls, sizes, rng: np.random.Generator, config: ConcreteDropoutConfig = ConcreteDropoutConfig()):
        base = init_network(sizes, rng)
        rho = np.log(config.init_p) - np.log1p(-config.init_p)
        return cls([ConcreteDropoutLayer(d, np.array([rho]), config.temperature) for d in base.layers])

    @property
    def input_dim(self) -> int:
        return self.layers[0].dense.in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].dense.out_dim

    @property
    def hidden_sizes(self) -> tuple[int, ...]:
        return tuple(l.dense.out_dim for l in self.layers[:-1])

    @property
    def dense_layers(self) -> list[Dense]:
        return [l.dense for l in self.layers]

    @property
    def drop_probs(self) -> np.ndarray:
        return np.array([l.p for l in self.layers])

    def params(self) -> list[np.ndarray]:
        """``[W0, b0, rho0, W1, b1, rho1, ...]`` as live views."""
        out = []
        for l in self.layers:
            out.extend((l.dense.W, l.dense.b, l.logit))
        return out

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params()])

    def set_flat(self, theta) -> None:
        from .network import unflatten_into

        unflatten_into(theta, self.params())

    def copy(self) -> "ConcreteDropoutNetwork":
        return ConcreteDropoutNetwork([l.copy() for l in self.layers])

    def draw_noise(self, rng: np.random.Generator, batch_shape) -> list[np.ndarray]:
        """Uniform noise per layer input; ``batch_shape`` is prepended to each width."""
        batch_shape = tuple(np.atleast_1d(batch_shape))
        return [draw_uniform(rng, batch_shape + (l.dense.in_dim,)) for l in self.layers]

    def input_scales(self, noise: Sequence[np.ndarray]) -> list[np.ndarray]:
        """Mask times ``1 / (1 - p)`` for each layer input."""
        if len(noise) != len(self.layers):
            raise ShapeError(f"expected {len(self.layers)} noise arrays, got {len(noise)}")
        return [concrete_dropout_mask(l, u) / (1.0 - l.p) for l, u in zip(self.layers, noise)]

    def forward(self, x, noise: Sequence[np.ndarray]) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.input_dim:
            raise ShapeError(f"input width {x.shape[-1]} != {self.input_dim}")
        out, _ = forward_cached(self.dense_layers, x, self.input_scales(noise))
        return out

    def regularizer(self, config: ConcreteDropoutConfig) -> float:
        """Sum over layers of ``wr*||W||^2/(1-p) + dr*d_in*(p log p + (1-p) log(1-p))``."""
        total = 0.0
        for l in self.layers:
            p = l.p
            total += config.weight_reg * float(np.sum(l.dense.W ** 2)) / (1.0 - p)
            total += config.dropout_reg * l.dense.in_dim * (p * np.log(p) + (1.0 - p) * np.log1p(-p))
        return total

    def backward(self, x: np.ndarray, noise, d_out_fn, config: ConcreteDropoutConfig | None = None):
        """Loss and gradient for a data loss defined on the network output.

        ``d_out_fn(out) -> (loss, d_out)`` supplies the data term. The regularizer
        is added when ``config`` is given. Returns ``(loss, grads)`` in
        :meth:`params` order.
        """
        layers = self.dense_layers
        masks = [concrete_dropout_mask(l, u) for l, u in zip(self.layers, noise)]
        keep = [1.0 / (1.0 - l.p) for l in self.layers]
        scales = [m * s for m, s in zip(masks, keep)]
        out, cache = forward_cached(layers, x, scales)
        loss, d_out = d_out_fn(out)
        dense_grads, d_scales = backward_cached(layers, cache, d_out, scales)

        grads = []
        for k, l in enumerate(self.layers):
            z, s = masks[k], keep[k]
            # d(z*s)/d rho with z = sigmoid((-rho + logit u)/t), s = 1 + e^rho
            dscale_drho = s * (-z * (1.0 - z) / l.temperature) + z * (s - 1.0)
            g_rho = float(np.sum(d_scales[k] * dscale_drho))
            gW = dense_grads[2 * k]
            if config is not None:
                p = l.p
                sq = float(np.sum(l.dense.W ** 2))
                loss += config.weight_reg * sq * s
                loss += config.dropout_reg * l.dense.in_dim * (p * np.log(p) + (1.0 - p) * np.log1p(-p))
                gW = gW + 2.0 * config.weight_reg * s * l.dense.W
                g_rho += config.weight_reg * sq * (s - 1.0)
                g_rho += config.dropout_reg * l.dense.in_dim * l.logit[0] * p * (1.0 - p)
            grads.extend((gW, dense_grads[2 * k + 1], np.array([g_rho])))
        return loss, grads
