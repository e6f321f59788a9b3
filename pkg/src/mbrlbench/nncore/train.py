"""Reverse-mode gradients of the training objectives and the minibatch Adam loop."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .concrete import ConcreteDropoutConfig, ConcreteDropoutNetwork
from .losses import AnchorSet, heteroscedastic_split_grad, mse_grad
from .network import Network, ShapeError, backward_cached, forward_cached

log = logging.getLogger(__name__)

LOSSES = ("mse", "heteroscedastic", "anchored", "concrete")


class TrainingDivergence(FloatingPointError):
    """Training produced a non-finite loss."""


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    epochs: int = 60
    batch_size: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0 or self.batch_size < 1 or self.epochs < 0:
            raise ValueError(f"invalid training config {self}")


def _batch_arrays(batch):
    X, Y = batch
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if len(X) != len(Y) or len(X) == 0:
        raise ShapeError(f"batch sizes differ or are empty: {len(X)} vs {len(Y)}")
    return X, Y


def gradient(loss: str, net, batch, *, anchors: AnchorSet | None = None, n_data: int | None = None,
             noise=None, concrete: ConcreteDropoutConfig | None = None):
    """Loss value and exact gradient for one of :data:`LOSSES`.

    ``mse`` and ``anchored`` expect a :class:`Network` whose output matches the
    target width; ``heteroscedastic`` expects twice the target width
    (means then log-variances). ``concrete`` takes a
    :class:`ConcreteDropoutNetwork`, its per-layer uniform ``noise``, and adds the
    dropout regularizer from ``concrete``. Gradients come back in ``net.params()``
    order.
    """
    X, Y = _batch_arrays(batch)
    if X.shape[1] != net.input_dim:
        raise ShapeError(f"input width {X.shape[1]} != {net.input_dim}")

    if loss == "concrete":
        if not isinstance(net, ConcreteDropoutNetwork):
            raise TypeError("concrete loss needs a ConcreteDropoutNetwork")
        if noise is None:
            raise ValueError("concrete loss needs dropout noise")
        cfg = concrete if concrete is not None else ConcreteDropoutConfig()
        return net.backward(X, noise, lambda out: heteroscedastic_split_grad(out, Y), cfg)

    if not isinstance(net, Network):
        raise TypeError(f"{loss} loss needs a plain Network")
    out, cache = forward_cached(net.layers, X)
    if loss == "heteroscedastic":
        value, d_out = heteroscedastic_split_grad(out, Y)
    elif loss in ("mse", "anchored"):
        if out.shape != Y.shape:
            raise ShapeError(f"output shape {out.shape} != target shape {Y.shape}")
        value = float(np.sum((Y - out) ** 2) / len(X))
        d_out = mse_grad(out, Y)
    else:
        raise ValueError(f"unknown loss {loss!r}; expected one of {LOSSES}")
    grads, _ = backward_cached(net.layers, cache, d_out)

    if loss == "anchored":
        if anchors is None:
            raise ValueError("anchored loss needs an AnchorSet")
        anchors.check(net)
        n = len(X) if n_data is None else n_data
        offset = 0
        for i, p in enumerate(net.params()):
            sl = slice(offset, offset + p.size)
            diff = p - anchors.anchor[sl].reshape(p.shape)
            gam = anchors.gamma[sl].reshape(p.shape)
            value += float(np.sum(gam * diff * diff)) / n
            grads[i] = grads[i] + 2.0 * gam * diff / n
            offset += p.size
    return value, grads


# Magnitudes below this are set to exactly zero after each step. Weights of
# dead units decay geometrically under the L2 term and would otherwise reach
# subnormal range, where gemm runs about 100x slower.
FLUSH_BELOW = 1e-150


def _flush(a: np.ndarray) -> None:
    a[np.abs(a) < FLUSH_BELOW] = 0.0


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            for a in (p, m, v):
                _flush(a)


def full_loss(loss: str, net, batch, rng=None, **kwargs) -> float:
    X, _ = _batch_arrays(batch)
    if loss == "concrete":
        noise = net.draw_noise(rng if rng is not None else np.random.default_rng(0), len(X))
        kwargs["noise"] = noise
    with np.errstate(over="ignore", invalid="ignore"):
        value, _ = gradient(loss, net, batch, **kwargs)
    return value


def fit(net, dataset, cfg: TrainConfig, loss: str = "mse", *, anchors: AnchorSet | None = None,
        concrete: ConcreteDropoutConfig | None = None):
    """Train ``net`` in place with minibatch Adam and return it.

    Every source of randomness (shuffling, dropout noise) comes from
    ``cfg.seed``. The anchored penalty is scaled by the full dataset size.
    Raises :class:`TrainingDivergence` as soon as a minibatch loss is
    non-finite; ``net`` is then left in its partially trained state.
    """
    X, Y = _batch_arrays(dataset)
    if cfg.epochs == 0:
        return net
    n = len(X)
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(net.params(), lr=cfg.lr)
    kwargs = {}
    if loss == "anchored":
        kwargs.update(anchors=anchors, n_data=n)
    if loss == "concrete":
        kwargs["concrete"] = concrete

    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            if loss == "concrete":
                kwargs["noise"] = net.draw_noise(rng, len(idx))
            with np.errstate(over="ignore", invalid="ignore"):
                value, grads = gradient(loss, net, (X[idx], Y[idx]), **kwargs)
            if not np.isfinite(value) or not all(np.all(np.isfinite(g)) for g in grads):
                raise TrainingDivergence(
                    f"non-finite {loss} loss ({value}) at epoch {epoch}, batch starting {start}"
                )
            opt.step(grads)

    kwargs.pop("noise", None)
    final = full_loss(loss, net, (X, Y), rng=rng, **kwargs)
    if not np.isfinite(final):
        raise TrainingDivergence(f"full-data {loss} loss is {final} after {cfg.epochs} epochs")
    log.debug("fit %s: %d epochs, final %s loss %.6g", net, cfg.epochs, loss, final)
    return net
