"""Training objectives: MSE, heteroscedastic Gaussian NLL, anchored MSE."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import Network, ShapeError, flatten, prior_variances


def _pair(preds, targets):
    preds = np.atleast_2d(np.asarray(preds, dtype=float))
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if preds.shape != targets.shape:
        # a batch of scalars may arrive as (1, N)
        raise ShapeError(f"prediction shape {preds.shape} != target shape {targets.shape}")
    if preds.shape[0] == 0:
        raise ValueError("empty batch")
    return preds, targets


def _scalar_batch(x):
    x = np.asarray(x, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def mse_loss(preds, targets) -> float:
    """Mean over rows of the squared Euclidean residual norm.

    1-D inputs are read as a batch of scalars.
    """
    preds, targets = _pair(_scalar_batch(preds), _scalar_batch(targets))
    return float(np.sum((targets - preds) ** 2) / preds.shape[0])


def mse_grad(preds, targets) -> np.ndarray:
    """d mse_loss / d preds for 2-D batches."""
    return 2.0 * (preds - targets) / preds.shape[0]


def heteroscedastic_loss(means, log_vars, targets) -> float:
    """``(1/N) sum_i sum_d [ (y - mu)^2 / sigma^2 + log sigma^2 ]`` with per-dimension variance."""
    means, targets = _pair(_scalar_batch(means), _scalar_batch(targets))
    log_vars, _ = _pair(_scalar_batch(log_vars), targets)
    if not (np.all(np.isfinite(means)) and np.all(np.isfinite(log_vars)) and np.all(np.isfinite(targets))):
        raise ValueError("heteroscedastic_loss received non-finite input")
    r2 = (targets - means) ** 2
    return float(np.sum(r2 * np.exp(-log_vars) + log_vars) / means.shape[0])


def heteroscedastic_split_grad(out: np.ndarray, targets: np.ndarray):
    """Loss and gradient w.r.t. a network output laid out as ``[means | log_vars]``."""
    k = targets.shape[1]
    if out.shape[1] != 2 * k:
        raise ShapeError(f"output width {out.shape[1]} != 2 * target width {k}")
    mu, s = out[:, :k], out[:, k:]
    n = out.shape[0]
    r = targets - mu
    inv = np.exp(-s)
    loss = float(np.sum(r * r * inv + s) / n)
    d = np.empty_like(out)
    d[:, :k] = -2.0 * r * inv / n
    d[:, k:] = (1.0 - r * r * inv) / n
    return loss, d


@dataclass
class AnchorSet:
    """Fixed anchor parameters and diagonal regularization weights for one member.

    ``anchor`` and ``gamma`` are flat vectors over :meth:`Network.params` order.
    """

    anchor: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        self.anchor = np.array(self.anchor, dtype=float).ravel()
        self.gamma = np.array(self.gamma, dtype=float).ravel()
        if self.anchor.shape != self.gamma.shape:
            raise ShapeError("anchor and gamma must have equal length")
        if np.any(self.gamma < 0):
            raise ValueError("gamma entries must be nonnegative")
        self.anchor.setflags(write=False)
        self.gamma.setflags(write=False)

    @classmethod
    def from_init(cls, net: Network, data_noise: float = 0.01, bias_var: float | None = None) -> "AnchorSet":
        """Anchor at ``net``'s current parameters with ``gamma = data_noise / prior_var``."""
        prior = flatten(prior_variances(net, bias_var))
        return cls(net.get_flat().copy(), data_noise / prior)

    def check(self, net: Network) -> None:
        if self.anchor.size != net.num_params():
            raise ShapeError(f"anchor has {self.anchor.size} entries, network has {net.num_params()}")


def anchor_penalty(net: Network, anchors: AnchorSet, n: int) -> float:
    anchors.check(net)
    diff = net.get_flat() - anchors.anchor
    return float(np.sum(anchors.gamma * diff * diff) / n)


def anchored_loss(net: Network, batch, anchors: AnchorSet, n_data: int | None = None) -> float:
    """MSE on ``batch = (X, Y)`` plus ``(1/N) ||Gamma^(1/2) (theta - theta_anc)||^2``.

    ``N`` defaults to the batch size; pass ``n_data`` to scale the penalty by
    the full dataset size when training on minibatches.
    """
    from .network import forward

    X, Y = batch
    anchors.check(net)
    preds = forward(net, X)
    n = len(preds) if n_data is None else n_data
    return mse_loss(preds, Y) + anchor_penalty(net, anchors, n)
