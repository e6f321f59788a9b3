"""Neural-network dynamics models: deterministic, ensembles, Concrete Dropout, anchored."""

from __future__ import annotations

import dataclasses
import logging

import numpy as np

from ..nncore import (
    AnchorSet,
    ConcreteDropoutConfig,
    ConcreteDropoutNetwork,
    Dense,
    Network,
    TrainConfig,
    fit,
    forward,
    init_network,
)
from ..nncore.network import Workspace, forward_scaled
from .base import DynamicsModel, Standardizer, aggregate_samples, as_arrays

log = logging.getLogger(__name__)

_WORKSPACE = Workspace()


def _seed(*parts) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


class _NNDynamics(DynamicsModel):
    """Shared plumbing: (s, a) inputs, delta targets, z-scoring, warm starts."""

    def __init__(self, obs_dim, act_dim, hidden_sizes=(32, 32), train: TrainConfig = TrainConfig(),
                 warm_start: bool = True, seed: int = 0):
        super().__init__(obs_dim, act_dim, seed)
        self.hidden_sizes = tuple(int(h) for h in hidden_sizes)
        self.train = train
        self.warm_start = warm_start
        self.n_fits = 0
        self.x_scaler: Standardizer | None = None
        self.y_scaler: Standardizer | None = None

    @property
    def in_dim(self) -> int:
        return self.obs_dim + self.act_dim

    def _layer_sizes(self, out_dim):
        return (self.in_dim, *self.hidden_sizes, out_dim)

    def _dataset(self, data):
        """Scaled ``(X, Y)`` and their scalers; nothing is stored until training succeeds."""
        S, A, S2 = as_arrays(data)
        S, A = self._inputs(S, A)
        X = np.concatenate([S, A], axis=1)
        Y = S2 - S
        xs, ys = Standardizer.fit(X), Standardizer.fit(Y)
        return xs(X), ys(Y), (xs, ys)

    def _commit(self, scalers):
        self.x_scaler, self.y_scaler = scalers
        self.n_fits += 1
        self._fitted = True

    def _train_cfg(self, member: int) -> TrainConfig:
        return dataclasses.replace(self.train, seed=_seed(self.seed, member, self.n_fits))

    def _scaled_inputs(self, S, A):
        self._require_fitted()
        S, A = self._inputs(S, A)
        return S, self.x_scaler(np.concatenate([S, A], axis=1))


class DeterministicNN(_NNDynamics):
    model_id = "deterministic-nn"

    def __init__(self, obs_dim, act_dim, **kwargs):
        super().__init__(obs_dim, act_dim, **kwargs)
        self.net = self._new_net()

    def _new_net(self):
        return init_network(self._layer_sizes(self.obs_dim), np.random.default_rng(_seed(self.seed, 0, 10**6 + self.n_fits)))

    def fit(self, data):
        X, Y, scalers = self._dataset(data)
        start = self.net if (self.warm_start and self._fitted) else self._new_net()
        # train a copy so a divergent fit leaves the previous model in place
        self.net = fit(start.copy(), (X, Y), self._train_cfg(0))
        self._commit(scalers)

    def predict_batch(self, S, A, rng=None):
        S, Z = self._scaled_inputs(S, A)
        delta = self.y_scaler.inverse(forward(self.net, Z))
        zeros = np.zeros_like(S)
        return S + delta, zeros, zeros.copy()


class DeterministicEnsemble(_NNDynamics):
    """Independent MSE-trained networks differing only by seed (no bootstrapping)."""

    model_id = "deterministic-ensemble"
    has_epistemic = True

    def __init__(self, obs_dim, act_dim, ensemble_size: int = 5, **kwargs):
        super().__init__(obs_dim, act_dim, **kwargs)
        if ensemble_size < 1:
            raise ValueError("ensemble_size must be positive")
        self.ensemble_size = int(ensemble_size)
        self.members = [self._new_member(j) for j in range(self.ensemble_size)]

    def _new_member(self, j):
        return init_network(self._layer_sizes(self.obs_dim), np.random.default_rng(_seed(self.seed, j, 10**6 + self.n_fits)))

    def _fit_member(self, j, net, X, Y):
        return fit(net, (X, Y), self._train_cfg(j))

    def fit(self, data):
        X, Y, scalers = self._dataset(data)
        reuse = self.warm_start and self._fitted
        trained = []
        for j in range(self.ensemble_size):
            start = self.members[j].copy() if reuse else self._new_member(j)
            trained.append(self._fit_member(j, start, X, Y))
        self.members = trained
        self._commit(scalers)

    def member_deltas(self, S, A) -> np.ndarray:
        """Raw delta predictions, shape (members, B, obs_dim)."""
        _, Z = self._scaled_inputs(S, A)
        return np.stack([self.y_scaler.inverse(forward(m, Z)) for m in self.members])

    def predict_batch(self, S, A, rng=None):
        S, _ = self._inputs(S, A)
        mean, epi, ale = aggregate_samples(self.member_deltas(S, A))
        return S + mean, epi, ale

    def predict_mean(self, S, A, rng=None):
        S, _ = self._inputs(S, A)
        return S + self.member_deltas(S, A).mean(axis=0)


def init_anchor_member(sizes, rng: np.random.Generator) -> Network:
    """Draw weights and biases from the anchor prior ``N(0, 2 / fan_in)``."""
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        std = np.sqrt(2.0 / fan_in)
        layers.append(Dense(rng.normal(0, std, (fan_in, fan_out)), rng.normal(0, std, fan_out)))
    return Network(layers)


class AnchoredEnsemble(DeterministicEnsemble):
    """Randomized-MAP ensemble: each member is regularized toward its own prior draw.

    Members start at their anchors; anchors never change after construction.
    """

    model_id = "anchored-ensemble"

    def __init__(self, obs_dim, act_dim, data_noise: float = 0.01, **kwargs):
        self.data_noise = float(data_noise)
        super().__init__(obs_dim, act_dim, **kwargs)
        self.anchors = [AnchorSet.from_init(m, self.data_noise) for m in self.members]

    def _new_member(self, j):
        rng = np.random.default_rng(_seed(self.seed, j, 7))
        return init_anchor_member(self._layer_sizes(self.obs_dim), rng)

    def _fit_member(self, j, net, X, Y):
        return fit(net, (X, Y), self._train_cfg(j), loss="anchored", anchors=self.anchors[j])


class ConcreteDropoutNN(_NNDynamics):
    """Heteroscedastic network with Concrete Dropout on every layer input.

    Prediction averages ``mc_samples`` stochastic passes. Within one call
    each pass uses a single dropout mask shared by every row of the batch,
    so all candidates in a batch are scored under the same sampled networks.
    """

    model_id = "concrete-dropout"
    has_epistemic = True
    has_aleatoric = True

    def __init__(self, obs_dim, act_dim, mc_samples: int = 20,
                 concrete: ConcreteDropoutConfig = ConcreteDropoutConfig(), **kwargs):
        super().__init__(obs_dim, act_dim, **kwargs)
        if mc_samples < 1:
            raise ValueError("mc_samples must be positive")
        self.mc_samples = int(mc_samples)
        self.concrete = concrete
        self.net = self._new_net()

    def _new_net(self):
        rng = np.random.default_rng(_seed(self.seed, 0, 10**6 + self.n_fits))
        return ConcreteDropoutNetwork.init(self._layer_sizes(2 * self.obs_dim), rng, self.concrete)

    def fit(self, data):
        X, Y, scalers = self._dataset(data)
        start = self.net if (self.warm_start and self._fitted) else self._new_net()
        self.net = fit(start.copy(), (X, Y), self._train_cfg(0), loss="concrete", concrete=self.concrete)
        self._commit(scalers)

    @property
    def drop_probs(self) -> np.ndarray:
        return self.net.drop_probs

    def mc_outputs(self, Z, rng=None):
        """Standardized ``(means, log_vars)`` of shape (T, B, obs_dim)."""
        if rng is None:
            rng = np.random.default_rng(_seed(self.seed, 424242))
        noise = self.net.draw_noise(rng, (self.mc_samples, 1))
        out = forward_scaled(self.net.dense_layers, Z, self.net.input_scales(noise), _WORKSPACE)
        k = self.obs_dim
        return out[..., :k].copy(), out[..., k:].copy()

    def predict_batch(self, S, A, rng=None):
        S, Z = self._scaled_inputs(S, A)
        mu, logvar = self.mc_outputs(Z, rng)
        sy, my = self.y_scaler.std, self.y_scaler.mean
        deltas = mu * sy + my
        mean, epi, ale = aggregate_samples(deltas, np.exp(logvar) * sy ** 2)
        return S + mean, epi, ale

    def predict_mean(self, S, A, rng=None):
        S, Z = self._scaled_inputs(S, A)
        mu, _ = self.mc_outputs(Z, rng)
        return S + self.y_scaler.inverse(mu.mean(axis=0))
