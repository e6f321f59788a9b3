"""Common interface for dynamics models that predict state differences."""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np


class CapabilityError(RuntimeError):
    """The model cannot provide the requested quantity (e.g. epistemic variance)."""


class NotFittedError(RuntimeError):
    pass


@dataclass(frozen=True)
class PredictiveDistribution:
    mean: np.ndarray
    epistemic_var: np.ndarray
    aleatoric_var: np.ndarray

    def __post_init__(self):
        if not (self.mean.shape == self.epistemic_var.shape == self.aleatoric_var.shape):
            raise ValueError("mean and variances must share a shape")

    @property
    def total_var(self) -> np.ndarray:
        return self.epistemic_var + self.aleatoric_var


def aggregate_samples(samples, aleatoric=None):
    """Monte Carlo mean and variance decomposition over the leading axis.

    ``samples`` holds ``T`` predictions; ``aleatoric`` (same shape) their
    predicted noise variances. Returns ``(mean, epistemic, aleatoric)`` where
    epistemic is ``mean(y^2) - mean(y)^2`` and aleatoric is the mean predicted
    variance (zeros when ``aleatoric`` is None).
    """
    y = np.asarray(samples, dtype=float)
    if y.shape[0] < 1:
        raise ValueError("need at least one sample")
    # shifting by one sample leaves the expression unchanged and avoids cancellation
    c = y[0]
    d = y - c
    m = d.mean(axis=0)
    epi = np.maximum(np.mean(d * d, axis=0) - m * m, 0.0)
    mean = m + c
    if aleatoric is None:
        ale = np.zeros_like(mean)
    else:
        ale = np.mean(np.asarray(aleatoric, dtype=float), axis=0)
    return mean, epi, ale


class Standardizer:
    """Per-dimension z-scoring; near-constant dimensions keep unit scale."""

    def __init__(self, mean, std):
        self.mean = np.asarray(mean, dtype=float)
        self.std = np.asarray(std, dtype=float)

    @classmethod
    def fit(cls, X, floor=1e-8) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        std = X.std(axis=0)
        std = np.where(std < floor, 1.0, std)
        return cls(X.mean(axis=0), std)

    def __call__(self, X):
        return (X - self.mean) / self.std

    def inverse(self, Z):
        return Z * self.std + self.mean


def as_arrays(data):
    """``(S, A, S_next)`` from a replay buffer or a tuple of arrays."""
    if hasattr(data, "arrays"):
        S, A, S2 = data.arrays()[:3]
    else:
        S, A, S2 = data[:3]
    S = np.atleast_2d(np.asarray(S, dtype=float))
    A = np.asarray(A, dtype=float)
    A = A.reshape(len(A), -1) if A.ndim != 2 else A
    S2 = np.atleast_2d(np.asarray(S2, dtype=float))
    if len(S) == 0:
        raise ValueError("cannot fit a dynamics model on an empty buffer")
    if not (len(S) == len(A) == len(S2)):
        raise ValueError("states, actions and next states differ in length")
    return S, A, S2


class DynamicsModel(ABC):
    """Learns ``s' = s + delta(s, a)`` from transitions.

    Subclasses implement :meth:`fit` and :meth:`predict_batch`. Prediction
    methods never mutate the model; stochastic models draw their noise from the
    ``rng`` argument, or from a fixed per-model stream when none is given.
    """

    model_id = "abstract"
    has_epistemic = False
    has_aleatoric = False

    def __init__(self, obs_dim: int, act_dim: int, seed: int = 0):
        self.obs_dim = int(obs_dim)
        self.act_dim = int(act_dim)
        self.seed = int(seed)
        self._fitted = False

    @property
    def is_fitted(self) -> bool:
        return self._fitted

    def _require_fitted(self):
        if not self._fitted:
            raise NotFittedError(f"{type(self).__name__} has not been fitted")

    def _inputs(self, S, A):
        S = np.atleast_2d(np.asarray(S, dtype=float))
        A = np.asarray(A, dtype=float).reshape(len(S), -1) if np.ndim(A) < 2 else np.asarray(A, dtype=float)
        if S.shape[1] != self.obs_dim or A.shape[1] != self.act_dim or len(S) != len(A):
            raise ValueError(f"bad input shapes {S.shape}, {A.shape} for model ({self.obs_dim}, {self.act_dim})")
        return S, A

    @abstractmethod
    def fit(self, data) -> None:
        ...

    @abstractmethod
    def predict_batch(self, S, A, rng=None):
        """``(next_mean, epistemic_var, aleatoric_var)``, each of shape (B, obs_dim)."""

    def predict_mean(self, S, A, rng=None) -> np.ndarray:
        return self.predict_batch(S, A, rng)[0]

    def predict(self, s, a, rng=None) -> PredictiveDistribution:
        mean, epi, ale = self.predict_batch(np.asarray(s, dtype=float)[None, :], np.atleast_1d(a)[None, :], rng)
        return PredictiveDistribution(mean[0], epi[0], ale[0])

    def epistemic_batch(self, S, A, rng=None) -> np.ndarray:
        """Sum over state dimensions of the epistemic variance, one value per row."""
        if not self.has_epistemic:
            raise CapabilityError(f"{self.model_id} does not model epistemic uncertainty")
        return self.predict_batch(S, A, rng)[1].sum(axis=1)

    def epistemic(self, s, a, rng=None) -> float:
        s = np.asarray(s, dtype=float)
        return float(self.epistemic_batch(s[None, :], np.atleast_1d(a)[None, :], rng)[0])

    def __repr__(self) -> str:
        return f"{type(self).__name__}(obs_dim={self.obs_dim}, act_dim={self.act_dim}, seed={self.seed})"
