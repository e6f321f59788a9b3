"""A model that plans through the true environment dynamics."""

import numpy as np

from .. import envs
from .base import DynamicsModel


class OracleModel(DynamicsModel):
    """Exact next observations from the environment's own transition function.

    Useful as an upper reference for the planner; it has nothing to learn.
    """

    model_id = "oracle"

    def __init__(self, env_id: str, **env_kwargs):
        self.env = envs.make(env_id, **env_kwargs)
        spec = self.env.spec
        super().__init__(spec.obs_dim, spec.act_dim)
        self._fitted = True

    def fit(self, data) -> None:
        pass

    def predict_batch(self, S, A, rng=None):
        S, A = self._inputs(S, A)
        zeros = np.zeros_like(S)
        return self.env.transition(S, A), zeros, zeros.copy()
