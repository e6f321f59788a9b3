"""Dynamics models behind one fit/predict interface."""

from .base import (
    CapabilityError,
    DynamicsModel,
    NotFittedError,
    PredictiveDistribution,
    Standardizer,
    aggregate_samples,
)
from .gp import (
    GPHyper,
    GPModel,
    GPNumericalError,
    GPPosterior,
    gp_fit_hyper,
    gp_posterior,
    log_marginal_likelihood,
    matern52,
    matern52_matrix,
)
from .nets import AnchoredEnsemble, ConcreteDropoutNN, DeterministicEnsemble, DeterministicNN
from .oracle import OracleModel

MODEL_CLASSES = {
    cls.model_id: cls
    for cls in (DeterministicNN, DeterministicEnsemble, ConcreteDropoutNN, AnchoredEnsemble, GPModel)
}
MODEL_IDS = tuple(MODEL_CLASSES)

__all__ = [
    "AnchoredEnsemble",
    "CapabilityError",
    "ConcreteDropoutNN",
    "DeterministicEnsemble",
    "DeterministicNN",
    "DynamicsModel",
    "GPHyper",
    "GPModel",
    "GPNumericalError",
    "GPPosterior",
    "MODEL_CLASSES",
    "MODEL_IDS",
    "NotFittedError",
    "OracleModel",
    "PredictiveDistribution",
    "Standardizer",
    "aggregate_samples",
    "gp_fit_hyper",
    "gp_posterior",
    "log_marginal_likelihood",
    "matern52",
    "matern52_matrix",
]
