"""Small numpy neural-network engine with analytic backprop."""

from .concrete import (
    ConcreteDropoutConfig,
    ConcreteDropoutLayer,
    ConcreteDropoutNetwork,
    concrete_dropout_mask,
)
from .losses import AnchorSet, anchored_loss, heteroscedastic_loss, mse_loss
from .network import Dense, Network, ShapeError, forward, init_network, prior_variances
from .train import LOSSES, Adam, TrainConfig, TrainingDivergence, fit, gradient

__all__ = [
    "Adam",
    "AnchorSet",
    "ConcreteDropoutConfig",
    "ConcreteDropoutLayer",
    "ConcreteDropoutNetwork",
    "Dense",
    "LOSSES",
    "Network",
    "ShapeError",
    "TrainConfig",
    "TrainingDivergence",
    "anchored_loss",
    "concrete_dropout_mask",
    "fit",
    "forward",
    "gradient",
    "heteroscedastic_loss",
    "init_network",
    "mse_loss",
    "prior_variances",
]
