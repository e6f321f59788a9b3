"""Model-based RL benchmark: how the choice of dynamics model changes MPC performance."""

__version__ = "0.1.0"
