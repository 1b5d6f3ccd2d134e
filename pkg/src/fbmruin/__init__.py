"""Discrete-grid simultaneous ruin of two fBm-driven risk processes.

Closed-form asymptotics, Monte Carlo estimates of the constants they need,
and exact-in-distribution simulation to check one against the other.
"""

from .asymptotics import ConstantInputs, finite_horizon, one_dim_asymptote, survival, two_dim_asymptote
from .constants import (
    ConstantConfig,
    PickandsConfig,
    PiterbargDriftSpec,
    estimate_discrete_pickands,
    estimate_pickands,
    estimate_piterbarg,
)
from .mc import HorizonPolicy, MCConfig, simulate_one_dim, simulate_two_dim
from .model import ModelParams, OneDimParams, classify, derive, drift_d, validate

__version__ = "0.1.0"

__all__ = [
    "ConstantConfig",
    "ConstantInputs",
    "HorizonPolicy",
    "MCConfig",
    "ModelParams",
    "OneDimParams",
    "PickandsConfig",
    "PiterbargDriftSpec",
    "classify",
    "derive",
    "drift_d",
    "estimate_discrete_pickands",
    "estimate_pickands",
    "estimate_piterbarg",
    "finite_horizon",
    "one_dim_asymptote",
    "simulate_one_dim",
    "simulate_two_dim",
    "survival",
    "two_dim_asymptote",
    "validate",
]
