"""Exact parallel chip-firing on graphs and step graphons, with circle-map and random-graph experiments."""

from .engine import ActivityEstimate, FiringState, activity, beta_activity, run, step, trajectory
from .model import ChipConfig, FiniteGraph, ModelError, StepGraphon

__all__ = [
    "ActivityEstimate",
    "ChipConfig",
    "FiniteGraph",
    "FiringState",
    "ModelError",
    "StepGraphon",
    "activity",
    "beta_activity",
    "run",
    "step",
    "trajectory",
]

__version__ = "0.1.0"
