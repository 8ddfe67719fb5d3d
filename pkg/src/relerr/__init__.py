"""Robust relative-error estimation for multiplicative regression models."""

from .asymptotics import SandwichCovariance, confidence_intervals, noise_constants, sandwich
from .estimator import FitResult, InnerSolverConfig, MmConfig, fit
from .model import Dataset, LossFamily, make_loss, register_loss
from .objective import GammaObjective, ObjectiveValue
from .simulation import McScenario, McSummary, mse, rpe, run_monte_carlo

__all__ = [
    "Dataset",
    "FitResult",
    "GammaObjective",
    "InnerSolverConfig",
    "LossFamily",
    "McScenario",
    "McSummary",
    "MmConfig",
    "ObjectiveValue",
    "SandwichCovariance",
    "confidence_intervals",
    "fit",
    "make_loss",
    "mse",
    "noise_constants",
    "register_loss",
    "rpe",
    "run_monte_carlo",
    "sandwich",
]
