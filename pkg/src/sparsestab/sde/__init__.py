"""Euler-Maruyama Monte Carlo for the stochastic closed loop."""

from .philox import normal_block, philox_words
from .simulate import (
    ComparisonReport,
    ControllerReport,
    EnsembleStats,
    Histogram,
    ScenarioEvent,
    SimConfig,
    Trajectory,
    compare_controllers,
    frequency_distribution,
    simulate_ensemble,
    simulate_path,
)

__all__ = [
    "ComparisonReport", "ControllerReport", "EnsembleStats", "Histogram", "ScenarioEvent",
    "SimConfig", "Trajectory", "compare_controllers", "frequency_distribution",
    "normal_block", "philox_words", "simulate_ensemble", "simulate_path",
]
