"""Capacity-delay analytics for secondary (ultra-elastic) traffic in
multi-band cellular networks, with built-in Monte Carlo validation."""

__version__ = "0.1.0"

from .equilibrium import BandConfig, EquilibriumSolution, Scenario, solve_equilibrium
from .errors import ConvergenceError, InfeasibleError, UnstableQueueError
from .queueing import OutageModel, SizeDistribution, TrafficModel

__all__ = [
    "BandConfig",
    "ConvergenceError",
    "EquilibriumSolution",
    "InfeasibleError",
    "OutageModel",
    "Scenario",
    "SizeDistribution",
    "TrafficModel",
    "UnstableQueueError",
    "solve_equilibrium",
]
