"""Sampling-based MPC with sparse spline control points and Stein variational transport."""

from .config import (CostWeights, InvalidConfig, SolverConfig, Variant, config_from_mapping,
                     load_config, validate_config)
from .kernels import BACKEND
from .model import CostBreakdown, RolloutResult, SparseControlPoints, State
from .solver import Controller, SolveOutput, solve
from .world import Cylinder, Environment, SensedObstacles, generate_forest

__all__ = [
    "BACKEND", "Controller", "CostBreakdown", "CostWeights", "Cylinder", "Environment",
    "InvalidConfig", "RolloutResult", "SensedObstacles", "SolveOutput", "SolverConfig",
    "SparseControlPoints", "State", "Variant", "config_from_mapping", "generate_forest",
    "load_config", "solve", "validate_config",
]
