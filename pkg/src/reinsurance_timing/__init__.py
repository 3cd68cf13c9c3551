"""Optimal timing of irreversible reinsurance for a surplus with capital injections.

The surplus follows a reflected diffusion; the insurer may once, at a fixed
cost, switch to a retention level and pays the discounted capital injections
that keep the surplus nonnegative. The package computes the optimal level,
the activation threshold and the value function, and checks them against a
Monte Carlo simulation.
"""

from .boundary import (
    CoefficientOutOfRange,
    G,
    ObstacleFn,
    PolicySolution,
    VariationalReport,
    assemble,
    obstacle,
    solve_boundary,
    solve_policy,
    verify_variational,
)
from .model import (
    Custom,
    ExcessOfLoss,
    Exponential,
    ModelError,
    ModelParams,
    MomentsOnly,
    Pareto,
    Problem,
    Proportional,
    benchmark,
    load_problem,
    moments,
    problem_from_dict,
)
from .numerics import BracketFailure
from .optimizer import LevelSolution, Method, SolveOptions, solve_level
from .roots import RootError, RootProfile, gamma_minus, gamma_plus_1, phi
from .simulator import SimConfig, SimConfigError, SimEstimate, optimality_probe, simulate_G, simulate_policy

__all__ = [
    "BracketFailure",
    "CoefficientOutOfRange",
    "Custom",
    "ExcessOfLoss",
    "Exponential",
    "G",
    "LevelSolution",
    "Method",
    "ModelError",
    "ModelParams",
    "MomentsOnly",
    "ObstacleFn",
    "Pareto",
    "PolicySolution",
    "Problem",
    "Proportional",
    "RootError",
    "RootProfile",
    "SimConfig",
    "SimConfigError",
    "SimEstimate",
    "SolveOptions",
    "VariationalReport",
    "assemble",
    "benchmark",
    "gamma_minus",
    "gamma_plus_1",
    "load_problem",
    "moments",
    "obstacle",
    "optimality_probe",
    "phi",
    "problem_from_dict",
    "simulate_G",
    "simulate_policy",
    "solve_boundary",
    "solve_level",
    "solve_policy",
    "verify_variational",
]

__version__ = "0.1.0"
