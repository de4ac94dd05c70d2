"""
Penalty-based push-sum for distributed constrained convex optimization over
time-varying directed graphs.

Agents hold local objectives and constraints, exchange value/weight pairs
with their out-neighbours, and take penalized gradient steps on the local
ratio estimates.  The package also ships a distributed energy-dispatch
problem, centralized reference solvers and a config-driven CLI.
"""

from .config import load_config
from .energy import EnergyInstance, build_distributed_problem
from .engine import RunConfig, RunMetrics, run, step
from .netgraph import DiGraph, GraphSchedule, certify_B, demo_graphs, verify_B
from .penalty import ConstraintFn, LocalProblem, PenalizedProblem, penalty_g
from .schedules import ParamSchedule, certify_schedule, power_law_schedule

__version__ = "0.1.0"

__all__ = [
    "ConstraintFn",
    "DiGraph",
    "EnergyInstance",
    "GraphSchedule",
    "LocalProblem",
    "ParamSchedule",
    "PenalizedProblem",
    "RunConfig",
    "RunMetrics",
    "build_distributed_problem",
    "certify_B",
    "certify_schedule",
    "demo_graphs",
    "load_config",
    "penalty_g",
    "power_law_schedule",
    "run",
    "step",
    "verify_B",
]
