"""Solvers and experiment harness for plug-in EV charging games."""

from ._accel import BACKEND
from .errors import DegenerateObjective, InfeasibleSet, MaxIterExceeded, PevGameError
from .game import (
    agent_payoff,
    aggregate,
    auxiliary_cost,
    default_c,
    exact_best_response,
    nash_residual,
    payoffs,
    potential,
    regularized_best_response,
    social_cost,
)
from .grouping import (
    Group,
    GroupedInstance,
    Mass,
    expand_grouped,
    group_agents,
    limit_profiles,
    limit_value,
    solve_grouped,
)
from .kernel import SeparableQP, kkt_residual, project_box_simplex, recover_multiplier, solve_separable_qp
from .model import AgentParams, FleetInstance, load_instance, make_instance, save_instance, validate_instance
from .montecarlo import (
    HeterogeneityModel,
    SweepRecord,
    hetero_sweep,
    poa_sweep,
    sample_agents,
    valley_fill_experiment,
)
from .plotting import render_svg
from .solvers import (
    SolveReport,
    SolverConfig,
    price_of_anarchy,
    solve_nash_central,
    solve_nash_decentralized,
    solve_social,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "AgentParams",
    "DegenerateObjective",
    "FleetInstance",
    "Group",
    "GroupedInstance",
    "HeterogeneityModel",
    "InfeasibleSet",
    "Mass",
    "MaxIterExceeded",
    "PevGameError",
    "SeparableQP",
    "SolveReport",
    "SolverConfig",
    "SweepRecord",
    "agent_payoff",
    "aggregate",
    "auxiliary_cost",
    "default_c",
    "exact_best_response",
    "expand_grouped",
    "group_agents",
    "hetero_sweep",
    "kkt_residual",
    "limit_profiles",
    "limit_value",
    "load_instance",
    "make_instance",
    "nash_residual",
    "payoffs",
    "poa_sweep",
    "potential",
    "price_of_anarchy",
    "project_box_simplex",
    "recover_multiplier",
    "regularized_best_response",
    "render_svg",
    "sample_agents",
    "save_instance",
    "social_cost",
    "solve_grouped",
    "solve_nash_central",
    "solve_nash_decentralized",
    "solve_separable_qp",
    "solve_social",
    "validate_instance",
    "valley_fill_experiment",
]
