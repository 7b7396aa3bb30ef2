"""Homogeneous groups: one decision vector per distinct agent type.

Agents with bit-identical ``(gamma, lower, upper)`` share a profile at both
the social optimum and the Nash equilibrium, so the problems can be solved
over groups with integer (or, for the large-fleet limit, fractional) weights
and expanded back.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InfeasibleSet
from .model import AgentParams, FleetInstance, validate_instance
from .solvers import BlockProblem, SolverConfig, _aux, block_descent


@dataclass(frozen=True)
class Group:
    params: AgentParams
    count: int


@dataclass(frozen=True, eq=False)
class GroupedInstance:
    prices: np.ndarray
    groups: tuple[Group, ...]
    base_load_per_agent: np.ndarray
    assignment: np.ndarray | None = None  # agent index -> group index

    def __post_init__(self):
        object.__setattr__(self, "prices", np.asarray(self.prices, dtype=np.float64))
        object.__setattr__(self, "base_load_per_agent", np.asarray(self.base_load_per_agent, dtype=np.float64))
        object.__setattr__(self, "groups", tuple(self.groups))
        if any(g.count < 1 for g in self.groups):
            raise ValueError("group counts must be at least 1")
        if len({g.params for g in self.groups}) != len(self.groups):
            raise ValueError("group parameters must be pairwise distinct")

    @property
    def m(self) -> int:
        return int(sum(g.count for g in self.groups))

    @property
    def counts(self) -> np.ndarray:
        return np.array([g.count for g in self.groups], dtype=np.float64)

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    def representative_instance(self) -> FleetInstance:
        """One agent per group; used for validation and per-group arrays."""
        return FleetInstance(self.prices, tuple(g.params for g in self.groups), self.base_load_per_agent)

    def to_dict(self) -> dict:
        return {
            "horizon": int(self.prices.shape[0]),
            "prices": self.prices.tolist(),
            "base_load_per_agent": self.base_load_per_agent.tolist(),
            "groups": [{"count": g.count, **g.params.to_dict()} for g in self.groups],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GroupedInstance":
        h = int(data["horizon"])
        groups = []
        for k, g in enumerate(data["groups"]):
            if len(g["lower"]) != h or len(g["upper"]) != h:
                raise ValueError(f"/groups/{k}: lower/upper must have {h} entries")
            groups.append(Group(AgentParams(g["gamma"], g["lower"], g["upper"]), int(g["count"])))
        base = data.get("base_load_per_agent", [0.0] * h)
        return cls(data["prices"], tuple(groups), base)


def group_agents(instance: FleetInstance) -> GroupedInstance:
    """Partition agents by exact equality of their parameters.

    Groups are ordered by first appearance.
    """
    index: dict[AgentParams, int] = {}
    counts: list[int] = []
    reps: list[AgentParams] = []
    assignment = np.empty(instance.m, dtype=np.int64)
    for i, a in enumerate(instance.agents):
        k = index.get(a)
        if k is None:
            k = index[a] = len(reps)
            reps.append(a)
            counts.append(0)
        counts[k] += 1
        assignment[i] = k
    groups = tuple(Group(a, n) for a, n in zip(reps, counts))
    return GroupedInstance(instance.prices, groups, instance.base_load_per_agent, assignment)


def _block_problem(prices, params: Sequence[AgentParams], weights, base_load, aux) -> BlockProblem:
    rep = FleetInstance(prices, tuple(params), np.zeros_like(np.asarray(prices, dtype=np.float64)))
    outcome = validate_instance(rep)
    if not outcome.ok:
        raise InfeasibleSet("; ".join(v.message for v in outcome.violations))
    return BlockProblem(
        np.ascontiguousarray(rep.prices),
        np.ascontiguousarray(base_load, dtype=np.float64),
        np.ascontiguousarray(rep.gamma),
        np.ascontiguousarray(rep.lower),
        np.ascontiguousarray(rep.upper),
        np.ascontiguousarray(weights, dtype=np.float64),
        float(aux),
    )


def grouped_problem(grouped: GroupedInstance, which: str = "P") -> BlockProblem:
    """Block problem over groups, with the group sizes as weights.

    The auxiliary penalty is weighted by group size too, so that the grouped
    objective equals the full objective at the expanded profile.
    """
    return _block_problem(
        grouped.prices,
        [g.params for g in grouped.groups],
        grouped.counts,
        grouped.m * grouped.base_load_per_agent,
        _aux(which),
    )


def grouped_objective(grouped: GroupedInstance, profiles, which: str = "P") -> float:
    return grouped_problem(grouped, which).objective(np.asarray(profiles, dtype=np.float64))


def solve_grouped(grouped: GroupedInstance, which: str = "P", config: SolverConfig | None = None):
    """Solve the grouped social (``"P"``) or auxiliary (``"Pa"``) problem.

    Returns ``(profiles, report)`` with one row per group.
    """
    config = config or SolverConfig()
    prob = grouped_problem(grouped, which)
    x, report, cert = block_descent(prob, config, method=f"grouped_{which}_bcd")
    report.stationarity = cert
    return x, report


def expand_grouped(grouped: GroupedInstance, profiles, assignment=None) -> np.ndarray:
    """Give every agent its group's profile.

    Uses the grouping's agent-to-group map when present, otherwise lays the
    groups out contiguously in order.
    """
    profiles = np.asarray(profiles, dtype=np.float64)
    if assignment is None:
        assignment = grouped.assignment
    if assignment is None:
        assignment = np.repeat(np.arange(grouped.n_groups), [g.count for g in grouped.groups])
    return profiles[np.asarray(assignment)].copy()


@dataclass(frozen=True)
class Mass:
    probability: float
    params: AgentParams


def _check_distribution(distribution: Sequence[Mass], tol=1e-9):
    total = float(sum(d.probability for d in distribution))
    if abs(total - 1.0) > tol:
        raise ValueError(f"probabilities sum to {total!r}, expected 1")
    if any(d.probability <= 0 for d in distribution):
        raise ValueError("probabilities must be positive")


def limit_profiles(distribution: Sequence[Mass], prices, base_load_per_agent,
                   config: SolverConfig | None = None):
    """Per-mass profiles of the normalized (infinite-fleet) grouped problem.

    Group sizes are replaced by the mass probabilities and the base load by
    its per-agent value. Returns ``(profiles, report)``.
    """
    config = config or SolverConfig()
    _check_distribution(distribution)
    prob = _block_problem(prices, [d.params for d in distribution],
                          [d.probability for d in distribution], base_load_per_agent, 0.0)
    x, report, cert = block_descent(prob, config, method="limit_bcd")
    report.stationarity = cert
    return x, report


def limit_value(distribution: Sequence[Mass], profiles, base_load_per_agent, prices) -> float:
    """Large-fleet value of ``F(x*) / m**2`` for the given per-mass profiles."""
    _check_distribution(distribution)
    probs = np.array([d.probability for d in distribution])
    profiles = np.asarray(profiles, dtype=np.float64)
    s = probs @ profiles + np.asarray(base_load_per_agent, dtype=np.float64)
    return float(np.dot(np.asarray(prices, dtype=np.float64), s * s))
