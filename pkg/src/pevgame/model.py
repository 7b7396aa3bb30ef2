"""Instances of the charging game and their validation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

FEAS_TOL = 1e-9


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64).reshape(-1)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class AgentParams:
    """Energy requirement and per-slot rate limits of one vehicle."""

    gamma: float
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "lower", _frozen(self.lower))
        object.__setattr__(self, "upper", _frozen(self.upper))

    @property
    def horizon(self) -> int:
        return self.lower.shape[0]

    def key(self) -> tuple:
        # bit-exact identity, used for grouping
        return (np.float64(self.gamma).tobytes(), self.lower.tobytes(), self.upper.tobytes())

    def __eq__(self, other):
        if not isinstance(other, AgentParams):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def to_dict(self) -> dict:
        return {"gamma": self.gamma, "lower": self.lower.tolist(), "upper": self.upper.tolist()}


@dataclass(frozen=True, eq=False)
class FleetInstance:
    prices: np.ndarray
    agents: tuple[AgentParams, ...]
    base_load_per_agent: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "prices", _frozen(self.prices))
        object.__setattr__(self, "base_load_per_agent", _frozen(self.base_load_per_agent))
        object.__setattr__(self, "agents", tuple(self.agents))

    @property
    def m(self) -> int:
        return len(self.agents)

    @property
    def h(self) -> int:
        return self.prices.shape[0]

    @cached_property
    def gamma(self) -> np.ndarray:
        return _frozen([a.gamma for a in self.agents])

    @cached_property
    def lower(self) -> np.ndarray:
        arr = np.array([a.lower for a in self.agents], dtype=np.float64).reshape(self.m, -1)
        arr.flags.writeable = False
        return arr

    @cached_property
    def upper(self) -> np.ndarray:
        arr = np.array([a.upper for a in self.agents], dtype=np.float64).reshape(self.m, -1)
        arr.flags.writeable = False
        return arr

    @cached_property
    def base_load(self) -> np.ndarray:
        return realized_base_load(self)

    def to_dict(self) -> dict:
        return {
            "horizon": self.h,
            "prices": self.prices.tolist(),
            "base_load_per_agent": self.base_load_per_agent.tolist(),
            "agents": [a.to_dict() for a in self.agents],
        }


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    agent: int | None = None
    slot: int | None = None


@dataclass(frozen=True)
class ValidationOutcome:
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def codes(self) -> list[str]:
        return [v.code for v in self.violations]


def realized_base_load(instance: FleetInstance) -> np.ndarray:
    """Non-PEV demand per slot, scaled linearly with the fleet size."""
    return _frozen(instance.m * instance.base_load_per_agent)


def validate_instance(instance: FleetInstance, tol: float = FEAS_TOL) -> ValidationOutcome:
    """Check every invariant of ``instance``; violations are returned, not raised.

    ``Violation.agent`` and ``Violation.slot`` are 0-based. Messages name an
    agent's constraint set with the 1-based ``X^k`` of the usual notation.
    """
    out: list[Violation] = []
    p = instance.prices
    h = p.shape[0]
    if h < 1:
        out.append(Violation("shape", "horizon must be at least 1"))
    for t in np.flatnonzero(~np.isfinite(p) | (p <= 0)):
        out.append(Violation("nonpositive_price", f"nonpositive price at t={t}", slot=int(t)))
    x0 = instance.base_load_per_agent
    if x0.shape[0] != h:
        out.append(Violation("shape", f"base load has length {x0.shape[0]}, expected {h}"))
    else:
        for t in np.flatnonzero(~np.isfinite(x0) | (x0 < 0)):
            out.append(Violation("negative_base_load", f"negative base load at t={t}", slot=int(t)))

    for i, a in enumerate(instance.agents):
        if a.lower.shape[0] != h or a.upper.shape[0] != h:
            out.append(Violation("shape", f"agent {i}: profiles must have length {h}", agent=i))
            continue
        if not (np.isfinite(a.gamma) and np.all(np.isfinite(a.lower)) and np.all(np.isfinite(a.upper))):
            out.append(Violation("nonfinite", f"agent {i}: non-finite parameter", agent=i))
            continue
        if a.gamma < 0:
            out.append(Violation("negative_gamma", f"agent {i}: gamma={a.gamma!r} < 0", agent=i))
        for t in np.flatnonzero(a.lower < 0):
            out.append(Violation("negative_lower", f"agent {i}: lower bound < 0 at t={t}", agent=i, slot=int(t)))
        bad = np.flatnonzero(a.lower > a.upper)
        for t in bad:
            out.append(Violation("bound_order", f"agent {i}: lower > upper at t={t}", agent=i, slot=int(t)))
        if not bad.size:
            lo, hi = float(a.lower.sum()), float(a.upper.sum())
            if a.gamma < lo - tol or a.gamma > hi + tol:
                out.append(
                    Violation(
                        "empty_set",
                        f"empty X^{i + 1} (agent index {i}): gamma={a.gamma!r} outside [{lo!r}, {hi!r}]",
                        agent=i,
                    )
                )
    return ValidationOutcome(tuple(out))


def is_feasible(x, instance: FleetInstance, tol: float = FEAS_TOL) -> bool:
    """True iff every row of ``x`` lies in its agent's constraint set."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (instance.m, instance.h):
        return False
    if np.any(x < instance.lower) or np.any(x > instance.upper):
        return False
    return bool(np.all(np.abs(x.sum(axis=1) - instance.gamma) <= tol))


def make_instance(
    prices: Sequence[float],
    agents: Sequence[AgentParams],
    base_load_per_agent: Sequence[float] | None = None,
) -> FleetInstance:
    if base_load_per_agent is None:
        base_load_per_agent = np.zeros(len(prices))
    return FleetInstance(prices, tuple(agents), base_load_per_agent)


def instance_from_dict(data: dict) -> FleetInstance:
    """Build an instance from the JSON instance schema.

    Raises ``ValueError`` on structural problems; value-level checks are left
    to :func:`validate_instance`.
    """
    missing = [k for k in ("horizon", "prices", "agents") if k not in data]
    if missing:
        raise ValueError(f"instance is missing field(s): {', '.join(missing)}")
    h = int(data["horizon"])
    base = data.get("base_load_per_agent", [0.0] * h)
    if len(data["prices"]) != h:
        raise ValueError(f"/prices: expected {h} entries, got {len(data['prices'])}")
    if len(base) != h:
        raise ValueError(f"/base_load_per_agent: expected {h} entries, got {len(base)}")
    agents = []
    for i, a in enumerate(data["agents"]):
        for k in ("gamma", "lower", "upper"):
            if k not in a:
                raise ValueError(f"/agents/{i}: missing field {k!r}")
        if len(a["lower"]) != h or len(a["upper"]) != h:
            raise ValueError(f"/agents/{i}: lower/upper must have {h} entries")
        agents.append(AgentParams(a["gamma"], a["lower"], a["upper"]))
    return FleetInstance(data["prices"], tuple(agents), base)


def load_instance(path) -> FleetInstance:
    return instance_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def save_instance(instance: FleetInstance, path) -> None:
    Path(path).write_text(json.dumps(instance.to_dict(), indent=2) + "\n", encoding="utf-8")
