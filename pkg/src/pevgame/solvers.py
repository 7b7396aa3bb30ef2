"""Social optimum, Nash equilibrium and price of anarchy.

Both central problems are solved by cyclic exact block minimization: each
agent's block is a separable QP handed to :mod:`pevgame.kernel`. The
decentralized solver iterates the regularized best-response map instead.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import game
from .errors import DegenerateObjective, InfeasibleSet, MaxIterExceeded
from .kernel import DEFAULT_TOL, backend
from .model import FleetInstance, validate_instance

log = logging.getLogger(__name__)

SCHEDULES = ("jacobi", "gauss_seidel")
DESCENT_RTOL = 1e-11


@dataclass(frozen=True)
class SolverConfig:
    tol_x: float = 1e-9
    tol_residual: float = 1e-9
    max_iter: int = 10000
    c: float | None = None  # None: max price times fleet size
    schedule: str = "jacobi"  # decentralized mode only; central solves are Gauss-Seidel
    kernel_tol: float = DEFAULT_TOL

    def __post_init__(self):
        sched = self.schedule.replace("-", "_")
        object.__setattr__(self, "schedule", sched)
        if not self.tol_x > 0:
            raise ValueError("tol_x must be positive")
        if not self.tol_residual > 0:
            raise ValueError("tol_residual must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.c is not None and not self.c > 0:
            raise ValueError("c must be positive")
        if sched not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}")
        if not self.kernel_tol > 0:
            raise ValueError("kernel_tol must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SolveReport:
    objective: float
    iterations: int
    residual: float
    status: str
    nash_residual: float | None = None
    stationarity: float | None = None
    descent_violations: int = 0
    oscillating: bool | None = None
    method: str = ""
    history: list = field(default_factory=list, repr=False)

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def raise_for_status(self):
        if self.status == "max_iter":
            raise MaxIterExceeded(
                f"{self.method}: no convergence after {self.iterations} sweeps "
                f"(last change {self.residual:.3e})",
                report=self,
            )
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("history")
        return d


def _require_valid(instance: FleetInstance):
    outcome = validate_instance(instance)
    if not outcome.ok:
        raise InfeasibleSet("; ".join(v.message for v in outcome.violations))


def _uniform_rows(gamma, lower, upper, tol) -> np.ndarray:
    m, h = lower.shape
    z = np.empty((m, h))
    lam = np.empty(m)
    ones = np.ones((m, h))
    backend.qp_rows(ones, np.zeros((m, h)), np.ascontiguousarray(gamma, dtype=np.float64),
                    np.ascontiguousarray(lower), np.ascontiguousarray(upper), tol, z, lam)
    return z


def feasible_start(instance: FleetInstance, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Most uniform feasible profile: each row minimizes ``||z||^2`` over its set."""
    _require_valid(instance)
    return _uniform_rows(instance.gamma, instance.lower, instance.upper, tol)


@dataclass(frozen=True)
class BlockProblem:
    """Weighted block problem shared by the agent-level and grouped solvers.

    Minimizes ``sum_t p_t (sum_k w_k x_kt + x0_t)^2 + aux * sum_k w_k sum_t p_t x_kt^2``
    over rows ``x_k`` in their simplex-box sets.
    """

    prices: np.ndarray
    base_load: np.ndarray
    gamma: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    weights: np.ndarray
    aux: float

    @classmethod
    def from_instance(cls, instance: FleetInstance, aux: float) -> "BlockProblem":
        return cls(
            np.ascontiguousarray(instance.prices),
            np.ascontiguousarray(instance.base_load),
            np.ascontiguousarray(instance.gamma),
            np.ascontiguousarray(instance.lower),
            np.ascontiguousarray(instance.upper),
            np.ones(instance.m),
            float(aux),
        )

    @property
    def qscale(self) -> np.ndarray:
        return self.weights ** 2 + self.aux * self.weights

    @property
    def bscale(self) -> np.ndarray:
        return 2.0 * self.weights

    def colsum(self, x) -> np.ndarray:
        return self.weights @ x

    def objective(self, x) -> float:
        s = self.colsum(x) + self.base_load
        val = float(np.dot(self.prices, s * s))
        if self.aux:
            val += self.aux * float(self.weights @ ((x * x) @ self.prices))
        return val

    def gradient(self, x) -> np.ndarray:
        s = self.colsum(x) + self.base_load
        g = 2.0 * self.weights[:, None] * (self.prices * s)[None, :]
        if self.aux:
            g += 2.0 * self.aux * self.weights[:, None] * self.prices[None, :] * x
        return g

    def block_coefficients(self, x) -> tuple[np.ndarray, np.ndarray]:
        a = self.colsum(x)[None, :] - self.weights[:, None] * x
        q = self.qscale[:, None] * self.prices[None, :]
        b = self.bscale[:, None] * self.prices[None, :] * (a + self.base_load[None, :])
        return q, b

    def responses(self, x, tol=DEFAULT_TOL) -> np.ndarray:
        x = np.ascontiguousarray(x)
        out = np.empty_like(x)
        backend.sweep(x, self.weights, self.colsum(x), self.prices, self.base_load, self.gamma,
                      self.lower, self.upper, self.qscale, self.bscale, 0.0, False, tol, out)
        return out

    def stationarity(self, x, tol=DEFAULT_TOL) -> float:
        """Largest decrease any single block can still achieve on its own."""
        if x.shape[0] == 0:
            return 0.0
        q, b = self.block_coefficients(x)
        z = self.responses(x, tol)
        cur = np.sum(q * x * x + b * x, axis=1)
        best = np.sum(q * z * z + b * z, axis=1)
        return max(0.0, float((cur - best).max()))

    def start(self, tol=DEFAULT_TOL) -> np.ndarray:
        return _uniform_rows(self.gamma, self.lower, self.upper, tol)


def block_descent(problem: BlockProblem, config: SolverConfig, x_start=None,
                  certificate=None, method="block_descent", track_history=False):
    """Cyclic exact block minimization of ``problem`` (Gauss-Seidel order).

    Stops once the sweep sup-norm change is ``<= tol_x`` and the certificate
    is ``<= tol_residual * (1 + |objective|)``. The certificate defaults to
    block stationarity. Objective increases across a sweep are counted in
    ``descent_violations``.
    """
    if certificate is None:
        certificate = lambda x: problem.stationarity(x, config.kernel_tol)  # noqa: E731
    x = problem.start(config.kernel_tol) if x_start is None else np.array(x_start, dtype=np.float64)
    x = np.ascontiguousarray(x)
    dummy = np.empty((0, 0))
    f_prev = problem.objective(x)
    violations = 0
    history = []
    change = np.inf
    cert = None
    status = "max_iter"
    k = 0
    for k in range(1, config.max_iter + 1):
        colsum = problem.colsum(x)
        change = backend.sweep(x, problem.weights, colsum, problem.prices, problem.base_load,
                               problem.gamma, problem.lower, problem.upper, problem.qscale,
                               problem.bscale, 0.0, True, config.kernel_tol, dummy)
        f = problem.objective(x)
        if f > f_prev + DESCENT_RTOL * (1.0 + abs(f_prev)):
            violations += 1
            log.warning("%s: objective rose from %r to %r at sweep %d", method, f_prev, f, k)
        f_prev = f
        if track_history:
            history.append(f)
        if change <= config.tol_x:
            cert = certificate(x)
            if cert <= config.tol_residual * (1.0 + abs(f)):
                status = "converged"
                break
    report = SolveReport(
        objective=f_prev, iterations=k, residual=float(change), status=status,
        descent_violations=violations, method=method, history=history,
    )
    return x, report, (cert if cert is not None else certificate(x))


def solve_social(instance: FleetInstance, config: SolverConfig | None = None, x_start=None):
    """Minimize total fleet cost. Returns ``(x, report)``.

    The optimal aggregate is unique; the individual split need not be.
    """
    config = config or SolverConfig()
    _require_valid(instance)
    prob = BlockProblem.from_instance(instance, aux=0.0)
    x, report, cert = block_descent(prob, config, x_start, method="social_bcd")
    report.stationarity = cert
    return x, report


def solve_nash_central(instance: FleetInstance, config: SolverConfig | None = None, x_start=None):
    """Nash equilibrium as the unique minimizer of the auxiliary problem."""
    config = config or SolverConfig()
    _require_valid(instance)
    prob = BlockProblem.from_instance(instance, aux=1.0)
    x, report, cert = block_descent(
        prob, config, x_start,
        certificate=lambda z: game.nash_residual(z, instance, config.kernel_tol),
        method="nash_central_bcd",
    )
    report.nash_residual = cert
    report.stationarity = prob.stationarity(x, config.kernel_tol)
    return x, report


def _oscillating(changes) -> bool:
    tail = list(changes)[-10:]
    return len(tail) == 10 and all(b >= a for a, b in zip(tail, tail[1:]))


def solve_nash_decentralized(instance: FleetInstance, config: SolverConfig | None = None, x_start=None):
    """Iterate the regularized best-response map to its (unique) fixed point.

    Jacobi: every agent responds to the same snapshot. Gauss-Seidel: agents
    respond in index order to the latest profile.
    """
    config = config or SolverConfig()
    _require_valid(instance)
    c = config.c if config.c is not None else game.default_c(instance)
    x = feasible_start(instance, config.kernel_tol) if x_start is None else np.array(x_start, dtype=np.float64)
    x = np.ascontiguousarray(x)
    m = instance.m
    ones = np.ones(m)
    p, x0 = instance.prices, instance.base_load
    gamma, lb, ub = instance.gamma, np.ascontiguousarray(instance.lower), np.ascontiguousarray(instance.upper)
    jacobi = config.schedule == "jacobi"
    out = np.empty_like(x) if jacobi else np.empty((0, 0))
    changes = []
    status = "max_iter"
    cert = None
    k = 0
    for k in range(1, config.max_iter + 1):
        colsum = x.sum(axis=0)
        change = backend.sweep(x, ones, colsum, p, x0, gamma, lb, ub, ones, ones, float(c),
                               not jacobi, config.kernel_tol, out)
        if jacobi:
            x, out = out, x
        changes.append(change)
        if change <= config.tol_x:
            cert = game.nash_residual(x, instance, config.kernel_tol)
            if cert <= config.tol_residual * (1.0 + abs(game.potential(x, instance))):
                status = "converged"
                break
    if cert is None or status != "converged":
        cert = game.nash_residual(x, instance, config.kernel_tol)
    report = SolveReport(
        objective=game.potential(x, instance),
        iterations=k,
        residual=float(changes[-1]) if changes else 0.0,
        status=status,
        nash_residual=cert,
        oscillating=None if status == "converged" else _oscillating(changes),
        method=f"nash_decentralized_{config.schedule}",
    )
    return x, report


@dataclass
class PoADetails:
    x_social: np.ndarray
    x_nash: np.ndarray
    social_report: SolveReport
    nash_report: SolveReport
    F_social: float
    F_nash: float
    rel_error: float

    @property
    def status(self) -> str:
        for r in (self.social_report, self.nash_report):
            if r.status != "converged":
                return r.status
        return "converged"


def price_of_anarchy(instance: FleetInstance, config: SolverConfig | None = None):
    """Ratio of total cost at the Nash point to the social optimum.

    Returns ``(ratio, details)``; ``details.rel_error`` is ``ratio - 1``
    computed without cancellation.
    """
    config = config or SolverConfig()
    x_s, rep_s = solve_social(instance, config)
    x_n, rep_n = solve_nash_central(instance, config)
    f_s = game.social_cost(x_s, instance)
    f_n = game.social_cost(x_n, instance)
    if not f_s > 0:
        raise DegenerateObjective(f"social optimum value {f_s!r} is not positive")
    details = PoADetails(x_s, x_n, rep_s, rep_n, f_s, f_n, (f_n - f_s) / f_s)
    return f_n / f_s, details


def objective_gradient(x, instance: FleetInstance, which: str = "P") -> np.ndarray:
    """Gradient of the social (``"P"``) or auxiliary (``"Pa"``) objective."""
    return BlockProblem.from_instance(instance, aux=_aux(which)).gradient(np.asarray(x, dtype=np.float64))


def _aux(which: str) -> float:
    key = which.replace("_", "").lower()
    if key == "p":
        return 0.0
    if key == "pa":
        return 1.0
    raise ValueError(f"unknown problem {which!r}; expected 'P' or 'Pa'")


def projected_gradient_reference(instance: FleetInstance, which: str = "P", step_count: int = 10000,
                                 x_start=None, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Plain projected gradient with step ``1/L``, ``L = 2 max(p) (m + 1)``.

    Independent of the block-descent path except for the row projection.
    """
    _require_valid(instance)
    prob = BlockProblem.from_instance(instance, aux=_aux(which))
    step = 1.0 / (2.0 * float(instance.prices.max()) * (instance.m + 1))
    x = feasible_start(instance, tol) if x_start is None else np.array(x_start, dtype=np.float64)
    m, h = x.shape
    ones = np.ones((m, h))
    lam = np.empty(m)
    for _ in range(step_count):
        v = x - step * prob.gradient(x)
        z = np.empty_like(x)
        backend.qp_rows(ones, -2.0 * v, prob.gamma, prob.lower, prob.upper, tol, z, lam)
        x = z
    return x


def with_overrides(config: SolverConfig, **kw) -> SolverConfig:
    return replace(config, **{k: v for k, v in kw.items() if v is not None})
