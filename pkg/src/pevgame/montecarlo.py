"""Random fleets and the experiment drivers built on them.

Random streams: every ``(model.seed, m, trial)`` triple gets its own
``numpy.random.Generator`` over the Philox-4x64 bit generator, keyed through
``numpy.random.SeedSequence(entropy=(seed, m, trial))``. Trials therefore
do not share state and can run in any order or process.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import game
from .errors import PevGameError
from .grouping import Mass, expand_grouped, group_agents, limit_profiles, limit_value, solve_grouped
from .model import AgentParams, FleetInstance
from .solvers import SolverConfig, price_of_anarchy

log = logging.getLogger(__name__)

RAMP_PRICES = (0.1, 1.0, 1.9, 2.8, 3.7, 4.6, 5.5, 6.4, 7.3, 8.2, 9.1, 10.0)
DEFAULT_M_VALUES = (5, 10, 20, 50, 100, 200)
CSV_FIELDS = (
    "m", "trial", "seed", "F_social", "F_nash", "rel_error", "poa",
    "normalized_value", "iters_social", "iters_nash", "status",
)
KINDS = ("continuous_uniform_gamma", "discrete_masses")


@dataclass(frozen=True, eq=False)
class HeterogeneityModel:
    kind: str
    seed: int = 0
    gamma_support: tuple[float, float] | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    masses: tuple[Mass, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown heterogeneity kind {self.kind!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "seed", int(self.seed))
        if self.kind == "continuous_uniform_gamma":
            a, b = map(float, self.gamma_support)
            if not b > a >= 0:
                raise ValueError("gamma support must satisfy 0 <= a < b")
            lo = np.asarray(self.lower, dtype=np.float64)
            hi = np.asarray(self.upper, dtype=np.float64)
            if lo.shape != hi.shape or lo.ndim != 1:
                raise ValueError("lower and upper must be vectors of equal length")
            if np.any(lo < 0) or np.any(lo > hi):
                raise ValueError("need 0 <= lower <= upper")
            if lo.sum() > a + 1e-9 or hi.sum() < b - 1e-9:
                raise ValueError("box profiles cannot accommodate every gamma in the support")
            object.__setattr__(self, "gamma_support", (a, b))
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)
        else:
            masses = tuple(self.masses)
            if not masses:
                raise ValueError("discrete model needs at least one mass")
            probs = np.array([mm.probability for mm in masses])
            if np.any(probs <= 0) or abs(probs.sum() - 1.0) > 1e-12:
                raise ValueError("mass probabilities must be positive and sum to 1")
            for k, mm in enumerate(masses):
                a = mm.params
                if np.any(a.lower < 0) or np.any(a.lower > a.upper) or a.gamma < 0 or not (
                    a.lower.sum() - 1e-9 <= a.gamma <= a.upper.sum() + 1e-9
                ):
                    raise ValueError(f"mass {k} has an empty constraint set")
            object.__setattr__(self, "masses", masses)

    @property
    def horizon(self) -> int:
        if self.kind == "continuous_uniform_gamma":
            return self.lower.shape[0]
        return self.masses[0].params.horizon

    @classmethod
    def continuous(cls, a, b, lower, upper, seed=0):
        return cls("continuous_uniform_gamma", seed, (a, b), lower, upper)

    @classmethod
    def discrete(cls, masses: Sequence[Mass], seed=0):
        return cls("discrete_masses", seed, masses=tuple(masses))

    @classmethod
    def from_dict(cls, d: dict) -> "HeterogeneityModel":
        seed = d.get("seed", 0)
        if d["kind"] == "continuous_uniform_gamma":
            return cls.continuous(*d["gamma_support"], d["lower"], d["upper"], seed=seed)
        masses = [Mass(float(x["probability"]), AgentParams(x["gamma"], x["lower"], x["upper"]))
                  for x in d["masses"]]
        return cls.discrete(masses, seed=seed)

    def to_dict(self) -> dict:
        if self.kind == "continuous_uniform_gamma":
            return {"kind": self.kind, "seed": self.seed, "gamma_support": list(self.gamma_support),
                    "lower": self.lower.tolist(), "upper": self.upper.tolist()}
        return {"kind": self.kind, "seed": self.seed,
                "masses": [{"probability": mm.probability, **mm.params.to_dict()} for mm in self.masses]}

    def with_seed(self, seed: int) -> "HeterogeneityModel":
        return HeterogeneityModel(self.kind, seed, self.gamma_support, self.lower, self.upper, self.masses)


def uniform_gamma_model(seed=0, h=12) -> HeterogeneityModel:
    """gamma ~ U[0, 12], unit box per slot."""
    return HeterogeneityModel.continuous(0.0, 12.0, np.zeros(h), np.ones(h), seed=seed)


def gamma_grid_model(seed=0, h=12, spacing=0.01, top=12.0) -> HeterogeneityModel:
    """Equiprobable gamma masses on a regular grid over [0, top], unit box."""
    n = int(round(top / spacing)) + 1
    gammas = np.round(np.arange(n) * spacing, 10)
    lo, hi = np.zeros(h), np.ones(h)
    return HeterogeneityModel.discrete([Mass(1.0 / n, AgentParams(g, lo, hi)) for g in gammas], seed=seed)


def trial_seed_sequence(seed: int, m: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=(int(seed), int(m), int(trial)))


def trial_seed(seed: int, m: int, trial: int) -> int:
    """64-bit integer identifying a trial's stream (reported in the CSV)."""
    return int(trial_seed_sequence(seed, m, trial).generate_state(1, np.uint64)[0])


def trial_rng(seed: int, m: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(trial_seed_sequence(seed, m, trial)))


def sample_agents(model: HeterogeneityModel, m: int, trial: int = 0) -> tuple[AgentParams, ...]:
    """Draw ``m`` i.i.d. agents; deterministic in ``(model.seed, m, trial)``."""
    if m < 1:
        raise ValueError("m must be at least 1")
    rng = trial_rng(model.seed, m, trial)
    if model.kind == "continuous_uniform_gamma":
        a, b = model.gamma_support
        g = rng.uniform(a, b, size=m)
        while np.any(g <= 0.0):
            bad = g <= 0.0
            g[bad] = rng.uniform(a, b, size=int(bad.sum()))
        return tuple(AgentParams(float(x), model.lower, model.upper) for x in g)
    probs = np.array([mm.probability for mm in model.masses])
    idx = rng.choice(len(model.masses), size=m, p=probs / probs.sum())
    return tuple(model.masses[k].params for k in idx)


@dataclass
class SweepRecord:
    m: int
    trial: int
    seed: int
    F_social: float
    F_nash: float
    rel_error: float
    poa: float
    normalized_value: float
    iters_social: int
    iters_nash: int
    status: str
    # audit fields, not written to CSV
    conservation_error: float = 0.0
    descent_violations: int = 0
    nash_residual: float = float("nan")
    limit_at_trial: float = float("nan")

    def row(self) -> list[str]:
        return [_fmt(getattr(self, k)) for k in CSV_FIELDS]


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(v).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _failed(m, trial, seed, status) -> SweepRecord:
    nan = float("nan")
    return SweepRecord(m, trial, seed, nan, nan, nan, nan, nan, 0, 0, status)


def _conservation(x, instance) -> float:
    return float(abs(x.sum() - instance.gamma.sum()))


def _poa_task(args) -> SweepRecord:
    model, prices, base, m, trial, config = args
    seed = trial_seed(model.seed, m, trial)
    try:
        inst = FleetInstance(prices, sample_agents(model, m, trial), base)
        ratio, d = price_of_anarchy(inst, config)
    except PevGameError as exc:
        log.warning("m=%d trial=%d failed: %s", m, trial, exc)
        return _failed(m, trial, seed, "infeasible" if isinstance(exc, ValueError) else "error")
    return SweepRecord(
        m, trial, seed, d.F_social, d.F_nash, d.rel_error, ratio, d.F_social / m**2,
        d.social_report.iterations, d.nash_report.iterations, d.status,
        conservation_error=max(_conservation(d.x_social, inst), _conservation(d.x_nash, inst)),
        descent_violations=d.social_report.descent_violations + d.nash_report.descent_violations,
        nash_residual=game.nash_residual(d.x_nash, inst, config.kernel_tol),
    )


def _grouped_task(args) -> SweepRecord:
    model, prices, base, m, trial, config = args
    seed = trial_seed(model.seed, m, trial)
    try:
        inst = FleetInstance(prices, sample_agents(model, m, trial), base)
        grouped = group_agents(inst)
        xs_bar, rs = solve_grouped(grouped, "P", config)
        xn_bar, rn = solve_grouped(grouped, "Pa", config)
    except PevGameError as exc:
        log.warning("m=%d trial=%d failed: %s", m, trial, exc)
        return _failed(m, trial, seed, "infeasible" if isinstance(exc, ValueError) else "error")
    xs = expand_grouped(grouped, xs_bar)
    xn = expand_grouped(grouped, xn_bar)
    f_s = game.social_cost(xs, inst)
    f_n = game.social_cost(xn, inst)
    status = rs.status if rs.status != "converged" else rn.status
    limit_here = float("nan")
    if model.kind == "discrete_masses":
        # per-mass profile from this trial's grouped minimizer (masses absent from the draw get none)
        keyed = {g.params: xs_bar[k] for k, g in enumerate(grouped.groups)}
        if all(mm.params in keyed for mm in model.masses):
            prof = np.array([keyed[mm.params] for mm in model.masses])
            limit_here = limit_value(model.masses, prof, base, prices)
    return SweepRecord(
        m, trial, seed, f_s, f_n, (f_n - f_s) / f_s, f_n / f_s, f_s / m**2,
        rs.iterations, rn.iterations, status,
        conservation_error=max(_conservation(xs, inst), _conservation(xn, inst)),
        descent_violations=rs.descent_violations + rn.descent_violations,
        nash_residual=game.nash_residual(xn, inst, config.kernel_tol),
        limit_at_trial=limit_here,
    )


def _run(task, jobs: list, workers: int) -> list[SweepRecord]:
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(task, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        records = [task(j) for j in jobs]
    return sorted(records, key=lambda r: (r.m, r.trial))


def _jobs(model, prices, base, m_values, trials, config):
    if trials < 1:
        raise ValueError("trials must be at least 1")
    prices = np.asarray(prices, dtype=np.float64)
    base = np.zeros_like(prices) if base is None else np.asarray(base, dtype=np.float64)
    if model.horizon != prices.shape[0] or base.shape != prices.shape:
        raise ValueError("model, prices and base load must share the horizon")
    return [(model, prices, base, int(m), t, config) for m in m_values for t in range(trials)]


def poa_sweep(model: HeterogeneityModel, m_values: Iterable[int] = DEFAULT_M_VALUES, trials: int = 100,
              config: SolverConfig | None = None, prices=RAMP_PRICES, base_load_per_agent=None,
              workers: int = 1) -> list[SweepRecord]:
    """Social optimum vs Nash equilibrium over random fleets.

    One record per ``(m, trial)``, sorted by that key. Solver failures are
    recorded in the row's status rather than raised.
    """
    config = config or SolverConfig()
    jobs = _jobs(model, prices, base_load_per_agent, m_values, trials, config)
    return _run(_poa_task, jobs, workers)


@dataclass
class LimitReport:
    value: float
    profiles: np.ndarray
    finite_m: dict = field(default_factory=dict)  # m -> mean limit formula at the trial minimizers
    gap: dict = field(default_factory=dict)  # m -> finite_m[m] - value
    mean: dict = field(default_factory=dict)  # m -> mean normalized value
    std: dict = field(default_factory=dict)  # m -> sample std of normalized value

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "profiles_source": "normalized_problem",
            "profiles": self.profiles.tolist(),
            "finite_m_value": {str(k): v for k, v in self.finite_m.items()},
            "gap": {str(k): v for k, v in self.gap.items()},
            "mean_normalized_value": {str(k): v for k, v in self.mean.items()},
            "std_normalized_value": {str(k): v for k, v in self.std.items()},
        }


def hetero_sweep(model: HeterogeneityModel, m_values: Iterable[int] = (25, 100, 400), trials: int = 100,
                 config: SolverConfig | None = None, prices=RAMP_PRICES, base_load_per_agent=None,
                 workers: int = 1) -> tuple[list[SweepRecord], LimitReport]:
    """Concentration of ``F(x*)/m**2`` for a discrete heterogeneity model.

    Trials are solved through the grouped problems. The limit report carries
    the large-fleet value from the normalized grouped problem and, per ``m``,
    the same formula evaluated at each trial's own grouped minimizer.
    """
    if model.kind != "discrete_masses":
        raise ValueError("hetero_sweep needs a discrete_masses model")
    config = config or SolverConfig()
    jobs = _jobs(model, prices, base_load_per_agent, m_values, trials, config)
    records = _run(_grouped_task, jobs, workers)
    base = jobs[0][2]
    prof, _ = limit_profiles(model.masses, jobs[0][1], base, config)
    report = LimitReport(limit_value(model.masses, prof, base, jobs[0][1]), prof)
    for m in sorted({r.m for r in records}):
        vals = np.array([r.normalized_value for r in records if r.m == m])
        fin = np.array([r.limit_at_trial for r in records if r.m == m])
        report.mean[m] = float(np.nanmean(vals))
        report.std[m] = float(np.nanstd(vals, ddof=1)) if vals.size > 1 else 0.0
        if np.isfinite(fin).any():
            report.finite_m[m] = float(np.nanmean(fin))
            report.gap[m] = report.finite_m[m] - report.value
    return records, report


@dataclass
class ValleyProfile:
    m: int
    base: np.ndarray
    social: np.ndarray  # (1/m) sum_i x_it + base_t at the social optimum
    nash: np.ndarray
    mean_gamma: float
    record: SweepRecord

    @property
    def pev_social(self) -> np.ndarray:
        return self.social - self.base

    @property
    def pev_nash(self) -> np.ndarray:
        return self.nash - self.base


def valley_fill_experiment(model: HeterogeneityModel, m_values: Iterable[int], base_load_per_agent,
                           config: SolverConfig | None = None, prices=None, trial: int = 0) -> list[ValleyProfile]:
    """Normalized total demand at the social optimum and at the Nash point.

    ``prices`` defaults to a flat unit profile.
    """
    config = config or SolverConfig()
    base = np.asarray(base_load_per_agent, dtype=np.float64)
    prices = np.ones_like(base) if prices is None else np.asarray(prices, dtype=np.float64)
    out = []
    for m in m_values:
        m = int(m)
        inst = FleetInstance(prices, sample_agents(model, m, trial), base)
        ratio, d = price_of_anarchy(inst, config)
        rec = SweepRecord(
            m, trial, trial_seed(model.seed, m, trial), d.F_social, d.F_nash, d.rel_error, ratio,
            d.F_social / m**2, d.social_report.iterations, d.nash_report.iterations, d.status,
            conservation_error=max(_conservation(d.x_social, inst), _conservation(d.x_nash, inst)),
            descent_violations=d.social_report.descent_violations + d.nash_report.descent_violations,
        )
        out.append(ValleyProfile(
            m, base.copy(), d.x_social.sum(axis=0) / m + base, d.x_nash.sum(axis=0) / m + base,
            float(inst.gamma.mean()), rec,
        ))
    return out


def summarize(records: Sequence[SweepRecord], attr: str = "rel_error") -> dict[int, dict]:
    """Boxplot statistics per fleet size (whiskers at 1.5 IQR)."""
    out = {}
    for m in sorted({r.m for r in records}):
        v = np.array([getattr(r, attr) for r in records if r.m == m], dtype=np.float64)
        v = v[np.isfinite(v)]
        if v.size == 0:
            continue
        q25, med, q75 = np.percentile(v, [25, 50, 75])
        # slack keeps round-off twins of a repeated value out of the outliers
        fence = 1.5 * (q75 - q25) + 1e-12 * max(1.0, abs(float(med)))
        inside = v[(v >= q25 - fence) & (v <= q75 + fence)]
        out[m] = {
            "n": int(v.size),
            "mean": float(v.mean()),
            "median": float(med),
            "q25": float(q25),
            "q75": float(q75),
            "whisker_low": float(inside.min()),
            "whisker_high": float(inside.max()),
            "outliers": sorted(float(x) for x in v[(v < inside.min()) | (v > inside.max())]),
        }
    return out


def loglog_slope(records: Sequence[SweepRecord], attr: str = "rel_error") -> float:
    """Least-squares slope of log(mean) against log(m)."""
    stats = summarize(records, attr)
    ms = [m for m, s in stats.items() if s["mean"] > 0]
    if len(ms) < 2:
        return math.nan
    x = np.log(np.array(ms, dtype=np.float64))
    y = np.log(np.array([stats[m]["mean"] for m in ms]))
    return float(np.polyfit(x, y, 1)[0])


def write_csv(records: Sequence[SweepRecord], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in records:
        w.writerow(r.row())


def records_to_csv(records: Sequence[SweepRecord]) -> str:
    buf = io.StringIO()
    write_csv(records, buf)
    return buf.getvalue()


def read_csv(fh) -> list[SweepRecord]:
    rows = []
    for d in csv.DictReader(fh):
        rows.append(SweepRecord(
            int(d["m"]), int(d["trial"]), int(d["seed"]), float(d["F_social"]), float(d["F_nash"]),
            float(d["rel_error"]), float(d["poa"]), float(d["normalized_value"]),
            int(d["iters_social"]), int(d["iters_nash"]), d["status"],
        ))
    return rows
