"""Command-line entry point: ``pevgame --config experiment.json``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import jsonschema
import numpy as np

from . import game
from .errors import PevGameError
from .model import FleetInstance, instance_from_dict, validate_instance
from .montecarlo import (
    DEFAULT_M_VALUES,
    HeterogeneityModel,
    SweepRecord,
    hetero_sweep,
    loglog_slope,
    poa_sweep,
    summarize,
    valley_fill_experiment,
    write_csv,
)
from .plotting import render_svg
from .solvers import SolverConfig, price_of_anarchy, solve_nash_decentralized

log = logging.getLogger("pevgame")

EXPERIMENTS = ("solve", "poa-sweep", "hetero-sweep", "valley-fill")

_vector = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_agent = {
    "type": "object",
    "required": ["gamma", "lower", "upper"],
    "properties": {"gamma": {"type": "number"}, "lower": _vector, "upper": _vector},
}
_instance = {
    "type": "object",
    "required": ["horizon", "prices", "agents"],
    "properties": {
        "horizon": {"type": "integer", "minimum": 1},
        "prices": _vector,
        "base_load_per_agent": _vector,
        "agents": {"type": "array", "items": _agent, "minItems": 1},
    },
}
_model = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["continuous_uniform_gamma", "discrete_masses"]},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "gamma_support": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "lower": _vector,
        "upper": _vector,
        "masses": {
            "type": "array",
            "minItems": 1,
            "items": {**_agent, "required": ["probability", "gamma", "lower", "upper"],
                      "properties": {**_agent["properties"], "probability": {"type": "number"}}},
        },
    },
    "allOf": [
        {"if": {"properties": {"kind": {"const": "continuous_uniform_gamma"}}},
         "then": {"required": ["gamma_support", "lower", "upper"]}},
        {"if": {"properties": {"kind": {"const": "discrete_masses"}}}, "then": {"required": ["masses"]}},
    ],
}
CONFIG_SCHEMA = {
    "type": "object",
    "required": ["experiment"],
    "properties": {
        "experiment": {"enum": list(EXPERIMENTS)},
        "instance": {"oneOf": [{"type": "string"}, _instance]},
        "prices": _vector,
        "base_load_per_agent": _vector,
        "model": _model,
        "m_values": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "trials": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "tol_x": {"type": "number", "exclusiveMinimum": 0},
                "tol_residual": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 1},
                "c": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "schedule": {"enum": ["jacobi", "gauss_seidel", "gauss-seidel"]},
            },
        },
        "decentralized": {"type": "boolean"},
        "plot": {"type": "boolean"},
        "workers": {"type": "integer", "minimum": 1},
        "output_dir": {"type": "string"},
    },
    "allOf": [
        {"if": {"properties": {"experiment": {"const": "solve"}}}, "then": {"required": ["instance"]}},
        {"if": {"properties": {"experiment": {"enum": ["poa-sweep", "hetero-sweep"]}}},
         "then": {"required": ["prices", "model"]}},
        {"if": {"properties": {"experiment": {"const": "valley-fill"}}},
         "then": {"required": ["model", "base_load_per_agent"]}},
        {"if": {"properties": {"experiment": {"const": "hetero-sweep"}}},
         "then": {"properties": {"model": {"properties": {"kind": {"const": "discrete_masses"}}}}}},
    ],
}


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        super().__init__("invalid configuration:\n  " + "\n  ".join(errors))
        self.errors = errors


@dataclass
class ExperimentConfig:
    experiment: str
    solver: SolverConfig = field(default_factory=SolverConfig)
    instance: FleetInstance | None = None
    model: HeterogeneityModel | None = None
    prices: np.ndarray | None = None
    base_load_per_agent: np.ndarray | None = None
    m_values: tuple[int, ...] = DEFAULT_M_VALUES
    trials: int = 100
    seed: int = 0
    plot: bool = False
    decentralized: bool = False
    workers: int = 1
    output_dir: Path | None = None

    def echo(self) -> dict:
        """Effective settings, with defaults filled in."""
        solver = self.solver.to_dict()
        if solver["c"] is None:
            solver["c"] = game.default_c(self.instance) if self.instance is not None else "max(prices) * m"
        d = {"experiment": self.experiment, "solver": solver, "seed": self.seed, "plot": self.plot}
        if self.experiment == "solve":
            d["instance"] = self.instance.to_dict()
            d["decentralized"] = self.decentralized
        else:
            d.update(model=self.model.to_dict(), m_values=list(self.m_values), workers=self.workers)
            if self.experiment != "valley-fill":
                d["trials"] = self.trials
            if self.prices is not None:
                d["prices"] = self.prices.tolist()
            if self.base_load_per_agent is not None:
                d["base_load_per_agent"] = self.base_load_per_agent.tolist()
        return d


def _pointer(path) -> str:
    return "/" + "/".join(str(p) for p in path)


def _leaves(error) -> list:
    """Innermost errors of a ``oneOf``/``anyOf`` failure, from the branch that fits best."""
    if not error.context:
        return [error]
    branches: dict = {}
    for c in error.context:
        branches.setdefault(c.relative_schema_path[0], []).append(c)
    # a branch rejected on the value's type at its root is the wrong reading
    fitting = [b for b in branches.values()
               if not any(c.validator == "type" and not c.relative_path for c in b)]
    best = min(fitting or branches.values(), key=len)
    return [leaf for c in best for leaf in _leaves(c)]


def _schema_errors(data) -> list[str]:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    out = []
    for e in validator.iter_errors(data):
        for leaf in _leaves(e):
            out.append(f"{_pointer(leaf.absolute_path)}: {leaf.message}")
    return sorted(set(out))


def config_from_dict(data: dict, base_dir: Path | None = None) -> ExperimentConfig:
    errors = _schema_errors(data)
    if errors:
        raise ConfigError(errors)
    base_dir = base_dir or Path.cwd()
    exp = data["experiment"]
    solver = SolverConfig(**{k: v for k, v in data.get("solver", {}).items()})
    cfg = ExperimentConfig(exp, solver=solver, plot=data.get("plot", False),
                           decentralized=data.get("decentralized", False), workers=data.get("workers", 1),
                           seed=data.get("seed", 0), trials=data.get("trials", 100))
    if "output_dir" in data:
        cfg.output_dir = base_dir / data["output_dir"]
    try:
        if exp == "solve":
            inst = data["instance"]
            if isinstance(inst, str):
                path = base_dir / inst
                if not path.is_file():
                    raise ConfigError([f"/instance: file not found: {path}"])
                inst = json.loads(path.read_text(encoding="utf-8"))
                # pointers already start at /instance
                errs = [f"{path.name}: {e}" for e in _schema_errors({"experiment": "solve", "instance": inst})]
                if errs:
                    raise ConfigError(errs)
            cfg.instance = instance_from_dict(inst)
            outcome = validate_instance(cfg.instance)
            if not outcome.ok:
                raise ConfigError([f"/instance: {v.message}" for v in outcome.violations])
        else:
            model = dict(data["model"])
            model.setdefault("seed", cfg.seed)
            if "seed" in data and "seed" not in data["model"]:
                model["seed"] = data["seed"]
            cfg.model = HeterogeneityModel.from_dict(model)
            cfg.seed = cfg.model.seed
            h = cfg.model.horizon
            if "prices" in data:
                cfg.prices = np.asarray(data["prices"], dtype=np.float64)
            if "base_load_per_agent" in data:
                cfg.base_load_per_agent = np.asarray(data["base_load_per_agent"], dtype=np.float64)
            errs = []
            for name in ("prices", "base_load_per_agent"):
                v = getattr(cfg, name)
                if v is not None and v.shape[0] != h:
                    errs.append(f"/{name}: expected {h} entries to match the model horizon, got {v.shape[0]}")
            if cfg.prices is not None and np.any(cfg.prices <= 0):
                errs.append("/prices: every price must be strictly positive")
            if errs:
                raise ConfigError(errs)
            if "m_values" in data:
                cfg.m_values = tuple(int(m) for m in data["m_values"])
            elif exp == "hetero-sweep":
                cfg.m_values = (25, 100, 400)
            elif exp == "valley-fill":
                cfg.m_values = (5, 100)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError([f"/: {exc}"]) from exc
    return cfg


def parse_config(path) -> ExperimentConfig:
    """Read and validate an experiment configuration file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError([f"/: not valid JSON ({exc})"]) from exc
    return config_from_dict(data, base_dir=path.parent)


def _write(path: Path, text: str, written: list[Path]):
    path.write_text(text, encoding="utf-8")
    written.append(path)


def _write_records(path: Path, records, written):
    with path.open("w", encoding="utf-8", newline="") as fh:
        write_csv(records, fh)
    written.append(path)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, allow_nan=True) + "\n"


def _run_solve(cfg: ExperimentConfig, out: Path, written):
    inst = cfg.instance
    ratio, d = price_of_anarchy(inst, cfg.solver)
    m = inst.m
    rec = SweepRecord(m, 0, cfg.seed, d.F_social, d.F_nash, d.rel_error, ratio, d.F_social / m**2,
                      d.social_report.iterations, d.nash_report.iterations, d.status)
    solution = {
        "social": {"x": d.x_social.tolist(), "report": d.social_report.to_dict(),
                   "social_cost": d.F_social},
        "nash": {"x": d.x_nash.tolist(), "report": d.nash_report.to_dict(), "social_cost": d.F_nash},
        "price_of_anarchy": ratio,
        "rel_error": d.rel_error,
    }
    ok = d.status == "converged"
    if cfg.decentralized:
        xd, rd = solve_nash_decentralized(inst, cfg.solver)
        solution["nash_decentralized"] = {"x": xd.tolist(), "report": rd.to_dict(),
                                          "sup_distance_to_central": float(np.abs(xd - d.x_nash).max())}
        ok = ok and rd.converged
    _write(out / "solution.json", _json(solution), written)
    _write_records(out / "results.csv", [rec], written)
    return ok


def _run_poa(cfg, out, written):
    records = poa_sweep(cfg.model, cfg.m_values, cfg.trials, cfg.solver, cfg.prices,
                        cfg.base_load_per_agent, cfg.workers)
    _write_records(out / "results.csv", records, written)
    summary = {"rel_error": {str(m): s for m, s in summarize(records).items()},
               "loglog_slope": loglog_slope(records)}
    _write(out / "summary.json", _json(summary), written)
    if cfg.plot:
        _write(out / "figure.svg", render_svg(records, "poa-sweep"), written)
    return all(r.status == "converged" for r in records)


def _run_hetero(cfg, out, written):
    records, limit = hetero_sweep(cfg.model, cfg.m_values, cfg.trials, cfg.solver, cfg.prices,
                                  cfg.base_load_per_agent, cfg.workers)
    _write_records(out / "results.csv", records, written)
    summary = {"normalized_value": {str(m): s for m, s in summarize(records, "normalized_value").items()},
               "limit": limit.to_dict()}
    _write(out / "summary.json", _json(summary), written)
    if cfg.plot:
        _write(out / "figure.svg", render_svg(records, "hetero-sweep"), written)
    return all(r.status == "converged" for r in records)


def _run_valley(cfg, out, written):
    profiles = valley_fill_experiment(cfg.model, cfg.m_values, cfg.base_load_per_agent, cfg.solver,
                                      cfg.prices)
    records = [p.record for p in profiles]
    _write_records(out / "results.csv", records, written)
    lines = ["m,t,non_pev,social,nash"]
    for p in profiles:
        for t in range(p.base.shape[0]):
            lines.append(f"{p.m},{t},{float(p.base[t])!r},{float(p.social[t])!r},{float(p.nash[t])!r}")
    _write(out / "profiles.csv", "\n".join(lines) + "\n", written)
    if cfg.plot:
        _write(out / "figure.svg", render_svg(profiles, "valley-fill"), written)
    return all(r.status == "converged" for r in records)


_RUNNERS = {"solve": _run_solve, "poa-sweep": _run_poa, "hetero-sweep": _run_hetero, "valley-fill": _run_valley}


def run(cfg: ExperimentConfig, out_dir=None, stdout=None) -> int:
    """Execute an experiment; returns 0 (ok), 1 (fatal) or 2 (some trials failed)."""
    stdout = stdout or sys.stdout
    out = Path(out_dir) if out_dir is not None else (cfg.output_dir or Path.cwd())
    written: list[Path] = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        ok = _RUNNERS[cfg.experiment](cfg, out, written)
    except (PevGameError, ValueError, OSError) as exc:
        log.error("%s failed: %s", cfg.experiment, exc)
        code = 1
    else:
        code = 0 if ok else 2
        if not ok:
            log.warning("some trials did not converge; see the status column of results.csv")
    for p in written:
        print(p, file=stdout)
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pevgame", description="PEV charging game solver and experiment harness")
    ap.add_argument("--config", required=True, help="experiment configuration (JSON)")
    ap.add_argument("--out-dir", help="output directory (default: config output_dir or cwd)")
    ap.add_argument("--seed", type=int, help="override the heterogeneity model seed")
    ap.add_argument("--plot", action="store_true", help="also write figure.svg")
    ap.add_argument("--schedule", choices=["jacobi", "gauss-seidel"], help="decentralized update schedule")
    ap.add_argument("--workers", type=int, help="processes for independent trials")
    ap.add_argument("--quiet", action="store_true", help="only report errors")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 1
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            print("config error: --seed must be a 64-bit unsigned integer", file=sys.stderr)
            return 1
        cfg.seed = args.seed
        if cfg.model is not None:
            cfg.model = cfg.model.with_seed(args.seed)
    if args.plot:
        cfg.plot = True
    if args.schedule:
        cfg.solver = replace(cfg.solver, schedule=args.schedule.replace("-", "_"))
    if args.workers:
        cfg.workers = args.workers
    log.info("running %s", cfg.experiment)
    return run(cfg, args.out_dir)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
