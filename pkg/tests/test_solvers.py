import numpy as np
import pytest
from numpy.testing import assert_allclose

from pevgame import AgentParams, FleetInstance
from pevgame.errors import DegenerateObjective, InfeasibleSet, MaxIterExceeded
from pevgame.game import nash_residual, payoffs, potential, social_cost
from pevgame.model import is_feasible
from pevgame.solvers import (
    SolverConfig,
    feasible_start,
    objective_gradient,
    price_of_anarchy,
    projected_gradient_reference,
    solve_nash_central,
    solve_nash_decentralized,
    solve_social,
    with_overrides,
)
from instances import random_instance
from oracles import central_difference, grid_line_min, random_feasible_rows


def _inst(m, prices=(1, 1), base=(0, 0), gamma=1.0):
    return FleetInstance(prices, tuple(AgentParams(gamma, [0, 0], [1, 1]) for _ in range(m)), base)


def test_worked_instance(worked_instance):
    xs, rs = solve_social(worked_instance)
    xn, rn = solve_nash_central(worked_instance)
    assert_allclose(xs, [[0, 1]], atol=1e-9)
    assert_allclose(xn, [[0.25, 0.75]], atol=1e-9)
    assert social_cost(xs, worked_instance) == pytest.approx(2.0, abs=1e-9)
    assert social_cost(xn, worked_instance) == pytest.approx(2.125, abs=1e-9)
    assert rs.converged and rn.converged
    ratio, d = price_of_anarchy(worked_instance)
    assert ratio == pytest.approx(1.0625, abs=1e-9)
    assert d.rel_error == pytest.approx(0.0625, abs=1e-9)


def test_worked_instance_against_line_oracle():
    # rows (t, 1 - t): total cost (t + 1)^2 + (1 - t)^2, auxiliary adds t^2 + (1 - t)^2
    t_s, f_s = grid_line_min(lambda t: (t + 1) ** 2 + (1 - t) ** 2, 0, 1)
    t_n, _ = grid_line_min(lambda t: (t + 1) ** 2 + (1 - t) ** 2 + t**2 + (1 - t) ** 2, 0, 1)
    assert (t_s, f_s) == (0.0, 2.0)
    assert t_n == pytest.approx(0.25, abs=1e-4)


def test_two_identical_agents():
    inst = _inst(2)
    xs, _ = solve_social(inst)
    assert_allclose(xs.sum(0), [1, 1], atol=1e-9)
    assert social_cost(xs, inst) == pytest.approx(2.0, abs=1e-9)
    xn, _ = solve_nash_central(inst)
    assert_allclose(xn, [[0.5, 0.5], [0.5, 0.5]], atol=1e-9)


def test_single_agent_without_base_load_has_no_anarchy():
    inst = _inst(1, prices=(1, 2))
    xs, _ = solve_social(inst)
    xn, _ = solve_nash_central(inst)
    assert_allclose(xs, [[2 / 3, 1 / 3]], atol=1e-9)
    assert_allclose(xn, xs, atol=1e-9)
    assert social_cost(xs, inst) == pytest.approx(2 / 3, abs=1e-9)
    for _ in range(3):
        rng = np.random.default_rng(_)
        inst = random_instance(rng, 1, 5, price_range=(0.1, 10))
        assert price_of_anarchy(inst)[0] == pytest.approx(1.0, abs=1e-9)


def test_symmetric_fleet_has_no_anarchy():
    assert price_of_anarchy(_inst(6))[0] == pytest.approx(1.0, abs=1e-12)


def test_decentralized_worked_instance(worked_instance):
    cfg = SolverConfig(c=1.0, tol_x=1e-12)
    x, rep = solve_nash_decentralized(worked_instance, cfg, x_start=[[0.5, 0.5]])
    assert rep.converged
    assert_allclose(x, [[0.25, 0.75]], atol=1e-9)


@pytest.mark.parametrize("schedule", ["jacobi", "gauss_seidel"])
def test_decentralized_starting_at_nash_stops_at_once(rng, schedule):
    inst = random_instance(rng, 5, 4, base_scale=0.5)
    xn, _ = solve_nash_central(inst, SolverConfig(tol_x=1e-13))
    x, rep = solve_nash_decentralized(inst, SolverConfig(schedule=schedule), x_start=xn)
    assert rep.iterations == 1
    assert rep.residual <= 1e-9


def test_homogeneous_fleet_decentralized():
    inst = _inst(20, prices=(1, 2))
    x, rep = solve_nash_decentralized(inst)
    assert rep.converged
    assert_allclose(x, np.tile(x[0], (20, 1)), atol=1e-9)
    # every row is the symmetric equilibrium of the two-slot game: 2 p1 (20 t + t) = 2 p2 (20(1-t) + (1-t))
    assert_allclose(x[0], [2 / 3, 1 / 3], atol=1e-7)


@pytest.mark.parametrize("schedule", ["jacobi", "gauss-seidel"])
def test_decentralized_matches_central(rng, schedule):
    for m, h in [(2, 2), (5, 12), (12, 6)]:
        inst = random_instance(rng, m, h, base_scale=0.5)
        cfg = SolverConfig(schedule=schedule, tol_x=1e-11)
        xc, rc = solve_nash_central(inst, cfg)
        xd, rd = solve_nash_decentralized(inst, cfg)
        assert rc.converged and rd.converged
        assert np.abs(xc - xd).max() <= 1e-5
        assert potential(xd, inst) == pytest.approx(potential(xc, inst), rel=1e-8)


def test_social_aggregate_is_unique(rng):
    inst = random_instance(rng, 6, 5, base_scale=0.3)
    x1, _ = solve_social(inst)
    x2, _ = solve_social(inst, x_start=random_feasible_rows(rng, inst.gamma, inst.lower, inst.upper))
    assert_allclose(x1.sum(0), x2.sum(0), atol=1e-6)
    assert social_cost(x1, inst) == pytest.approx(social_cost(x2, inst), rel=1e-10)


def test_bcd_agrees_with_projected_gradient(rng):
    for which, solve in (("P", solve_social), ("Pa", solve_nash_central)):
        for _ in range(3):
            inst = random_instance(rng, int(rng.integers(1, 6)), int(rng.integers(2, 5)), base_scale=0.5)
            x, _ = solve(inst, SolverConfig(tol_x=1e-12))
            y = projected_gradient_reference(inst, which, step_count=10000)
            f = (lambda z: social_cost(z, inst)) if which == "P" else (lambda z: potential(z, inst))
            assert f(y) == pytest.approx(f(x), rel=1e-6)
            assert f(x) <= f(y) + 1e-9


def test_projected_step_from_solution_is_stationary(rng):
    inst = random_instance(rng, 4, 3, base_scale=0.5)
    x, _ = solve_nash_central(inst, SolverConfig(tol_x=1e-13))
    y = projected_gradient_reference(inst, "Pa", step_count=1, x_start=x)
    assert np.abs(y - x).max() <= 1e-7


@pytest.mark.parametrize("which", ["P", "Pa"])
def test_gradient_matches_finite_differences(rng, which):
    inst = random_instance(rng, 4, 3, base_scale=1.0)
    f = (lambda z: social_cost(z, inst)) if which == "P" else (lambda z: potential(z, inst))
    for _ in range(5):
        x = random_feasible_rows(rng, inst.gamma, inst.lower, inst.upper)
        g = objective_gradient(x, inst, which)
        fd = central_difference(f, x)
        assert np.abs(g - fd).max() <= 1e-5 * max(1.0, np.abs(fd).max())


def test_monotone_descent_is_tracked(rng):
    inst = random_instance(rng, 10, 6, base_scale=0.5)
    from pevgame.solvers import BlockProblem, block_descent

    for aux in (0.0, 1.0):
        x, rep, _ = block_descent(BlockProblem.from_instance(inst, aux), SolverConfig(), track_history=True)
        h = np.array(rep.history)
        assert rep.descent_violations == 0
        assert np.all(np.diff(h) <= 1e-11 * (1 + np.abs(h[:-1])))


def test_conservation(rng):
    inst = random_instance(rng, 15, 8)
    for solve in (solve_social, solve_nash_central, solve_nash_decentralized):
        x, _ = solve(inst)
        assert is_feasible(x, inst)
        assert abs(x.sum() - inst.gamma.sum()) <= inst.m * 1e-9


def test_nash_report_carries_certificate(rng):
    inst = random_instance(rng, 8, 5, base_scale=0.5)
    x, rep = solve_nash_central(inst)
    assert rep.nash_residual == pytest.approx(nash_residual(x, inst), abs=1e-12)
    assert rep.nash_residual <= 1e-7 * (1 + np.abs(payoffs(x, inst)).max())
    d = rep.to_dict()
    assert set(d) >= {"objective", "iterations", "residual", "nash_residual", "status"}
    assert "history" not in d


def test_iteration_cap_is_reported(rng):
    inst = random_instance(rng, 30, 6)
    cfg = SolverConfig(max_iter=2, tol_x=1e-14)
    x, rep = solve_nash_central(inst, cfg)
    assert rep.status == "max_iter" and rep.iterations == 2
    assert is_feasible(x, inst)
    with pytest.raises(MaxIterExceeded) as info:
        rep.raise_for_status()
    assert info.value.report is rep
    _, rep = solve_nash_decentralized(inst, cfg)
    assert rep.status == "max_iter"
    assert rep.oscillating is False


def test_tiny_regularization_oscillates():
    # two slots, strong coupling: Jacobi with small c overshoots back and forth
    inst = FleetInstance([1, 1], tuple(AgentParams(1, [0, 0], [1, 1]) for _ in range(10)), [0.5, 0])
    start = np.tile([1.0, 0.0], (10, 1))
    _, rep = solve_nash_decentralized(inst, SolverConfig(c=1e-3, max_iter=50), x_start=start)
    assert rep.status == "max_iter"
    assert rep.oscillating is True


def test_invalid_instance_raises():
    inst = _inst(1, gamma=5.0)
    for solve in (solve_social, solve_nash_central, solve_nash_decentralized, feasible_start):
        with pytest.raises(InfeasibleSet):
            solve(inst)


def test_zero_demand_is_degenerate():
    with pytest.raises(DegenerateObjective):
        price_of_anarchy(_inst(2, gamma=0.0))


@pytest.mark.parametrize(
    "kw", [dict(tol_x=0), dict(tol_residual=-1), dict(max_iter=0), dict(c=0.0), dict(schedule="random")]
)
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SolverConfig(**kw)


def test_config_helpers():
    cfg = SolverConfig(schedule="gauss-seidel")
    assert cfg.schedule == "gauss_seidel"
    assert with_overrides(cfg, max_iter=5, c=None).max_iter == 5
    assert SolverConfig().to_dict()["tol_x"] == 1e-9
