import json

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from pevgame import AgentParams, FleetInstance, load_instance, make_instance, save_instance, validate_instance
from pevgame.model import instance_from_dict, is_feasible, realized_base_load
from pevgame.solvers import feasible_start
from instances import random_instance


def _one(gamma=1.0, prices=(1.0, 1.0)):
    return FleetInstance(prices, (AgentParams(gamma, [0, 0], [1, 1]),), [0.0, 0.0])


def test_valid_instance():
    assert validate_instance(_one()).ok


def test_empty_constraint_set_is_reported():
    out = validate_instance(_one(gamma=3.0))
    assert out.codes() == ["empty_set"]
    assert "empty X^1" in out.violations[0].message
    assert out.violations[0].agent == 0


def test_nonpositive_price_is_reported():
    out = validate_instance(_one(prices=(1.0, 0.0)))
    assert out.codes() == ["nonpositive_price"]
    assert "nonpositive price at t=1" in out.violations[0].message
    assert out.violations[0].slot == 1


@pytest.mark.parametrize(
    "agent, code",
    [
        (AgentParams(-1.0, [0, 0], [1, 1]), "negative_gamma"),
        (AgentParams(0.5, [-0.1, 0], [1, 1]), "negative_lower"),
        (AgentParams(0.5, [0.6, 0], [0.5, 1]), "bound_order"),
        (AgentParams(0.5, [0, 0, 0], [1, 1, 1]), "shape"),
        (AgentParams(np.nan, [0, 0], [1, 1]), "nonfinite"),
    ],
)
def test_agent_violations(agent, code):
    inst = FleetInstance([1, 1], (AgentParams(1, [0, 0], [1, 1]), agent), [0, 0])
    out = validate_instance(inst)
    assert code in out.codes()
    assert all(v.agent == 1 for v in out.violations)


def test_negative_base_load():
    inst = FleetInstance([1, 1], (AgentParams(1, [0, 0], [1, 1]),), [0, -1])
    assert validate_instance(inst).codes() == ["negative_base_load"]


def test_boundary_levels_are_accepted():
    assert validate_instance(_one(gamma=0.0)).ok
    assert validate_instance(_one(gamma=2.0)).ok


def test_validation_is_pure():
    inst = _one(gamma=5.0)
    assert validate_instance(inst) == validate_instance(inst)


@pytest.mark.parametrize(
    "m, base, expected",
    [(1, (1, 0), (1, 0)), (5, (0, 0), (0, 0)), (4, (0.5, 0.25), (2, 1))],
)
def test_realized_base_load(m, base, expected):
    inst = FleetInstance([1, 1], tuple(AgentParams(1, [0, 0], [1, 1]) for _ in range(m)), base)
    assert_array_equal(realized_base_load(inst), expected)
    assert_array_equal(inst.base_load, expected)


def test_instances_are_immutable():
    inst = _one()
    with pytest.raises(ValueError):
        inst.prices[0] = 5.0
    with pytest.raises(ValueError):
        inst.agents[0].lower[0] = 5.0
    with pytest.raises(AttributeError):
        inst.agents = ()


def test_agent_equality_is_bit_exact():
    a = AgentParams(0.1 + 0.2, [0, 0], [1, 1])
    b = AgentParams(0.3, [0, 0], [1, 1])
    assert a != b
    assert AgentParams(0.3, [0, 0], [1, 1]) == b
    assert len({a, b, AgentParams(0.3, [0.0, 0.0], [1.0, 1.0])}) == 2


def test_uniform_start_is_feasible(rng):
    for _ in range(20):
        inst = random_instance(rng, int(rng.integers(1, 10)), int(rng.integers(1, 8)))
        assert validate_instance(inst).ok
        assert is_feasible(feasible_start(inst), inst)


def test_feasibility_check():
    inst = _one()
    assert is_feasible([[0.5, 0.5]], inst)
    assert not is_feasible([[0.5, 0.6]], inst)
    assert not is_feasible([[1.5, -0.5]], inst)
    assert not is_feasible([[0.5, 0.5, 0.0]], inst)


def test_json_round_trip(tmp_path, rng):
    inst = random_instance(rng, 4, 3, base_scale=1.0)
    path = tmp_path / "inst.json"
    save_instance(inst, path)
    back = load_instance(path)
    assert back.to_dict() == inst.to_dict()
    assert json.loads(path.read_text())["horizon"] == 3


def test_dict_errors_point_at_the_field():
    good = {"horizon": 2, "prices": [1, 1], "agents": [{"gamma": 1, "lower": [0, 0], "upper": [1, 1]}]}
    assert instance_from_dict(good).m == 1
    with pytest.raises(ValueError, match="prices"):
        instance_from_dict({k: v for k, v in good.items() if k != "prices"})
    with pytest.raises(ValueError, match="/agents/0"):
        instance_from_dict({**good, "agents": [{"gamma": 1, "lower": [0], "upper": [1, 1]}]})
    with pytest.raises(ValueError, match="/prices"):
        instance_from_dict({**good, "prices": [1]})


def test_make_instance_defaults_to_zero_base():
    inst = make_instance([1, 2], [AgentParams(1, [0, 0], [1, 1])])
    assert_array_equal(inst.base_load_per_agent, [0, 0])
