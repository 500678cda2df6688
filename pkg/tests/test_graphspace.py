from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from weakkam.fixtures import c3, g2, random_system
from weakkam.graphspace import (
    FiniteCostSystem,
    GraphFormatError,
    InvariantError,
    exact_weights,
    from_edges,
    load_system,
    save_system,
    system_from_dict,
    system_to_dict,
    validate,
)


def test_g2_parse(tmp_path):
    p = tmp_path / "g2.json"
    p.write_text(json.dumps({"n": 2, "edges": [
        {"from": 0, "to": 0, "cost": 5}, {"from": 0, "to": 1, "cost": 1},
        {"from": 1, "to": 0, "cost": 3}, {"from": 1, "to": 1, "cost": 4}]}))
    sys = load_system(p)
    assert sys.n == 2
    assert sys.finite_edge_count == 4
    assert sys.cost[1, 0] == 3


def test_single_loop_is_valid():
    sys = system_from_dict({"n": 1, "edges": [{"from": 0, "to": 0, "cost": 7}]})
    assert validate(sys).ok


def test_two_components_rejected(tmp_path):
    p = tmp_path / "split.json"
    p.write_text(json.dumps({"n": 2, "edges": [
        {"from": 0, "to": 0, "cost": 1}, {"from": 1, "to": 1, "cost": 1}]}))
    with pytest.raises(InvariantError, match="not strongly connected"):
        load_system(p)
    report = validate(from_edges(2, [(0, 0, 1), (1, 1, 1)]))
    assert not report.ok
    assert "not strongly connected" in report.failures[0]


def test_absent_pairs_are_infinite():
    sys = from_edges(2, [(0, 1, 1), (1, 0, 1)])
    assert np.isinf(sys.cost[0, 0])
    assert not sys.finite[1, 1]


@pytest.mark.parametrize("data, match", [
    ({"edges": []}, "missing field"),
    ({"n": 2, "edges": [{"from": 0, "to": 1, "cost": 1}, {"from": 0, "to": 1, "cost": 2}]}, "duplicate"),
    ({"n": 1, "edges": [{"from": 0, "to": 3, "cost": 1}]}, "out of range"),
    ({"n": 1, "edges": [{"from": 0, "to": 0, "cost": "x"}]}, "invalid cost"),
    ({"n": 1, "winding_dim": 1, "edges": [{"from": 0, "to": 0, "cost": 1, "winding": [1, 2]}]}, "winding"),
    ([1, 2], "object"),
])
def test_parse_errors(data, match):
    with pytest.raises(GraphFormatError, match=match):
        system_from_dict(data)


def test_malformed_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(GraphFormatError, match="malformed"):
        load_system(p)


def test_invariants():
    with pytest.raises(InvariantError):
        FiniteCostSystem(np.array([[np.nan]]))
    with pytest.raises(InvariantError):
        FiniteCostSystem(np.ones((2, 3)))
    with pytest.raises(InvariantError, match="absent edge"):
        FiniteCostSystem(np.array([[1.0, np.inf], [1.0, 1.0]]), np.ones((2, 2, 1)))
    sys = g2()
    with pytest.raises(ValueError):
        sys.cost[0, 0] = 1.0  # read-only


def test_round_trip(tmp_path):
    sys = c3()
    p = tmp_path / "c3.json"
    save_system(sys, p)
    back = load_system(p)
    assert np.array_equal(back.cost, sys.cost)
    assert np.array_equal(back.winding, sys.winding)
    assert back.winding_dim == 1


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_round_trip_random(seed):
    sys = random_system(np.random.default_rng(seed), winding_dim=2)
    back = system_from_dict(json.loads(json.dumps(system_to_dict(sys))))
    assert np.array_equal(back.cost, sys.cost)
    assert np.array_equal(back.winding, sys.winding)


def test_validation_constants_with_coords():
    sys = from_edges(2, [(0, 1, 1.0), (1, 0, 3.0)], coords=[[0.0], [2.0]])
    rep = validate(sys)
    # C(k) = max over edges of k d - c, with d = 2 on both edges
    assert dict(rep.superlinearity_witness)[2.0] == pytest.approx(3.0)
    assert dict(rep.superlinearity_witness)[0.0] == pytest.approx(-1.0)


def test_exact_weights_dyadic():
    sys = from_edges(2, [(0, 1, 0.25), (1, 0, -1.5)])
    ints, D = exact_weights(sys)
    assert D == 4
    assert ints[0][1] == 1 and ints[1][0] == -6 and ints[0][0] is None
