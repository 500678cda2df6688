from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from weakkam.critical import critical_value
from weakkam.lagrangian import (
    AmbiguousMinimizerError,
    FunctionCost,
    LagrangianSpec,
    PartialMapUndefined,
    action_cost,
    aubry_star,
    cost_gradients,
    discretize,
    el_flow,
    el_residual,
    free_particle,
    load_lagrangian,
    partial_dynamics,
    pendulum,
    solve_pairs,
    twist_audit,
)
from weakkam.lagrangian.collocation import discrete_action, dp_seed, newton_polish
from weakkam.lagrangian.flow import integrate, shoot


def free_cost(x, y, K=2):
    return min((y + k - x) ** 2 / 2 for k in range(-K, K + 1))


def test_spec_round_trip(tmp_path):
    L = LagrangianSpec(cosine_coeffs=(1.0, 0.2), sine_coeffs=(0.3,), grid=16)
    p = tmp_path / "L.json"
    p.write_text(json.dumps(L.to_dict()))
    assert load_lagrangian(p) == L
    with pytest.raises(ValueError, match="unknown"):
        LagrangianSpec.from_dict({"cosine_coeffs": [1], "bogus": 1})
    with pytest.raises(ValueError):
        LagrangianSpec(collocation_steps=1)


def test_potential_derivatives():
    L = LagrangianSpec(cosine_coeffs=(1.0, -0.4), sine_coeffs=(0.25, 0.1))
    x = np.linspace(0, 1, 17)
    e = 1e-6
    assert np.allclose(L.dV(x), (L.V(x + e) - L.V(x - e)) / (2 * e), atol=1e-6)
    assert np.allclose(L.d2V(x), (L.dV(x + e) - L.dV(x - e)) / (2 * e), atol=1e-5)
    V, dV, d2V = L.derivatives(x)
    assert np.allclose(V, L.V(x)) and np.allclose(dV, L.dV(x)) and np.allclose(d2V, L.d2V(x))


def test_pendulum_shapes():
    assert pendulum().V(0.0) == 1.0
    assert pendulum(shift=True).V(0.5) == pytest.approx(1.0)
    assert pendulum().max_potential == pytest.approx(1.0)
    assert free_particle().is_free


@settings(max_examples=20, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1))
def test_free_particle_cost(x, y):
    L = free_particle()
    exact = free_cost(x, y)
    ties = sorted((y + k - x) ** 2 / 2 for k in range(-2, 3))
    if ties[1] - ties[0] <= 1e-5:
        return  # cut locus
    c, curve = action_cost(L, x, y)
    assert c == pytest.approx(exact, abs=1e-12)
    gx, gy = cost_gradients(L, x, y)
    d = curve.end - x
    assert gx == pytest.approx(-d, abs=1e-10) and gy == pytest.approx(d, abs=1e-10)


def test_cut_locus_is_ambiguous():
    L = free_particle()
    with pytest.raises(AmbiguousMinimizerError):
        cost_gradients(L, 0.0, 0.5)
    with pytest.raises(AmbiguousMinimizerError):
        partial_dynamics(L, 0.0, 0.5)


def test_pendulum_gradients_match_fd():
    L = pendulum()
    rng = np.random.default_rng(0)
    x, y = rng.random(12), rng.random(12)
    sol = solve_pairs(L, x, y)
    keep = sol.gap > 1e-3
    x, y, w = x[keep], y[keep], sol.winding[keep]
    gx, gy = cost_gradients(L, x, y, w)
    e = 1e-5
    fx = (solve_pairs(L, x + e, y, w).action - solve_pairs(L, x - e, y, w).action) / (2 * e)
    fy = (solve_pairs(L, x, y + e, w).action - solve_pairs(L, x, y - e, w).action) / (2 * e)
    assert np.all(np.abs(gx - fx) <= 1e-3 * np.maximum(1.0, np.abs(fx)))
    assert np.all(np.abs(gy - fy) <= 1e-3 * np.maximum(1.0, np.abs(fy)))


def test_collocation_close_to_shooting():
    L = pendulum()
    sol = solve_pairs(L, [0.1, 0.3], [0.6, 0.2])
    # midpoint rule with 32 segments: discretization error well below 1e-2
    assert np.all(np.abs(sol.action - sol.discrete_action) < 1e-2)


def test_dp_seed_then_newton():
    L = pendulum()
    q = dp_seed(L, np.array([0.2]), np.array([[0.7, 1.7]]))
    assert q.shape == (1, 2, L.collocation_steps + 1)
    assert np.allclose(q[..., 0], 0.2) and np.allclose(q[0, :, -1], [0.7, 1.7])
    polished, g = newton_polish(L, q.reshape(2, -1))
    assert np.all(g < 1e-10)
    assert np.all(discrete_action(L, polished) <= discrete_action(L, q.reshape(2, -1)) + 1e-14)


def test_variational_derivative():
    L = pendulum()
    _, _, dq, _, _ = integrate(L, 0.3, 0.8)
    e = 1e-6
    fd = (integrate(L, 0.3, 0.8 + e)[0] - integrate(L, 0.3, 0.8 - e)[0]) / (2 * e)
    assert dq == pytest.approx(fd, rel=1e-6)


def test_shoot_hits_target():
    L = pendulum()
    v0, v1, A, miss = shoot(L, 0.1, 0.9, 0.5)
    assert miss[0] <= 1e-12 * 2
    assert integrate(L, 0.1, v0)[0] == pytest.approx(0.9, abs=1e-11)


def test_el_flow_energy_and_reversibility():
    L = pendulum()
    for x, v in [(0.1, 0.3), (0.45, -2.0), (0.0, 3.0)]:
        x1, v1, t1 = el_flow(L, (x, v, 0.0), 1.0)
        assert abs(L.energy(x1, v1) - L.energy(x, v)) <= 1e-8
        assert t1 == 1.0
        xb, vb, _ = el_flow(L, (x1, v1, t1), -1.0)
        assert xb == pytest.approx(x, abs=1e-10) and vb == pytest.approx(v, abs=1e-10)


def test_free_flow_is_lifted():
    assert el_flow(free_particle(), (0.5, 2.0, 0.0), 1.0)[0] == pytest.approx(2.5)


def test_partial_maps_inverse_and_el():
    L = pendulum()
    (a, b), rep = partial_dynamics(L, 0.1, 0.3)
    assert a == 0.3
    assert rep["defined"]
    (c, d), rep2 = partial_dynamics(L, a, b, direction=-1)
    assert c == pytest.approx(0.1, abs=1e-6) and d == pytest.approx(0.3, abs=1e-12)
    assert el_residual(L, [0.1, 0.3, b]) <= 1e-6


def test_partial_map_strict_mode():
    L = pendulum()
    with pytest.raises(ValueError):
        partial_dynamics(L, 0.1, 0.3, direction=2)
    # strict mode either returns a defined map or raises
    try:
        _, rep = partial_dynamics(L, 0.0, 0.45, strict=True)
        assert rep["defined"]
    except (PartialMapUndefined, AmbiguousMinimizerError):
        pass


def test_twist_audit_free_particle_and_constant():
    rep = twist_audit(free_particle(), sample_count=10)
    assert rep["pass"] and rep["min_gap_left"] == pytest.approx(0.1, rel=1e-6)
    bad = twist_audit(FunctionCost(lambda x, y: 1.0), sample_count=10)
    assert not bad["pass"] and bad["min_gap_left"] == 0.0


def test_discretize_free_particle():
    sys = discretize(free_particle(), 8)
    for i in range(8):
        for j in range(8):
            assert sys.cost[i, j] == pytest.approx(free_cost(i / 8, j / 8), abs=1e-12)
    assert critical_value(sys).alpha == pytest.approx(0.0, abs=1e-12)


def test_discretize_small_grid():
    sys = discretize(pendulum(), 4)
    assert sys.n == 4
    with pytest.raises(ValueError):
        discretize(pendulum(), 1)


def test_discretize_symmetry():
    sys = discretize(pendulum(), 16)
    idx = (-np.arange(16)) % 16
    assert np.allclose(sys.cost, sys.cost[np.ix_(idx, idx)], atol=1e-9)


def test_aubry_star_pendulum():
    _, rep = aubry_star(pendulum(), 32)
    assert rep["nodes"] == [0] and rep["pass"]
    _, rep = aubry_star(pendulum(shift=True), 32)
    assert rep["nodes"] == [16]
