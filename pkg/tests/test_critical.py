from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from weakkam.critical import (
    NegativeCycleError,
    SizeLimitError,
    aubry,
    aubry_of,
    brute_aubry_pairs,
    critical_value,
    has_negative_cycle,
    lemma_err_violations,
    mane_potential,
    simple_cycles,
    weak_kam,
)
from weakkam.fixtures import constant, g2, g3, random_system
from weakkam.laxoleinik import lax_minus, lax_plus
from weakkam.subsolution import strict_subsolution

seeds = st.integers(0, 2 ** 32 - 1)


def lp_alpha(sys):
    """Least alpha admitting u(y) - u(x) <= c(x, y) + alpha, as a linear program."""
    n = sys.n
    rows, rhs = [], []
    for x, y, c in sys.edges():
        r = np.zeros(n + 1)
        r[y] += 1.0
        r[x] -= 1.0
        r[n] = -1.0
        rows.append(r)
        rhs.append(c)
    obj = np.zeros(n + 1)
    obj[n] = 1.0
    bounds = [(None, None)] * (n + 1)
    bounds[0] = (0.0, 0.0)
    res = linprog(obj, A_ub=np.array(rows), b_ub=np.array(rhs), bounds=bounds, method="highs")
    assert res.status == 0
    return res.x[n]


@pytest.mark.parametrize("method", ["karp", "bisect", "brute"])
def test_g2(method):
    cv = critical_value(g2(), method)
    assert cv.alpha == -2.0
    assert cv.witness_cycle == (0, 1)
    assert critical_value(g2(), method, exact=True).alpha == Fraction(-2)


def test_g3_and_constant():
    assert critical_value(g3(), exact=True).alpha == -2
    assert critical_value(constant(4, 3.0)).alpha == -3.0
    assert critical_value(constant(4, 3.0)).witness_cycle == (0,)


def test_to_dict():
    assert critical_value(g2()).to_dict() == {"alpha": -2.0, "witness": [0, 1]}


@settings(max_examples=150, deadline=None)
@given(seeds)
def test_methods_agree_with_lp(seed):
    sys = random_system(np.random.default_rng(seed))
    exact = critical_value(sys, "karp", exact=True).alpha
    assert critical_value(sys, "bisect", exact=True).alpha == exact
    assert critical_value(sys, "brute", exact=True).alpha == exact
    for m in ("karp", "bisect", "brute"):
        assert abs(critical_value(sys, m).alpha - float(exact)) <= 1e-9
    assert abs(lp_alpha(sys) - float(exact)) <= 1e-7


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_witness_is_minimum_mean_cycle(seed):
    sys = random_system(np.random.default_rng(seed))
    cv = critical_value(sys, exact=True)
    cyc = cv.witness_cycle
    k = len(cyc)
    total = sum(Fraction(sys.cost[cyc[i], cyc[(i + 1) % k]]) for i in range(k))
    assert total / k == -cv.alpha


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_negative_cycle_threshold(seed):
    sys = random_system(np.random.default_rng(seed))
    a = critical_value(sys, exact=True).alpha
    assert not has_negative_cycle(sys, a, exact=True)
    assert has_negative_cycle(sys, a - Fraction(1, 1000), exact=True)
    assert not has_negative_cycle(sys, float(a), tol=1e-9)
    assert has_negative_cycle(sys, float(a) - 1e-3)
    with pytest.raises(NegativeCycleError):
        mane_potential(sys, float(a) - 1e-3)


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_potential_properties(seed):
    sys = random_system(np.random.default_rng(seed))
    a = critical_value(sys).alpha
    phi = mane_potential(sys, a).phi
    assert np.all(np.diag(phi) == 0)
    assert np.all(phi[:, :, None] + phi[None, :, :] >= phi[:, None, :] - 1e-9)  # triangle
    fin = sys.finite
    assert np.all(phi[fin] <= (sys.cost + a)[fin] + 1e-12)
    exact = mane_potential(sys, critical_value(sys, exact=True).alpha, exact=True).phi
    assert np.allclose(exact.astype(float), phi, atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_weak_kam_fixed_points(seed):
    sys = random_system(np.random.default_rng(seed))
    a = critical_value(sys).alpha
    um, up = weak_kam(sys, "minus"), weak_kam(sys, "plus")
    assert np.max(np.abs(um - lax_minus(um, sys) - a)) <= 1e-9
    assert np.max(np.abs(up - lax_plus(up, sys) + a)) <= 1e-9
    uex = weak_kam(sys, "minus", exact=True)
    assert np.all(uex == lax_minus(uex, sys) + critical_value(sys, exact=True).alpha)


def test_weak_kam_g2():
    assert weak_kam(g2()).tolist() == [0.0, -1.0]
    assert weak_kam(g2(), "plus").tolist() == [0.0, -1.0]
    with pytest.raises(ValueError):
        weak_kam(g2(), "sideways")


def test_aubry_fixtures():
    for sys in (g2(), g3()):
        A = aubry(sys)
        assert A.nodes == {0, 1}
        assert A.pairs == {(0, 1), (1, 0)}
        assert A.certificates[0] in ((0, 1), [0, 1])
    const = aubry(constant(3))
    assert const.pairs == {(i, j) for i in range(3) for j in range(3)}


@settings(max_examples=150, deadline=None)
@given(seeds)
def test_aubry_matches_cycle_enumeration(seed):
    sys = random_system(np.random.default_rng(seed))
    brute = brute_aubry_pairs(sys, exact=True)
    assert aubry(sys).pairs == brute
    assert aubry(sys, exact=True).pairs == brute
    # Aubry set of the critical problem sits inside that of every subsolution
    assert brute <= aubry_of(weak_kam(sys), sys).pairs


def test_simple_cycles_triangle():
    adj = [[1, 2], [2, 0], [0, 1]]
    cycles = {tuple(c) for c in simple_cycles(adj)}
    assert cycles == {(0, 1), (0, 2), (1, 2), (0, 1, 2), (0, 2, 1)}


def test_brute_size_limit():
    with pytest.raises(SizeLimitError):
        critical_value(constant(11), "brute")


def test_minimizer_can_enter_aubry_without_twist():
    u0, _ = strict_subsolution(g3())
    # the unique minimizer of T^- u0 at state 2 is the Aubry state 1
    assert ("minus", 2, 1) in lemma_err_violations(u0, g3())
