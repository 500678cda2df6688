"""Acceptance criteria 1-9, each at its stated tolerance.

Every test records one ``criterion N: PASS|FAIL`` line (printed in the
terminal summary and to stdout) before asserting.  Run directly with
``python3 tests/test_acceptance.py`` for the lines alone.
"""

from __future__ import annotations

import time
from fractions import Fraction
from functools import lru_cache

import numpy as np

from weakkam.audit import (
    check_egalite,
    check_newpr,
    check_preservation,
    check_sandwich,
    check_trivial,
    sandwich_candidate,
)
from weakkam.cohomology import alpha_sweep, coboundary_shift, equivariant_solution, mather_alpha
from weakkam.critical import (
    aubry,
    aubry_of,
    brute_aubry_pairs,
    critical_value,
    lemma_err_violations,
    weak_kam,
)
from weakkam.fixtures import c3, random_subsolution, random_system
from weakkam.laxoleinik import lax_minus, lax_plus, slack
from weakkam.lagrangian import (
    FunctionCost,
    aubry_star,
    cost_gradients,
    discretize,
    el_flow,
    el_residual,
    partial_maps,
    pendulum,
    solve_pairs,
    twist_audit,
)
from weakkam.subsolution import pin_to, strict_subsolution

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script outside pytest
    ACCEPTANCE_LINES = {}

GRAPH_INSTANCES = 500
LEMMA_INSTANCES = 200
TOL = 1e-9


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[n] = line
    print(line)


@lru_cache(maxsize=None)
def graph_instances():
    rng = np.random.default_rng(20240501)
    return [random_system(rng, n_max=8, lo=-5, hi=5) for _ in range(GRAPH_INSTANCES)]


@lru_cache(maxsize=None)
def pendulum_system(N: int):
    t = time.perf_counter()
    sys = discretize(pendulum(), N)
    alpha = float(critical_value(sys).alpha)
    return sys, alpha, time.perf_counter() - t


def test_criterion_1_critical_value_oracle():
    t = time.perf_counter()
    systems = graph_instances()
    bad = []
    for k, sys in enumerate(systems):
        exact = {m: critical_value(sys, m, exact=True).alpha for m in ("karp", "bisect", "brute")}
        floats = {m: critical_value(sys, m).alpha for m in ("karp", "bisect", "brute")}
        if len(set(exact.values())) != 1:
            bad.append((k, "exact", exact))
        ref = float(exact["karp"])
        if any(abs(v - ref) > TOL for v in floats.values()):
            bad.append((k, "float", floats))
    elapsed = time.perf_counter() - t
    ok = not bad and elapsed < 10.0 and len(systems) >= 500
    record(1, ok, f"{len(systems)} instances, {len(bad)} disagreements, {elapsed:.2f} s (limit 10 s)")
    assert ok, bad[:3]


def test_criterion_2_weak_kam_fixed_point():
    worst = 0.0
    for sys in graph_instances():
        a = critical_value(sys).alpha
        um, up = weak_kam(sys, "minus"), weak_kam(sys, "plus")
        worst = max(worst, float(np.max(np.abs(um - lax_minus(um, sys) - a))),
                    float(np.max(np.abs(up - lax_plus(up, sys) + a))))
    ok = worst <= TOL
    record(2, ok, f"max fixed-point residual {worst:.2e} over {GRAPH_INSTANCES} instances (tol 1e-9)")
    assert ok


def test_criterion_3_aubry_oracle():
    bad = []
    for k, sys in enumerate(graph_instances()):
        brute = brute_aubry_pairs(sys, exact=True)
        if aubry(sys, exact=True).pairs != brute or aubry(sys).pairs != brute:
            bad.append(k)
    ok = not bad
    record(3, ok, f"{GRAPH_INSTANCES - len(bad)}/{GRAPH_INSTANCES} instances match cycle enumeration (exact)")
    assert ok, bad[:5]


def test_criterion_4_strict_subsolution():
    bad = []
    min_off, max_on = np.inf, 0.0
    for k, sys in enumerate(graph_instances()):
        u0, audit = strict_subsolution(sys, tol=TOL)
        A = aubry(sys)
        S = slack(u0, sys, critical_value(sys).alpha).slack
        on = [abs(S[p]) for p in A.pairs]
        off = [S[x, y] for x, y, _ in sys.edges() if (x, y) not in A.pairs]
        min_off = min([min_off] + off)
        max_on = max([max_on] + on)
        d0 = aubry_of(u0, sys, TOL)
        if (off and min(off) <= TOL) or (on and max(on) > TOL) or d0.nodes != A.nodes or d0.pairs != A.pairs:
            bad.append(k)
    ok = not bad
    record(4, ok, f"{GRAPH_INSTANCES - len(bad)}/{GRAPH_INSTANCES} audits pass; min slack off Aubry "
                  f"{min_off:.3g}, max |slack| on Aubry {max_on:.1e}")
    assert ok, bad[:5]


def test_criterion_5_lemma_suite():
    rng = np.random.default_rng(5)
    names = ["trivial", "egalite_aubry", "newpr", "preservation_minus", "preservation_plus", "sandwich"]
    passed = dict.fromkeys(names, 0)
    unexplained = 0  # preservation failures where the minimizer-leaves-Aubry property holds
    for _ in range(LEMMA_INSTANCES):
        sys = random_system(rng, n_max=8)
        u = random_subsolution(sys, rng)
        passed["trivial"] += check_trivial(u, sys, TOL)
        passed["egalite_aubry"] += check_egalite(u, sys, TOL)
        p, _ = pin_to(u, sys, TOL)  # strict off its Aubry pairs
        passed["newpr"] += check_newpr(p, sys, TOL)
        pres = check_preservation(p, sys, TOL)
        passed["preservation_minus"] += pres["minus"]
        passed["preservation_plus"] += pres["plus"]
        if not (pres["minus"] and pres["plus"]) and not lemma_err_violations(p, sys, TOL):
            unexplained += 1
        passed["sandwich"] += check_sandwich(p, sandwich_candidate(p, sys, rng), sys, TOL)
    ok = all(v == LEMMA_INSTANCES for v in passed.values())
    summary = ", ".join(f"{k} {v}/{LEMMA_INSTANCES}" for k, v in passed.items())
    summary += f"; preservation failures without a minimizer entering the Aubry set: {unexplained}"
    record(5, ok, summary)
    assert ok, summary


def test_criterion_6_pendulum_critical_value():
    sys, a128, elapsed = pendulum_system(128)
    _, a256, _ = pendulum_system(256)
    _, report = aubry_star(pendulum(), 128)
    close = abs(a128 - 1.0) <= 5e-2
    toward = abs(a256 - 1.0) <= abs(a128 - 1.0)
    near = report["max_distance_cells"] <= 2
    ok = close and toward and elapsed < 60.0 and near and report["unique_successor"]
    record(6, ok, f"alpha[0] N=128 {a128:.12g}, N=256 {a256:.12g}, {elapsed:.1f} s; Aubry nodes "
                  f"{report['nodes']} ({report['max_distance_cells']:.0f} cells from x=0), "
                  f"unique successor {report['unique_successor']}")
    assert ok


def _fd_pairs(L, count, rng):
    x, y = rng.random(3 * count), rng.random(3 * count)
    sol = solve_pairs(L, x, y)
    keep = np.flatnonzero(sol.gap > 1e-3)[:count]  # stay off the cut locus
    return x[keep], y[keep], sol.winding[keep]


def test_criterion_7_lagrangian_numerics():
    L = pendulum()
    rng = np.random.default_rng(7)
    details, oks = [], []

    x, y, w = _fd_pairs(L, 100, rng)
    gx, gy = cost_gradients(L, x, y, w)
    e = 1e-5
    fx = (solve_pairs(L, x + e, y, w).action - solve_pairs(L, x - e, y, w).action) / (2 * e)
    fy = (solve_pairs(L, x, y + e, w).action - solve_pairs(L, x, y - e, w).action) / (2 * e)
    rel = max(float(np.max(np.abs(gx - fx) / np.abs(fx))), float(np.max(np.abs(gy - fy) / np.abs(fy))))
    oks.append(len(x) >= 100 and rel <= 1e-3)
    details.append(f"gradients {len(x)} pairs rel err {rel:.1e}")

    x0 = rng.random(60)
    y0 = x0 + rng.uniform(-0.45, 0.45, size=60)
    fwd = partial_maps(L, x0, y0, 1)
    d = np.flatnonzero(fwd["defined"])
    back = partial_maps(L, fwd["start"][d], fwd["end"][d], -1)
    inv = max(float(np.max(np.abs(back["start"] - x0[d]))), float(np.max(np.abs(back["end"] - y0[d]))))
    oks.append(len(d) >= 20 and inv <= 1e-6)
    details.append(f"phi_-1 o phi_+1 = id on {len(d)}/60 defined pairs, err {inv:.1e}")

    el = max(el_residual(L, [x0[i], y0[i], fwd["end"][i]]) for i in d[:20])
    oks.append(el <= 1e-6)
    details.append(f"EL residual {el:.1e}")

    drift = 0.0
    for xv in rng.uniform(-2, 2, size=(10, 2)):
        state = (xv[0], xv[1], 0.0)
        for _ in range(3):
            nxt = el_flow(L, state, 1.0)
            drift = max(drift, abs(L.energy(nxt[0], nxt[1]) - L.energy(state[0], state[1])))
            state = nxt
    oks.append(drift <= 1e-8)
    details.append(f"energy drift {drift:.1e}/unit time")

    good = twist_audit(L)
    bad = twist_audit(FunctionCost(lambda a, b: 1.0))
    oks.append(good["pass"] and not bad["pass"])
    details.append(f"twist pendulum {good['pass']} (gap {min(good['min_gap_left'], good['min_gap_right']):.1e}), "
                   f"constant cost {bad['pass']}")
    ok = all(oks)
    record(7, ok, "; ".join(details))
    assert ok


def test_criterion_8_mather_alpha():
    sys = c3()
    grid = np.linspace(-6, 6, 49)
    curve = alpha_sweep(sys, grid)
    err = max(abs(a - (abs(h) / 3 - 1)) for h, a in curve.samples)
    rng = np.random.default_rng(8)
    shift = 0.0
    for _ in range(10):
        g = rng.integers(-5, 6, size=sys.n)
        shifted = coboundary_shift(sys, g)
        shift = max(shift, max(abs(mather_alpha(shifted, h).alpha - a) for h, a in curve.samples))
    c3_ok = err <= TOL and not curve.convexity_violations and shift <= TOL and curve.minimizer[0] == 0.0

    psys, _, _ = pendulum_system(128)
    pgrid = np.arange(-2.0, 2.0 + 1e-12, 0.25)
    pcurve = alpha_sweep(psys, pgrid)
    vals = dict(pcurve.samples)
    sym = max(abs(vals[h] - vals[-h]) for h in pgrid)
    pmin = min(vals.values())
    p_ok = not pcurve.convexity_violations and sym <= 1e-6 and abs(pmin - 1.0) <= 5e-2
    ok = c3_ok and p_ok
    record(8, ok, f"C3 max err {err:.1e}, convexity violations {len(curve.convexity_violations)}, "
                  f"coboundary shift {shift:.1e}, minimizer h={curve.minimizer[0]:g}; pendulum "
                  f"violations {len(pcurve.convexity_violations)}, symmetry {sym:.1e}, min alpha {pmin:.6g}")
    assert ok


def test_criterion_9_equivariance():
    worst_lift, worst_fp = 0.0, 0.0
    oks = []
    for h in (0, 1, -1, 3, -3):
        _, _, rep = equivariant_solution(c3(), h, 3)
        worst_lift = max(worst_lift, rep["lift_residual"])
        worst_fp = max(worst_fp, rep["fixed_point_residual"])
        oks.append(rep["lift_residual"] <= 1e-12 and rep["fixed_point_residual"] <= TOL)
    same = mather_alpha(c3(), 0, exact=True).alpha == critical_value(c3(), exact=True).alpha
    same &= mather_alpha(c3(), 0).alpha == critical_value(c3()).alpha
    for sys in graph_instances()[:50]:
        same &= mather_alpha(sys, np.zeros(0)).alpha == critical_value(sys).alpha
    ok = all(oks) and bool(same)
    record(9, ok, f"lift residual {worst_lift:.1e}, fixed-point residual {worst_fp:.1e} "
                  f"for h in 0,+-1,+-3; alpha at h=0 equals critical value: {bool(same)}")
    assert ok


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                pass
