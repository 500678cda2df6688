"""Invariant checks for finite cost systems, individually and as a seeded suite.

The ``check_*`` functions each test one structural property on one
``(system, subsolution)`` instance and return ``True``/``False``; they are
shared by the test suite and by :func:`run_audit`, which bundles them into a
single pass/fail report for the ``audit`` command.

Two properties are reported as diagnostics and do not gate the suite:
strictness preservation under the Lax-Oleinik operators and the
minimizer-leaves-Aubry property it rests on.  Both depend on twist
conditions, which a general finite graph does not satisfy, and both fail on
valid inputs such as :func:`weakkam.fixtures.g3`.
"""

from __future__ import annotations

import numpy as np

from ._config import resolve_tol
from .critical import (
    BRUTE_LIMIT,
    aubry,
    aubry_of,
    brute_aubry_pairs,
    critical_value,
    lemma_err_violations,
    mane_potential,
    weak_kam,
)
from .fixtures import random_subsolution
from .graphspace import FiniteCostSystem, validate
from .laxoleinik import lax_minus, lax_plus, slack, tight_pairs
from .subsolution import (
    AuditError,
    newpr_holds,
    pin_to,
    regularize,
    strict_outside_aubry,
    strict_subsolution,
    verify_sandwich,
)

__all__ = [
    "check_trivial",
    "check_egalite",
    "check_newpr",
    "check_preservation",
    "check_sandwich",
    "check_regularize",
    "check_convex_combination",
    "sandwich_candidate",
    "run_audit",
]


def _alpha(sys: FiniteCostSystem) -> float:
    return critical_value(sys).alpha


def check_trivial(u, sys: FiniteCostSystem, tol: float | None = None) -> bool:
    """Calibrated pairs of ``u`` and of ``T^- u`` land on the fixed points of ``T^- + alpha``.

    If ``(y, x)`` is tight for ``u`` then ``u(x) = T^- u(x) + alpha``.  If it is
    tight for ``T^- u`` then ``u(y) = T^- u(y) + alpha`` and ``T^- u(x) = u(y) + c(y, x)``.
    """
    tol = resolve_tol(tol)
    alpha = _alpha(sys)
    Tm = lax_minus(u, sys)
    fixed = np.abs(u - Tm - alpha) <= tol
    for y, x in tight_pairs(u, sys, alpha, tol):
        if not fixed[x]:
            return False
    for y, x in tight_pairs(Tm + alpha, sys, alpha, tol):
        if not fixed[y] or abs(Tm[x] - u[y] - sys.cost[y, x]) > tol:
            return False
    return True


def check_egalite(u, sys: FiniteCostSystem, tol: float | None = None) -> bool:
    """``u``, ``T^- u`` and ``T^+ u`` share their Aubry nodes and pairs."""
    alpha = _alpha(sys)
    du = aubry_of(u, sys, tol)
    for v in (lax_minus(u, sys) + alpha, lax_plus(u, sys) - alpha):
        dv = aubry_of(v, sys, tol)
        if dv.nodes != du.nodes or dv.pairs != du.pairs:
            return False
    return True


def check_newpr(u, sys: FiniteCostSystem, tol: float | None = None) -> bool:
    """A subsolution strict off its Aubry pairs is strict at every state off its Aubry nodes."""
    if not strict_outside_aubry(u, sys, tol):
        return True  # hypothesis not met
    return newpr_holds(u, sys, tol)


def check_preservation(u, sys: FiniteCostSystem, tol: float | None = None) -> dict:
    """Whether ``T^- u + alpha`` and ``T^+ u - alpha`` stay strict off the Aubry pairs of ``u``.

    Returns ``{"minus": bool, "plus": bool}``; both are ``True`` when ``u`` is
    not strict off its own Aubry pairs (the hypothesis fails).
    """
    if not strict_outside_aubry(u, sys, tol):
        return {"minus": True, "plus": True}
    alpha = _alpha(sys)
    du = aubry_of(u, sys, tol)
    out = {}
    for side, v in (("minus", lax_minus(u, sys) + alpha), ("plus", lax_plus(u, sys) - alpha)):
        dv = aubry_of(v, sys, tol)
        out[side] = dv.pairs == du.pairs and strict_outside_aubry(v, sys, tol)
    return out


def sandwich_candidate(u, sys: FiniteCostSystem, rng: np.random.Generator,
                       lo: float = 0.05, hi: float = 0.95) -> np.ndarray:
    """``v = u + lam (T^- u + alpha - u)`` with a random ``lam`` in ``(lo, hi)`` per state."""
    alpha = _alpha(sys)
    upper = lax_minus(u, sys) + alpha
    lam = rng.uniform(lo, hi, size=sys.n)
    v = u + lam * (upper - u)
    nodes = list(aubry_of(u, sys).nodes)
    v[nodes] = u[nodes]
    return v


def check_sandwich(u, v, sys: FiniteCostSystem, tol: float | None = None) -> bool:
    return verify_sandwich(u, v, sys, tol).passed


def check_regularize(u, sys: FiniteCostSystem, tol: float | None = None) -> bool:
    """``regularize(u)`` is a subsolution with the Aubry sets of ``u``."""
    tol_ = resolve_tol(tol)
    alpha = _alpha(sys)
    r = regularize(u, sys, tol)
    if not slack(r, sys, alpha).is_subsolution(tol_):
        return False
    du, dr = aubry_of(u, sys, tol), aubry_of(r, sys, tol)
    return du.nodes == dr.nodes and du.pairs == dr.pairs


def check_convex_combination(u, v, lam: float, sys: FiniteCostSystem, tol: float | None = None) -> bool:
    """``lam u + (1 - lam) v`` is a subsolution whose tight pairs are those common to ``u`` and ``v``."""
    alpha = _alpha(sys)
    w = lam * u + (1.0 - lam) * v
    if not slack(w, sys, alpha).is_subsolution(resolve_tol(tol)):
        return False
    tw = tight_pairs(w, sys, alpha, tol)
    tu, tv = tight_pairs(u, sys, alpha, tol), tight_pairs(v, sys, alpha, tol)
    if lam == 0.0:
        return tw == tv
    if lam == 1.0:
        return tw == tu
    return tw == tu & tv


def _graph_checks(sys: FiniteCostSystem, tol: float) -> dict:
    res = {}
    res["validation"] = validate(sys).ok
    karp = critical_value(sys, "karp", exact=True).alpha
    agree = critical_value(sys, "bisect", exact=True).alpha == karp
    agree &= abs(critical_value(sys, "karp").alpha - float(karp)) <= tol
    agree &= abs(critical_value(sys, "bisect").alpha - float(karp)) <= tol
    if sys.n <= BRUTE_LIMIT:
        agree &= critical_value(sys, "brute", exact=True).alpha == karp
    res["method_agreement"] = bool(agree)

    alpha = float(karp)
    um, up = weak_kam(sys, "minus", tol=tol), weak_kam(sys, "plus", tol=tol)
    res["fixed_point_minus"] = bool(np.max(np.abs(um - lax_minus(um, sys) - alpha)) <= tol)
    res["fixed_point_plus"] = bool(np.max(np.abs(up - lax_plus(up, sys) + alpha)) <= tol)

    phi = mane_potential(sys, alpha, tol=tol).phi
    tri = phi[:, :, None] + phi[None, :, :] - phi[:, None, :]
    res["potential_triangle"] = bool(tri.min() >= -tol * sys.n)

    A = aubry(sys, tol=tol)
    if sys.n <= BRUTE_LIMIT:
        res["aubry_oracle"] = A.pairs == brute_aubry_pairs(sys, exact=True)
        res["aubry_oracle_exact"] = aubry(sys, exact=True).pairs == A.pairs
    # the Aubry set is the intersection of the Aubry sets of all subsolutions
    res["weak_kam_aubry"] = all(A.pairs <= aubry_of(v, sys, tol).pairs for v in (um, up))

    try:
        u0, audit = strict_subsolution(sys, tol=tol)
        d0 = aubry_of(u0, sys, tol)
        res["strict_subsolution"] = audit.passed
        res["strict_subsolution_aubry"] = d0.nodes == A.nodes and d0.pairs == A.pairs
        res["newpr_strict_subsolution"] = newpr_holds(u0, sys, tol)
        res["regularize_strict_subsolution"] = check_regularize(u0, sys, tol)
    except AuditError:
        res["strict_subsolution"] = False
    return res


def run_audit(sys: FiniteCostSystem, seed: int = 0, instances: int = 20,
              tol: float | None = None) -> dict:
    """Run the invariant suite; randomized subsolutions are drawn from ``seed``.

    Returns ``{"properties": {...}, "diagnostics": {...}, "pass": bool}``; each
    randomized property is summarized as ``{"passed": k, "total": m}``.
    """
    tol = resolve_tol(tol)
    rng = np.random.default_rng(seed)
    props: dict = dict(_graph_checks(sys, tol))

    counters = {k: [0, 0] for k in ("trivial", "egalite_aubry", "newpr", "pin_to",
                                     "regularize", "convex_combination", "sandwich")}
    diag = {k: [0, 0] for k in ("preservation_minus", "preservation_plus", "minimizer_leaves_aubry")}

    def tally(table, key, ok):
        table[key][0] += bool(ok)
        table[key][1] += 1

    for _ in range(instances):
        u = random_subsolution(sys, rng)
        tally(counters, "trivial", check_trivial(u, sys, tol))
        tally(counters, "egalite_aubry", check_egalite(u, sys, tol))
        tally(counters, "regularize", check_regularize(u, sys, tol))
        v = random_subsolution(sys, rng)
        lam = float(rng.integers(0, 5)) / 4.0
        tally(counters, "convex_combination", check_convex_combination(u, v, lam, sys, tol))
        try:
            p, _ = pin_to(u, sys, tol)
        except AuditError:
            tally(counters, "pin_to", False)
            continue
        du, dp = aubry_of(u, sys, tol), aubry_of(p, sys, tol)
        pinned = bool(np.all(np.abs(p[list(du.nodes)] - u[list(du.nodes)]) <= tol))
        tally(counters, "pin_to", pinned and dp.pairs == du.pairs)
        tally(counters, "newpr", check_newpr(p, sys, tol))
        tally(counters, "sandwich", check_sandwich(p, sandwich_candidate(p, sys, rng), sys, tol))
        pres = check_preservation(p, sys, tol)
        tally(diag, "preservation_minus", pres["minus"])
        tally(diag, "preservation_plus", pres["plus"])
        tally(diag, "minimizer_leaves_aubry", not lemma_err_violations(p, sys, tol))

    for key, (k, m) in counters.items():
        props[key] = {"passed": k, "total": m}
    ok = all(v if isinstance(v, bool) else v["passed"] == v["total"] for v in props.values())
    return {
        "properties": props,
        "diagnostics": {key: {"passed": k, "total": m} for key, (k, m) in diag.items()},
        "seed": seed,
        "instances": instances,
        "pass": bool(ok),
    }
