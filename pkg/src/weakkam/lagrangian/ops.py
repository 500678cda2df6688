"""Costs, gradients, partial dynamics and audits for mechanical Lagrangians.

``c_L(x, y)`` is the least action of unit-time curves from ``x`` to some lift of
``y``.  Each candidate lift ``y + k`` (``|k| <= max_winding``) is minimized by
collocation; the best candidates are then refined by shooting along the
Euler-Lagrange flow, whose action is the reported cost and whose endpoint
velocities give the gradients ``dc/dx = -v_0``, ``dc/dy = v_1``.  A pair is
ambiguous (a cut-locus pair, where ``c_L`` is not differentiable) when the two
best windings are within ``ambiguity_gap``.

Uniqueness of the minimizer is tested only across winding classes, as a
numerical surrogate for uniqueness among all curves.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .._config import LAGRANGIAN_TOL
from ..critical import aubry
from ..graphspace import FiniteCostSystem
from .collocation import endpoint_momenta, minimize_lifted
from .flow import integrate, shoot
from .model import (
    AmbiguousMinimizerError,
    CotangentPoint,
    Curve,
    LagrangianSpec,
    PartialMapUndefined,
)

__all__ = [
    "PairSolution",
    "solve_pairs",
    "action_cost",
    "cost_gradients",
    "el_flow",
    "partial_dynamics",
    "partial_maps",
    "el_residual",
    "FunctionCost",
    "twist_audit",
    "discretize",
    "discretize_with_gaps",
    "aubry_star",
    "AGREEMENT_TOL",
]

# collocation (midpoint, M segments) vs continuous action: O(1/M^2) discretization error
AGREEMENT_TOL = 0.5


def _winding_order(L: LagrangianSpec) -> np.ndarray:
    """Candidate windings sorted by ``(|k|, k)`` so that ties prefer small windings."""
    return np.array(sorted(L.windings(), key=lambda k: (abs(k), k)))


@dataclass
class PairSolution:
    """Batched minimizers; every field is an array over the pairs."""

    x: np.ndarray
    y: np.ndarray
    winding: np.ndarray
    action: np.ndarray
    discrete_action: np.ndarray
    gap: np.ndarray
    v_start: np.ndarray
    v_end: np.ndarray
    q: np.ndarray
    refined: bool
    all_actions: np.ndarray = field(repr=False, default=None)

    def curve(self, b: int = 0) -> Curve:
        q = self.q[b]
        M = q.shape[0] - 1
        return Curve(float(self.x[b]), float(self.y[b]), int(self.winding[b]), q[1:-1].copy(),
                     np.diff(q) * M, float(self.discrete_action[b]), float(self.action[b]),
                     float(self.v_start[b]), float(self.v_end[b]), self.refined, float(self.gap[b]))


def solve_pairs(L: LagrangianSpec, x, y, winding=None, refine: bool = True) -> PairSolution:
    """Minimizers for the pairs ``(x[b], y[b])``.

    With ``winding=None`` the best winding is selected; otherwise ``winding[b]``
    is imposed and ``gap`` is the margin by which it beats every other winding
    (negative when another winding is cheaper).
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    x, y = np.broadcast_arrays(x, y)
    B = x.shape[0]
    ks = _winding_order(L)
    K = len(ks)
    q, S = minimize_lifted(L, x, y[:, None] + ks[None, :])
    rows = np.arange(B)

    if winding is None:
        first = np.argmin(S, axis=1)
    else:
        w = np.broadcast_to(np.asarray(winding, dtype=np.int64), (B,))
        if np.any(np.abs(w) > L.max_winding):
            raise ValueError(f"winding outside [-{L.max_winding}, {L.max_winding}]")
        first = np.array([int(np.flatnonzero(ks == k)[0]) for k in w])
    masked = S.copy()
    masked[rows, first] = np.inf
    second = np.argmin(masked, axis=1) if K > 1 else first

    disc = S[rows, first]
    chosen = first
    if refine:
        cand = np.stack([first, second], axis=1) if K > 1 else first[:, None]
        xs = np.repeat(x, cand.shape[1])
        qc = q[rows[:, None], cand]                       # (B, c, M+1)
        Yc = qc[..., -1].reshape(-1)
        p0, _ = endpoint_momenta(L, qc.reshape(-1, qc.shape[-1]))
        v0, v1, A, _ = shoot(L, xs, Yc, p0)
        v0, v1, A = (a.reshape(cand.shape) for a in (v0, v1, A))
        if winding is None and K > 1:
            pick = np.where(A[:, 1] < A[:, 0], 1, 0)
        else:
            pick = np.zeros(B, dtype=np.int64)
        other = 1 - pick
        chosen = cand[rows, pick]
        action = A[rows, pick]
        gap = A[rows, other] - action if K > 1 else np.full(B, np.inf)
        vs, ve = v0[rows, pick], v1[rows, pick]
        disc = S[rows, chosen]
        if np.any(np.abs(action - disc) > AGREEMENT_TOL):
            b = int(np.argmax(np.abs(action - disc)))
            raise AssertionError(
                f"collocation and shooting disagree at ({x[b]}, {y[b]}): {disc[b]} vs {action[b]}")
    else:
        action = disc
        gap = S[rows, second] - disc if K > 1 else np.full(B, np.inf)
        vs, ve = endpoint_momenta(L, q[rows, chosen])
    return PairSolution(x, y, ks[chosen], action, disc, gap, vs, ve, q[rows, chosen], refine, S)


def action_cost(L: LagrangianSpec, x: float, y: float, winding: int | None = None,
                refine: bool = True) -> tuple[float, Curve]:
    """Minimal unit-time action from ``x`` to ``y + winding`` (best winding when unset)."""
    sol = solve_pairs(L, [x], [y], None if winding is None else [winding], refine)
    return float(sol.action[0]), sol.curve(0)


def _check_unique(L: LagrangianSpec, sol: PairSolution):
    # an imposed winding may be beaten by another one (negative gap); only ties are cut-locus pairs
    bad = np.flatnonzero(np.abs(sol.gap) <= L.ambiguity_gap)
    if bad.size:
        b = int(bad[0])
        raise AmbiguousMinimizerError(
            f"minimizer from {sol.x[b]} to {sol.y[b]} is ambiguous: winding gap {sol.gap[b]:.3e}")


def cost_gradients(L: LagrangianSpec, x, y, winding=None) -> tuple:
    """``(dc/dx, dc/dy) = (-v_0, v_1)`` at the minimizer; arrays broadcast.

    Raises :class:`AmbiguousMinimizerError` on cut-locus pairs.
    """
    scalar = np.ndim(x) == 0 and np.ndim(y) == 0
    sol = solve_pairs(L, x, y, winding, refine=True)
    _check_unique(L, sol)
    if scalar:
        return float(-sol.v_start[0]), float(sol.v_end[0])
    return -sol.v_start, sol.v_end


def el_flow(L: LagrangianSpec, state, duration: float = 1.0) -> tuple[float, float, float]:
    """Flow ``(x, v, t)`` for ``duration``; positions stay lifted (not reduced mod 1)."""
    x, v, t = state
    q, p, *_ = integrate(L, x, v, duration)
    return float(q), float(p), float(t + duration)


def partial_maps(L: LagrangianSpec, x, y, direction: int = 1) -> dict:
    """Batched ``phi_{+1}``/``phi_{-1}`` on lifted pairs; see :func:`partial_dynamics`.

    The maps act on the universal cover: the continued piece counts as the
    minimizer between its lifted endpoints when the global collocation minimizer
    for that lift reproduces it (matching velocity at the junction).  Returns
    arrays ``start``/``end`` (the image pair), ``first_gap`` and ``gap`` (winding
    margins of the input and continued lifts on the circle), ``el_residual``,
    ``defined`` and ``unique_on_circle`` (the continued lift also beats every
    other winding by more than the ambiguity gap).
    """
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    zeros = np.zeros(x.shape, dtype=np.int64)
    first = solve_pairs(L, x, y, zeros)
    if direction == 1:
        z, *_ = integrate(L, y, first.v_end, 1.0)
        a, b = y, z
    else:
        w, *_ = integrate(L, x, first.v_start, -1.0)
        a, b = w, x
    cont = solve_pairs(L, a, b, zeros)
    if direction == 1:
        resid = np.abs(first.v_end - cont.v_start)
    else:
        resid = np.abs(cont.v_end - first.v_start)
    defined = (np.abs(first.gap) > L.ambiguity_gap) & (resid <= L.gradient_tol)
    return {"start": a, "end": b, "first_gap": first.gap, "gap": cont.gap,
            "el_residual": resid, "defined": defined,
            "unique_on_circle": defined & (cont.gap > L.ambiguity_gap)}


def partial_dynamics(L: LagrangianSpec, x: float, y: float, direction: int = 1,
                     strict: bool = False):
    """``phi_{+1}(x, y) = (y, z)`` or ``phi_{-1}(x, y) = (w, x)`` on lifted points.

    ``z`` is where the flow continues the minimizer ``x -> y`` after one more unit
    of time (``w``: one unit before, for ``-1``).  Returns ``(pair, report)``.
    ``report["defined"]`` is false when the continued piece is not the
    minimizer between its lifted endpoints (the map is partial); with
    ``strict=True`` that case raises :class:`PartialMapUndefined` instead.
    ``report["unique_on_circle"]`` is the winding-gap test for the continued
    piece.  An input lift tied with another winding raises
    :class:`AmbiguousMinimizerError`.
    """
    r = partial_maps(L, [x], [y], direction)
    if abs(r["first_gap"][0]) <= L.ambiguity_gap:
        raise AmbiguousMinimizerError(
            f"minimizer from {x} to {y} is not unique: winding gap {r['first_gap'][0]:.3e}")
    report = {"el_residual": float(r["el_residual"][0]), "winding_gap": float(r["gap"][0]),
              "defined": bool(r["defined"][0]), "unique_on_circle": bool(r["unique_on_circle"][0])}
    if not report["defined"]:
        report["note"] = "partial map undefined here"
        if strict:
            raise PartialMapUndefined(
                f"partial map undefined at ({x}, {y}): continuation gap {report['winding_gap']:.3e}, "
                f"residual {report['el_residual']:.3e}")
    return (float(r["start"][0]), float(r["end"][0])), report


def el_residual(L: LagrangianSpec, chain, check_unique: bool = True) -> float:
    """``max_i |dc/dy(x_{i-1}, x_i) + dc/dx(x_i, x_{i+1})|`` along a lifted chain."""
    chain = np.asarray(chain, dtype=np.float64)
    if chain.size < 3:
        return 0.0
    sol = solve_pairs(L, chain[:-1], chain[1:], np.zeros(chain.size - 1, dtype=np.int64))
    if check_unique:
        _check_unique(L, sol)
    return float(np.abs(sol.v_end[:-1] - sol.v_start[1:]).max())


class FunctionCost:
    """A cost given by a Python function ``c(x, y)``, differentiated by central differences."""

    def __init__(self, fn: Callable[[float, float], float], step: float = 1e-5):
        self.fn = fn
        self.step = step

    def gradients(self, x, y):
        e = self.step
        f = np.vectorize(self.fn, otypes=[float])
        gx = (f(x + e, y) - f(x - e, y)) / (2 * e)
        gy = (f(x, y + e) - f(x, y - e)) / (2 * e)
        return gx, gy


def _min_gap(values: np.ndarray) -> float:
    if values.size < 2:
        return float("inf")
    s = np.sort(values)
    return float(np.diff(s).min())


def twist_audit(L, sample_count: int = 100, bases=(0.1, 0.35, 0.6, 0.85),
                tol: float = LAGRANGIAN_TOL) -> dict:
    """Injectivity of ``y -> -dc/dx(x, y)`` and ``x -> dc/dy(x, y)`` on samples.

    For each base point, ``sample_count`` partners spread over one period around
    it are mapped through the left (resp. right) skew Legendre transform of the
    circle cost (best winding).  Cut-locus pairs, where two windings tie, are
    skipped.  Passes iff the minimal covector gap between
    distinct samples exceeds ``tol`` in both directions.
    """
    offsets = (np.arange(sample_count) + 0.5) / sample_count - 0.5
    left, right, skipped = [], [], 0
    for b in bases:
        partners = b + offsets
        if isinstance(L, LagrangianSpec):
            sl = solve_pairs(L, np.full(sample_count, b), partners)
            sr = solve_pairs(L, partners, np.full(sample_count, b))
            okl = sl.gap > L.ambiguity_gap
            okr = sr.gap > L.ambiguity_gap
            skipped += int((~okl).sum() + (~okr).sum())
            left.append(_min_gap(sl.v_start[okl]))          # -dc/dx = v_0
            right.append(_min_gap(sr.v_end[okr]))           # dc/dy = v_1
        else:
            cost = L if isinstance(L, FunctionCost) else FunctionCost(L)
            gx, _ = cost.gradients(np.full(sample_count, b), partners)
            _, gy = cost.gradients(partners, np.full(sample_count, b))
            left.append(_min_gap(-gx))
            right.append(_min_gap(gy))
    gl, gr = min(left), min(right)
    return {
        "samples": sample_count * len(bases),
        "skipped_ambiguous": skipped,
        "min_gap_left": gl,
        "min_gap_right": gr,
        "tol": tol,
        "pass": bool(gl > tol and gr > tol),
    }


def discretize_with_gaps(L: LagrangianSpec, N: int | None = None) -> tuple[FiniteCostSystem, np.ndarray]:
    """Grid system on ``{i/N}`` plus the winding gap of every edge.

    Grids below ``N = 8`` are accepted but too coarse for meaningful critical
    values; they serve analytic spot checks.
    """
    N = L.grid if N is None else N
    if N is None or N < 2:
        raise ValueError("grid size N must be at least 2")
    x = np.arange(N) / N
    ks = _winding_order(L)
    _, S = minimize_lifted(L, x, (x[None, :, None] + ks[None, None, :]).repeat(N, 0).reshape(N, -1))
    S = S.reshape(N, N, len(ks))
    best = np.argmin(S, axis=2)
    cost = np.take_along_axis(S, best[:, :, None], axis=2)[:, :, 0]
    masked = S.copy()
    np.put_along_axis(masked, best[:, :, None], np.inf, axis=2)
    gaps = masked.min(axis=2) - cost
    winding = ks[best][:, :, None]
    labels = tuple(f"{i}/{N}" for i in range(N))
    return FiniteCostSystem(cost, winding, labels, x[:, None]), gaps


def discretize(L: LagrangianSpec, N: int | None = None) -> FiniteCostSystem:
    """States ``i/N`` with ``cost(i, j)`` the collocation action over the best winding."""
    return discretize_with_gaps(L, N)[0]


def _circle_dist(a, b):
    d = np.abs(np.asarray(a) - np.asarray(b)) % 1.0
    return np.minimum(d, 1.0 - d)


def aubry_star(L: LagrangianSpec, N: int | None = None, tol: float = LAGRANGIAN_TOL):
    """Left Legendre images of the Aubry pairs of the discretized system, with a graph audit.

    The report checks that each Aubry node has exactly one successor and one
    predecessor among the Aubry pairs (the finite form of the graph property)
    and records how far the nodes lie from the maximum of ``V``.
    """
    sys, gaps = discretize_with_gaps(L, N)
    N = sys.n
    data = aubry(sys, tol=tol)
    pairs = sorted(data.pairs)
    xs = np.array([i / N for i, _ in pairs])
    ys = np.array([j / N for _, j in pairs])
    ws = np.array([int(sys.winding[i, j, 0]) for i, j in pairs], dtype=np.int64)
    sol = solve_pairs(L, xs, ys, ws)
    ambiguous = [list(p) for p, g in zip(pairs, sol.gap) if g <= L.ambiguity_gap]
    points = frozenset(CotangentPoint(float(x), float(v)) for x, v in zip(xs, sol.v_start))
    succ = {a: sorted(j for i, j in pairs if i == a) for a in sorted(data.nodes)}
    pred = {a: sorted(i for i, j in pairs if j == a) for a in sorted(data.nodes)}
    xgrid = np.linspace(0.0, 1.0, 4 * N, endpoint=False)
    vmax_at = float(xgrid[np.argmax(L.V(xgrid))])
    node_x = np.array(sorted(data.nodes)) / N
    dist_cells = (_circle_dist(node_x, vmax_at) * N).tolist()
    report = {
        "grid": N,
        "nodes": sorted(data.nodes),
        "pairs": [list(p) for p in pairs],
        "successors": {str(k): v for k, v in succ.items()},
        "unique_successor": all(len(v) == 1 for v in succ.values())
        and all(len(v) == 1 for v in pred.values()),
        "argmax_V": vmax_at,
        "max_distance_cells": max(dist_cells),
        "ambiguous_pairs": ambiguous,
        "points": [p.to_dict() for p in sorted(points, key=lambda p: (p.base, p.covector))],
    }
    report["pass"] = report["unique_successor"] and not ambiguous
    return points, report
