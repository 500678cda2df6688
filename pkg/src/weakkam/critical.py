"""Critical value, Mañé potentials, weak KAM solutions and Aubry sets.

On a strongly connected finite system an ``alpha``-subsolution exists iff every
cycle of the reduced cost ``c + alpha`` has nonnegative total, so the critical
value is minus the minimum cycle mean.  It is computed by Karp's algorithm and
cross-checked by bisection on a Bellman-Ford negative-cycle oracle, with
exhaustive simple-cycle enumeration as a third, brute-force route.

Exact mode (``exact=True``) works on the scaled integer weights of
:func:`weakkam.graphspace.exact_weights` and returns :class:`Fraction` values.

Aubry sets: slacks of any subsolution telescope along a cycle to the cycle's
reduced total, so zero-total cycles are tight for every subsolution; conversely a
bi-infinite calibrated sequence in a finite graph revisits a state and thereby
closes a zero-total cycle.  The Aubry pairs are therefore exactly the edges lying
on zero-total cycles, which :func:`aubry` extracts as the edges inside strongly
connected components of the tight subgraph of a weak KAM solution.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Literal

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from ._config import resolve_tol
from .graphspace import FiniteCostSystem, exact_weights, require_connected
from .laxoleinik import (
    as_exact,
    cost_matrix,
    is_exact,
    lax_minus,
    lax_plus,
    slack,
    tight_pairs,
)

__all__ = [
    "CriticalValue",
    "ManePotential",
    "AubryData",
    "NegativeCycleError",
    "SizeLimitError",
    "critical_value",
    "has_negative_cycle",
    "mane_potential",
    "weak_kam",
    "aubry",
    "aubry_of",
    "simple_cycles",
    "brute_aubry_pairs",
    "lemma_err_violations",
    "BRUTE_LIMIT",
]

BRUTE_LIMIT = 10
BISECT_ITERATIONS = 60


class NegativeCycleError(ValueError):
    """The reduced cost ``c + alpha`` has a negative cycle, i.e. ``alpha < alpha[0]``."""

    def __init__(self, message, cycle=None):
        super().__init__(message)
        self.cycle = cycle


class SizeLimitError(ValueError):
    pass


@dataclass(frozen=True)
class CriticalValue:
    alpha: float | Fraction
    witness_cycle: tuple[int, ...]
    method: str

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "witness": list(self.witness_cycle)}


@dataclass(frozen=True, eq=False)
class ManePotential:
    """``phi[x, y]``: least total of ``c + alpha`` over nonempty chains ``x -> y``; zero diagonal."""

    alpha: float | Fraction
    phi: np.ndarray


@dataclass(frozen=True)
class AubryData:
    nodes: frozenset
    pairs: frozenset
    certificates: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        return {"nodes": sorted(self.nodes), "pairs": [list(p) for p in sorted(self.pairs)]}


# -- helpers -----------------------------------------------------------------

def _canonical_cycle(cycle) -> tuple[int, ...]:
    cycle = [int(v) for v in cycle]
    k = cycle.index(min(cycle))
    return tuple(cycle[k:] + cycle[:k])


def _adjacency(mask: np.ndarray) -> list[list[int]]:
    return [np.flatnonzero(row).tolist() for row in mask]


def _edge_list(ints) -> list[tuple[int, int, int]]:
    return [(i, j, w) for i, row in enumerate(ints) for j, w in enumerate(row) if w is not None]


def _find_cycle_through(adj: list[list[int]], start: int) -> tuple[int, ...] | None:
    """Shortest cycle through ``start`` in the digraph ``adj`` (BFS)."""
    parent = {start: None}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if w == start:
                path = [v]
                while parent[path[-1]] is not None:
                    path.append(parent[path[-1]])
                return tuple(reversed(path))
            if w not in parent:
                parent[w] = v
                queue.append(w)
    return None


def _cyclic_nodes(adj: list[list[int]], n: int) -> tuple[np.ndarray, np.ndarray]:
    """Component labels and a mask of states lying on some cycle of ``adj``."""
    mask = np.zeros((n, n), dtype=np.int8)
    for v, ws in enumerate(adj):
        mask[v, ws] = 1
    _, labels = connected_components(csr_matrix(mask), directed=True, connection="strong")
    sizes = np.bincount(labels, minlength=labels.max() + 1)
    on_cycle = np.array([sizes[labels[v]] > 1 or v in adj[v] for v in range(n)], dtype=bool)
    return labels, on_cycle


# -- Karp --------------------------------------------------------------------

def _karp_float(C: np.ndarray) -> tuple[float, tuple[int, ...]]:
    n = C.shape[0]
    D = np.full((n + 1, n), np.inf)
    pred = np.zeros((n + 1, n), dtype=np.int64)
    D[0, 0] = 0.0
    for k in range(1, n + 1):
        M = D[k - 1][:, None] + C
        pred[k] = np.argmin(M, axis=0)
        D[k] = M[pred[k], np.arange(n)]
    best, best_v = np.inf, -1
    for v in range(n):
        if not np.isfinite(D[n, v]):
            continue
        ks = [k for k in range(n) if np.isfinite(D[k, v])]
        worst = max((D[n, v] - D[k, v]) / (n - k) for k in ks)
        if worst < best:
            best, best_v = worst, v
    cycle = _walk_cycle(pred, n, best_v)
    return -float(best), cycle


def _walk_cycle(pred, n: int, v: int) -> tuple[int, ...]:
    walk = [v]
    for k in range(n, 0, -1):
        walk.append(int(pred[k][walk[-1]]))
    walk.reverse()  # walk[k] is the state after k steps
    seen = {}
    for pos in range(len(walk) - 1, -1, -1):
        s = walk[pos]
        if s in seen:
            return _canonical_cycle(walk[pos:seen[s]])
        seen[s] = pos
    raise AssertionError("Karp walk of length n contains no cycle")


def _karp_exact(ints, D: int, n: int) -> tuple[Fraction, tuple[int, ...]]:
    edges = _edge_list(ints)
    INF = None
    Dk = [[INF] * n for _ in range(n + 1)]
    pred = [[0] * n for _ in range(n + 1)]
    Dk[0][0] = 0
    for k in range(1, n + 1):
        prev, cur, pk = Dk[k - 1], Dk[k], pred[k]
        for i, j, w in edges:
            if prev[i] is not None:
                val = prev[i] + w
                if cur[j] is None or val < cur[j] or (val == cur[j] and i < pk[j]):
                    cur[j] = val
                    pk[j] = i
    best, best_v = None, -1
    for v in range(n):
        if Dk[n][v] is None:
            continue
        worst = max(Fraction(Dk[n][v] - Dk[k][v], n - k) for k in range(n) if Dk[k][v] is not None)
        if best is None or worst < best:
            best, best_v = worst, v
    return -best / D, _walk_cycle(pred, n, best_v)


# -- Bellman-Ford --------------------------------------------------------------

def _potential_float(R: np.ndarray, tol: float) -> np.ndarray | None:
    """Feasible potential for reduced weights ``R`` or ``None`` on a negative cycle."""
    n = R.shape[0]
    p = np.zeros(n)
    for _ in range(n):
        p = np.minimum(p, (p[:, None] + R).min(axis=0))
    nxt = np.minimum(p, (p[:, None] + R).min(axis=0))
    if np.any(nxt < p - tol):
        return None
    return p


def _potential_int(edges, n: int) -> list[int] | None:
    p = [0] * n
    for _ in range(n):
        changed = False
        for i, j, w in edges:
            if p[i] + w < p[j]:
                p[j] = p[i] + w
                changed = True
        if not changed:
            return p
    return None


def _scaled_edges(ints, D: int, alpha: Fraction):
    """Integer weights with the sign pattern of ``c + alpha`` on every cycle."""
    a, b = alpha.numerator, alpha.denominator
    return [(i, j, b * w + a * D) for i, j, w in _edge_list(ints)]


def has_negative_cycle(sys: FiniteCostSystem, alpha, exact: bool = False, tol: float = 0.0) -> bool:
    """Bellman-Ford oracle: does ``c + alpha`` have a cycle of total ``< -tol``?"""
    if exact:
        ints, D = exact_weights(sys)
        return _potential_int(_scaled_edges(ints, D, Fraction(alpha)), sys.n) is None
    return _potential_float(sys.cost + float(alpha), tol) is None


def _tight_cycle(sys: FiniteCostSystem, alpha, exact: bool, tol: float) -> tuple[int, ...]:
    """A cycle of (near-)zero reduced total at a feasible ``alpha``."""
    n = sys.n
    if exact:
        ints, D = exact_weights(sys)
        edges = _scaled_edges(ints, D, Fraction(alpha))
        p = _potential_int(edges, n)
        if p is None:
            raise NegativeCycleError("alpha below the critical value")
        mask = np.zeros((n, n), dtype=bool)
        for i, j, w in edges:
            mask[i, j] = w + p[i] - p[j] == 0
    else:
        R = sys.cost + float(alpha)
        p = _potential_float(R, 0.0)
        if p is None:
            p = _potential_float(R, tol)
        if p is None:
            raise NegativeCycleError("alpha below the critical value")
        S = R + p[:, None] - p[None, :]
        mask = np.isfinite(S) & (S <= tol * (1.0 + np.abs(R)))
    adj = _adjacency(mask)
    _, on_cycle = _cyclic_nodes(adj, n)
    candidates = [c for v in np.flatnonzero(on_cycle)
                  if (c := _find_cycle_through(adj, int(v))) is not None]
    if not candidates:
        raise AssertionError("no tight cycle at a critical alpha")
    C = sys.cost
    return _canonical_cycle(min(candidates, key=lambda c: (
        sum(C[c[k], c[(k + 1) % len(c)]] for k in range(len(c))) / len(c), len(c), c)))


def _bisect(sys: FiniteCostSystem, exact: bool) -> tuple[float | Fraction, tuple[int, ...]]:
    fin = sys.cost[sys.finite]
    if exact:
        ints, D = exact_weights(sys)
        n = sys.n
        lo = -Fraction(float(fin.max()))
        hi = -Fraction(float(fin.min()))

        def feasible(a):
            return _potential_int(_scaled_edges(ints, D, a), n) is not None

        if feasible(lo):
            return lo, _tight_cycle(sys, lo, True, 0.0)
        # alpha[0] = -(sum of k costs)/k has denominator dividing n*D; distinct such
        # values are >= 1/(nD)^2 apart, so a bracket narrower than half that pins it.
        gap = Fraction(1, 2 * (n * D) ** 2)
        it = 0
        while hi - lo >= gap and it < 4 * BISECT_ITERATIONS:
            mid = (lo + hi) / 2
            if feasible(mid):
                hi = mid
            else:
                lo = mid
            it += 1
        alpha = hi.limit_denominator(n * D)
        if not (lo < alpha <= hi and feasible(alpha)):
            raise AssertionError("rational snap of the bisection bracket failed")
        return alpha, _tight_cycle(sys, alpha, True, 0.0)

    C = sys.cost
    lo, hi = -float(fin.max()), -float(fin.min())
    if _potential_float(C + lo, 0.0) is not None:
        hi = lo
    for _ in range(BISECT_ITERATIONS):
        if hi - lo <= 0.0:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _potential_float(C + mid, 0.0) is None:
            lo = mid
        else:
            hi = mid
    return hi, _tight_cycle(sys, hi, False, resolve_tol(None))


# -- brute force -----------------------------------------------------------------

def simple_cycles(adj: list[list[int]]) -> Iterator[tuple[int, ...]]:
    """All simple cycles (self-loops included), each rooted at its smallest state."""
    n = len(adj)
    for s in range(n):
        path = [s]
        on_path = {s}
        stack = [iter(adj[s])]
        while stack:
            for w in stack[-1]:
                if w == s:
                    yield tuple(path)
                elif w > s and w not in on_path:
                    path.append(w)
                    on_path.add(w)
                    stack.append(iter(adj[w]))
                    break
            else:
                stack.pop()
                on_path.discard(path.pop())


def _cycle_totals(sys: FiniteCostSystem, exact: bool):
    if sys.n > BRUTE_LIMIT:
        raise SizeLimitError(f"brute force limited to n <= {BRUTE_LIMIT}, got {sys.n}")
    adj = _adjacency(sys.finite)
    if exact:
        ints, D = exact_weights(sys)
        for cyc in simple_cycles(adj):
            k = len(cyc)
            yield cyc, sum(ints[cyc[i]][cyc[(i + 1) % k]] for i in range(k)), D
    else:
        C = sys.cost
        for cyc in simple_cycles(adj):
            k = len(cyc)
            yield cyc, float(sum(C[cyc[i], cyc[(i + 1) % k]] for i in range(k))), 1


def _brute(sys: FiniteCostSystem, exact: bool):
    best = None
    for cyc, total, D in _cycle_totals(sys, exact):
        k = len(cyc)
        if best is None or total * best[1] < best[0] * k:
            best = (total, k, cyc)
    total, k, cyc = best
    alpha = -Fraction(total, k * D) if exact else -total / k
    return alpha, _canonical_cycle(cyc)


def brute_aubry_pairs(sys: FiniteCostSystem, exact: bool = False, tol: float | None = None) -> frozenset:
    """Edges lying on simple cycles whose reduced total ``sum(c + alpha[0])`` is zero."""
    alpha, _ = _brute(sys, exact)
    tol = resolve_tol(tol)
    pairs = set()
    for cyc, total, D in _cycle_totals(sys, exact):
        k = len(cyc)
        if exact:
            zero = total * alpha.denominator + k * alpha.numerator * D == 0
        else:
            zero = abs(total + k * alpha) <= sys.n * tol
        if zero:
            pairs.update((cyc[i], cyc[(i + 1) % k]) for i in range(k))
    return frozenset(pairs)


# -- public API ------------------------------------------------------------------

def critical_value(sys: FiniteCostSystem, method: Literal["karp", "bisect", "brute"] = "karp",
                   exact: bool = False) -> CriticalValue:
    """Least ``alpha`` admitting an ``alpha``-subsolution, with a minimum-mean witness cycle."""
    require_connected(sys)
    if method == "karp":
        if exact:
            ints, D = exact_weights(sys)
            alpha, cyc = _karp_exact(ints, D, sys.n)
        else:
            alpha, cyc = _karp_float(sys.cost)
            k = len(cyc)
            mean = sum(sys.cost[cyc[i], cyc[(i + 1) % k]] for i in range(k)) / k
            if abs(mean + alpha) > resolve_tol(None) * (1.0 + abs(alpha)):
                cyc = _tight_cycle(sys, alpha, False, resolve_tol(None))
    elif method == "bisect":
        alpha, cyc = _bisect(sys, exact)
    elif method == "brute":
        alpha, cyc = _brute(sys, exact)
    else:
        raise ValueError(f"unknown method {method!r}")
    return CriticalValue(alpha, cyc, method)


def _floyd_exact(ints, D: int, alpha: Fraction, n: int):
    a, b = alpha.numerator, alpha.denominator
    P = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if ints[i][j] is not None:
                P[i][j] = b * ints[i][j] + a * D
    for i in range(n):
        P[i][i] = 0 if P[i][i] is None else min(0, P[i][i])
    for k in range(n):
        Pk = P[k]
        for i in range(n):
            pik = P[i][k]
            if pik is None:
                continue
            Pi = P[i]
            for j in range(n):
                if Pk[j] is not None and (Pi[j] is None or pik + Pk[j] < Pi[j]):
                    Pi[j] = pik + Pk[j]
    if any(P[i][i] < 0 for i in range(n)):
        cyc = None
        raise NegativeCycleError(f"c + alpha has a negative cycle at alpha={alpha}", cyc)
    scale = b * D
    phi = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            phi[i, j] = Fraction(P[i][j], scale)
    return phi


def mane_potential(sys: FiniteCostSystem, alpha, exact: bool = False,
                   tol: float | None = None) -> ManePotential:
    """Mañé potential by min-plus closure of ``c + alpha`` (all-sources Bellman-Ford).

    Raises :class:`NegativeCycleError` iff ``alpha < alpha[0]`` (beyond ``tol``
    in float mode).
    """
    require_connected(sys)
    n = sys.n
    if exact:
        ints, D = exact_weights(sys)
        alpha = Fraction(alpha)
        return ManePotential(alpha, _floyd_exact(ints, D, alpha, n))
    tol = resolve_tol(tol)
    R = sys.cost + float(alpha)
    P = np.where(np.eye(n, dtype=bool), 0.0, R)
    steps = 1
    while steps < n:
        P = np.minimum(P, (P[:, :, None] + P[None, :, :]).min(axis=1))
        steps *= 2
    nxt = np.minimum(P, (P[:, :, None] + P[None, :, :]).min(axis=1))
    # cheapest nonempty cycle through each state, self-loops included
    cycles = (R + P.T).min(axis=1)
    if np.any(nxt < P - tol * (1.0 + np.abs(P))) or np.any(cycles < -tol * (1.0 + abs(float(alpha)))):
        raise NegativeCycleError(f"c + alpha has a negative cycle at alpha={float(alpha)!r}")
    np.fill_diagonal(P, 0.0)
    if not np.all(np.isfinite(P)):
        raise AssertionError("potential infinite on a strongly connected system")
    return ManePotential(float(alpha), P)


def _aubry_nodes_from_phi(sys: FiniteCostSystem, pot: ManePotential, exact: bool, tol: float):
    """States ``a`` with a zero-total nonempty cycle: ``min_y c(a,y)+alpha+phi(y,a) = 0``."""
    C = cost_matrix(sys, exact)
    nodes = []
    for a in range(sys.n):
        vals = [C[a, y] + pot.alpha + pot.phi[y, a] for y in range(sys.n) if sys.finite[a, y]]
        m = min(vals)
        if (m == 0) if exact else (abs(m) <= sys.n * tol):
            nodes.append(a)
    return nodes


def weak_kam(sys: FiniteCostSystem, side: Literal["minus", "plus"] = "minus",
             exact: bool = False, tol: float | None = None) -> np.ndarray:
    """Weak KAM solution built from Mañé potentials anchored at the Aubry nodes.

    ``minus``: ``u(x) = min_a phi(a, x)``, a fixed point of ``T^- + alpha[0]``.
    ``plus``: ``u(x) = max_a -phi(x, a)``, a fixed point of ``T^+ - alpha[0]``.
    Normalized so that ``u`` vanishes at the lowest-index Aubry node.
    """
    tol = resolve_tol(tol)
    cv = critical_value(sys, "karp", exact)
    pot = mane_potential(sys, cv.alpha, exact, tol)
    nodes = _aubry_nodes_from_phi(sys, pot, exact, tol)
    if not nodes:
        raise AssertionError("empty Aubry set")
    phi = pot.phi
    if side == "minus":
        u = phi[nodes, :].min(axis=0)
    elif side == "plus":
        u = (-phi[:, nodes]).max(axis=1)
    else:
        raise ValueError(f"side must be 'minus' or 'plus', got {side!r}")
    return u - u[nodes[0]]


def aubry(sys: FiniteCostSystem, exact: bool = False, tol: float | None = None) -> AubryData:
    """Aubry pairs (edges on zero-total reduced cycles) and projected nodes, with certificates."""
    tol = resolve_tol(tol)
    cv = critical_value(sys, "karp", exact)
    u = weak_kam(sys, "minus", exact, tol)
    tight = tight_pairs(u, sys, cv.alpha, tol)
    adj = [[] for _ in range(sys.n)]
    for x, y in sorted(tight):
        adj[x].append(y)
    labels, on_cycle = _cyclic_nodes(adj, sys.n)
    pairs = frozenset((x, y) for x, y in tight
                      if labels[x] == labels[y] and on_cycle[x])
    sub = [[y for y in adj[x] if (x, y) in pairs] for x in range(sys.n)]
    certificates = {}
    C = cost_matrix(sys, exact)
    for v in sorted({x for x, _ in pairs}):
        cyc = _find_cycle_through(sub, v)
        k = len(cyc)
        total = sum(C[cyc[i], cyc[(i + 1) % k]] + cv.alpha for i in range(k))
        if (total != 0) if exact else (abs(total) > sys.n * tol):
            raise AssertionError(f"certificate cycle {cyc} has reduced total {total}")
        certificates[v] = cyc
    return AubryData(frozenset(certificates), pairs, certificates)


def aubry_of(u, sys: FiniteCostSystem, tol: float | None = None) -> AubryData:
    """Aubry set of a critical subsolution ``u``.

    ``D_u`` is the calibrated-pair digraph.  A state carries a bi-infinite
    calibrated sequence iff it is reachable from a cycle of ``D_u`` and can reach
    one; a pair belongs to the Aubry set iff its tail is reachable from a cycle and
    its head reaches one.  Certificates are a cycle through the node when one
    exists, otherwise a cycle-to-cycle path through it.
    """
    exact = is_exact(u)
    cv = critical_value(sys, "karp", exact)
    D_u = tight_pairs(u, sys, cv.alpha, tol)
    n = sys.n
    adj = [[] for _ in range(n)]
    radj = [[] for _ in range(n)]
    for x, y in sorted(D_u):
        adj[x].append(y)
        radj[y].append(x)
    _, on_cycle = _cyclic_nodes(adj, n)

    def reach(graph):
        seen = set(np.flatnonzero(on_cycle).tolist())
        queue = deque(seen)
        while queue:
            v = queue.popleft()
            for w in graph[v]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        return seen

    fwd = reach(adj)    # reachable from a cycle: infinite past
    bwd = reach(radj)   # reaches a cycle: infinite future
    nodes = frozenset(fwd & bwd)
    pairs = frozenset((x, y) for x, y in D_u if x in fwd and y in bwd)
    sub = [[y for y in adj[x] if (x, y) in pairs] for x in range(n)]
    certificates = {}
    for v in sorted(nodes):
        cyc = _find_cycle_through(sub, v)
        certificates[v] = cyc if cyc is not None else ("path", v)
    return AubryData(nodes, pairs, certificates)


def lemma_err_violations(u, sys: FiniteCostSystem, tol: float | None = None) -> list[tuple[str, int, int]]:
    """Instances of the minimizer-leaves-Aubry property failing for ``u``.

    For ``x`` outside the Aubry set of ``u``, every minimizer ``y`` of
    ``u(y) + c(y, x)`` (resp. maximizer of ``u(y) - c(x, y)``) should lie
    outside it as well.  This needs twist conditions, which general finite
    graphs lack, so violations are returned rather than raised.
    """
    exact = is_exact(u)
    tol_ = 0 if exact else resolve_tol(tol)
    A = aubry_of(u, sys, tol).nodes
    C = cost_matrix(sys, exact)
    Tm, Tp = lax_minus(u, sys), lax_plus(u, sys)
    out = []
    for x in range(sys.n):
        if x in A:
            continue
        for y in range(sys.n):
            if sys.finite[y, x] and abs(u[y] + C[y, x] - Tm[x]) <= tol_ and y in A:
                out.append(("minus", x, y))
            if sys.finite[x, y] and abs(u[y] - C[x, y] - Tp[x]) <= tol_ and y in A:
                out.append(("plus", x, y))
    return out
