"""Twisted costs, Mather's alpha function, Z^d covers and equivariant solutions.

A cohomology class is a vector ``h`` in ``R^d`` paired with the integer winding
vectors of the edges; the twisted cost is ``c_h(i, j) = c(i, j) - h . w(i, j)``
and ``alpha[h]`` is its critical value.  Shifting costs by a coboundary
``g(i) - g(j)`` telescopes away on every cycle, so ``alpha`` only depends on the
class.

The infinite ``Z^d`` cover is represented by a window of ``K`` deck copies per
direction with wraparound, i.e. the finite quotient of the cover by ``K Z^d``.
Edges whose deck index leaves the window and wraps are marked; fixed-point
residuals of lifted solutions are evaluated away from them.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ._config import resolve_tol
from .critical import CriticalValue, critical_value, weak_kam
from .graphspace import FiniteCostSystem, InvariantError
from .laxoleinik import format_number

__all__ = [
    "AlphaCurve",
    "CoverWindow",
    "as_class",
    "twist_cost",
    "coboundary_shift",
    "mather_alpha",
    "alpha_sweep",
    "build_cover",
    "equivariant_solution",
    "MAX_COVER_STATES",
]

MAX_COVER_STATES = 20000


def as_class(sys: FiniteCostSystem, h) -> np.ndarray:
    """Validate a cohomology class against the winding dimension."""
    h = np.atleast_1d(np.asarray(h, dtype=np.float64))
    if h.ndim != 1 or h.shape[0] != sys.winding_dim:
        raise ValueError(f"class has dimension {h.size}, system winding_dim is {sys.winding_dim}")
    if not np.all(np.isfinite(h)):
        raise ValueError("class entries must be finite")
    return h


def twist_cost(sys: FiniteCostSystem, h) -> FiniteCostSystem:
    """``c_h = c - h . w`` on finite edges; windings unchanged."""
    h = as_class(sys, h)
    if not np.any(h):
        return sys
    pairing = sys.winding @ h
    cost = np.where(sys.finite, sys.cost - pairing, np.inf)
    return sys.with_cost(cost)


def coboundary_shift(sys: FiniteCostSystem, g) -> FiniteCostSystem:
    """Costs shifted by ``g(i) - g(j)``: same class, same alpha function."""
    g = np.asarray(g, dtype=np.float64)
    return sys.with_cost(np.where(sys.finite, sys.cost + g[:, None] - g[None, :], np.inf))


def mather_alpha(sys: FiniteCostSystem, h, method: str = "karp", exact: bool = False) -> CriticalValue:
    """``alpha[h]``: critical value of the twisted cost, with its witness cycle."""
    return critical_value(twist_cost(sys, h), method, exact)


@dataclass
class AlphaCurve:
    samples: list
    convexity_violations: list
    superlinearity: dict
    minimizer: tuple
    witnesses: list = field(default_factory=list, repr=False)

    @property
    def passed(self) -> bool:
        return not self.convexity_violations and all(c is not None for c in self.superlinearity.values())

    def to_csv(self) -> str:
        rows = ["h,alpha"]
        for h, a in self.samples:
            key = ";".join(format_number(v) for v in np.atleast_1d(h))
            rows.append(f"{key},{format_number(a)}")
        return "\n".join(rows) + "\n"

    def to_dict(self) -> dict:
        h_star, a_star = self.minimizer
        return {
            "samples": len(self.samples),
            "convexity_violations": [[list(map(float, np.atleast_1d(t))) for t in v]
                                     for v in self.convexity_violations],
            "superlinearity": {str(k): c for k, c in self.superlinearity.items()},
            "minimizer": {"h": list(map(float, np.atleast_1d(h_star))), "alpha": a_star},
            "pass": self.passed,
        }


def _norm(h) -> float:
    return float(np.linalg.norm(np.atleast_1d(h)))


def alpha_sweep(sys: FiniteCostSystem, h_grid, tol: float | None = None) -> AlphaCurve:
    """Sample ``alpha`` on a grid of classes and audit convexity and super-linearity.

    Convexity is checked on every triple ``h1 < h2 < h3`` of consecutive grid
    points in one dimension (every midpoint triple in several):
    ``alpha[h2] <= lam alpha[h1] + (1 - lam) alpha[h3] + tol``.  For ``k`` in
    ``{0, 1, 2}`` the least ``C(k)`` with ``alpha[h] >= k |h| - C(k)`` over the grid
    is reported.  The minimizer prefers the smallest ``|h|`` among ties, then the
    lexicographically lowest class.
    """
    tol = resolve_tol(tol)
    grid = [as_class(sys, h) for h in h_grid]
    if not grid:
        raise ValueError("empty class grid")
    if sys.winding_dim == 1:
        grid.sort(key=lambda h: h[0])
    cvs = [mather_alpha(sys, h) for h in grid]
    alphas = [float(cv.alpha) for cv in cvs]
    samples = [(h[0] if sys.winding_dim == 1 else tuple(h), a) for h, a in zip(grid, alphas)]

    violations = []
    if sys.winding_dim == 1:
        for k in range(1, len(grid) - 1):
            h1, h2, h3 = grid[k - 1][0], grid[k][0], grid[k + 1][0]
            if h3 == h1:
                continue
            lam = (h3 - h2) / (h3 - h1)
            if alphas[k] > lam * alphas[k - 1] + (1 - lam) * alphas[k + 1] + tol:
                violations.append((h1, h2, h3))
    else:
        index = {tuple(h): a for h, a in zip(grid, alphas)}
        keys = list(index)
        for a, b in itertools.combinations(keys, 2):
            mid = tuple((np.asarray(a) + np.asarray(b)) / 2)
            if mid in index and index[mid] > 0.5 * (index[a] + index[b]) + tol:
                violations.append((a, mid, b))

    superlinear = {k: float(max(k * _norm(h) - a for h, a in zip(grid, alphas))) for k in (0, 1, 2)}
    order = sorted(range(len(grid)), key=lambda i: (alphas[i], _norm(grid[i]), tuple(grid[i])))
    best = min(alphas)
    ties = [i for i in order if alphas[i] <= best + tol]
    i_star = min(ties, key=lambda i: (_norm(grid[i]), tuple(grid[i])))
    minimizer = (samples[i_star][0], alphas[i_star])
    return AlphaCurve(samples, violations, superlinear, minimizer, [cv.witness_cycle for cv in cvs])


@dataclass(frozen=True, eq=False)
class CoverWindow:
    """``K^d`` deck copies of a base system with wraparound deck indices.

    Lifted state ``(x, g)`` has index ``flat(g) * n + x`` where ``g`` ranges over
    ``{-(K-1)/2, ..., (K-1)/2}^d``.  The edge ``(i, g) -> (j, g + w(i, j))`` keeps
    the base cost; ``wrap[a, b]`` marks lifted edges whose deck index wrapped.
    """

    base: FiniteCostSystem
    copies: int
    lifted: FiniteCostSystem
    deck: np.ndarray
    wrap: np.ndarray

    @property
    def radius(self) -> int:
        return (self.copies - 1) // 2

    def index(self, x: int, g) -> int:
        g = np.atleast_1d(np.asarray(g, dtype=np.int64))
        K, r = self.copies, self.radius
        flat = 0
        for gk in g:
            flat = flat * K + int((gk + r) % K)
        return flat * self.base.n + int(x)

    def deck_action(self, e) -> np.ndarray:
        """Permutation of lifted states under translation by the deck element ``e``."""
        n = self.base.n
        perm = np.empty(self.lifted.n, dtype=np.int64)
        for a in range(self.lifted.n):
            perm[a] = self.index(a % n, self.deck[a] + np.asarray(e))
        return perm

    def interior(self, e) -> np.ndarray:
        """States whose translate by ``e`` stays inside the window without wrapping."""
        g = self.deck + np.asarray(e)
        return np.all(np.abs(g) <= self.radius, axis=1)

    def projection_check(self) -> float:
        """Largest gap between the fiber minimum of lifted costs and the base cost."""
        n = self.base.n
        worst = 0.0
        for x, y, c in self.base.edges():
            src = self.index(x, np.zeros(self.base.winding_dim, dtype=np.int64))
            fiber = self.lifted.cost[src, y::n]
            worst = max(worst, abs(float(fiber.min()) - c))
        return worst


def build_cover(sys: FiniteCostSystem, K: int) -> CoverWindow:
    d = sys.winding_dim
    if d == 0:
        raise ValueError("no deck directions: the system has winding_dim 0")
    if K < 1 or K % 2 == 0:
        raise ValueError(f"copies K must be an odd positive integer, got {K}")
    n = sys.n
    size = n * K ** d
    if size > MAX_COVER_STATES:
        raise ValueError(f"cover would have {size} states (limit {MAX_COVER_STATES})")
    r = (K - 1) // 2
    decks = np.array(list(itertools.product(range(-r, r + 1), repeat=d)), dtype=np.int64)
    deck = np.repeat(decks, n, axis=0)
    cost = np.full((size, size), np.inf)
    winding = np.zeros((size, size, d), dtype=np.int64)
    wrap = np.zeros((size, size), dtype=bool)
    probe = CoverWindow(sys, K, sys, deck, wrap)
    for gi, g in enumerate(decks):
        for i, j, c in sys.edges():
            a = gi * n + i
            target = g + sys.winding[i, j]
            b = probe.index(j, target)
            cost[a, b] = c
            winding[a, b] = sys.winding[i, j]
            wrap[a, b] = bool(np.any(np.abs(target) > r))
    labels = tuple(f"{x}@{','.join(map(str, g))}" for g in decks for x in range(n))
    lifted = FiniteCostSystem(cost, winding, labels)
    return CoverWindow(sys, K, lifted, deck, wrap)


def equivariant_solution(sys: FiniteCostSystem, h, K: int, tol: float | None = None):
    """Lift ``u_h = weak_kam(twist_cost(sys, h))`` to ``u(x, g) = u_h(x) + h . g``.

    The report gives the deck-equivariance residual ``max |u(T_e z) - u(z) - h.e|``
    over the window generators (states whose translate does not wrap), and the
    residual of ``u = T^- u + alpha[h]`` for the lifted operator at states with no
    wrapped incoming edge.  At ``h = 0`` it also applies the lifted operator once,
    wrap edges included, and checks that the result is again deck-invariant.
    """
    tol = resolve_tol(tol)
    h = as_class(sys, h)
    cover = build_cover(sys, K)
    twisted = twist_cost(sys, h)
    u_h = weak_kam(twisted, "minus", tol=tol)
    c_rho = float(critical_value(twisted).alpha)
    n = sys.n
    lifted = cover.lifted
    u = u_h[np.arange(lifted.n) % n] + cover.deck @ h

    lift_res = 0.0
    for k in range(sys.winding_dim):
        e = np.zeros(sys.winding_dim, dtype=np.int64)
        e[k] = 1
        inside = cover.interior(e)
        perm = cover.deck_action(e)
        if inside.any():
            lift_res = max(lift_res, float(np.abs(u[perm][inside] - u[inside] - h[k]).max()))

    C = lifted.cost
    vals = u[:, None] + C
    clean = ~cover.wrap.any(axis=0)
    Tu = np.where(cover.wrap, np.inf, vals).min(axis=0)
    fp_res = float(np.abs(u - Tu - c_rho)[clean].max()) if clean.any() else 0.0

    report = {
        "h": h.tolist(),
        "copies": K,
        "c_rho": c_rho,
        "alpha0": float(critical_value(sys).alpha),
        "lift_residual": lift_res,
        "fixed_point_residual": fp_res,
        "excluded_states": int((~clean).sum()),
        "projection_gap": cover.projection_check(),
    }
    ok = lift_res <= 1e-12 and fp_res <= tol
    if not np.any(h):
        Tfull = vals.min(axis=0)
        inv = 0.0
        for k in range(sys.winding_dim):
            e = np.zeros(sys.winding_dim, dtype=np.int64)
            e[k] = 1
            perm = cover.deck_action(e)
            inv = max(inv, float(np.abs(Tfull[perm] - Tfull).max()), float(np.abs(u[perm] - u).max()))
        report["invariance_residual"] = inv
        ok = ok and inv <= 1e-12
    report["pass"] = bool(ok)
    return u, cover, report
