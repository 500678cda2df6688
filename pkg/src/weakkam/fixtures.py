"""Small reference systems and random instance generators used by tests and audits."""

from __future__ import annotations

import numpy as np

from .critical import mane_potential, critical_value
from .graphspace import FiniteCostSystem, from_edges

__all__ = ["g2", "g3", "c3", "constant", "random_system", "random_subsolution"]


def g2() -> FiniteCostSystem:
    """Two states; the 2-cycle (0,1) has the minimum mean 2."""
    return from_edges(2, [(0, 0, 5), (0, 1, 1), (1, 0, 3), (1, 1, 4)])


def g3() -> FiniteCostSystem:
    """``g2`` plus a third state joined to everything at cost 6 (loop 10)."""
    edges = [(0, 0, 5), (0, 1, 1), (1, 0, 3), (1, 1, 4), (2, 2, 10)]
    edges += [(i, 2, 6) for i in (0, 1)] + [(2, j, 6) for j in (0, 1)]
    return from_edges(3, edges)


def c3() -> FiniteCostSystem:
    """3-cycle with both orientations at cost 1; edge 2->0 winds +1, 0->2 winds -1."""
    edges = [(0, 1, 1, [0]), (1, 2, 1, [0]), (2, 0, 1, [1]),
             (1, 0, 1, [0]), (2, 1, 1, [0]), (0, 2, 1, [-1])]
    return from_edges(3, edges, winding_dim=1)


def constant(n: int, k: float = 1.0) -> FiniteCostSystem:
    return FiniteCostSystem(np.full((n, n), float(k)))


def random_system(rng: np.random.Generator, n_max: int = 8, lo: int = -5, hi: int = 5,
                  winding_dim: int = 0) -> FiniteCostSystem:
    """Random strongly connected digraph with integer costs in ``[lo, hi]``.

    A random Hamiltonian cycle guarantees connectivity; other edges (loops
    included) appear with a random density.
    """
    n = int(rng.integers(1, n_max + 1))
    p = rng.uniform(0.2, 0.7)
    mask = rng.random((n, n)) < p
    perm = rng.permutation(n)
    mask[perm, np.roll(perm, -1)] = True
    cost = np.where(mask, rng.integers(lo, hi + 1, size=(n, n)).astype(float), np.inf)
    winding = None
    if winding_dim:
        winding = np.where(mask[:, :, None], rng.integers(-1, 2, size=(n, n, winding_dim)), 0)
    return FiniteCostSystem(cost, winding)


def random_subsolution(sys: FiniteCostSystem, rng: np.random.Generator) -> np.ndarray:
    """Random critical subsolution, mixing inf- and sup-convolutions of the potential.

    ``min_z r(z) + phi(z, .)`` and ``max_z -phi(., z) - r(z)`` are subsolutions
    for any ``r`` (triangle inequality), and so are their convex combinations.
    Values are rounded to dyadic grids so that float arithmetic stays exact.
    """
    alpha = critical_value(sys).alpha
    phi = mane_potential(sys, alpha).phi
    n = sys.n

    def one():
        r = rng.integers(-6, 7, size=n).astype(float)
        if rng.random() < 0.5:
            return (r[:, None] + phi).min(axis=0)
        return (-phi - r[None, :]).max(axis=1)

    u = one()
    if rng.random() < 0.6:
        lam = rng.integers(0, 5) / 4.0
        u = lam * u + (1.0 - lam) * one()
    return u - u[0]
