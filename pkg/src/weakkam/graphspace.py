"""Finite cost systems: the discrete state space, its cost matrix and edge windings.

A system with ``n`` states stores an ``n x n`` float64 cost matrix in which an
absent edge is ``+inf``.  Each finite edge carries an integer winding vector in
``Z^d`` (``d = winding_dim``, possibly zero) used by the twisted costs of
:mod:`weakkam.cohomology`.

Construction checks the structural invariants (shapes, no NaN, windings only on
finite edges).  Strong connectivity is a solver precondition, enforced by
:func:`load_system` and :func:`require_connected`, so that disconnected systems
can still be built and passed to :func:`validate`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

__all__ = [
    "FiniteCostSystem",
    "ValidationReport",
    "GraphFormatError",
    "InvariantError",
    "from_edges",
    "load_system",
    "save_system",
    "system_to_dict",
    "system_from_dict",
    "validate",
    "require_connected",
    "strong_components",
    "exact_weights",
]


class GraphFormatError(ValueError):
    """The graph file could not be parsed into a system."""


class InvariantError(ValueError):
    """A system violates one of the standing invariants."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FiniteCostSystem:
    cost: np.ndarray
    winding: np.ndarray | None = None
    labels: tuple[str, ...] | None = None
    coords: np.ndarray | None = None
    winding_dim: int = field(init=False)

    def __post_init__(self):
        cost = np.asarray(self.cost, dtype=np.float64)
        if cost.ndim != 2 or cost.shape[0] != cost.shape[1] or cost.shape[0] < 1:
            raise InvariantError(f"cost must be a nonempty square matrix, got shape {cost.shape}")
        if np.isnan(cost).any():
            i, j = map(int, np.argwhere(np.isnan(cost))[0])
            raise InvariantError(f"cost({i},{j}) is NaN")
        if np.isneginf(cost).any():
            i, j = map(int, np.argwhere(np.isneginf(cost))[0])
            raise InvariantError(f"cost({i},{j}) is -inf")
        n = cost.shape[0]

        if self.winding is None:
            winding = np.zeros((n, n, 0), dtype=np.int64)
        else:
            winding = np.asarray(self.winding)
            if winding.ndim == 2:
                winding = winding[:, :, None]
            if winding.shape[:2] != (n, n) or winding.ndim != 3:
                raise InvariantError(f"winding must have shape (n, n, d), got {winding.shape}")
            if winding.size and not np.all(np.equal(np.mod(winding, 1), 0)):
                raise InvariantError("winding vectors must be integer")
            winding = winding.astype(np.int64)
            absent = ~np.isfinite(cost)
            if winding.shape[2] and np.any(winding[absent] != 0):
                i, j = map(int, np.argwhere(absent & np.any(winding != 0, axis=2))[0])
                raise InvariantError(f"winding present on absent edge ({i},{j})")

        labels = self.labels
        if labels is not None:
            labels = tuple(str(s) for s in labels)
            if len(labels) != n:
                raise InvariantError(f"expected {n} labels, got {len(labels)}")
        coords = self.coords
        if coords is not None:
            coords = np.asarray(coords, dtype=np.float64)
            if coords.ndim == 1:
                coords = coords[:, None]
            if coords.shape[0] != n or not np.all(np.isfinite(coords)):
                raise InvariantError("coords must be a finite (n, k) array")
            coords = _frozen(coords)

        object.__setattr__(self, "cost", _frozen(cost))
        object.__setattr__(self, "winding", _frozen(winding))
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "winding_dim", int(winding.shape[2]))

    @property
    def n(self) -> int:
        return self.cost.shape[0]

    @property
    def finite(self) -> np.ndarray:
        return np.isfinite(self.cost)

    @property
    def finite_edge_count(self) -> int:
        return int(self.finite.sum())

    def edges(self) -> Iterator[tuple[int, int, float]]:
        """Finite edges in row-major order."""
        for i, j in zip(*np.nonzero(self.finite)):
            yield int(i), int(j), float(self.cost[i, j])

    def with_cost(self, cost: np.ndarray) -> "FiniteCostSystem":
        """Same graph, windings, labels and coords with a new cost matrix."""
        cost = np.asarray(cost, dtype=np.float64)
        if not np.array_equal(np.isfinite(cost), self.finite):
            raise InvariantError("replacement cost must keep the same finite-edge pattern")
        return FiniteCostSystem(cost, self.winding, self.labels, self.coords)

    def __repr__(self) -> str:
        return (f"FiniteCostSystem(n={self.n}, edges={self.finite_edge_count}, "
                f"winding_dim={self.winding_dim})")


def from_edges(n: int, edges: Iterable[Sequence], winding_dim: int = 0,
               labels: Sequence[str] | None = None, coords=None) -> FiniteCostSystem:
    """Build a system from ``(i, j, cost)`` or ``(i, j, cost, winding)`` tuples."""
    if n < 1:
        raise InvariantError("n must be positive")
    cost = np.full((n, n), np.inf)
    winding = np.zeros((n, n, winding_dim), dtype=np.int64)
    for e in edges:
        i, j, c = int(e[0]), int(e[1]), float(e[2])
        if not (0 <= i < n and 0 <= j < n):
            raise InvariantError(f"edge ({i},{j}) out of range for n={n}")
        if np.isfinite(cost[i, j]):
            raise InvariantError(f"duplicate edge ({i},{j})")
        if not math.isfinite(c):
            raise InvariantError(f"edge ({i},{j}) has non-finite cost {c}")
        cost[i, j] = c
        if len(e) > 3 and e[3] is not None:
            w = np.atleast_1d(np.asarray(e[3], dtype=np.int64))
            if w.shape != (winding_dim,):
                raise InvariantError(f"edge ({i},{j}) winding has length {w.size}, expected {winding_dim}")
            winding[i, j] = w
    return FiniteCostSystem(cost, winding, labels, coords)


def strong_components(sys: FiniteCostSystem) -> np.ndarray:
    """Strongly connected component label per state."""
    _, labels = connected_components(csr_matrix(sys.finite.astype(np.int8)),
                                     directed=True, connection="strong")
    return labels


def require_connected(sys: FiniteCostSystem) -> None:
    labels = strong_components(sys)
    if labels.max() > 0:
        comps = [np.flatnonzero(labels == k).tolist() for k in range(labels.max() + 1)]
        raise InvariantError(f"not strongly connected: components {comps}")


# -- file format -------------------------------------------------------------

def system_to_dict(sys: FiniteCostSystem) -> dict:
    edges = []
    for i, j, c in sys.edges():
        edges.append({"from": i, "to": j, "cost": c,
                      "winding": [int(w) for w in sys.winding[i, j]]})
    out = {"n": sys.n, "winding_dim": sys.winding_dim, "edges": edges}
    if sys.labels is not None:
        out["labels"] = list(sys.labels)
    if sys.coords is not None:
        out["coords"] = sys.coords.tolist()
    return out


def _as_int(value, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise GraphFormatError(f"{what} must be an integer, got {value!r}")
    return value


def system_from_dict(data: dict) -> FiniteCostSystem:
    if not isinstance(data, dict):
        raise GraphFormatError("top-level JSON value must be an object")
    try:
        n = _as_int(data["n"], "n")
        raw_edges = data["edges"]
    except KeyError as exc:
        raise GraphFormatError(f"missing field {exc.args[0]!r}") from None
    if n < 1:
        raise GraphFormatError("n must be positive")
    d = _as_int(data.get("winding_dim", 0), "winding_dim")
    if d < 0:
        raise GraphFormatError("winding_dim must be nonnegative")
    if not isinstance(raw_edges, list):
        raise GraphFormatError("edges must be a list")

    seen = set()
    edges = []
    for k, e in enumerate(raw_edges):
        if not isinstance(e, dict):
            raise GraphFormatError(f"edge #{k} is not an object")
        try:
            i, j, c = e["from"], e["to"], e["cost"]
        except KeyError as exc:
            raise GraphFormatError(f"edge #{k} missing field {exc.args[0]!r}") from None
        i, j = _as_int(i, f"edge #{k} 'from'"), _as_int(j, f"edge #{k} 'to'")
        if not (0 <= i < n and 0 <= j < n):
            raise GraphFormatError(f"edge #{k} ({i},{j}) out of range for n={n}")
        if isinstance(c, bool) or not isinstance(c, (int, float)) or not math.isfinite(c):
            raise GraphFormatError(f"edge #{k} has invalid cost {c!r}")
        if (i, j) in seen:
            raise GraphFormatError(f"duplicate edge ({i},{j})")
        seen.add((i, j))
        w = e.get("winding", [0] * d)
        if not isinstance(w, list) or len(w) != d:
            raise GraphFormatError(f"edge #{k} winding must be a list of {d} integers")
        w = [_as_int(x, f"edge #{k} winding entry") for x in w]
        edges.append((i, j, c, w))

    labels = data.get("labels")
    coords = data.get("coords")
    try:
        return from_edges(n, edges, d, labels=labels, coords=coords)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvariantError):
            raise
        raise GraphFormatError(str(exc)) from exc


def load_system(path: str | Path) -> FiniteCostSystem:
    """Read a graph JSON file; the result is checked for strong connectivity."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"{path}: malformed JSON: {exc}") from None
    sys = system_from_dict(data)
    require_connected(sys)
    return sys


def save_system(sys: FiniteCostSystem, path: str | Path) -> None:
    Path(path).write_text(json.dumps(system_to_dict(sys), indent=1) + "\n")


# -- validation --------------------------------------------------------------

@dataclass(frozen=True)
class ValidationReport:
    strongly_connected: bool
    finite_edge_count: int
    superlinearity_witness: tuple[tuple[float, float], ...] | None
    boundedness_witness: tuple[tuple[float, float], ...] | None
    failures: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "strongly_connected": self.strongly_connected,
            "finite_edge_count": self.finite_edge_count,
            "superlinearity_witness": None if self.superlinearity_witness is None
            else [list(p) for p in self.superlinearity_witness],
            "boundedness_witness": None if self.boundedness_witness is None
            else [list(p) for p in self.boundedness_witness],
            "failures": list(self.failures),
            "pass": self.ok,
        }


def validate(sys: FiniteCostSystem, coords_required: bool = False) -> ValidationReport:
    """Check connectivity and report the super-linearity/boundedness constants.

    ``C(k)`` is the least constant with ``c(x, y) >= k d(x, y) - C(k)`` over
    finite edges; ``A(R)`` the least with ``c <= A(R)`` on edges with
    ``d <= R``.  ``d`` is the Euclidean distance between coords; without
    coords only ``C(0) = -min c`` is reported.
    """
    failures = []
    labels = strong_components(sys)
    connected = bool(labels.max() == 0)
    if not connected:
        comps = [np.flatnonzero(labels == k).tolist() for k in range(labels.max() + 1)]
        failures.append(f"not strongly connected: components {comps}")

    fin = sys.finite
    costs = sys.cost[fin]
    super_w = bound_w = None
    if sys.coords is None:
        if coords_required:
            failures.append("coords required but absent")
        if costs.size:
            super_w = ((0.0, float(-costs.min())),)
    elif costs.size:
        diff = sys.coords[:, None, :] - sys.coords[None, :, :]
        dist = np.sqrt((diff ** 2).sum(axis=2))[fin]
        super_w = tuple((float(k), float(np.max(k * dist - costs))) for k in (0, 1, 2))
        diam = float(dist.max()) if dist.size else 0.0
        pairs = []
        for R in (0.25 * diam, 0.5 * diam, diam):
            mask = dist <= R
            if mask.any():
                pairs.append((R, float(costs[mask].max())))
        bound_w = tuple(pairs)
    if not costs.size:
        failures.append("no finite edges")
    return ValidationReport(connected, int(fin.sum()), super_w, bound_w, tuple(failures))


# -- exact arithmetic --------------------------------------------------------

def exact_weights(sys: FiniteCostSystem) -> tuple[list[list[int | None]], int]:
    """Integer cost matrix ``C`` and common denominator ``D`` with ``c = C / D``.

    Every float64 is a dyadic rational, so this is exact; ``None`` marks
    absent edges.
    """
    fracs = [[Fraction(float(c)) if math.isfinite(c) else None for c in row]
             for row in sys.cost]
    D = 1
    for row in fracs:
        for f in row:
            if f is not None:
                D = max(D, f.denominator)  # all denominators are powers of two
    ints = [[None if f is None else int(f * D) for f in row] for row in fracs]
    return ints, D
