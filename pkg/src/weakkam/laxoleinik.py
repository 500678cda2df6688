"""Discrete Lax-Oleinik operators and the subsolution predicates built on them.

Value functions are plain 1-d numpy arrays (one real per state).  Every
operation also accepts ``dtype=object`` arrays of :class:`fractions.Fraction`;
those run in exact rational arithmetic against the exact cost matrix and use a
zero tolerance.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import TextIO

import numpy as np

from ._config import resolve_tol
from .graphspace import FiniteCostSystem

__all__ = [
    "NotASubsolutionError",
    "SlackMatrix",
    "as_exact",
    "is_exact",
    "cost_matrix",
    "lax_minus",
    "lax_minus_argmin",
    "lax_plus",
    "lax_plus_argmax",
    "slack",
    "tight_pairs",
    "strict_points",
    "pairwise_strict_points",
    "write_values",
    "read_values",
    "format_number",
]


class NotASubsolutionError(ValueError):
    """The function violates ``u(y) - u(x) <= c(x, y) + alpha`` beyond tolerance."""


def is_exact(u) -> bool:
    return isinstance(u, np.ndarray) and u.dtype == object


def as_exact(u) -> np.ndarray:
    """Object array of Fractions (exact conversion of floats)."""
    out = np.empty(len(u), dtype=object)
    for i, v in enumerate(u):
        out[i] = v if isinstance(v, Fraction) else Fraction(v)
    return out


def cost_matrix(sys: FiniteCostSystem, exact: bool = False) -> np.ndarray:
    """Dense cost matrix; exact mode holds Fractions with float ``inf`` for absent edges."""
    if not exact:
        return sys.cost
    C = np.empty(sys.cost.shape, dtype=object)
    for (i, j), c in np.ndenumerate(sys.cost):
        C[i, j] = Fraction(float(c)) if np.isfinite(c) else np.inf
    return C


def _prep(u, sys: FiniteCostSystem):
    exact = is_exact(u)
    u = u if exact else np.asarray(u, dtype=np.float64)
    if u.shape != (sys.n,):
        raise ValueError(f"value function must have length {sys.n}, got shape {u.shape}")
    return u, cost_matrix(sys, exact), exact


def lax_minus(u, sys: FiniteCostSystem) -> np.ndarray:
    """``T^- u(x) = min_y u(y) + c(y, x)`` over finite edges into ``x``."""
    u, C, _ = _prep(u, sys)
    return (u[:, None] + C).min(axis=0)


def lax_minus_argmin(u, sys: FiniteCostSystem) -> np.ndarray:
    """Minimizing predecessor per state, ties to the lowest index."""
    u, C, _ = _prep(u, sys)
    return np.argmin(u[:, None] + C, axis=0)


def lax_plus(u, sys: FiniteCostSystem) -> np.ndarray:
    """``T^+ u(x) = max_y u(y) - c(x, y)`` over finite edges out of ``x``."""
    u, C, _ = _prep(u, sys)
    return (u[None, :] - C).max(axis=1)


def lax_plus_argmax(u, sys: FiniteCostSystem) -> np.ndarray:
    u, C, _ = _prep(u, sys)
    return np.argmax(u[None, :] - C, axis=1)


@dataclass(frozen=True, eq=False)
class SlackMatrix:
    """``slack[x, y] = c(x, y) + alpha - (u(y) - u(x))``; ``+inf`` on absent edges."""

    alpha: float
    slack: np.ndarray

    @property
    def finite(self) -> np.ndarray:
        return np.array([[v != np.inf for v in row] for row in self.slack], dtype=bool) \
            if self.slack.dtype == object else np.isfinite(self.slack)

    @property
    def min_slack(self):
        return self.slack[self.finite].min()

    def is_subsolution(self, tol: float | None = None) -> bool:
        tol = 0 if self.slack.dtype == object else resolve_tol(tol)
        return bool(self.min_slack >= -tol)


def slack(u, sys: FiniteCostSystem, alpha) -> SlackMatrix:
    u, C, exact = _prep(u, sys)
    if exact and not isinstance(alpha, Fraction):
        alpha = Fraction(alpha)
    return SlackMatrix(alpha, C + alpha - (u[None, :] - u[:, None]))


def _checked_slack(u, sys, alpha, tol):
    S = slack(u, sys, alpha)
    exact = S.slack.dtype == object
    tol = 0 if exact else resolve_tol(tol)
    m = S.min_slack
    if m < -tol:
        raise NotASubsolutionError(f"min slack {float(m):.3e} < -{tol:g} at alpha={float(alpha)}")
    return S, tol


def tight_pairs(u, sys: FiniteCostSystem, alpha, tol: float | None = None) -> frozenset:
    """Ordered pairs ``(x, y)`` with ``|slack(x, y)| <= tol``.

    A chain is ``(u, c, alpha)``-calibrated exactly when all of its consecutive
    pairs are tight.
    """
    S, tol = _checked_slack(u, sys, alpha, tol)
    fin = S.finite
    return frozenset((int(x), int(y)) for x, y in zip(*np.nonzero(fin))
                     if abs(S.slack[x, y]) <= tol)


def pairwise_strict_points(u, sys: FiniteCostSystem, alpha, tol: float | None = None) -> frozenset:
    """States ``x`` with slack ``> tol`` on every finite pair starting or ending at ``x``."""
    S, tol = _checked_slack(u, sys, alpha, tol)
    fin = S.finite
    out = []
    for x in range(sys.n):
        row = [S.slack[x, y] for y in range(sys.n) if fin[x, y]]
        col = [S.slack[y, x] for y in range(sys.n) if fin[y, x]]
        if all(s > tol for s in row) and all(s > tol for s in col):
            out.append(x)
    return frozenset(out)


def strict_points(u, sys: FiniteCostSystem, alpha, tol: float | None = None) -> frozenset:
    """States where ``u < T^- u + alpha`` and ``u > T^+ u - alpha`` with margin ``tol``.

    The result is checked against the pairwise definition of strictness and an
    ``AssertionError`` is raised if the two characterizations disagree.
    """
    _, tol_ = _checked_slack(u, sys, alpha, tol)
    u, _, exact = _prep(u, sys)
    if exact and not isinstance(alpha, Fraction):
        alpha = Fraction(alpha)
    lm = lax_minus(u, sys) + alpha
    lp = lax_plus(u, sys) - alpha
    found = frozenset(int(x) for x in range(sys.n)
                      if u[x] < lm[x] - tol_ and u[x] > lp[x] + tol_)
    pairwise = pairwise_strict_points(u, sys, alpha, tol)
    if found != pairwise:
        raise AssertionError(f"strictness characterizations disagree: {sorted(found)} vs {sorted(pairwise)}")
    return found


# -- CSV ---------------------------------------------------------------------

def format_number(x) -> str:
    """12 significant digits; integers-valued floats print without exponent noise."""
    x = float(x)
    if x == 0.0:
        return "0"
    return f"{x:.12g}"


def write_values(u, out: str | Path | TextIO, key_header: str = "state", keys=None) -> None:
    """Write ``state,value`` rows (0-based states)."""
    if isinstance(out, (str, Path)):
        with open(out, "w", newline="") as fh:
            write_values(u, fh, key_header, keys)
        return
    w = csv.writer(out, lineterminator="\n")
    w.writerow(key_header.split(",") + ["value"])
    for i, v in enumerate(u):
        key = [i] if keys is None else list(keys[i])
        w.writerow(key + [format_number(v)])


def read_values(src: str | Path | TextIO) -> np.ndarray:
    if isinstance(src, (str, Path)):
        with open(src, newline="") as fh:
            return read_values(fh)
    rows = list(csv.reader(src))
    if not rows or [h.strip() for h in rows[0]] != ["state", "value"]:
        raise ValueError("expected header 'state,value'")
    body = [r for r in rows[1:] if r]
    u = np.full(len(body), np.nan)
    for r in body:
        i = int(r[0])
        if not 0 <= i < len(body):
            raise ValueError(f"state index {i} out of range")
        u[i] = float(r[1])
    if np.isnan(u).any():
        raise ValueError("missing state rows")
    return u


def values_to_csv(u) -> str:
    buf = io.StringIO()
    write_values(u, buf)
    return buf.getvalue()
