"""Critical subsolutions that are strict exactly off the Aubry set.

The building blocks are the functions ``w_z = -phi(., z)`` for the Mañé
potential ``phi`` at the critical value.  Each one is a critical subsolution
(triangle inequality), and the slack of ``w_x`` at a pair ``(x, y)`` is
``c(x, y) + alpha[0] + phi(y, x)``, the reduced total of the cheapest cycle
through that edge.  That total is positive exactly when the edge lies on no
zero-total cycle, so the plain average of all ``w_z`` is strict off the Aubry
pairs and tight on them.

:func:`pin_to` runs the same construction on a graph augmented by a root state
that encodes the values of a given subsolution ``u`` on its Aubry set, which
yields subsolutions equal to ``u`` there.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._config import resolve_tol
from .critical import aubry, aubry_of, critical_value, mane_potential
from .graphspace import FiniteCostSystem
from .laxoleinik import (
    NotASubsolutionError,
    as_exact,
    cost_matrix,
    is_exact,
    lax_minus,
    lax_plus,
    slack,
    strict_points,
)

__all__ = [
    "AuditError",
    "SandwichPreconditionError",
    "StrictnessAudit",
    "SandwichReport",
    "audit_strictness",
    "strict_subsolution",
    "pin_to",
    "regularize",
    "verify_sandwich",
    "strict_outside_aubry",
    "newpr_holds",
]


class AuditError(RuntimeError):
    """A constructed subsolution failed its strictness audit."""

    def __init__(self, message, audit=None):
        super().__init__(message)
        self.audit = audit


class SandwichPreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class StrictnessAudit:
    min_slack_off_aubry: float
    max_abs_slack_on_aubry: float
    violating_pairs: tuple
    tol: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.violating_pairs

    def to_dict(self) -> dict:
        return {
            "min_slack_off_aubry": self.min_slack_off_aubry,
            "max_abs_slack_on_aubry": self.max_abs_slack_on_aubry,
            "pass": self.passed,
        }


def audit_strictness(u, sys: FiniteCostSystem, alpha, pairs, tol: float | None = None) -> StrictnessAudit:
    """Slack summary of ``u`` against a designated set of tight pairs.

    Finite edges in ``pairs`` must have ``|slack| <= tol``, all other finite edges
    ``slack > tol``.  Exact arrays are audited with ``tol = 0``.
    """
    tol = 0 if is_exact(u) else resolve_tol(tol)
    S = slack(u, sys, alpha).slack
    off, on, bad = [], [], []
    for x, y in zip(*np.nonzero(sys.finite)):
        x, y = int(x), int(y)
        s = S[x, y]
        if (x, y) in pairs:
            on.append(abs(s))
            if abs(s) > tol:
                bad.append((x, y))
        else:
            off.append(s)
            if not s > tol:
                bad.append((x, y))
    return StrictnessAudit(
        float(min(off)) if off else float("inf"),
        float(max(on)) if on else 0.0,
        tuple(bad),
        float(tol),
    )


def strict_subsolution(sys: FiniteCostSystem, exact: bool = False,
                       tol: float | None = None) -> tuple[np.ndarray, StrictnessAudit]:
    """``u0 = (1/n) sum_z -phi(., z)``, strict off the Aubry pairs; raises on audit failure."""
    cv = critical_value(sys, "karp", exact)
    phi = mane_potential(sys, cv.alpha, exact, tol).phi
    u0 = -phi.sum(axis=1) / sys.n
    if exact:
        u0 = as_exact(u0)
    audit = audit_strictness(u0, sys, cv.alpha, aubry(sys, exact, tol).pairs, tol)
    if not audit.passed:
        raise AuditError(f"strict subsolution audit failed on pairs {list(audit.violating_pairs)}", audit)
    return u0, audit


def _closure(P: np.ndarray) -> np.ndarray:
    """All-pairs shortest paths (Floyd-Warshall); works on float and Fraction arrays."""
    P = P.copy()
    for k in range(P.shape[0]):
        P = np.minimum(P, P[:, k, None] + P[None, k, :])
    return P


def _anchored(u, sys: FiniteCostSystem, alpha, nodes) -> np.ndarray:
    """Rows ``v_y`` of critical subsolutions equal to ``u`` on ``nodes``.

    A root state ``r`` is joined to each ``a`` in ``nodes`` by ``r -> a`` at
    ``u(a)`` and ``a -> r`` at ``-u(a)``; with ``D`` the distances of the
    augmented reduced graph, ``v_y = D(y, .) - D(y, r)``.  The slack of ``v_y``
    at ``(x, y)`` is ``c(x, y) + alpha + D(y, x)``, positive unless the edge
    closes a zero-total cycle, i.e. unless it is a calibrated pair of ``u``
    joining Aubry states.
    """
    n = sys.n
    exact = is_exact(u)
    C = cost_matrix(sys, exact)
    P = np.empty((n + 1, n + 1), dtype=object if exact else np.float64)
    P[:] = np.inf
    P[:n, :n] = C + alpha
    for a in nodes:
        P[n, a] = u[a]
        P[a, n] = -u[a]
    for i in range(n + 1):
        P[i, i] = min(P[i, i], 0) if exact else min(P[i, i], 0.0)
    D = _closure(P)
    return D[:n, :n] - D[:n, n][:, None]


def pin_to(u, sys: FiniteCostSystem, tol: float | None = None) -> tuple[np.ndarray, StrictnessAudit]:
    """Critical subsolution equal to ``u`` on its Aubry nodes and strict off its Aubry pairs.

    ``u' = u/2 + mean_y(v_y)/2`` with the anchored subsolutions of
    :func:`_anchored`.  The result is reset to ``u`` on the Aubry nodes and
    audited; failing pairs trigger a bounded repair loop (``n**2`` averaging
    steps with the pair-specific ``v_y``) and a final failure raises
    :class:`AuditError`.
    """
    exact = is_exact(u)
    u = u if exact else np.asarray(u, dtype=np.float64)
    cv = critical_value(sys, "karp", exact)
    alpha = cv.alpha
    data = aubry_of(u, sys, tol)  # raises on non-subsolutions
    nodes = sorted(data.nodes)
    V = _anchored(u, sys, alpha, nodes)
    half = 1 / 2 if not exact else as_exact([0.5])[0]
    out = half * u + half * (V.sum(axis=0) / sys.n)

    def reset(v):
        v = v.copy()
        v[nodes] = u[nodes]
        return v

    out = reset(out)
    audit = audit_strictness(out, sys, alpha, data.pairs, tol)
    budget = sys.n ** 2
    while not audit.passed and budget > 0:
        x, y = audit.violating_pairs[0]
        if (x, y) in data.pairs:
            break  # an Aubry pair off tolerance cannot be repaired by averaging
        out = reset(half * out + half * V[y])
        audit = audit_strictness(out, sys, alpha, data.pairs, tol)
        budget -= 1
    if not audit.passed:
        raise AuditError(f"pin_to audit failed on pairs {list(audit.violating_pairs)}", audit)
    return out, audit


def regularize(u, sys: FiniteCostSystem, tol: float | None = None) -> np.ndarray:
    """``T^-(T^+ u - alpha[0]) + alpha[0]``: a negative then positive Lax-Oleinik step.

    The result is again a critical subsolution with the same Aubry sets as
    ``u``.
    """
    exact = is_exact(u)
    alpha = critical_value(sys, "karp", exact).alpha
    S = slack(u, sys, alpha)
    if not S.is_subsolution(tol):
        raise NotASubsolutionError(f"min slack {float(S.min_slack):.3e} at alpha={float(alpha)}")
    return lax_minus(lax_plus(u, sys) - alpha, sys) + alpha


@dataclass
class SandwichReport:
    checks: dict = field(default_factory=dict)

    @property
    def failures(self) -> list[str]:
        return [k for k, ok in self.checks.items() if not ok]

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {"checks": dict(self.checks), "failures": self.failures, "pass": self.passed}


def verify_sandwich(u, v, sys: FiniteCostSystem, tol: float | None = None) -> SandwichReport:
    """Check that ``v`` squeezed between ``u`` and ``T^- u + alpha[0]`` inherits ``u``'s structure.

    Preconditions (raising :class:`SandwichPreconditionError`): ``u`` is strict
    off its Aubry pairs, ``u <= v <= T^- u + alpha[0]``, and ``u = v`` exactly on
    the Aubry nodes of ``u`` and nowhere else.  The report then lists whether
    ``v`` is a critical subsolution, agrees with ``u`` on the Aubry nodes, has the
    same Aubry nodes and pairs, and is strict off them.
    """
    exact = is_exact(u)
    tol_ = 0 if exact else resolve_tol(tol)
    u = u if exact else np.asarray(u, dtype=np.float64)
    v = v if is_exact(v) or not exact else as_exact(v)
    v = v if exact else np.asarray(v, dtype=np.float64)
    alpha = critical_value(sys, "karp", exact).alpha
    try:
        du = aubry_of(u, sys, tol)
    except NotASubsolutionError as exc:
        raise SandwichPreconditionError(f"u is not a critical subsolution: {exc}") from None
    if not audit_strictness(u, sys, alpha, du.pairs, tol).passed:
        raise SandwichPreconditionError("u is not strict off its Aubry pairs")
    upper = lax_minus(u, sys) + alpha
    low = [x for x in range(sys.n) if v[x] < u[x] - tol_]
    high = [x for x in range(sys.n) if v[x] > upper[x] + tol_]
    if low or high:
        raise SandwichPreconditionError(f"u <= v <= T^-u + alpha fails at states {sorted(low + high)}")
    contact = {x for x in range(sys.n) if abs(v[x] - u[x]) <= tol_}
    if contact != set(du.nodes):
        raise SandwichPreconditionError(
            f"contact set {sorted(contact)} differs from the Aubry nodes {sorted(du.nodes)}")

    report = SandwichReport()
    S = slack(v, sys, alpha)
    report.checks["subsolution"] = S.is_subsolution(tol)
    if not report.checks["subsolution"]:
        return report
    dv = aubry_of(v, sys, tol)
    report.checks["equal_on_aubry"] = all(abs(v[a] - u[a]) <= tol_ for a in du.nodes)
    report.checks["same_aubry_nodes"] = dv.nodes == du.nodes
    report.checks["same_aubry_pairs"] = dv.pairs == du.pairs
    report.checks["strict_off_aubry"] = audit_strictness(v, sys, alpha, du.pairs, tol).passed
    return report


def strict_outside_aubry(u, sys: FiniteCostSystem, tol: float | None = None) -> bool:
    """Whether ``u`` is strict at every finite pair off its own Aubry pairs."""
    alpha = critical_value(sys, "karp", is_exact(u)).alpha
    return audit_strictness(u, sys, alpha, aubry_of(u, sys, tol).pairs, tol).passed


def newpr_holds(u, sys: FiniteCostSystem, tol: float | None = None) -> bool:
    """Strict operator inequalities at every state off the Aubry nodes of ``u``."""
    alpha = critical_value(sys, "karp", is_exact(u)).alpha
    nodes = aubry_of(u, sys, tol).nodes
    return set(range(sys.n)) - set(nodes) <= set(strict_points(u, sys, alpha, tol))
