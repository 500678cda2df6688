"""Numeric tolerances shared across the package."""

from __future__ import annotations

import os

GRAPH_TOL = 1e-9
LAGRANGIAN_TOL = 1e-6
ENV_VAR = "WEAKKAM_TOL"


def default_tol() -> float:
    """Tightness/strictness tolerance for graph systems.

    ``WEAKKAM_TOL`` in the environment overrides the built-in ``1e-9``.
    """
    raw = os.environ.get(ENV_VAR)
    if raw is None or raw.strip() == "":
        return GRAPH_TOL
    value = float(raw)
    if not value >= 0.0:
        raise ValueError(f"{ENV_VAR} must be a nonnegative number, got {raw!r}")
    return value


def resolve_tol(tol: float | None) -> float:
    return default_tol() if tol is None else float(tol)
