"""Euler-Lagrange flow ``x'' = -V'(x)`` by fixed-step RK4, and shooting.

Positions are lifted reals throughout; reduce modulo 1 to get circle points.
"""

from __future__ import annotations

import numpy as np

from .model import ConvergenceError, LagrangianSpec

__all__ = ["integrate", "shoot"]


def _rhs(L: LagrangianSpec, q, v, dq, dv):
    V, dV, d2V = L.derivatives(q)
    return v, -dV, dv, -d2V * dq, 0.5 * v * v - V


def integrate(L: LagrangianSpec, x, v, duration: float = 1.0, steps: int | None = None):
    """RK4 from ``(x, v)`` over ``duration``; returns ``(x, v, dx/dv0, dv/dv0, action)``.

    The step count is ``integrator_steps`` per unit time (at least one step);
    negative durations integrate backwards.  Inputs broadcast elementwise.
    """
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    x, v = np.broadcast_arrays(x, v)
    if steps is None:
        steps = max(1, int(round(L.integrator_steps * abs(duration))))
    dt = duration / steps
    state = (x, v, np.zeros_like(x), np.ones_like(x))
    action = np.zeros_like(x)
    for _ in range(steps):
        k1 = _rhs(L, *state)
        k2 = _rhs(L, *(s + 0.5 * dt * k for s, k in zip(state, k1)))
        k3 = _rhs(L, *(s + 0.5 * dt * k for s, k in zip(state, k2)))
        k4 = _rhs(L, *(s + dt * k for s, k in zip(state, k3)))
        incr = [(dt / 6.0) * (a + 2.0 * b + 2.0 * c + d) for a, b, c, d in zip(k1, k2, k3, k4)]
        state = tuple(s + i for s, i in zip(state, incr[:4]))
        action = action + incr[4]
    return state[0], state[1], state[2], state[3], action


def shoot(L: LagrangianSpec, x, Y, v0_guess, max_iter: int = 40):
    """Newton on the initial velocity so that the unit-time flow from ``x`` hits ``Y``.

    Returns ``(v0, v1, action, miss)``; raises :class:`ConvergenceError` when the
    endpoint miss stays above ``shooting_tol`` (scaled by ``1 + |Y|``).
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    Y = np.atleast_1d(np.asarray(Y, dtype=np.float64))
    v0 = np.array(np.broadcast_to(np.asarray(v0_guess, dtype=np.float64), x.shape))
    tol = L.shooting_tol * (1.0 + np.abs(Y))
    best_miss = np.full(x.shape, np.inf)
    for _ in range(max_iter):
        q1, v1, dq, _, A = integrate(L, x, v0)
        miss = q1 - Y
        best_miss = np.minimum(best_miss, np.abs(miss))
        if np.all(np.abs(miss) <= tol):
            return v0, v1, A, np.abs(miss)
        safe = np.where(np.abs(dq) > 1e-14, dq, np.sign(dq) + (dq == 0))
        step = np.clip(miss / safe, -0.5, 0.5)
        v0 = np.where(np.abs(miss) <= tol, v0, v0 - step)
    k = int(np.argmax(np.abs(miss)))
    raise ConvergenceError(f"shooting did not converge: endpoint miss {abs(miss[k]):.3e}",
                           best=float(v0[k]), residual=float(abs(miss[k])))
