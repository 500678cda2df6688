"""Direct collocation of unit-time action minimizers.

A curve is a polygon ``q_0, ..., q_M`` on the lifted line with ``h = 1/M`` and
midpoint-rule action

    S(q) = sum_k (q_{k+1} - q_k)**2 / (2h) - h V((q_k + q_{k+1}) / 2).

The Hessian of ``S`` in the interior nodes is tridiagonal but not always
positive definite (unit time exceeds the conjugate time ``1/2`` of the
linearized pendulum), so a purely local solver can settle on a saddle or a
non-global minimum.  Seeds therefore come from a global dynamic program over
a lifted grid, restricted to a band of per-step displacements, and are then
polished by a batched, shift-safeguarded Newton iteration with a vectorized
LDL^T tridiagonal solve and an Armijo backtracking line search.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .model import ConvergenceError, LagrangianSpec

__all__ = ["discrete_action", "endpoint_momenta", "newton_polish", "dp_seed", "minimize_lifted"]

DP_SPACING = 1.0 / 128
GRAD_TOL = 1e-11
CHUNK = 32


def discrete_action(L: LagrangianSpec, q: np.ndarray) -> np.ndarray:
    """Midpoint action of polygons stored along the last axis."""
    h = 1.0 / (q.shape[-1] - 1)
    dq = np.diff(q, axis=-1)
    mid = 0.5 * (q[..., 1:] + q[..., :-1])
    return (dq * dq / (2.0 * h) - h * L.V(mid)).sum(axis=-1)


def endpoint_momenta(L: LagrangianSpec, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(-dS/dq_0, dS/dq_M)``: the discrete start and end momenta."""
    h = 1.0 / (q.shape[-1] - 1)
    p0 = (q[..., 1] - q[..., 0]) / h + 0.5 * h * L.dV(0.5 * (q[..., 0] + q[..., 1]))
    p1 = (q[..., -1] - q[..., -2]) / h - 0.5 * h * L.dV(0.5 * (q[..., -1] + q[..., -2]))
    return p0, p1


def _grad_hess(L: LagrangianSpec, q: np.ndarray):
    h = 1.0 / (q.shape[-1] - 1)
    mid = 0.5 * (q[:, 1:] + q[:, :-1])
    dVm = L.dV(mid)
    d2Vm = L.d2V(mid)
    dq = np.diff(q, axis=1)
    g = (dq[:, :-1] - dq[:, 1:]) / h - 0.5 * h * (dVm[:, :-1] + dVm[:, 1:])
    diag = 2.0 / h - 0.25 * h * (d2Vm[:, :-1] + d2Vm[:, 1:])
    off = -1.0 / h - 0.25 * h * d2Vm[:, 1:-1]
    return g, diag, off


def _ldl_solve(diag: np.ndarray, off: np.ndarray, rhs: np.ndarray):
    """Solve symmetric tridiagonal systems row-wise; ``ok`` flags positive pivots."""
    B, m = diag.shape
    d = np.empty_like(diag)
    z = np.empty_like(rhs)
    ok = np.ones(B, dtype=bool)
    d[:, 0] = diag[:, 0]
    z[:, 0] = rhs[:, 0]
    for k in range(1, m):
        ok &= d[:, k - 1] > 0
        piv = np.where(d[:, k - 1] > 0, d[:, k - 1], 1.0)
        lk = off[:, k - 1] / piv
        d[:, k] = diag[:, k] - lk * off[:, k - 1]
        z[:, k] = rhs[:, k] - lk * z[:, k - 1]
    ok &= d[:, m - 1] > 0
    d = np.where(d > 0, d, 1.0)
    x = np.empty_like(rhs)
    x[:, m - 1] = z[:, m - 1] / d[:, m - 1]
    for k in range(m - 2, -1, -1):
        x[:, k] = (z[:, k] - off[:, k] * x[:, k + 1]) / d[:, k]
    return x, ok


def newton_polish(L: LagrangianSpec, q: np.ndarray, tol: float = GRAD_TOL,
                  max_iter: int = 60) -> tuple[np.ndarray, np.ndarray]:
    """Local minimization of the discrete action in the interior nodes of each row."""
    q = np.array(q, dtype=np.float64, copy=True)
    if q.shape[1] <= 2:
        return q, np.zeros(q.shape[0])
    h = 1.0 / (q.shape[1] - 1)
    S = discrete_action(L, q)
    for _ in range(max_iter):
        g, diag, off = _grad_hess(L, q)
        gn = np.abs(g).max(axis=1)
        active = gn > tol
        if not active.any():
            break
        idx = np.flatnonzero(active)
        ga, da, oa = g[idx], diag[idx], off[idx]
        mu = np.zeros(len(idx))
        for _attempt in range(60):
            p, ok = _ldl_solve(da + mu[:, None], oa, -ga)
            if ok.all():
                break
            mu = np.where(ok, mu, np.maximum(2.0 * mu, 1e-3 / h))
        slope = (ga * p).sum(axis=1)
        qa = q[idx]
        Sa = S[idx]
        t = np.ones(len(idx))
        accepted = np.zeros(len(idx), dtype=bool)
        q_new = qa.copy()
        S_new = Sa.copy()
        for _ls in range(50):
            trial = qa.copy()
            trial[:, 1:-1] += t[:, None] * p
            St = discrete_action(L, trial)
            good = ~accepted & (St <= Sa + 1e-4 * t * slope + 1e-14 * (1.0 + np.abs(Sa)))
            q_new[good] = trial[good]
            S_new[good] = St[good]
            accepted |= good
            if accepted.all():
                break
            t = np.where(accepted, t, 0.5 * t)
        moved = accepted & (np.abs(t[:, None] * p).max(axis=1) > 0)
        q[idx] = q_new
        S[idx] = S_new
        if not moved.any():
            break
    g, _, _ = _grad_hess(L, q)
    return q, np.abs(g).max(axis=1)


def _band(L: LagrangianSpec, M: int, spacing: float) -> int:
    speed = 1.6 * (L.max_winding + 1.5) + 1.0
    return int(math.ceil(speed / (M * spacing))) + 2


def dp_seed(L: LagrangianSpec, x: np.ndarray, Y: np.ndarray, spacing: float = DP_SPACING) -> np.ndarray:
    """Globally minimizing grid polygons from ``x[b]`` to every ``Y[b, t]``.

    Each row uses the lifted grid ``x[b] + spacing * j``; intermediate nodes
    stay on it and only the last step lands exactly on the target.  Returns
    polygons of shape ``(B, T, M + 1)``.
    """
    M = L.collocation_steps
    h = 1.0 / M
    x = np.asarray(x, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    B, T = Y.shape
    band = _band(L, M, spacing)
    reach = np.abs(Y - x[:, None]).max() if Y.size else 0.0
    J = int(math.ceil((reach + 1.0) / spacing)) + band
    P = 2 * J + 1
    offs = spacing * (np.arange(P) - J)
    G = x[:, None] + offs[None, :]                          # (B, P)
    dsteps = np.arange(band, -band - 1, -1)                 # shift s <-> displacement d = band - s
    kin = (dsteps * spacing) ** 2 / (2.0 * h)
    step = kin[None, :, None] - h * L.V(G[:, None, :] - 0.5 * spacing * dsteps[None, :, None])

    D = np.full((B, P), np.inf)
    D[:, J] = 0.0
    preds = np.empty((M - 1, B, P), dtype=np.int32)
    cols = np.arange(P)
    for layer in range(M - 1):
        Dp = np.pad(D, ((0, 0), (band, band)), constant_values=np.inf)
        win = sliding_window_view(Dp, P, axis=1)            # win[b, s, j] = D[b, j + s - band]
        cand = win + step
        s_best = np.argmin(cand, axis=1)
        D = np.take_along_axis(cand, s_best[:, None, :], axis=1)[:, 0, :]
        preds[layer] = cols[None, :] + s_best - band

    # last step onto the exact targets
    jt = np.rint((Y - x[:, None]) / spacing).astype(np.int64) + J
    win_idx = jt[:, :, None] + np.arange(-band - 1, band + 2)[None, None, :]
    win_idx = np.clip(win_idx, 0, P - 1)
    Gw = np.take_along_axis(G[:, None, :].repeat(T, axis=1), win_idx, axis=2)
    Dw = np.take_along_axis(D[:, None, :].repeat(T, axis=1), win_idx, axis=2)
    last = Dw + (Y[:, :, None] - Gw) ** 2 / (2.0 * h) - h * L.V(0.5 * (Gw + Y[:, :, None]))
    k_best = np.argmin(last, axis=2)
    j = np.take_along_axis(win_idx, k_best[:, :, None], axis=2)[:, :, 0]

    q = np.empty((B, T, M + 1))
    q[:, :, 0] = x[:, None]
    q[:, :, M] = Y
    rows = np.arange(B)[:, None]
    for layer in range(M - 1, 0, -1):
        q[:, :, layer] = G[rows, j]
        j = preds[layer - 1][rows, j]
    return q


def minimize_lifted(L: LagrangianSpec, x, Y, spacing: float = DP_SPACING):
    """Minimizing polygons ``x[b] -> Y[b, t]``: returns ``(q, action, grad_norm)``.

    Raises :class:`ConvergenceError` if the polished gradient stays above
    ``1e-8`` for some curve.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    Y = np.asarray(Y, dtype=np.float64).reshape(len(x), -1)
    B, T = Y.shape
    M = L.collocation_steps
    q_all = np.empty((B, T, M + 1))
    for start in range(0, B, CHUNK):
        sl = slice(start, min(B, start + CHUNK))
        seed = dp_seed(L, x[sl], Y[sl], spacing)
        flat, gn = newton_polish(L, seed.reshape(-1, M + 1))
        if np.any(gn > 1e-8):
            k = int(np.argmax(gn))
            raise ConvergenceError(
                f"collocation did not converge: gradient {gn[k]:.3e}", best=flat[k], residual=float(gn[k]))
        q_all[sl] = flat.reshape(seed.shape)
    S = discrete_action(L, q_all)
    return q_all, S
