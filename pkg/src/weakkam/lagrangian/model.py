"""Mechanical Lagrangians ``L(x, v) = v**2 / 2 - V(x)`` on the circle ``R / Z``.

The potential is a finite Fourier series

    V(x) = sum_k a_k cos(2 pi k x) + b_k sin(2 pi k x),   k = 1, 2, ...

with ``cosine_coeffs = (a_1, a_2, ...)`` and ``sine_coeffs = (b_1, ...)``; there
is no constant term, since it only shifts every cost by the same amount.  The
pendulum ``V(x) = cos(2 pi x)`` is ``cosine_coeffs=(1,)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "LagrangianSpec",
    "Curve",
    "CotangentPoint",
    "ConvergenceError",
    "AmbiguousMinimizerError",
    "PartialMapUndefined",
    "free_particle",
    "pendulum",
    "load_lagrangian",
]


class ConvergenceError(RuntimeError):
    """An action minimization or shooting solve did not converge."""

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual


class AmbiguousMinimizerError(ValueError):
    """Two winding classes have minimal actions within the ambiguity gap."""


class PartialMapUndefined(ValueError):
    """The continued curve is not the unique minimizer between its endpoints."""


@dataclass(frozen=True)
class LagrangianSpec:
    cosine_coeffs: tuple[float, ...] = ()
    sine_coeffs: tuple[float, ...] = ()
    collocation_steps: int = 32
    integrator_steps: int = 1000
    grid: int | None = None
    gradient_tol: float = 1e-6
    shooting_tol: float = 1e-12
    max_winding: int = 2
    ambiguity_gap: float = 1e-6

    def __post_init__(self):
        cos_ = tuple(float(a) for a in self.cosine_coeffs)
        sin_ = tuple(float(b) for b in self.sine_coeffs)
        if not all(math.isfinite(a) for a in cos_ + sin_):
            raise ValueError("potential coefficients must be finite")
        if self.collocation_steps < 2:
            raise ValueError("collocation_steps must be at least 2")
        if self.integrator_steps < 1:
            raise ValueError("integrator_steps must be positive")
        object.__setattr__(self, "cosine_coeffs", cos_)
        object.__setattr__(self, "sine_coeffs", sin_)

    # potential and derivatives, vectorized over arrays of positions
    def _modes(self):
        K = max(len(self.cosine_coeffs), len(self.sine_coeffs))
        a = np.zeros(K)
        b = np.zeros(K)
        a[: len(self.cosine_coeffs)] = self.cosine_coeffs
        b[: len(self.sine_coeffs)] = self.sine_coeffs
        return 2.0 * np.pi * np.arange(1, K + 1), a, b

    def V(self, x):
        w, a, b = self._modes()
        x = np.asarray(x, dtype=np.float64)
        out = np.zeros_like(x)
        for wk, ak, bk in zip(w, a, b):
            out = out + ak * np.cos(wk * x) + bk * np.sin(wk * x)
        return out

    def dV(self, x):
        w, a, b = self._modes()
        x = np.asarray(x, dtype=np.float64)
        out = np.zeros_like(x)
        for wk, ak, bk in zip(w, a, b):
            out = out + wk * (-ak * np.sin(wk * x) + bk * np.cos(wk * x))
        return out

    def d2V(self, x):
        w, a, b = self._modes()
        x = np.asarray(x, dtype=np.float64)
        out = np.zeros_like(x)
        for wk, ak, bk in zip(w, a, b):
            out = out - wk * wk * (ak * np.cos(wk * x) + bk * np.sin(wk * x))
        return out

    def derivatives(self, x):
        """``(V, V', V'')`` from a single evaluation of the Fourier modes."""
        w, a, b = self._modes()
        x = np.asarray(x, dtype=np.float64)
        V = np.zeros_like(x)
        dV = np.zeros_like(x)
        d2V = np.zeros_like(x)
        for wk, ak, bk in zip(w, a, b):
            c = np.cos(wk * x)
            s = np.sin(wk * x)
            even = ak * c + bk * s
            V += even
            dV += wk * (bk * c - ak * s)
            d2V -= wk * wk * even
        return V, dV, d2V

    def lagrangian(self, x, v):
        return 0.5 * np.asarray(v) ** 2 - self.V(x)

    def energy(self, x, v):
        return 0.5 * np.asarray(v) ** 2 + self.V(x)

    @property
    def max_potential(self) -> float:
        """``max V`` on a fine grid, the critical value of a mechanical Lagrangian."""
        xs = np.linspace(0.0, 1.0, 4097)
        return float(self.V(xs).max())

    @property
    def is_free(self) -> bool:
        return not any(self.cosine_coeffs) and not any(self.sine_coeffs)

    def windings(self) -> range:
        return range(-self.max_winding, self.max_winding + 1)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cosine_coeffs"] = list(self.cosine_coeffs)
        d["sine_coeffs"] = list(self.sine_coeffs)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "LagrangianSpec":
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown Lagrangian config keys {sorted(extra)}")
        return cls(**data)


def load_lagrangian(path: str | Path) -> LagrangianSpec:
    return LagrangianSpec.from_dict(json.loads(Path(path).read_text()))


def free_particle(**kw) -> LagrangianSpec:
    return LagrangianSpec(**kw)


def pendulum(shift: bool = False, **kw) -> LagrangianSpec:
    """``V = cos(2 pi x)`` (maximum at 0), or ``-cos(2 pi x)`` (maximum at 1/2) when shifted."""
    return LagrangianSpec(cosine_coeffs=(-1.0,) if shift else (1.0,), **kw)


@dataclass(frozen=True, eq=False)
class Curve:
    """A unit-time curve from ``x`` to the lift ``y + winding``.

    ``interior`` holds the ``M - 1`` interior collocation nodes (lifted),
    ``velocities`` the ``M`` segment velocities.  ``discrete_action`` is the
    midpoint-rule action of the polygon; ``action`` is the reported cost, equal
    to the shooting action when the curve was refined along the flow.
    ``v_start``/``v_end`` are the endpoint velocities (momenta, since
    ``dL/dv = v``).
    """

    x: float
    y: float
    winding: int
    interior: np.ndarray
    velocities: np.ndarray
    discrete_action: float
    action: float
    v_start: float
    v_end: float
    refined: bool = False
    gap: float = field(default=float("inf"))

    @property
    def end(self) -> float:
        return self.y + self.winding

    @property
    def points(self) -> np.ndarray:
        return np.concatenate([[self.x], self.interior, [self.end]])


@dataclass(frozen=True)
class CotangentPoint:
    base: float
    covector: float

    def to_dict(self) -> dict:
        return {"base": self.base, "covector": self.covector}
