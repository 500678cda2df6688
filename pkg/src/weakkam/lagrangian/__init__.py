"""Costs generated by mechanical Lagrangians on the circle."""

from .model import (
    AmbiguousMinimizerError,
    ConvergenceError,
    CotangentPoint,
    Curve,
    LagrangianSpec,
    PartialMapUndefined,
    free_particle,
    load_lagrangian,
    pendulum,
)
from .ops import (
    FunctionCost,
    action_cost,
    aubry_star,
    cost_gradients,
    discretize,
    discretize_with_gaps,
    el_flow,
    el_residual,
    partial_dynamics,
    partial_maps,
    solve_pairs,
    twist_audit,
)
