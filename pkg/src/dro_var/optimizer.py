"""Projected gradient descent with Armijo backtracking."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chi2_ball import WorstCaseSolution
from .data import Dataset
from .errors import ConfigError, LineSearchError
from .geometry import ConstraintSet, project
from .losses import LossModel
from .risk import Certificate, RobustObjective

STALL_WINDOW = 5
STALL_RTOL = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    max_iter: int = 1000
    grad_map_tol: float = 1e-8
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    init_step: float = 1.0
    max_backtracks: int = 50

    def __post_init__(self):
        if self.max_iter < 1 or self.max_backtracks < 1:
            raise ConfigError("max_iter and max_backtracks must be positive")
        if not self.grad_map_tol > 0 or not self.init_step > 0:
            raise ConfigError("grad_map_tol and init_step must be positive")
        if not 0 < self.armijo_c < 1 or not 0 < self.backtrack < 1:
            raise ConfigError("armijo_c and backtrack must lie in (0, 1)")


@dataclass
class FitResult:
    theta_hat: np.ndarray
    objective_trace: np.ndarray
    iterations: int
    converged: bool
    final_weights: WorstCaseSolution
    stop_reason: str
    grad_map_norm: float
    step_size: float
    certificate: Certificate | None = None
    extra: dict = field(default_factory=dict)

    @property
    def objective(self) -> float:
        return float(self.objective_trace[-1])

    def telemetry(self) -> dict:
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "objective": self.objective,
            "grad_map_norm": self.grad_map_norm,
            "step_size": self.step_size,
            "fast_path": self.final_weights.fast_path.value,
        }


def minimize(
    objective: RobustObjective,
    cset: ConstraintSet | None = None,
    config: SolverConfig | None = None,
    theta0=None,
) -> FitResult:
    """Minimize the robust objective over ``cset`` from ``theta0`` (default 0).

    Each iteration takes ``theta+ = P(theta - s g)`` with ``g`` the
    worst-case-weighted gradient, accepting the first ``s`` in
    ``s0, s0*beta, ...`` that satisfies
    ``f(theta+) <= f(theta) - c ||theta - theta+||^2 / s``.  The trial step
    restarts at ``min(init_step, 2 * previous accepted step)``.

    Stops when the gradient mapping ``||theta - theta+|| / s`` drops below
    ``grad_map_tol``, or when the objective has decreased by less than a
    relative ``1e-12`` over the last five iterations.

    Raises
    ------
    LineSearchError
        No trial step met the sufficient-decrease test.  The exception
        carries the current iterate and the objective trace.
    """
    cset = cset or ConstraintSet.unconstrained()
    cfg = config or SolverConfig()
    theta = np.zeros(objective.dim) if theta0 is None else np.asarray(theta0, dtype=float)
    theta = project(theta, cset)

    f, sol = objective.value(theta)
    g = objective.gradient(theta, sol)
    trace = [f]
    step = cfg.init_step
    gm = math.inf
    reason = "max_iter"
    converged = False

    for it in range(cfg.max_iter):
        s = min(cfg.init_step, 2.0 * step) if it else cfg.init_step
        for _ in range(cfg.max_backtracks + 1):
            cand = project(theta - s * g, cset)
            diff = theta - cand
            dd = float(diff @ diff)
            f_new, sol_new = objective.value(cand)
            if f_new <= f - cfg.armijo_c * dd / s:
                break
            s *= cfg.backtrack
        else:
            raise LineSearchError(
                f"no sufficient decrease after {cfg.max_backtracks} backtracks at iteration {it}",
                theta=theta,
                objective_trace=np.array(trace),
                iterations=it,
            )
        gm = math.sqrt(dd) / s
        theta, f, sol, step = cand, f_new, sol_new, s
        trace.append(f)
        if gm <= cfg.grad_map_tol:
            converged, reason = True, "grad_map"
            break
        if len(trace) > STALL_WINDOW:
            ref = trace[-1 - STALL_WINDOW]
            if ref - f <= STALL_RTOL * max(1.0, abs(ref)):
                converged, reason = True, "objective_stalled"
                break
        g = objective.gradient(theta, sol)

    return FitResult(
        theta_hat=theta,
        objective_trace=np.array(trace),
        iterations=len(trace) - 1,
        converged=converged,
        final_weights=sol,
        stop_reason=reason,
        grad_map_norm=gm,
        step_size=step,
    )


def minimize_erm(
    model: LossModel,
    data: Dataset,
    cset: ConstraintSet | None = None,
    config: SolverConfig | None = None,
    theta0=None,
) -> FitResult:
    """Empirical risk minimization: :func:`minimize` with ``rho = 0``."""
    return minimize(RobustObjective(model, data, 0.0), cset, config, theta0)
