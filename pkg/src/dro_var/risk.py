"""Robust objective, its gradient, coverage radius, certificates and bias."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chi2_ball import WorstCaseSolution, worst_case_distribution
from .data import Dataset
from .errors import ConfigError, InputError
from .losses import LossModel, batch_gradients, batch_losses, weighted_gradient


@dataclass(frozen=True)
class RobustObjective:
    """``theta -> sup_p sum_i p_i loss_i(theta)`` over the chi-square ball.

    ``rho = 0`` is plain empirical risk.
    """

    model: LossModel
    data: Dataset
    rho: float
    solver_tol: float = 1e-10

    def __post_init__(self):
        if not (self.rho >= 0 and math.isfinite(self.rho)):
            raise ConfigError(f"rho must be finite and nonnegative, got {self.rho}")
        if not self.solver_tol > 0:
            raise ConfigError("solver_tol must be positive")

    @property
    def dim(self) -> int:
        return self.data.d

    def losses(self, theta) -> np.ndarray:
        return batch_losses(self.model, theta, self.data)

    def value(self, theta) -> tuple[float, WorstCaseSolution]:
        sol = worst_case_distribution(self.losses(theta), self.rho, self.solver_tol)
        return sol.value, sol

    def gradient(self, theta, sol: WorstCaseSolution | None = None) -> np.ndarray:
        if sol is None:
            _, sol = self.value(theta)
        return weighted_gradient(self.model, theta, self.data, sol.weights)

    def value_and_grad(self, theta):
        val, sol = self.value(theta)
        return val, self.gradient(theta, sol), sol


def robust_objective_value(obj: RobustObjective, theta) -> tuple[float, WorstCaseSolution]:
    return obj.value(theta)


def robust_gradient(obj: RobustObjective, theta) -> np.ndarray:
    """Worst-case-weighted gradient ``sum_i p*_i grad loss_i(theta)``.

    This is the gradient whenever the worst-case weights are unique
    (nonconstant losses); otherwise it is a subgradient.
    """
    return obj.gradient(theta)


def rho_for_coverage(delta: float, d: int, n: int, D: float, L: float) -> float:
    """Radius ``log(2/delta) + d log(2 n D L)`` for a 1 - delta coverage bound.

    ``D`` is the diameter of the parameter set and ``L`` a Lipschitz
    constant of the loss in the parameter.
    """
    if not 0.0 < delta < 1.0:
        raise ConfigError(f"delta must lie in (0, 1), got {delta}")
    if d < 0 or n < 1:
        raise ConfigError("need d >= 0 and n >= 1")
    if not (D > 0 and L > 0):
        raise ConfigError("D and L must be positive")
    return math.log(2.0 / delta) + d * math.log(2.0 * n * D * L)


def certificate_slack(M: float, rho: float, n: int) -> float:
    return 11.0 * M * rho / (3.0 * n) + (2.0 * M / n) * (1.0 + math.sqrt(rho / n))


@dataclass(frozen=True)
class Certificate:
    """Upper confidence bound ``robust_value + slack`` on the population risk.

    ``M_source`` is ``"a_priori"`` for a caller-supplied loss range and
    ``"observed"`` when the training range was used instead, which is not a
    valid a-priori bound and only indicative.
    """

    robust_value: float
    slack: float
    upper_bound: float
    M: float
    rho: float
    n: int
    M_source: str = "a_priori"

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def certificate(obj: RobustObjective, theta_hat, M: float | None = None) -> Certificate:
    value, sol = obj.value(theta_hat)
    source = "a_priori"
    if M is None:
        z = obj.losses(theta_hat)
        M = float(z.max() - z.min())
        source = "observed"
    elif not M > 0:
        raise ConfigError(f"loss range bound M must be positive, got {M}")
    n = obj.data.n
    slack = certificate_slack(M, obj.rho, n)
    return Certificate(value, slack, value + slack, float(M), obj.rho, n, source)


@dataclass(frozen=True)
class BiasEstimate:
    b_hat: np.ndarray
    loss_std: float


def bias_from_moments(losses, grads) -> BiasEstimate:
    """Plug-in ``Cov(grad, loss) / sd(loss)`` with 1/n moments."""
    z = np.asarray(losses, dtype=float)
    G = np.asarray(grads, dtype=float)
    if G.ndim == 1:
        G = G[:, None]
    if z.size == 0 or G.shape[0] != z.size:
        raise InputError("need matching, nonempty losses and gradients")
    zc = z - z.mean()
    var = float(zc @ zc) / z.size
    if var == 0.0:
        return BiasEstimate(np.zeros(G.shape[1]), 0.0)
    cov = (G - G.mean(axis=0)).T @ zc / z.size
    sd = math.sqrt(var)
    return BiasEstimate(cov / sd, sd)


def bias_term(model: LossModel, data: Dataset, theta) -> BiasEstimate:
    return bias_from_moments(batch_losses(model, theta, data), batch_gradients(model, theta, data))
