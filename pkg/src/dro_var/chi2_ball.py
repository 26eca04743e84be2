"""Worst-case reweighting of a loss vector over a chi-square ball.

Solves

    maximize    <p, z>
    subject to  p >= 0,  sum(p) = 1,  0.5 * ||n p - 1||^2 <= rho

exactly.  The feasible set is the uniform empirical distribution inflated
by a chi-square budget ``rho`` (``D(P || P_n) <= rho / n`` with
``phi(t) = (t - 1)^2 / 2``).

Stationary weights of the Lagrangian with multipliers ``lam`` (chi-square
constraint) and ``eta`` (sum constraint) are

    p_i(lam, eta) = max(0, 1/n + (z_i - eta) / (lam n^2)).

For a fixed ``lam`` the active set is a prefix of ``z`` sorted in
decreasing order, so ``eta`` is found by a binary search over the sorted
breakpoints using prefix sums, and the constraint value
``g(lam) = 0.5 ||n p - 1||^2`` follows in O(1) from prefix sums of squares:

    g(lam) = 0.5 * (V_k / (lam n)^2 + n (n - k) / k),

with ``k`` active entries and ``V_k`` their centred sum of squares.  We
bisect on ``lam`` until the active set at both bracket ends agrees, at
which point the root of ``g(lam) = rho`` has a closed form.  Total cost is
one sort plus O(log(1/eps) log n) scalar work.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError, SolverError

# strict margin for taking the closed-form interior solution
INTERIOR_MARGIN = 1e-9
FEAS_RTOL = 1e-10
MAX_BISECT = 200
MAX_BRACKET = 1000


class FastPath(str, enum.Enum):
    DEGENERATE_UNIFORM = "degenerate_uniform"
    CLOSED_FORM_INTERIOR = "closed_form_interior"
    DUAL_BISECTION = "dual_bisection"
    POINT_MASS = "point_mass"


@dataclass(frozen=True)
class WorstCaseSolution:
    """Maximizer of ``<p, z>`` over the chi-square ball.

    ``lam`` and ``eta`` are the multipliers of the chi-square and
    sum-to-one constraints, in the units of ``z``.  ``lam`` is ``inf`` when
    ``rho == 0`` and the losses are not constant (the ball is a single
    point).  ``expansion_gap`` is ``value - (mean + sqrt(2 rho var / n))``
    and is never positive.
    """

    weights: np.ndarray
    value: float
    lam: float
    eta: float
    constraint_active: bool
    fast_path: FastPath
    expansion_gap: float

    @property
    def n(self) -> int:
        return self.weights.size

    def chi2(self) -> float:
        """``0.5 * ||n p - 1||^2`` at the returned weights."""
        r = self.n * self.weights - 1.0
        return 0.5 * float(r @ r)

    def to_dict(self, include_weights: bool = True) -> dict:
        out = {
            "n": self.n,
            "value": self.value,
            "lambda": self.lam,
            "eta": self.eta,
            "constraint_active": self.constraint_active,
            "fast_path": self.fast_path.value,
            "expansion_gap": self.expansion_gap,
            "chi2": self.chi2(),
        }
        if include_weights:
            out["weights"] = self.weights.tolist()
        return out


def as_loss_vector(z) -> np.ndarray:
    """Validate and convert to a 1-d float64 array of finite values."""
    arr = np.asarray(z, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise InputError(f"loss vector must be 1-d, got shape {arr.shape}")
    if arr.size == 0:
        raise InputError("loss vector is empty")
    if not np.all(np.isfinite(arr)):
        raise InputError("loss vector contains non-finite entries")
    return arr


def _check_rho(rho) -> float:
    rho = float(rho)
    if not math.isfinite(rho) or rho < 0:
        raise InputError(f"rho must be finite and nonnegative, got {rho}")
    return rho


def sample_moments(z) -> tuple[float, float, float]:
    """Return ``(mean, variance, range)`` with 1/n normalization."""
    z = as_loss_vector(z)
    mean = float(np.mean(z))
    c = z - mean
    return mean, float(c @ c) / z.size, float(z.max() - z.min())


def _min_ratio(z: np.ndarray, rho: float) -> float:
    # min_i sqrt(2 rho) (z_i - mean) / sqrt(n s^2), computed on rescaled
    # centred values so tiny spreads do not underflow
    c = z - np.mean(z)
    scale = float(np.max(np.abs(c)))
    if scale == 0.0:
        return 0.0
    u = c / scale
    return math.sqrt(2.0 * rho) * float(u.min()) / math.sqrt(float(u @ u))


def expansion_condition_holds(z, rho) -> bool:
    """True iff the variance-expansion maximizer has nonnegative weights.

    Constant ``z`` counts as satisfying the condition.
    """
    z = as_loss_vector(z)
    rho = _check_rho(rho)
    if np.all(z == z[0]):
        return True
    return _min_ratio(z, rho) >= -1.0


def variance_expansion_value(z, rho) -> float:
    """``mean(z) + sqrt(2 rho s^2 / n)``; an upper bound on the worst case."""
    z = as_loss_vector(z)
    rho = _check_rho(rho)
    mean, var, _ = sample_moments(z)
    return mean + math.sqrt(2.0 * rho * var / z.size)


class _SortedLosses:
    """Descending sort of rescaled losses with prefix sums."""

    def __init__(self, u: np.ndarray):
        self.n = u.size
        self.us = np.sort(u)[::-1]
        self.S = np.concatenate(([0.0], np.cumsum(self.us)))
        self.Q = np.concatenate(([0.0], np.cumsum(self.us * self.us)))

    def eta(self, lam: float, k: int) -> float:
        return (self.S[k] + lam * self.n * (k - self.n)) / k

    def active_count(self, lam: float) -> int:
        # largest k with us[k-1] - eta_k + lam n > 0; valid k form a prefix
        n, us = self.n, self.us
        lo, hi = 1, n
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if us[mid - 1] - self.eta(lam, mid) + lam * n > 0.0:
                lo = mid
            else:
                hi = mid - 1
        return lo

    def centred_ss(self, k: int) -> float:
        return max(self.Q[k] - self.S[k] * self.S[k] / k, 0.0)

    def g(self, lam: float) -> tuple[float, int]:
        n = self.n
        k = self.active_count(lam)
        val = 0.5 * (self.centred_ss(k) / (lam * n) ** 2 + n * (n - k) / k)
        return val, k

    def exact_lam(self, k: int, rho: float) -> float | None:
        """Root of g(lam) = rho assuming the top-k set is active."""
        n = self.n
        denom = 2.0 * rho - n * (n - k) / k
        if denom <= 0.0:
            return None
        top = self.us[:k]
        dev = top - top.mean()
        return math.sqrt(float(dev @ dev)) / (n * math.sqrt(denom))


def _dual_bisection(u: np.ndarray, rho: float, tol: float) -> tuple[float, float]:
    """Return ``(lam, eta)`` for rescaled centred losses ``u``."""
    n = u.size
    sl = _SortedLosses(u)
    feas_tol = min(tol, FEAS_RTOL) * max(1.0, rho)

    lam0 = math.sqrt(float(u @ u)) / (n * math.sqrt(2.0 * rho))
    lo = hi = lam0
    g_lo, k_lo = sl.g(lo)
    g_hi, k_hi = g_lo, k_lo
    for _ in range(MAX_BRACKET):
        if g_lo > rho:
            break
        lo *= 0.5
        g_lo, k_lo = sl.g(lo)
    for _ in range(MAX_BRACKET):
        if g_hi <= rho:
            break
        hi *= 2.0
        g_hi, k_hi = sl.g(hi)
    if not (g_lo > rho >= g_hi):
        raise SolverError(f"could not bracket the chi-square multiplier (rho={rho})")

    lam, k = hi, k_hi
    for _ in range(MAX_BISECT):
        if k_lo == k_hi:
            # g has a closed form on the whole bracket
            exact = sl.exact_lam(k_lo, rho)
            if exact is not None:
                lam, k = exact, k_lo
                break
        mid = math.sqrt(lo * hi)
        if not lo < mid < hi:
            mid = 0.5 * (lo + hi)
        g_mid, k_mid = sl.g(mid)
        lam, k = mid, k_mid
        if abs(g_mid - rho) <= feas_tol or hi - lo <= 1e-12 * hi:
            break
        if g_mid > rho:
            lo, k_lo = mid, k_mid
        else:
            hi, k_hi = mid, k_mid

    top = sl.us[:k]
    eta = (math.fsum(top) + lam * n * (k - n)) / k
    return lam, eta


def worst_case_distribution(z, rho, tol: float = 1e-10) -> WorstCaseSolution:
    """Exact maximizer of ``<p, z>`` over the chi-square ball of radius ``rho``.

    Parameters
    ----------
    z : array_like, shape (n,)
        Per-example losses; must be finite.
    rho : float
        Nonnegative chi-square budget.  ``rho = 0`` returns the empirical
        (uniform) distribution.
    tol : float
        Target accuracy for the dual root-find.

    Returns
    -------
    WorstCaseSolution
    """
    z = as_loss_vector(z)
    rho = _check_rho(rho)
    tol = float(tol)
    if not tol > 0 or not math.isfinite(tol):
        raise ConfigError(f"tol must be positive, got {tol}")

    n = z.size
    mean = float(np.mean(z))
    uniform = np.full(n, 1.0 / n)

    if rho == 0.0 or np.all(z == z[0]):
        constant = bool(np.all(z == z[0]))
        return WorstCaseSolution(
            weights=uniform,
            value=mean,
            lam=0.0 if constant else math.inf,
            eta=mean,
            constraint_active=rho == 0.0,
            fast_path=FastPath.DEGENERATE_UNIFORM,
            expansion_gap=0.0,
        )

    c = z - mean
    scale = float(np.max(np.abs(c)))
    u = c / scale
    ss = float(u @ u)
    var = ss / n * scale * scale
    expansion = mean + math.sqrt(2.0 * rho * var / n)

    ratio = math.sqrt(2.0 * rho) * float(u.min()) / math.sqrt(ss)
    if ratio >= -1.0 + INTERIOR_MARGIN:
        w = uniform + math.sqrt(2.0 * rho) * u / (n * math.sqrt(ss))
        value = float(w @ z)
        return WorstCaseSolution(
            weights=w,
            value=value,
            lam=scale * math.sqrt(ss) / (n * math.sqrt(2.0 * rho)),
            eta=mean,
            constraint_active=True,
            fast_path=FastPath.CLOSED_FORM_INTERIOR,
            expansion_gap=value - expansion,
        )

    # ties are judged on the rescaled values the dual path works with
    top = u == u.max()
    m = int(np.count_nonzero(top))
    g0 = n * (n - m) / (2.0 * m)
    if g0 <= rho:
        w = top / m
        zmax = float(w @ z) if m > 1 else float(z[top][0])
        return WorstCaseSolution(
            weights=w,
            value=zmax,
            lam=0.0,
            eta=zmax,
            constraint_active=abs(g0 - rho) <= FEAS_RTOL * max(1.0, rho),
            fast_path=FastPath.POINT_MASS,
            expansion_gap=zmax - expansion,
        )

    lam_u, eta_u = _dual_bisection(u, rho, tol)
    w = np.maximum(0.0, 1.0 / n + (u - eta_u) / (lam_u * n * n))
    w /= w.sum()
    value = float(w @ z)
    return WorstCaseSolution(
        weights=w,
        value=value,
        lam=lam_u * scale,
        eta=mean + eta_u * scale,
        constraint_active=True,
        fast_path=FastPath.DUAL_BISECTION,
        expansion_gap=value - expansion,
    )
