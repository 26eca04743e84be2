"""Euclidean projections onto the parameter sets used by the fitters."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError

EN_RTOL = 1e-10
EN_MAX_BISECT = 200


class SetKind(str, enum.Enum):
    UNCONSTRAINED = "unconstrained"
    L2_BALL = "l2_ball"
    L1_BALL = "l1_ball"
    ELASTIC_NET = "elastic_net_ball"
    BOX = "interval_box"


@dataclass(frozen=True)
class ConstraintSet:
    kind: SetKind
    radius: float = math.inf
    a1: float = 0.0
    a2: float = 0.0
    lo: float | np.ndarray = -math.inf
    hi: float | np.ndarray = math.inf

    def __post_init__(self):
        object.__setattr__(self, "kind", SetKind(self.kind))
        if self.kind in (SetKind.L2_BALL, SetKind.L1_BALL, SetKind.ELASTIC_NET):
            if not (self.radius > 0 and math.isfinite(self.radius)):
                raise ConfigError(f"radius must be positive and finite, got {self.radius}")
        if self.kind is SetKind.ELASTIC_NET:
            if self.a1 < 0 or self.a2 < 0 or self.a1 + self.a2 <= 0:
                raise ConfigError(f"need a1, a2 >= 0 with a1 + a2 > 0, got ({self.a1}, {self.a2})")
        if self.kind is SetKind.BOX:
            lo, hi = np.asarray(self.lo, dtype=float), np.asarray(self.hi, dtype=float)
            if np.any(np.isnan(lo)) or np.any(np.isnan(hi)) or np.any(lo > hi):
                raise ConfigError("box needs lo <= hi")

    @classmethod
    def unconstrained(cls):
        return cls(SetKind.UNCONSTRAINED)

    @classmethod
    def l2_ball(cls, r):
        return cls(SetKind.L2_BALL, radius=float(r))

    @classmethod
    def l1_ball(cls, r):
        return cls(SetKind.L1_BALL, radius=float(r))

    @classmethod
    def elastic_net(cls, a1, a2, r):
        return cls(SetKind.ELASTIC_NET, radius=float(r), a1=float(a1), a2=float(a2))

    @classmethod
    def box(cls, lo, hi):
        return cls(SetKind.BOX, lo=lo, hi=hi)

    def value(self, theta) -> float:
        """Constraint function whose sublevel set at ``radius`` is the set."""
        theta = np.asarray(theta, dtype=float)
        if self.kind is SetKind.L2_BALL:
            return float(np.linalg.norm(theta))
        if self.kind is SetKind.L1_BALL:
            return float(np.abs(theta).sum())
        if self.kind is SetKind.ELASTIC_NET:
            return _en_value(theta, self.a1, self.a2)
        return 0.0

    def contains(self, theta, tol: float = 1e-10) -> bool:
        theta = np.asarray(theta, dtype=float)
        if self.kind is SetKind.UNCONSTRAINED:
            return True
        if self.kind is SetKind.BOX:
            return bool(np.all(theta >= self.lo - tol) and np.all(theta <= self.hi + tol))
        return self.value(theta) <= self.radius + tol

    def describe(self) -> str:
        k = self.kind
        if k is SetKind.UNCONSTRAINED:
            return "none"
        if k is SetKind.L2_BALL:
            return f"l2:{self.radius:g}"
        if k is SetKind.L1_BALL:
            return f"l1:{self.radius:g}"
        if k is SetKind.ELASTIC_NET:
            return f"en:{self.a1:g},{self.a2:g},{self.radius:g}"
        lo, hi = np.ravel(self.lo), np.ravel(self.hi)
        if lo.size == 1 and hi.size == 1:
            return f"box:{lo[0]:g},{hi[0]:g}"
        return "box:custom"


def parse_constraint(text: str) -> ConstraintSet:
    """Parse ``none``, ``l2:R``, ``l1:R``, ``en:A1,A2,R`` or ``box:LO,HI``."""
    text = text.strip().lower()
    if text in ("", "none", "unconstrained"):
        return ConstraintSet.unconstrained()
    name, _, args = text.partition(":")
    try:
        nums = [float(a) for a in args.split(",")] if args else []
    except ValueError:
        raise ConfigError(f"bad constraint arguments in {text!r}") from None
    want = {"l2": 1, "l1": 1, "en": 3, "box": 2}
    if name not in want:
        raise ConfigError(f"unknown constraint {name!r}")
    if len(nums) != want[name]:
        raise ConfigError(f"{name} takes {want[name]} argument(s), got {len(nums)}")
    if name == "l2":
        return ConstraintSet.l2_ball(nums[0])
    if name == "l1":
        return ConstraintSet.l1_ball(nums[0])
    if name == "en":
        return ConstraintSet.elastic_net(*nums)
    return ConstraintSet.box(nums[0], nums[1])


def _en_value(theta, a1, a2):
    return a1 * float(np.abs(theta).sum()) + a2 * float(np.linalg.norm(theta))


def project_l2(y: np.ndarray, r: float) -> np.ndarray:
    norm = float(np.linalg.norm(y))
    if norm <= r:
        return y.copy()
    return y * (r / norm)


def project_l1(y: np.ndarray, r: float) -> np.ndarray:
    """Sort-and-threshold projection onto ``{||x||_1 <= r}``, O(d log d)."""
    a = np.abs(y)
    if a.sum() <= r:
        return y.copy()
    u = np.sort(a, kind="stable")[::-1]
    css = np.cumsum(u)
    k = np.arange(1, u.size + 1)
    last = np.nonzero(u * k > css - r)[0][-1]
    tau = (css[last] - r) / (last + 1.0)
    return np.sign(y) * np.maximum(a - tau, 0.0)


def _en_point(y, lam, a1, a2):
    s = np.sign(y) * np.maximum(np.abs(y) - lam * a1, 0.0)
    norm = float(np.linalg.norm(s))
    if norm <= lam * a2:
        return np.zeros_like(y)
    return (1.0 - lam * a2 / norm) * s


def project_elastic_net(y: np.ndarray, a1: float, a2: float, r: float) -> np.ndarray:
    """Projection onto ``{a1 ||x||_1 + a2 ||x||_2 <= r}``.

    Optimality gives ``x = (1 - lam a2 / ||S||) S`` with ``S`` the
    soft-threshold of ``y`` at ``lam a1``; the constraint value is monotone
    in ``lam``, so ``lam`` is found by bisection.
    """
    if a2 == 0.0:
        return project_l1(y, r / a1)
    if a1 == 0.0:
        return project_l2(y, r / a2)
    if _en_value(y, a1, a2) <= r:
        return y.copy()
    lo = 0.0
    hi = float(np.abs(y).max()) / a1
    best = np.zeros_like(y)
    for _ in range(EN_MAX_BISECT):
        mid = 0.5 * (lo + hi)
        x = _en_point(y, mid, a1, a2)
        h = _en_value(x, a1, a2)
        if h > r:
            lo = mid
        else:
            hi, best = mid, x
            if r - h <= EN_RTOL * r:
                break
        if hi - lo <= 1e-16 * hi:
            break
    return best


def project(y, cset: ConstraintSet) -> np.ndarray:
    """Euclidean projection of ``y`` onto ``cset``."""
    y = np.array(y, dtype=float).reshape(-1)
    if not np.all(np.isfinite(y)):
        raise InputError("cannot project a non-finite point")
    k = cset.kind
    if k is SetKind.UNCONSTRAINED:
        return y
    if k is SetKind.L2_BALL:
        return project_l2(y, cset.radius)
    if k is SetKind.L1_BALL:
        return project_l1(y, cset.radius)
    if k is SetKind.ELASTIC_NET:
        return project_elastic_net(y, cset.a1, cset.a2, cset.radius)
    return np.clip(y, cset.lo, cset.hi)
