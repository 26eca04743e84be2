"""Per-example losses and gradients for the supported model families.

Every family here is convex in ``theta``:

* ``logistic``:  log(1 + exp(-y theta^T x)), labels in {-1, +1}
* ``squared``:   0.5 (theta^T x - y)^2
* ``absolute_median``:  |theta - x| - |ref - x| on scalar data; the
  reference term only shifts each example's loss by a constant.  With
  ``ref = 0`` this is the relative loss whose population minimizer has
  zero loss everywhere; ``ref = None`` gives the plain absolute deviation.
* ``quad_linear_perturb``:  0.5 ||theta - v||^2 + x^T (theta - v)

Batch routines are the workhorses; the single-example functions are thin
wrappers over them.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .data import Dataset, Example
from .errors import ConfigError, InputError


class LossKind(str, enum.Enum):
    LOGISTIC = "logistic"
    SQUARED = "squared"
    ABSOLUTE_MEDIAN = "absolute_median"
    QUAD_LINEAR_PERTURB = "quad_linear_perturb"


@dataclass(frozen=True)
class LossModel:
    kind: LossKind
    v: np.ndarray | None = None
    reference: float | None = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", LossKind(self.kind))
        if self.kind is LossKind.QUAD_LINEAR_PERTURB:
            if self.v is None:
                raise ConfigError("quad_linear_perturb needs a centre vector v")
            v = np.array(self.v, dtype=float).reshape(-1)
            if not np.all(np.isfinite(v)):
                raise ConfigError("v must be finite")
            v.flags.writeable = False
            object.__setattr__(self, "v", v)

    @classmethod
    def logistic(cls):
        return cls(LossKind.LOGISTIC)

    @classmethod
    def squared(cls):
        return cls(LossKind.SQUARED)

    @classmethod
    def absolute_median(cls, reference: float | None = 0.0):
        return cls(LossKind.ABSOLUTE_MEDIAN, reference=reference)

    @classmethod
    def quad_linear_perturb(cls, v):
        return cls(LossKind.QUAD_LINEAR_PERTURB, v=v)

    @property
    def dimension(self) -> int | None:
        if self.kind is LossKind.QUAD_LINEAR_PERTURB:
            return self.v.size
        if self.kind is LossKind.ABSOLUTE_MEDIAN:
            return 1
        return None


def _check(model: LossModel, theta, data: Dataset) -> np.ndarray:
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.size != data.d:
        raise InputError(f"theta has dimension {theta.size}, data has {data.d}")
    if model.kind is LossKind.QUAD_LINEAR_PERTURB and model.v.size != data.d:
        raise InputError(f"v has dimension {model.v.size}, data has {data.d}")
    if model.kind is LossKind.ABSOLUTE_MEDIAN and data.d != 1:
        raise InputError("absolute_median needs scalar examples")
    if model.kind in (LossKind.LOGISTIC, LossKind.SQUARED) and data.y is None:
        raise InputError(f"{model.kind.value} loss needs labels")
    return theta


def _logistic(t: np.ndarray) -> np.ndarray:
    # log(1 + exp(-t)) without overflow for either sign of the margin
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = np.log1p(np.exp(-t[pos]))
    out[~pos] = -t[~pos] + np.log1p(np.exp(t[~pos]))
    return out


def _column(data: Dataset) -> np.ndarray:
    return data.dense_X()[:, 0]


def batch_losses(model: LossModel, theta, data: Dataset) -> np.ndarray:
    """Vector of per-example losses at ``theta``."""
    theta = _check(model, theta, data)
    kind = model.kind
    if kind is LossKind.LOGISTIC:
        return _logistic(data.y * (data.X @ theta))
    if kind is LossKind.SQUARED:
        r = data.X @ theta - data.y
        return 0.5 * r * r
    if kind is LossKind.ABSOLUTE_MEDIAN:
        x = _column(data)
        out = np.abs(theta[0] - x)
        if model.reference is not None:
            out -= np.abs(model.reference - x)
        return out
    u = theta - model.v
    return 0.5 * float(u @ u) + data.X @ u


def _slopes(model: LossModel, theta: np.ndarray, data: Dataset) -> np.ndarray:
    """d loss / d (theta^T x) for the linear-predictor families."""
    m = data.X @ theta
    if model.kind is LossKind.LOGISTIC:
        return -data.y * expit(-data.y * m)
    return m - data.y


def weighted_gradient(model: LossModel, theta, data: Dataset, weights) -> np.ndarray:
    """``sum_i weights[i] * grad loss_i(theta)``."""
    theta = _check(model, theta, data)
    w = np.asarray(weights, dtype=float)
    if w.shape != (data.n,):
        raise InputError(f"expected {data.n} weights, got shape {w.shape}")
    kind = model.kind
    if kind in (LossKind.LOGISTIC, LossKind.SQUARED):
        return np.asarray(data.X.T @ (w * _slopes(model, theta, data))).reshape(-1)
    if kind is LossKind.ABSOLUTE_MEDIAN:
        # subgradient convention sign(0) = 0 at kinks
        return np.array([float(w @ np.sign(theta[0] - _column(data)))])
    return (theta - model.v) * w.sum() + np.asarray(data.X.T @ w).reshape(-1)


def batch_gradients(model: LossModel, theta, data: Dataset) -> np.ndarray:
    """Dense ``(n, d)`` matrix of per-example gradients."""
    theta = _check(model, theta, data)
    kind = model.kind
    if kind in (LossKind.LOGISTIC, LossKind.SQUARED):
        s = _slopes(model, theta, data)
        if data.is_sparse:
            return (sp.diags(s) @ data.X).toarray()
        return s[:, None] * data.X
    if kind is LossKind.ABSOLUTE_MEDIAN:
        return np.sign(theta[0] - _column(data))[:, None]
    return (theta - model.v)[None, :] + data.dense_X()


def _as_dataset(ex: Example) -> Dataset:
    return Dataset(np.atleast_1d(np.asarray(ex.features, dtype=float)).reshape(1, -1),
                   None if ex.label is None else [ex.label])


def loss_value(model: LossModel, theta, ex: Example) -> float:
    return float(batch_losses(model, theta, _as_dataset(ex))[0])


def loss_gradient(model: LossModel, theta, ex: Example) -> np.ndarray:
    return batch_gradients(model, theta, _as_dataset(ex))[0]
