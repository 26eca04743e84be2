"""Classification metrics: zero-one error, per-class error, multi-label P/R."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import InputError
from .losses import LossModel, batch_losses


@dataclass(frozen=True)
class EvaluationReport:
    risk: float
    error: float
    error_pos: float
    error_neg: float
    n_eval: int
    precision: float | None = None
    recall: float | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def binary_report(model: LossModel, theta, data: Dataset) -> EvaluationReport:
    """Mean surrogate loss and zero-one errors.

    An example counts as an error when ``sign(theta^T x) * y <= 0``, so a
    zero score is always wrong.  A per-class rate is 0 if that class is
    absent.
    """
    if data.y is None:
        raise InputError("binary_report needs labels")
    y = data.y
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise InputError("labels must be -1 or +1")
    theta = np.asarray(theta, dtype=float)
    wrong = np.sign(data.X @ theta) * y <= 0
    pos, neg = y > 0, y < 0
    return EvaluationReport(
        risk=float(np.mean(batch_losses(model, theta, data))),
        error=float(wrong.mean()),
        error_pos=float(wrong[pos].mean()) if pos.any() else 0.0,
        error_neg=float(wrong[neg].mean()) if neg.any() else 0.0,
        n_eval=data.n,
    )


@dataclass(frozen=True)
class MultilabelResult:
    precision: float
    recall: float
    n_docs: int
    n_recall_excluded: int


def multilabel_pr_from_predictions(predicted, truth) -> MultilabelResult:
    """Per-document precision and recall averaged over documents.

    ``predicted`` and ``truth`` are boolean ``(n_docs, n_labels)`` arrays.
    A document with no predicted label contributes 0 to precision; a
    document with no true label is left out of the recall average and
    counted in ``n_recall_excluded``.
    """
    pred = np.asarray(predicted, dtype=bool)
    true = np.asarray(truth, dtype=bool)
    if pred.shape != true.shape or pred.ndim != 2 or pred.shape[0] == 0:
        raise InputError("predicted and truth must be matching nonempty 2-d arrays")
    hits = (pred & true).sum(axis=1)
    n_pred = pred.sum(axis=1)
    n_true = true.sum(axis=1)
    prec = np.divide(hits, n_pred, out=np.zeros(hits.shape), where=n_pred > 0)
    keep = n_true > 0
    recall = float(np.mean(hits[keep] / n_true[keep])) if keep.any() else 0.0
    return MultilabelResult(float(prec.mean()), recall, pred.shape[0], int((~keep).sum()))


def multilabel_pr(thetas, X, Y) -> MultilabelResult:
    """Multi-label precision/recall for one linear classifier per label.

    ``thetas`` is a sequence of K parameter vectors, ``X`` an ``(n, d)``
    feature matrix and ``Y`` an ``(n, K)`` label matrix (positive entries
    mark membership).  Label k is predicted when ``theta_k^T x > 0``.
    """
    W = np.column_stack([np.asarray(t, dtype=float) for t in thetas])
    scores = np.asarray(X @ W)
    return multilabel_pr_from_predictions(scores > 0, np.asarray(Y) > 0)
