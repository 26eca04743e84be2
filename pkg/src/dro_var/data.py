"""Datasets: sparse/CSV ingestion, synthetic generators and splits.

Random draws come from numpy's Philox-4x64-10 counter-based generator.
A generator is keyed by ``(seed, *stream)`` through ``SeedSequence``, so
each replication of an experiment gets its own independent stream and
results do not depend on scheduling order or platform.
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, DataIOError, InputError, ParseError

_DIM_HINT = re.compile(r"^#\s*dim:\s*(\d+)\s*$")


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Philox generator for ``seed`` and an optional stream path."""
    key = np.random.SeedSequence([int(seed), *map(int, stream)]).generate_state(2, np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class Example:
    features: np.ndarray
    label: float | None = None


@dataclass(frozen=True)
class Dataset:
    """Immutable sample: feature matrix ``X`` (dense or CSR) and labels ``y``.

    Location-type problems use a single feature column and ``y = None``.
    """

    X: np.ndarray | sp.csr_matrix
    y: np.ndarray | None = None
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        X = self.X
        if sp.issparse(X):
            X = sp.csr_matrix(X, dtype=np.float64, copy=True)
            X.sort_indices()
            for a in (X.data, X.indices, X.indptr):
                a.flags.writeable = False
            finite = np.all(np.isfinite(X.data))
        else:
            X = np.array(X, dtype=np.float64)
            if X.ndim == 1:
                X = X.reshape(-1, 1)
            if X.ndim != 2:
                raise InputError(f"feature matrix must be 2-d, got shape {X.shape}")
            X.flags.writeable = False
            finite = np.all(np.isfinite(X))
        if X.shape[0] < 1:
            raise InputError("dataset is empty")
        if not finite:
            raise InputError("features contain non-finite values")
        object.__setattr__(self, "X", X)
        if self.y is not None:
            y = np.array(self.y, dtype=np.float64).reshape(-1)
            if y.size != X.shape[0]:
                raise InputError(f"{y.size} labels for {X.shape[0]} examples")
            if not np.all(np.isfinite(y)):
                raise InputError("labels contain non-finite values")
            y.flags.writeable = False
            object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.X)

    def dense_X(self) -> np.ndarray:
        return self.X.toarray() if self.is_sparse else np.asarray(self.X)

    def example(self, i: int) -> Example:
        row = self.X[i].toarray().ravel() if self.is_sparse else np.array(self.X[i])
        return Example(row, None if self.y is None else float(self.y[i]))

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.intp)
        y = None if self.y is None else self.y[idx]
        return Dataset(self.X[idx], y, dict(self.metadata))

    def with_bias(self) -> "Dataset":
        """Append a constant-1 feature (intercept)."""
        ones = np.ones((self.n, 1))
        if self.is_sparse:
            X = sp.hstack([self.X, sp.csr_matrix(ones)], format="csr")
        else:
            X = np.hstack([self.X, ones])
        return Dataset(X, self.y, {**self.metadata, "bias_column": self.d})


def from_examples(examples, metadata=None) -> Dataset:
    examples = list(examples)
    if not examples:
        raise InputError("dataset is empty")
    X = np.vstack([np.atleast_1d(np.asarray(e.features, dtype=float)) for e in examples])
    labels = [e.label for e in examples]
    y = None if all(v is None for v in labels) else np.array(labels, dtype=float)
    return Dataset(X, y, metadata or {})


# ---------------------------------------------------------------------------
# sparse text format: "<label> <index>:<value> ..." with 1-based indices


def parse_sparse(text: str, d: int | None = None, source: str = "<string>") -> Dataset:
    """Parse svmlight-style text into a CSR dataset.

    ``#`` starts a comment.  A ``# dim: N`` comment line fixes the
    dimension (as written by :func:`serialize_sparse`); otherwise the
    dimension is the largest index seen, or ``d`` when given.
    """
    labels, indptr, indices, values = [], [0], [], []
    dim_hint = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        m = _DIM_HINT.match(raw.strip())
        if m:
            dim_hint = int(m.group(1))
            continue
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            label = float(tokens[0])
        except ValueError:
            raise ParseError(f"bad label {tokens[0]!r}", lineno) from None
        if not math.isfinite(label):
            raise ParseError("non-finite label", lineno)
        prev = 0
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise ParseError(f"expected index:value, got {tok!r}", lineno)
            try:
                idx, val = int(idx_s), float(val_s)
            except ValueError:
                raise ParseError(f"bad feature {tok!r}", lineno) from None
            if idx < 1:
                raise ParseError(f"indices are 1-based, got {idx}", lineno)
            if idx <= prev:
                raise ParseError(f"indices must be strictly increasing ({idx} after {prev})", lineno)
            if not math.isfinite(val):
                raise ParseError(f"non-finite value at index {idx}", lineno)
            indices.append(idx - 1)
            values.append(val)
            prev = idx
        labels.append(label)
        indptr.append(len(indices))
    if not labels:
        raise ParseError("no examples found")
    max_idx = max(indices) + 1 if indices else 0
    dim = d if d is not None else (dim_hint if dim_hint is not None else max_idx)
    if dim < max_idx:
        msg = f"dimension {dim} smaller than largest index {max_idx}"
        raise ConfigError(msg) if d is not None else ParseError(msg)
    X = sp.csr_matrix(
        (np.array(values, dtype=float), np.array(indices, dtype=np.int64), np.array(indptr)),
        shape=(len(labels), max(dim, 1)),
    )
    return Dataset(X, np.array(labels), {"source": source, "format": "svmlight"})


def _fmt(v: float) -> str:
    v = float(v)
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def serialize_sparse(data: Dataset) -> str:
    """Inverse of :func:`parse_sparse`; LF line endings, dimension hint first."""
    if data.y is None:
        raise InputError("sparse format needs labels")
    X = data.X if data.is_sparse else sp.csr_matrix(data.X)
    out = [f"# dim: {data.d}"]
    for i in range(data.n):
        lo, hi = X.indptr[i], X.indptr[i + 1]
        feats = " ".join(f"{j + 1}:{_fmt(v)}" for j, v in zip(X.indices[lo:hi], X.data[lo:hi]))
        out.append(f"{_fmt(data.y[i])} {feats}".rstrip())
    return "\n".join(out) + "\n"


def parse_csv(text: str, source: str = "<string>") -> Dataset:
    """Dense CSV with a header row.  A ``label`` column, if present, is the target."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ParseError("empty CSV") from None
    label_col = header.index("label") if "label" in header else None
    rows, labels = [], []
    for lineno, rec in enumerate(reader, start=2):
        if not rec or all(not c.strip() for c in rec):
            continue
        if len(rec) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(rec)}", lineno)
        try:
            vals = [float(c) for c in rec]
        except ValueError:
            raise ParseError("non-numeric field", lineno) from None
        if not all(math.isfinite(v) for v in vals):
            raise ParseError("non-finite field", lineno)
        if label_col is not None:
            labels.append(vals.pop(label_col))
        rows.append(vals)
    if not rows:
        raise ParseError("no examples found")
    names = [h for i, h in enumerate(header) if i != label_col]
    y = np.array(labels) if label_col is not None else None
    return Dataset(np.array(rows), y, {"source": source, "format": "csv", "columns": names})


def read_dataset(path: str, fmt: str = "svmlight", d: int | None = None) -> Dataset:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if fmt == "svmlight":
        return parse_sparse(text, d=d, source=path)
    if fmt == "csv":
        return parse_csv(text, source=path)
    raise ConfigError(f"unknown data format {fmt!r}")


# ---------------------------------------------------------------------------
# synthetic data


def gen_median_data(n: int, delta: float, seed: int, stream=()) -> Dataset:
    """Draws on {-1, 0, 1} with P(0) = delta and P(-1) = P(1) = (1 - delta) / 2."""
    if not 0.0 <= delta <= 1.0:
        raise ConfigError(f"delta must lie in [0, 1], got {delta}")
    if n < 1:
        raise ConfigError("n must be positive")
    u = make_rng(seed, *stream).random(n)
    half = delta + 0.5 * (1.0 - delta)
    x = np.where(u < delta, 0.0, np.where(u < half, -1.0, 1.0))
    return Dataset(x.reshape(-1, 1), None, {"generator": "median", "delta": delta, "seed": seed})


def gen_uniform_cube(n: int, d: int, B: float, seed: int, stream=()) -> Dataset:
    """Rows uniform on the vertices {-B, B}^d."""
    if B < 0:
        raise ConfigError(f"B must be nonnegative, got {B}")
    if n < 1 or d < 1:
        raise ConfigError("n and d must be positive")
    bits = make_rng(seed, *stream).integers(0, 2, size=(n, d))
    X = np.where(bits == 1, float(B), -float(B)) + 0.0
    return Dataset(X, None, {"generator": "uniform_cube", "B": B, "seed": seed})


def gen_linear_regression(n: int, theta_star, noise: float, seed: int, stream=()) -> Dataset:
    """Gaussian design, ``y = x^T theta_star + noise * N(0, 1)``."""
    theta_star = np.asarray(theta_star, dtype=float)
    rng = make_rng(seed, *stream)
    X = rng.standard_normal((n, theta_star.size))
    y = X @ theta_star + noise * rng.standard_normal(n)
    return Dataset(X, y, {"generator": "linear_regression", "seed": seed})


def gen_logistic_data(n: int, d: int, seed: int, stream=(), flip: float = 0.1) -> Dataset:
    """Gaussian features, labels from a random halfspace with label noise."""
    rng = make_rng(seed, *stream)
    X = rng.standard_normal((n, d))
    w = rng.standard_normal(d)
    y = np.where(X @ w >= 0, 1.0, -1.0)
    y = np.where(rng.random(n) < flip, -y, y)
    return Dataset(X, y, {"generator": "logistic", "seed": seed})


def split(n: int, fractions=None, k_folds: int | None = None, seed: int = 0) -> list[np.ndarray]:
    """Partition ``range(n)`` into disjoint, exhaustive, seeded index sets."""
    if (fractions is None) == (k_folds is None):
        raise ConfigError("give exactly one of fractions or k_folds")
    perm = make_rng(seed, 0x5B1).permutation(n)
    if k_folds is not None:
        if not 2 <= k_folds <= n:
            raise ConfigError(f"k_folds must be in [2, {n}], got {k_folds}")
        parts = np.array_split(perm, k_folds)
    else:
        fr = np.asarray(fractions, dtype=float)
        if fr.ndim != 1 or fr.size < 1 or np.any(fr < 0) or abs(fr.sum() - 1.0) > 1e-9:
            raise ConfigError(f"fractions must be nonnegative and sum to 1, got {fractions}")
        cuts = np.rint(np.cumsum(fr) * n).astype(int)
        cuts[-1] = n
        parts = np.split(perm, cuts[:-1])
    return [np.sort(p) for p in parts]
