"""Data model, CSV ingestion, fold planning, and seed derivation.

Everything downstream (featurization, nuisance fitting, estimation) consumes
the :class:`Dataset` container defined here. Datasets are immutable: arrays
are copied on construction and marked read-only so that cross-fitting and
sensitivity re-runs can never mutate shared state.
"""

from __future__ import annotations

import csv
import hashlib
import math
import os
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "SchemaError",
    "ValidationError",
    "Dataset",
    "FoldPlan",
    "EstimandKind",
    "Estimand",
    "load_csv",
    "write_csv",
    "make_folds",
    "derive_seed",
    "max_threads",
]


class SchemaError(Exception):
    """An input file does not match the expected column schema."""


class ValidationError(Exception):
    """Data values violate a documented invariant."""


def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Dataset:
    """Immutable (outcome, treatment, feature) triple with optional raw texts.

    Parameters
    ----------
    y : array of shape (n,)
        Real-valued outcomes. Must be finite.
    a : array of shape (n,)
        Binary treatment indicators, exactly 0 or 1.
    features : array of shape (n, d)
        Dense real feature matrix (the non-focal representation). ``d`` may
        be zero for text-only datasets that have not been featurized yet.
    feature_names : sequence of str, optional
        Column names; defaults to ``x_0 .. x_{d-1}``.
    texts : sequence of str, optional
        Raw documents aligned with the rows, if available.
    """

    y: np.ndarray
    a: np.ndarray
    features: np.ndarray
    feature_names: tuple[str, ...] = ()
    texts: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        a = np.asarray(self.a)
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim == 1:
            feats = feats.reshape(-1, 1)
        if feats.ndim != 2:
            raise ValidationError("features must be a 2-d matrix")
        n = y.shape[0]
        if n < 1:
            raise ValidationError("dataset must contain at least one row")
        if a.shape[0] != n or feats.shape[0] != n:
            raise ValidationError(
                f"length mismatch: y has {n} rows, a has {a.shape[0]}, "
                f"features has {feats.shape[0]}"
            )
        a_float = np.asarray(a, dtype=np.float64)
        if not np.all(np.isin(a_float, (0.0, 1.0))):
            bad = int(np.flatnonzero(~np.isin(a_float, (0.0, 1.0)))[0])
            raise ValidationError(f"treatment must be 0/1; offending row {bad + 1}")
        if not np.all(np.isfinite(y)):
            bad = int(np.flatnonzero(~np.isfinite(y))[0])
            raise ValidationError(f"non-finite outcome at row {bad + 1}")
        if feats.size and not np.all(np.isfinite(feats)):
            bad = int(np.flatnonzero(~np.isfinite(feats).all(axis=1))[0])
            raise ValidationError(f"non-finite feature value at row {bad + 1}")
        names = tuple(self.feature_names) or tuple(f"x_{j}" for j in range(feats.shape[1]))
        if len(names) != feats.shape[1]:
            raise ValidationError(
                f"{len(names)} feature names for {feats.shape[1]} columns"
            )
        texts = self.texts
        if texts is not None:
            texts = tuple(texts)
            if len(texts) != n:
                raise ValidationError("texts must align with rows")
        object.__setattr__(self, "y", _readonly(y))
        object.__setattr__(self, "a", _readonly(a_float.astype(np.int64)))
        object.__setattr__(self, "features", _readonly(feats))
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "texts", texts)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def n_treated(self) -> int:
        return int(self.a.sum())

    def require_both_arms(self) -> None:
        """Raise unless both treatment arms are present (estimation entry points)."""
        n1 = self.n_treated()
        if n1 == 0 or n1 == self.n:
            raise ValidationError("estimation requires both treatment arms to be non-empty")


@dataclass(frozen=True)
class FoldPlan:
    """Deterministic assignment of rows to k cross-fitting folds."""

    n: int
    k: int
    assignment: np.ndarray
    seed: int
    stratified: bool = True
    downgraded: bool = False

    def __post_init__(self) -> None:
        assignment = np.asarray(self.assignment, dtype=np.int64)
        if assignment.shape != (self.n,):
            raise ValidationError("fold assignment must have one entry per row")
        if assignment.min() < 0 or assignment.max() >= self.k:
            raise ValidationError("fold labels must lie in [0, k)")
        counts = np.bincount(assignment, minlength=self.k)
        if (counts == 0).any():
            raise ValidationError("every fold must be non-empty")
        object.__setattr__(self, "assignment", _readonly(assignment))

    def train_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)

    def test_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)


class EstimandKind:
    """Names for the supported estimands."""

    IATE = "iate"
    IATT = "iatt"
    GENERAL = "general"

    ALL = (IATE, IATT, GENERAL)


@dataclass(frozen=True)
class Estimand:
    """Which average effect to target.

    ``general`` transports the estimate onto an external target corpus and
    therefore carries that corpus' feature matrix.
    """

    kind: str = EstimandKind.IATE
    target_features: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.kind not in EstimandKind.ALL:
            raise ValueError(f"unknown estimand kind {self.kind!r}")
        tf = self.target_features
        if self.kind == EstimandKind.GENERAL:
            if tf is None:
                raise ValidationError("general estimand requires a target feature matrix")
            tf = np.asarray(tf, dtype=np.float64)
            if tf.ndim != 2 or tf.shape[0] == 0:
                raise ValidationError("target feature matrix must be non-empty and 2-d")
            object.__setattr__(self, "target_features", _readonly(tf))
        elif tf is not None:
            raise ValueError("target_features is only meaningful for the general estimand")


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

_DEFAULT_SCHEMA: dict = {"outcome": "y", "treatment": "a", "feature_prefix": "x_"}


def _resolve_columns(header: list[str], schema: Mapping) -> tuple[int, int, list[int], int | None]:
    def col(name: str, what: str) -> int:
        try:
            return header.index(name)
        except ValueError:
            raise SchemaError(f"{what} column {name!r} not found in header {header}") from None

    y_idx = col(str(schema["outcome"]), "outcome")
    a_idx = col(str(schema["treatment"]), "treatment")
    text_idx = None
    if schema.get("text"):
        text_idx = col(str(schema["text"]), "text")

    if schema.get("feature_columns"):
        feat_idx = [col(str(c), "feature") for c in schema["feature_columns"]]
    else:
        prefix = str(schema.get("feature_prefix", "x_"))
        feat_idx = [i for i, name in enumerate(header) if name.startswith(prefix)]
    if not feat_idx and text_idx is None:
        raise SchemaError("schema must yield feature columns or a text column")
    return y_idx, a_idx, feat_idx, text_idx


def load_csv(path: str | os.PathLike, schema: Mapping | None = None) -> Dataset:
    """Load a UTF-8 CSV with header into a :class:`Dataset`.

    ``schema`` carries keys ``outcome``, ``treatment``, and either
    ``feature_prefix`` (default ``"x_"``) or an explicit ``feature_columns``
    list, plus an optional ``text`` column name. Row indices in error
    messages are 1-based data rows (the header is row 0).
    """
    merged = dict(_DEFAULT_SCHEMA)
    if schema:
        merged.update(schema)

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected a header row") from None
        y_idx, a_idx, feat_idx, text_idx = _resolve_columns(header, merged)

        ys: list[float] = []
        as_: list[float] = []
        feats: list[list[float]] = []
        texts: list[str] = []
        width = len(header)
        for row_no, row in enumerate(reader, start=1):
            if len(row) != width:
                raise ValidationError(
                    f"row {row_no}: expected {width} fields, found {len(row)}"
                )

            def fnum(idx: int, what: str) -> float:
                try:
                    v = float(row[idx])
                except ValueError:
                    raise ValidationError(
                        f"row {row_no}: cannot parse {what} value {row[idx]!r}"
                    ) from None
                if not math.isfinite(v):
                    raise ValidationError(f"row {row_no}: non-finite {what} value")
                return v

            ys.append(fnum(y_idx, "outcome"))
            a_val = fnum(a_idx, "treatment")
            if a_val not in (0.0, 1.0):
                raise ValidationError(f"row {row_no}: treatment must be 0 or 1, got {row[a_idx]!r}")
            as_.append(a_val)
            feats.append([fnum(j, f"feature {header[j]!r}") for j in feat_idx])
            if text_idx is not None:
                texts.append(row[text_idx])

    if not ys:
        raise ValidationError(f"{path}: no data rows")
    return Dataset(
        y=np.array(ys),
        a=np.array(as_),
        features=np.array(feats, dtype=np.float64).reshape(len(ys), len(feat_idx)),
        feature_names=tuple(header[j] for j in feat_idx),
        texts=tuple(texts) if text_idx is not None else None,
    )


def write_csv(dataset: Dataset, path: str | os.PathLike) -> None:
    """Write ``y,a,<features...>`` with lossless float formatting.

    Floats are rendered with Python's shortest round-trip repr so that
    ``load_csv(write_csv(ds))`` reproduces the arrays bit-exactly.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["y", "a", *dataset.feature_names]
        if dataset.texts is not None:
            header.append("text")
        writer.writerow(header)
        for i in range(dataset.n):
            row = [repr(float(dataset.y[i])), str(int(dataset.a[i]))]
            row.extend(repr(float(v)) for v in dataset.features[i])
            if dataset.texts is not None:
                row.append(dataset.texts[i])
            writer.writerow(row)


# ---------------------------------------------------------------------------
# Fold planning
# ---------------------------------------------------------------------------


def make_folds(
    n: int,
    k: int,
    a: np.ndarray | None = None,
    seed: int = 0,
    stratify: bool = True,
) -> FoldPlan:
    """Build a deterministic k-fold plan, stratified by treatment when possible.

    Stratification deals each arm round-robin over a seeded shuffle, which
    keeps every fold's treated fraction within +-(1/fold size) of the global
    fraction. If one arm has fewer than ``k`` rows the plan silently cannot
    stratify; it downgrades to a plain shuffled split and sets the
    ``downgraded`` flag (also emitting a warning). Passing ``a=None`` yields
    an unstratified plan for generic regression cross-validation.
    """
    if k < 2:
        raise ValueError(f"need at least 2 folds, got k={k}")
    if k > n:
        raise ValueError(f"cannot split {n} rows into {k} folds")
    rng = np.random.default_rng(seed)
    assignment = np.empty(n, dtype=np.int64)
    stratified = False
    downgraded = False

    if a is not None:
        a = np.asarray(a)
        counts = [int((a == 0).sum()), int((a == 1).sum())]
        if min(counts) == 0:
            raise ValidationError("fold stratification requires both treatment arms")
        if stratify and min(counts) >= k:
            for arm in (0, 1):
                idx = rng.permutation(np.flatnonzero(a == arm))
                assignment[idx] = np.arange(idx.size) % k
            stratified = True
        elif stratify:
            downgraded = True
            warnings.warn(
                f"an arm has fewer than k={k} rows; falling back to an unstratified split",
                stacklevel=2,
            )

    if not stratified:
        idx = rng.permutation(n)
        assignment[idx] = np.arange(n) % k

    return FoldPlan(n=n, k=k, assignment=assignment, seed=seed,
                    stratified=stratified, downgraded=downgraded)


def derive_seed(seed: int, label: str) -> int:
    """Stable 32-bit child seed for a named module, derived from the run seed."""
    digest = hashlib.sha256(f"{seed}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big")


def max_threads() -> int:
    """Worker-thread cap from ``ISOEFFECT_THREADS`` (default 1)."""
    raw = os.environ.get("ISOEFFECT_THREADS", "").strip()
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        warnings.warn(f"ignoring non-integer ISOEFFECT_THREADS={raw!r}")
        return 1
    return max(1, value)
