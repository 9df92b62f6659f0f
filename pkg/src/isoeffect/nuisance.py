"""Nuisance model fitting: outcome regressions and propensity classifiers.

Two model families per task: elastic-net (linear or logistic) and
gradient-boosted trees. Hyperparameters are chosen by inner k-fold
cross-validation on the training split; ties are broken toward the stronger
regularization (elastic net) or the smaller model (boosting), so the
selected model never gets more complex than it has to be.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .boosting import GBTModel, fit_gbt_core
from .core import ValidationError, derive_seed, make_folds
from .elasticnet import LinearFit, LogisticFit, fit_enet_linear, fit_enet_logistic

__all__ = [
    "Family",
    "ModelSpec",
    "ClipPolicy",
    "FittedModel",
    "default_grid",
    "cv_select",
    "fit_outcome_model",
    "fit_propensity_model",
    "fit_gbt",
]


class Family:
    """Model family names."""

    ELASTIC_LINEAR = "elastic_linear"
    ELASTIC_LOGISTIC = "elastic_logistic"
    GBT_REG = "gbt_reg"
    GBT_CLF = "gbt_clf"

    ALL = (ELASTIC_LINEAR, ELASTIC_LOGISTIC, GBT_REG, GBT_CLF)
    REGRESSORS = (ELASTIC_LINEAR, GBT_REG)
    CLASSIFIERS = (ELASTIC_LOGISTIC, GBT_CLF)


_L1_GRID = (0.0, 0.1, 0.5, 0.7, 0.9, 0.95, 0.99, 1.0)


def default_grid(family: str) -> dict[str, tuple]:
    """Default hyperparameter grid per family."""
    if family == Family.ELASTIC_LINEAR:
        return {"alpha": (1e-4, 1e-3, 1e-2, 1e-1, 1.0), "l1_ratio": _L1_GRID}
    if family == Family.ELASTIC_LOGISTIC:
        return {"C": (0.001, 0.01, 0.1, 1.0, 10.0, 100.0), "l1_ratio": _L1_GRID}
    if family in (Family.GBT_REG, Family.GBT_CLF):
        return {"depth": (2, 3), "n_trees": (100, 300), "learning_rate": (0.05, 0.1)}
    raise ValueError(f"unknown model family {family!r}")


@dataclass(frozen=True)
class ModelSpec:
    """What to fit and over which hyperparameter grid.

    ``hyper_grid=None`` selects :func:`default_grid`. A single-candidate grid
    skips inner cross-validation entirely.
    """

    family: str
    hyper_grid: Mapping[str, Sequence] | None = None
    inner_folds: int = 5
    seed: int = 0
    subsample: float = 0.7  # boosting row subsample; ignored by elastic nets

    def __post_init__(self) -> None:
        if self.family not in Family.ALL:
            raise ValueError(f"unknown model family {self.family!r}")
        grid = dict(self.hyper_grid) if self.hyper_grid is not None else default_grid(self.family)
        if not grid or any(len(tuple(v)) == 0 for v in grid.values()):
            raise ValueError("hyper_grid must have at least one value per key")
        object.__setattr__(self, "hyper_grid", {k: tuple(v) for k, v in grid.items()})
        if self.inner_folds < 2:
            raise ValueError("inner_folds must be >= 2")

    def candidates(self) -> list[dict]:
        keys = list(self.hyper_grid)
        return [dict(zip(keys, combo)) for combo in itertools.product(*self.hyper_grid.values())]


@dataclass(frozen=True)
class ClipPolicy:
    """Symmetric probability clipping to [epsilon, 1 - epsilon]."""

    epsilon: float = 0.01

    def __post_init__(self) -> None:
        if not 0.0 <= self.epsilon < 0.5:
            raise ValueError(f"epsilon must be in [0, 0.5), got {self.epsilon}")

    def apply(self, p: np.ndarray) -> np.ndarray:
        return np.clip(p, self.epsilon, 1.0 - self.epsilon)

    def clipped_fraction(self, p: np.ndarray) -> float:
        if len(p) == 0:
            return 0.0
        outside = (p < self.epsilon) | (p > 1.0 - self.epsilon)
        return float(outside.mean())


@dataclass(frozen=True)
class FittedModel:
    """A trained nuisance model with its chosen hyperparameters.

    Predictions are pure functions of the input features. Classifier
    probabilities are clipped per the attached :class:`ClipPolicy`.
    """

    family: str
    model: LinearFit | LogisticFit | GBTModel | None
    chosen: dict
    clip: ClipPolicy | None = None
    constant: float | None = None  # degenerate constant-target fallback
    diagnostics: dict = field(default_factory=dict)

    @property
    def is_classifier(self) -> bool:
        return self.family in Family.CLASSIFIERS

    def predict(self, X: np.ndarray) -> np.ndarray:
        if self.is_classifier:
            raise ValueError("use predict_proba for classifiers")
        if self.constant is not None:
            return np.full(np.asarray(X).shape[0], self.constant)
        return self.model.predict(X)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if not self.is_classifier:
            raise ValueError("predict_proba is only defined for classifiers")
        if self.constant is not None:
            p = np.full(np.asarray(X).shape[0], self.constant)
        else:
            p = self.model.predict_proba(X)
        return self.clip.apply(p) if self.clip is not None else p


def _reg_strength(candidate: Mapping) -> tuple:
    """Sort key: larger means more regularized / smaller model."""
    if "alpha" in candidate:
        return (float(candidate["alpha"]), float(candidate.get("l1_ratio", 0.0)))
    if "C" in candidate:
        return (-float(candidate["C"]), float(candidate.get("l1_ratio", 0.0)))
    if "n_trees" in candidate:
        return (
            -float(candidate["n_trees"]),
            -float(candidate.get("depth", 0)),
            -float(candidate.get("learning_rate", 0.0)),
        )
    return ()


def cv_select(candidates: Sequence[Mapping], scores: Sequence[float]) -> dict:
    """Pick the lowest-loss candidate, ties going to the strongest penalty.

    Scores are mean inner-CV losses (lower is better). Candidates whose
    score is within a hair of the minimum count as tied, and the tie breaks
    toward the larger penalty / smaller model.
    """
    if len(candidates) != len(scores) or not candidates:
        raise ValueError("need one score per candidate")
    if len(candidates) == 1:
        return dict(candidates[0])
    scores = np.asarray(scores, dtype=np.float64)
    best = float(np.min(scores))
    tol = 1e-12 + 1e-9 * abs(best)
    tied = [dict(c) for c, s in zip(candidates, scores) if s <= best + tol]
    return max(tied, key=_reg_strength)


def _fit_one(family: str, X, target, cand: Mapping, subsample: float, seed: int):
    if family == Family.ELASTIC_LINEAR:
        return fit_enet_linear(X, target, alpha=cand["alpha"], l1_ratio=cand["l1_ratio"])
    if family == Family.ELASTIC_LOGISTIC:
        return fit_enet_logistic(X, target, C=cand["C"], l1_ratio=cand["l1_ratio"])
    return fit_gbt_core(
        X,
        target,
        classification=(family == Family.GBT_CLF),
        depth=int(cand["depth"]),
        n_trees=int(cand["n_trees"]),
        learning_rate=float(cand["learning_rate"]),
        subsample=subsample,
        seed=seed,
    )


def _loss(family: str, model, X, target) -> float:
    if family in Family.CLASSIFIERS:
        p = np.clip(model.predict_proba(X), 1e-12, 1.0 - 1e-12)
        return float(-(target * np.log(p) + (1.0 - target) * np.log(1.0 - p)).mean())
    resid = target - model.predict(X)
    return float(np.mean(resid * resid))


def _inner_cv_choose(X, target, spec: ModelSpec, classifier: bool) -> tuple[dict, dict]:
    cands = spec.candidates()
    if len(cands) == 1:
        return dict(cands[0]), {"inner_cv": None}
    n = X.shape[0]
    if n < 2 * spec.inner_folds:
        # too little data to split meaningfully; fall back to the most
        # regularized candidate rather than guessing from noise
        choice = max(cands, key=_reg_strength)
        return dict(choice), {"inner_cv": "skipped_small_n"}
    strat = target if classifier else None
    plan = make_folds(n, spec.inner_folds, a=strat, seed=derive_seed(spec.seed, "inner-cv"))
    scores = []
    for ci, cand in enumerate(cands):
        fold_losses = []
        for f in range(plan.k):
            tr, te = plan.train_rows(f), plan.test_rows(f)
            model = _fit_one(
                spec.family, X[tr], target[tr], cand, spec.subsample,
                derive_seed(spec.seed, f"inner-{ci}-{f}"),
            )
            fold_losses.append(_loss(spec.family, model, X[te], target[te]))
        scores.append(float(np.mean(fold_losses)))
    choice = cv_select(cands, scores)
    return choice, {"inner_cv": {"scores": tuple(scores), "chosen": dict(choice)}}


def _design_is_singular(X: np.ndarray) -> bool:
    Z = X - X.mean(axis=0)
    live = Z.std(axis=0) > 0
    if live.sum() < X.shape[1]:
        return True
    return np.linalg.matrix_rank(Z) < X.shape[1]


def fit_outcome_model(X: np.ndarray, y: np.ndarray, spec: ModelSpec) -> FittedModel:
    """Fit the outcome regression ``g(features) ~ y``.

    Constant targets short-circuit to an intercept-only model with a
    warning. A zero-penalty elastic net on a singular design falls back to
    the smallest nonzero penalty in the grid (the least-squares solution
    would not be unique).
    """
    if spec.family not in Family.REGRESSORS:
        raise ValueError(f"{spec.family!r} is not an outcome-regression family")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if X.shape[0] != y.shape[0] or X.shape[0] < 2:
        raise ValidationError("outcome fitting needs >= 2 aligned rows")

    if np.ptp(y) == 0.0:
        warnings.warn("constant outcome target; returning an intercept-only model")
        return FittedModel(
            family=spec.family, model=None, chosen={}, constant=float(y[0]),
            diagnostics={"warning": "constant_target"},
        )

    chosen, diag = _inner_cv_choose(X, y, spec, classifier=False)
    if spec.family == Family.ELASTIC_LINEAR and chosen.get("alpha", 1.0) == 0.0:
        if _design_is_singular(X):
            nonzero = sorted(a for a in spec.hyper_grid.get("alpha", ()) if a > 0)
            fallback = nonzero[0] if nonzero else 1e-6
            warnings.warn(
                f"singular design with zero penalty; refitting with alpha={fallback}"
            )
            chosen = dict(chosen, alpha=fallback)
            diag = dict(diag, singular_fallback=fallback)
    model = _fit_one(spec.family, X, y, chosen, spec.subsample, derive_seed(spec.seed, "final"))
    return FittedModel(family=spec.family, model=model, chosen=chosen, diagnostics=diag)


def fit_propensity_model(
    X: np.ndarray, a: np.ndarray, spec: ModelSpec, clip: ClipPolicy = ClipPolicy()
) -> FittedModel:
    """Fit the propensity classifier ``P(a = 1 | features)``.

    Raises when only one class is present: a propensity on a single arm is
    never usable downstream, so this fails loudly instead of degenerating.
    """
    if spec.family not in Family.CLASSIFIERS:
        raise ValueError(f"{spec.family!r} is not a propensity family")
    X = np.asarray(X, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    if not np.all(np.isin(a, (0.0, 1.0))):
        raise ValidationError("treatment labels must be 0/1")
    if a.min() == a.max():
        raise ValidationError("propensity fitting requires both treatment arms")

    chosen, diag = _inner_cv_choose(X, a, spec, classifier=True)
    model = _fit_one(spec.family, X, a, chosen, spec.subsample, derive_seed(spec.seed, "final"))
    return FittedModel(family=spec.family, model=model, chosen=chosen, clip=clip, diagnostics=diag)


def fit_gbt(X: np.ndarray, target: np.ndarray, spec: ModelSpec) -> FittedModel:
    """Fit a boosted-tree model directly (no inner CV grid restriction)."""
    if spec.family not in (Family.GBT_REG, Family.GBT_CLF):
        raise ValueError("fit_gbt expects a boosting family spec")
    if spec.family == Family.GBT_CLF:
        return fit_propensity_model(X, target, spec)
    return fit_outcome_model(X, target, spec)
