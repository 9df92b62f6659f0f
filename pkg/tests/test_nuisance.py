"""Model-spec plumbing, inner-CV selection, tie-breaking, degenerate fallbacks."""

from __future__ import annotations

import numpy as np
import pytest

from isoeffect import ValidationError
from isoeffect.nuisance import (
    ClipPolicy,
    Family,
    ModelSpec,
    _inner_cv_choose,
    cv_select,
    default_grid,
    fit_gbt,
    fit_outcome_model,
    fit_propensity_model,
)


def test_default_grids_frozen():
    assert default_grid(Family.ELASTIC_LOGISTIC) == {
        "C": (0.001, 0.01, 0.1, 1.0, 10.0, 100.0),
        "l1_ratio": (0.0, 0.1, 0.5, 0.7, 0.9, 0.95, 0.99, 1.0),
    }
    assert default_grid(Family.ELASTIC_LINEAR) == {
        "alpha": (1e-4, 1e-3, 1e-2, 1e-1, 1.0),
        "l1_ratio": (0.0, 0.1, 0.5, 0.7, 0.9, 0.95, 0.99, 1.0),
    }
    assert default_grid(Family.GBT_REG) == {
        "depth": (2, 3),
        "n_trees": (100, 300),
        "learning_rate": (0.05, 0.1),
    }
    assert default_grid(Family.GBT_CLF) == default_grid(Family.GBT_REG)
    with pytest.raises(ValueError):
        default_grid("mystery")


def test_model_spec_validation():
    with pytest.raises(ValueError, match="family"):
        ModelSpec("nope")
    with pytest.raises(ValueError, match="at least one value"):
        ModelSpec(Family.ELASTIC_LINEAR, {"alpha": []})
    with pytest.raises(ValueError, match="inner_folds"):
        ModelSpec(Family.ELASTIC_LINEAR, inner_folds=1)
    spec = ModelSpec(Family.ELASTIC_LINEAR, {"alpha": [0.1, 1.0], "l1_ratio": [0.0]})
    assert spec.candidates() == [
        {"alpha": 0.1, "l1_ratio": 0.0},
        {"alpha": 1.0, "l1_ratio": 0.0},
    ]


# ---------------------------------------------------------------------------
# selection and tie-breaking
# ---------------------------------------------------------------------------


def test_cv_select_prefers_lower_loss():
    cands = [{"alpha": 0.1}, {"alpha": 1.0}]
    assert cv_select(cands, [0.5, 0.9]) == {"alpha": 0.1}


def test_cv_select_ties_go_to_stronger_penalty():
    # equal scores: pick larger alpha / smaller C / smaller tree count
    assert cv_select([{"alpha": 0.1}, {"alpha": 1.0}], [0.5, 0.5]) == {"alpha": 1.0}
    assert cv_select([{"C": 0.1}, {"C": 10.0}], [0.5, 0.5]) == {"C": 0.1}
    assert cv_select(
        [
            {"n_trees": 300, "depth": 3, "learning_rate": 0.1},
            {"n_trees": 100, "depth": 2, "learning_rate": 0.05},
        ],
        [1.0, 1.0],
    ) == {"n_trees": 100, "depth": 2, "learning_rate": 0.05}


def test_cv_select_near_ties_count_as_ties():
    cands = [{"alpha": 0.01}, {"alpha": 1.0}]
    best = 0.73
    assert cv_select(cands, [best, best + 1e-10 * best]) == {"alpha": 1.0}
    # a clearly-better weak penalty still wins
    assert cv_select(cands, [best, best + 1e-3]) == {"alpha": 0.01}


def test_cv_select_validation():
    with pytest.raises(ValueError):
        cv_select([{"alpha": 1.0}], [0.1, 0.2])
    with pytest.raises(ValueError):
        cv_select([], [])


def test_single_candidate_skips_inner_cv():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((40, 3))
    y = X[:, 0] + 0.1 * rng.standard_normal(40)
    spec = ModelSpec(Family.ELASTIC_LINEAR, {"alpha": [0.01], "l1_ratio": [0.5]})
    chosen, diag = _inner_cv_choose(X, y, spec, classifier=False)
    assert chosen == {"alpha": 0.01, "l1_ratio": 0.5}
    assert diag == {"inner_cv": None}


def test_small_sample_falls_back_to_most_regularized():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((6, 2))
    y = rng.standard_normal(6)
    spec = ModelSpec(Family.ELASTIC_LINEAR, {"alpha": [0.01, 1.0], "l1_ratio": [0.5]},
                     inner_folds=5)
    chosen, diag = _inner_cv_choose(X, y, spec, classifier=False)
    assert chosen["alpha"] == 1.0
    assert diag == {"inner_cv": "skipped_small_n"}


def test_inner_cv_picks_informative_model():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((200, 3))
    y = 3.0 * X[:, 0] + 0.1 * rng.standard_normal(200)
    spec = ModelSpec(
        Family.ELASTIC_LINEAR, {"alpha": [1e-4, 100.0], "l1_ratio": [0.0]}, seed=0
    )
    chosen, diag = _inner_cv_choose(X, y, spec, classifier=False)
    assert chosen["alpha"] == 1e-4  # shrinking a strong signal to zero loses badly
    assert len(diag["inner_cv"]["scores"]) == 2


# ---------------------------------------------------------------------------
# clipping
# ---------------------------------------------------------------------------


def test_clip_policy_frozen():
    clip = ClipPolicy(0.01)
    p = np.array([0.0, 0.005, 0.5, 0.999, 1.0])
    np.testing.assert_allclose(clip.apply(p), [0.01, 0.01, 0.5, 0.99, 0.99])
    assert clip.clipped_fraction(p) == pytest.approx(0.8)
    assert clip.clipped_fraction(np.array([])) == 0.0


def test_clip_policy_validation():
    with pytest.raises(ValueError):
        ClipPolicy(0.5)
    with pytest.raises(ValueError):
        ClipPolicy(-0.01)
    ClipPolicy(0.0)  # no-op clipping is allowed


# ---------------------------------------------------------------------------
# outcome / propensity fitting
# ---------------------------------------------------------------------------


def test_constant_outcome_returns_intercept_only():
    X = np.random.default_rng(0).standard_normal((20, 2))
    with pytest.warns(UserWarning, match="constant outcome"):
        fm = fit_outcome_model(X, np.full(20, 2.5), ModelSpec(Family.ELASTIC_LINEAR))
    assert fm.constant == 2.5
    np.testing.assert_allclose(fm.predict(X), 2.5)


def test_zero_penalty_singular_design_falls_back():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((30, 2))
    X = np.column_stack([X, X[:, 0]])  # exact duplicate column
    y = X[:, 0] + 0.1 * rng.standard_normal(30)
    spec = ModelSpec(Family.ELASTIC_LINEAR, {"alpha": [0.0], "l1_ratio": [0.0]})
    with pytest.warns(UserWarning, match="singular design"):
        fm = fit_outcome_model(X, y, spec)
    assert fm.chosen["alpha"] > 0


def test_outcome_family_guard():
    X = np.zeros((4, 1))
    with pytest.raises(ValueError, match="outcome-regression"):
        fit_outcome_model(X, np.zeros(4), ModelSpec(Family.ELASTIC_LOGISTIC))
    with pytest.raises(ValidationError):
        fit_outcome_model(np.zeros((1, 1)), np.zeros(1), ModelSpec(Family.ELASTIC_LINEAR))


def test_propensity_single_class_raises():
    X = np.random.default_rng(2).standard_normal((10, 2))
    with pytest.raises(ValidationError, match="both treatment arms"):
        fit_propensity_model(X, np.ones(10), ModelSpec(Family.ELASTIC_LOGISTIC))
    with pytest.raises(ValidationError, match="0/1"):
        fit_propensity_model(X, np.full(10, 0.5), ModelSpec(Family.ELASTIC_LOGISTIC))
    with pytest.raises(ValueError, match="propensity family"):
        fit_propensity_model(X, np.ones(10), ModelSpec(Family.ELASTIC_LINEAR))


def test_propensity_predictions_respect_clip():
    X = np.linspace(-3, 3, 60).reshape(-1, 1)
    a = (X[:, 0] > 0).astype(float)  # separable: raw probabilities go extreme
    clip = ClipPolicy(0.05)
    fm = fit_propensity_model(
        X, a, ModelSpec(Family.ELASTIC_LOGISTIC, {"C": [100.0], "l1_ratio": [0.0]}),
        clip=clip,
    )
    p = fm.predict_proba(X)
    assert p.min() >= 0.05 and p.max() <= 0.95


def test_predict_guards():
    X = np.random.default_rng(3).standard_normal((30, 2))
    y = X[:, 0]
    a = (X[:, 1] > 0).astype(float)
    reg = fit_outcome_model(X, y, ModelSpec(Family.ELASTIC_LINEAR,
                                            {"alpha": [0.01], "l1_ratio": [0.0]}))
    clf = fit_propensity_model(X, a, ModelSpec(Family.ELASTIC_LOGISTIC,
                                               {"C": [1.0], "l1_ratio": [0.0]}))
    with pytest.raises(ValueError):
        reg.predict_proba(X)
    with pytest.raises(ValueError):
        clf.predict(X)


def test_fit_gbt_dispatch():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((60, 2))
    y = X[:, 0] + 0.1 * rng.standard_normal(60)
    a = (X[:, 1] + 0.3 * rng.standard_normal(60) > 0).astype(float)
    reg_spec = ModelSpec(Family.GBT_REG, {"depth": [2], "n_trees": [20], "learning_rate": [0.1]})
    clf_spec = ModelSpec(Family.GBT_CLF, {"depth": [2], "n_trees": [20], "learning_rate": [0.1]})
    reg = fit_gbt(X, y, reg_spec)
    clf = fit_gbt(X, a, clf_spec)
    assert reg.family == Family.GBT_REG and not reg.is_classifier
    assert clf.family == Family.GBT_CLF and clf.is_classifier
    assert np.isfinite(reg.predict(X)).all()
    assert np.isfinite(clf.predict_proba(X)).all()
    with pytest.raises(ValueError, match="boosting family"):
        fit_gbt(X, y, ModelSpec(Family.ELASTIC_LINEAR))


def test_gbt_outcome_model_deterministic_seeding():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((80, 3))
    y = X[:, 0] + 0.2 * rng.standard_normal(80)
    spec = ModelSpec(Family.GBT_REG, {"depth": [2], "n_trees": [30], "learning_rate": [0.1]},
                     seed=7)
    f1 = fit_outcome_model(X, y, spec)
    f2 = fit_outcome_model(X, y, spec)
    np.testing.assert_array_equal(f1.predict(X), f2.predict(X))
