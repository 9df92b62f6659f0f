"""Cross-fitted doubly robust estimation of isolated treatment effects.

The estimator combines an outcome-model plug-in term with an importance
weighted residual correction:

    tau_hat = (1/m) sum_j [g(1, e*_j) - g(0, e*_j)]
            + (1/n) sum_i gamma_i (y_i - g(a_i, e_i))

where e are the non-focal features, the target sample {e*_j} depends on the
estimand (everyone for IATE, the treated for IATT, an external corpus for
the general transported estimand), and gamma are transporting inverse
probability weights. Nuisances are cross-fitted: every row's predictions
come from models trained on the other folds.

Standard errors come from the influence-function variance with 1/n CLT
scaling; ``ci95`` is the usual two-sided normal interval.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (
    Dataset,
    Estimand,
    EstimandKind,
    FoldPlan,
    ValidationError,
    derive_seed,
    make_folds,
    max_threads,
)
from .nuisance import (
    ClipPolicy,
    Family,
    FittedModel,
    ModelSpec,
    fit_outcome_model,
    fit_propensity_model,
)

__all__ = [
    "NuisanceFits",
    "GeneralFits",
    "Weights",
    "EffectEstimate",
    "crossfit_nuisances",
    "weights_iate",
    "weights_iatt",
    "weights_general",
    "weights_for",
    "estimate_dr",
    "estimate_general",
    "estimate_naive",
    "variance_ci",
    "estimate_effect",
]

Z_95 = 1.96


def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.asarray(arr, dtype=np.float64).copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class GeneralFits:
    """Extra cross-fitted pieces for the transported (general) estimand."""

    target_assignment: np.ndarray
    target_ghat1: np.ndarray
    target_ghat0: np.ndarray
    target_p_hat: np.ndarray
    target_prob_t: np.ndarray
    source_prob_t: np.ndarray
    frac_t_by_fold: np.ndarray
    corpus_models: tuple[FittedModel, ...] = ()


@dataclass(frozen=True)
class NuisanceFits:
    """Out-of-fold nuisance predictions plus the per-fold fitted models."""

    fold_plan: FoldPlan
    ghat_obs: np.ndarray
    ghat1: np.ndarray
    ghat0: np.ndarray
    p_hat: np.ndarray
    pi1_by_fold: np.ndarray
    outcome_models: tuple[FittedModel, ...]
    propensity_models: tuple[FittedModel, ...]
    clip: ClipPolicy = ClipPolicy()
    general: GeneralFits | None = None
    diagnostics: dict = field(default_factory=dict)

    def pi1_rows(self) -> np.ndarray:
        """Per-row training-fold treated fraction."""
        return self.pi1_by_fold[self.fold_plan.assignment]


def _default_specs(outcome_spec, propensity_spec):
    if outcome_spec is None:
        outcome_spec = ModelSpec(family=Family.ELASTIC_LINEAR)
    if propensity_spec is None:
        propensity_spec = ModelSpec(family=Family.ELASTIC_LOGISTIC)
    return outcome_spec, propensity_spec


def crossfit_nuisances(
    dataset: Dataset,
    estimand: Estimand | None = None,
    outcome_spec: ModelSpec | None = None,
    propensity_spec: ModelSpec | None = None,
    k: int = 5,
    seed: int = 0,
    clip: ClipPolicy = ClipPolicy(),
    stratify: bool = True,
    fold_plan: FoldPlan | None = None,
    threads: int | None = None,
) -> NuisanceFits:
    """Cross-fit outcome and propensity models over k folds.

    The outcome model regresses y on [features, a] (treatment appended as
    the last column); the propensity classifier predicts a from features
    alone. All returned predictions are out-of-fold. ``fold_plan`` lets a
    caller pin the fold structure (the sensitivity calibration reuses the
    full-representation plan so paired quantities stay comparable).

    For the general estimand the target corpus is dealt into pseudo-folds
    and a source-vs-target corpus classifier is cross-fitted alongside.
    """
    estimand = estimand or Estimand(EstimandKind.IATE)
    outcome_spec, propensity_spec = _default_specs(outcome_spec, propensity_spec)
    dataset.require_both_arms()
    n = dataset.n
    if fold_plan is None:
        fold_plan = make_folds(n, k, a=dataset.a, seed=derive_seed(seed, "folds"),
                               stratify=stratify)
    elif fold_plan.n != n:
        raise ValidationError("fold plan does not match dataset size")
    k = fold_plan.k

    feats = dataset.features
    y = dataset.y
    a = dataset.a.astype(np.float64)
    design = np.column_stack([feats, a])

    general = estimand.kind == EstimandKind.GENERAL
    if general:
        tgt = np.asarray(estimand.target_features, dtype=np.float64)
        if tgt.shape[1] != feats.shape[1]:
            raise ValidationError(
                f"target corpus has {tgt.shape[1]} feature columns, source has {feats.shape[1]}"
            )
        m = tgt.shape[0]
        rng = np.random.default_rng(derive_seed(seed, "target-folds"))
        tgt_assign = np.empty(m, dtype=np.int64)
        perm = rng.permutation(m)
        tgt_assign[perm] = np.arange(m) % k

    ghat_obs = np.empty(n)
    ghat1 = np.empty(n)
    ghat0 = np.empty(n)
    p_raw = np.empty(n)
    pi1_by_fold = np.empty(k)
    outcome_models: list = [None] * k
    propensity_models: list = [None] * k
    if general:
        t_ghat1, t_ghat0, t_p_raw, t_q_raw = (np.empty(m) for _ in range(4))
        s_q_raw = np.empty(n)
        frac_t_by_fold = np.empty(k)
        corpus_models: list = [None] * k

    def run_fold(f: int) -> None:
        tr = fold_plan.train_rows(f)
        te = fold_plan.test_rows(f)
        om = fit_outcome_model(
            design[tr], y[tr], replace(outcome_spec, seed=derive_seed(seed, f"outcome-f{f}"))
        )
        pm = fit_propensity_model(
            feats[tr], a[tr],
            replace(propensity_spec, seed=derive_seed(seed, f"propensity-f{f}")),
            clip=clip,
        )
        outcome_models[f] = om
        propensity_models[f] = pm
        fe = feats[te]
        ghat_obs[te] = om.predict(np.column_stack([fe, a[te]]))
        ghat1[te] = om.predict(np.column_stack([fe, np.ones(len(te))]))
        ghat0[te] = om.predict(np.column_stack([fe, np.zeros(len(te))]))
        # keep the raw probabilities for clip diagnostics; clip once below
        raw_model = pm.model
        p_raw[te] = raw_model.predict_proba(fe)
        pi1_by_fold[f] = a[tr].mean()
        if general:
            t_tr = np.flatnonzero(tgt_assign != f)
            t_te = np.flatnonzero(tgt_assign == f)
            cx = np.vstack([feats[tr], tgt[t_tr]])
            cl = np.concatenate([np.zeros(len(tr)), np.ones(len(t_tr))])
            cm = fit_propensity_model(
                cx, cl, replace(propensity_spec, seed=derive_seed(seed, f"corpus-f{f}")),
                clip=clip,
            )
            corpus_models[f] = cm
            frac_t_by_fold[f] = len(t_tr) / (len(tr) + len(t_tr))
            s_q_raw[te] = cm.model.predict_proba(fe)
            te_feats = tgt[t_te]
            t_q_raw[t_te] = cm.model.predict_proba(te_feats)
            t_p_raw[t_te] = raw_model.predict_proba(te_feats)
            t_ghat1[t_te] = om.predict(np.column_stack([te_feats, np.ones(len(t_te))]))
            t_ghat0[t_te] = om.predict(np.column_stack([te_feats, np.zeros(len(t_te))]))

    workers = threads if threads is not None else max_threads()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run_fold, range(k)))
    else:
        for f in range(k):
            run_fold(f)

    p_hat = clip.apply(p_raw)
    diagnostics = {
        "clipped_frac": clip.clipped_fraction(p_raw),
        "p_min": float(p_hat.min()),
        "p_max": float(p_hat.max()),
        "pi1": float(a.mean()),
        "pi1_by_fold": tuple(float(v) for v in pi1_by_fold),
        "outcome_family": outcome_spec.family,
        "propensity_family": propensity_spec.family,
    }
    general_fits = None
    if general:
        general_fits = GeneralFits(
            target_assignment=tgt_assign,
            target_ghat1=_readonly(t_ghat1),
            target_ghat0=_readonly(t_ghat0),
            target_p_hat=_readonly(clip.apply(t_p_raw)),
            target_prob_t=_readonly(clip.apply(t_q_raw)),
            source_prob_t=_readonly(clip.apply(s_q_raw)),
            frac_t_by_fold=_readonly(frac_t_by_fold),
            corpus_models=tuple(corpus_models),
        )
        diagnostics["corpus_clipped_frac"] = clip.clipped_fraction(
            np.concatenate([s_q_raw, t_q_raw])
        )

    return NuisanceFits(
        fold_plan=fold_plan,
        ghat_obs=_readonly(ghat_obs),
        ghat1=_readonly(ghat1),
        ghat0=_readonly(ghat0),
        p_hat=_readonly(p_hat),
        pi1_by_fold=_readonly(pi1_by_fold),
        outcome_models=tuple(outcome_models),
        propensity_models=tuple(propensity_models),
        clip=clip,
        general=general_fits,
        diagnostics=diagnostics,
    )


# ---------------------------------------------------------------------------
# Transporting importance weights
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Weights:
    """Per-row weights gamma plus per-target-row gaps gamma(1,e*) - gamma(0,e*)."""

    kind: str
    gamma: np.ndarray
    target_gap: np.ndarray

    def __post_init__(self) -> None:
        gamma = np.asarray(self.gamma, dtype=np.float64)
        gap = np.asarray(self.target_gap, dtype=np.float64)
        if not np.all(np.isfinite(gamma)) or not np.all(np.isfinite(gap)):
            raise ValidationError("weights must be finite; check probability clipping")
        object.__setattr__(self, "gamma", _readonly(gamma))
        object.__setattr__(self, "target_gap", _readonly(gap))


def _check_probs(p: np.ndarray, what: str) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.size and (p.min() <= 0.0 or p.max() >= 1.0):
        raise ValidationError(f"{what} must lie strictly inside (0, 1); clip first")
    return p


def weights_iate(a: np.ndarray, p_hat: np.ndarray) -> Weights:
    """Inverse propensity weights targeting everyone.

    gamma_i = 1/p_i for treated rows and -1/(1-p_i) for control rows, so
    |gamma| >= 1 always. The target gap at e is 1/p + 1/(1-p).
    """
    a = np.asarray(a, dtype=np.float64)
    p = _check_probs(p_hat, "propensities")
    gamma = np.where(a == 1.0, 1.0 / p, -1.0 / (1.0 - p))
    gap = 1.0 / p + 1.0 / (1.0 - p)
    return Weights(kind=EstimandKind.IATE, gamma=gamma, target_gap=gap)


def weights_iatt(a: np.ndarray, p_hat: np.ndarray, pi1) -> Weights:
    """Weights targeting the treated: gamma(1) = 1/pi1, constant per fold.

    ``pi1`` may be a scalar or a per-row array of training-fold treated
    fractions. Control rows get -p/((1-p) pi1); the target gaps are taken
    over treated rows only.
    """
    a = np.asarray(a, dtype=np.float64)
    p = _check_probs(p_hat, "propensities")
    pi1 = np.broadcast_to(np.asarray(pi1, dtype=np.float64), a.shape)
    if pi1.min() <= 0.0 or pi1.max() >= 1.0:
        raise ValidationError("pi1 must lie strictly inside (0, 1)")
    gamma = np.where(a == 1.0, 1.0 / pi1, -p / ((1.0 - p) * pi1))
    treated = a == 1.0
    gap = 1.0 / pi1[treated] + p[treated] / ((1.0 - p[treated]) * pi1[treated])
    return Weights(kind=EstimandKind.IATT, gamma=gamma, target_gap=gap)


def weights_general(
    a: np.ndarray,
    p_hat: np.ndarray,
    corpus_prob_t: np.ndarray,
    frac_s,
    frac_t,
    target_p_hat: np.ndarray | None = None,
    target_prob_t: np.ndarray | None = None,
) -> Weights:
    """Weights transporting onto an arbitrary target corpus.

    gamma_i = (2 a_i - 1) * [frac_s/frac_t] * [q_i/(1-q_i)] / P(a=a_i | e_i)

    with q = P(corpus = target | e) from a source-vs-target classifier and
    frac_* the marginal corpus shares. With ``corpus_prob_t == frac_t`` this
    reduces exactly to :func:`weights_iate`. Target gaps are evaluated on
    the target rows when ``target_p_hat``/``target_prob_t`` are given,
    otherwise on the source rows (target = source).
    """
    a = np.asarray(a, dtype=np.float64)
    p = _check_probs(p_hat, "propensities")
    q = _check_probs(corpus_prob_t, "corpus probabilities")
    frac_s = np.broadcast_to(np.asarray(frac_s, dtype=np.float64), a.shape)
    frac_t = np.broadcast_to(np.asarray(frac_t, dtype=np.float64), a.shape)
    if frac_s.min() <= 0.0 or frac_t.min() <= 0.0:
        raise ValidationError("corpus fractions must be positive")
    ratio = (frac_s / frac_t) * (q / (1.0 - q))
    p_obs = np.where(a == 1.0, p, 1.0 - p)
    gamma = (2.0 * a - 1.0) * ratio / p_obs

    if target_p_hat is None:
        tp, tq = p, q
        t_ratio = frac_s / frac_t
    else:
        tp = _check_probs(target_p_hat, "target propensities")
        if target_prob_t is None:
            raise ValueError("target_prob_t is required alongside target_p_hat")
        tq = _check_probs(target_prob_t, "target corpus probabilities")
        t_ratio = float(np.mean(frac_s)) / float(np.mean(frac_t))
    gap = t_ratio * (tq / (1.0 - tq)) * (1.0 / tp + 1.0 / (1.0 - tp))
    return Weights(kind=EstimandKind.GENERAL, gamma=gamma, target_gap=gap)


def weights_for(fits: NuisanceFits, a: np.ndarray, kind: str) -> Weights:
    """Build the estimand's weights from cross-fitted nuisances."""
    if kind == EstimandKind.IATE:
        return weights_iate(a, fits.p_hat)
    if kind == EstimandKind.IATT:
        return weights_iatt(a, fits.p_hat, fits.pi1_rows())
    if kind == EstimandKind.GENERAL:
        g = fits.general
        if g is None:
            raise ValidationError("fits carry no general-estimand extras")
        frac_t = g.frac_t_by_fold[fits.fold_plan.assignment]
        t_frac_t = g.frac_t_by_fold[g.target_assignment]
        w = weights_general(
            a, fits.p_hat, g.source_prob_t, 1.0 - frac_t, frac_t,
        )
        t_gap = (
            (1.0 - t_frac_t) / t_frac_t
            * (g.target_prob_t / (1.0 - g.target_prob_t))
            * (1.0 / g.target_p_hat + 1.0 / (1.0 - g.target_p_hat))
        )
        return Weights(kind=EstimandKind.GENERAL, gamma=w.gamma, target_gap=t_gap)
    raise ValueError(f"unknown estimand kind {kind!r}")


# ---------------------------------------------------------------------------
# Point estimates, variance, confidence intervals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EffectEstimate:
    """A point estimate with influence-based uncertainty."""

    estimand: str
    tau_hat: float
    variance_hat: float
    standard_error: float
    ci95: tuple[float, float]
    n: int
    influence: np.ndarray = field(repr=False)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "influence", _readonly(self.influence))


def variance_ci(influence: np.ndarray, tau_hat: float, n: int) -> tuple[float, float, tuple[float, float]]:
    """Variance, standard error, and 95% CI from influence values.

    variance_hat is the mean squared *centered* influence; the standard
    error applies the 1/n CLT scaling; the interval is tau_hat +- 1.96 se.
    """
    if n < 2:
        raise ValueError("variance needs at least 2 observations")
    influence = np.asarray(influence, dtype=np.float64)
    centered = influence - influence.mean()
    variance = float(np.mean(centered * centered))
    se = float(np.sqrt(variance / n))
    return variance, se, (tau_hat - Z_95 * se, tau_hat + Z_95 * se)


def estimate_dr(
    fits: NuisanceFits,
    weights: Weights,
    dataset: Dataset,
    target_index: np.ndarray | None = None,
) -> EffectEstimate:
    """Doubly robust estimate for a target sample drawn from the dataset.

    ``target_index`` defaults to every row for IATE and the treated rows
    for IATT. The influence function matches the estimand: for IATT the
    plug-in contrast enters through the treated indicator scaled by the
    fold's treated fraction.
    """
    y, a = dataset.y, dataset.a.astype(np.float64)
    n = dataset.n
    kind = weights.kind
    if target_index is None:
        if kind == EstimandKind.IATE:
            target_index = np.arange(n)
        elif kind == EstimandKind.IATT:
            target_index = np.flatnonzero(a == 1.0)
        else:
            raise ValueError("general estimates go through estimate_general")
    target_index = np.asarray(target_index, dtype=np.int64)
    if target_index.size == 0:
        raise ValidationError("target sample is empty")

    contrast = fits.ghat1 - fits.ghat0
    resid = y - fits.ghat_obs
    correction = weights.gamma * resid
    plug_in = float(contrast[target_index].mean())
    tau = plug_in + float(correction.mean())

    if kind == EstimandKind.IATE:
        psi = contrast + correction
    elif kind == EstimandKind.IATT:
        pi1 = fits.pi1_rows()
        psi = (a / pi1) * contrast + correction
    else:
        raise ValueError("general estimates go through estimate_general")

    influence = psi - psi.mean()
    variance, se, ci = variance_ci(influence, tau, n)
    diagnostics = dict(fits.diagnostics)
    diagnostics["m_target"] = int(target_index.size)
    return EffectEstimate(
        estimand=kind,
        tau_hat=tau,
        variance_hat=variance,
        standard_error=se,
        ci95=ci,
        n=n,
        influence=influence,
        diagnostics=diagnostics,
    )


def estimate_general(
    fits: NuisanceFits, weights: Weights, dataset: Dataset
) -> EffectEstimate:
    """Transported estimate over an external target corpus.

    The influence function stacks the n source rows and m target rows: the
    target rows carry the plug-in contrast scaled by (n+m)/m, the source
    rows carry the weighted correction scaled by (n+m)/n, and the variance
    uses the combined sample size.
    """
    g = fits.general
    if g is None or weights.kind != EstimandKind.GENERAL:
        raise ValidationError("general estimation requires general fits and weights")
    y = dataset.y
    n = dataset.n
    m = g.target_ghat1.shape[0]
    contrast_t = g.target_ghat1 - g.target_ghat0
    correction = weights.gamma * (y - fits.ghat_obs)
    tau = float(contrast_t.mean()) + float(correction.mean())

    total = n + m
    psi = np.concatenate([
        correction * (total / n),
        contrast_t * (total / m),
    ])
    influence = psi - psi.mean()
    variance, se, ci = variance_ci(influence, tau, total)
    diagnostics = dict(fits.diagnostics)
    diagnostics.update({"m_target": m, "n_source": n})
    return EffectEstimate(
        estimand=EstimandKind.GENERAL,
        tau_hat=tau,
        variance_hat=variance,
        standard_error=se,
        ci95=ci,
        n=total,
        influence=influence,
        diagnostics=diagnostics,
    )


def estimate_naive(dataset: Dataset) -> EffectEstimate:
    """Unadjusted contrast mean((2a - 1) y), with its sampling variance.

    Deliberately the raw signed mean rather than a difference of arm
    means: this is the no-adjustment reference the robust estimate is
    compared against.
    """
    dataset.require_both_arms()
    y, a = dataset.y, dataset.a.astype(np.float64)
    summand = (2.0 * a - 1.0) * y
    tau = float(summand.mean())
    influence = summand - tau
    variance, se, ci = variance_ci(influence, tau, dataset.n)
    return EffectEstimate(
        estimand="naive",
        tau_hat=tau,
        variance_hat=variance,
        standard_error=se,
        ci95=ci,
        n=dataset.n,
        influence=influence,
        diagnostics={"pi1": float(a.mean())},
    )


def estimate_effect(
    dataset: Dataset,
    kind: str = EstimandKind.IATE,
    outcome_spec: ModelSpec | None = None,
    propensity_spec: ModelSpec | None = None,
    k: int = 5,
    seed: int = 0,
    clip: ClipPolicy = ClipPolicy(),
    stratify: bool = True,
    target_features: np.ndarray | None = None,
    threads: int | None = None,
    return_parts: bool = False,
):
    """One-shot pipeline: cross-fit nuisances, build weights, estimate.

    Returns the :class:`EffectEstimate`, or ``(estimate, fits, weights)``
    when ``return_parts`` is set (the sensitivity audit consumes the parts).
    """
    estimand = Estimand(kind, target_features if kind == EstimandKind.GENERAL else None)
    fits = crossfit_nuisances(
        dataset, estimand, outcome_spec, propensity_spec,
        k=k, seed=seed, clip=clip, stratify=stratify, threads=threads,
    )
    weights = weights_for(fits, dataset.a, kind)
    if kind == EstimandKind.GENERAL:
        est = estimate_general(fits, weights, dataset)
    else:
        est = estimate_dr(fits, weights, dataset)
    return (est, fits, weights) if return_parts else est
