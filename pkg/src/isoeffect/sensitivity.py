"""Omitted-variable-bias sensitivity audit for the doubly robust estimate.

Two estimable quantities anchor the audit:

- fidelity  sigma2 = mean((y_i - g(a_i, e_i))^2), the out-of-fold outcome
  residual second moment: how much outcome variation the representation
  leaves unexplained;
- overlap   nu2 = (2/m) sum_j [gamma(1,e*_j) - gamma(0,e*_j)]
                 - (1/n) sum_i gamma_i^2, a debiased second moment of the
  weights: how extreme the implied importance weights are.

If a richer representation would change the outcome model by a relative
factor C_Y and the weights by C_D, the induced bias is bounded by
sqrt(sigma2 * nu2) * C_Y * C_D. The robustness value is the common
C_Y = C_D magnitude that could just explain the whole estimate away.
The debiased nu2 can go negative in samples with weak overlap signal; it
is flagged and never clamped, and the derived quantities are withheld.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .core import Dataset, Estimand, EstimandKind, ValidationError
from .estimator import (
    EffectEstimate,
    NuisanceFits,
    Weights,
    crossfit_nuisances,
    estimate_dr,
    weights_for,
)
from .nuisance import ClipPolicy, ModelSpec

__all__ = [
    "SensitivityParams",
    "SensitivityReport",
    "ContourGrid",
    "CalibrationResult",
    "sigma2_hat",
    "nu2_hat",
    "nu2_plugin",
    "robustness_value",
    "ovb_bounds",
    "contour_grid",
    "calibrate_cy_cd",
    "calibrate_detail",
    "audit",
]


class DegenerateModelError(ValidationError):
    """The audit inputs are degenerate (e.g. zero residual variance)."""


@dataclass(frozen=True)
class SensitivityParams:
    """Calibration strengths: outcome-side C_Y and weight-side C_D."""

    c_y: float
    c_d: float
    cd_clamped: bool = False

    def __post_init__(self) -> None:
        if self.c_y < 0 or self.c_d < 0:
            raise ValueError("calibration strengths must be non-negative")


@dataclass(frozen=True)
class SensitivityReport:
    """Audit summary attached to one effect estimate."""

    sigma2: float
    nu2: float
    nu2_plugin: float
    nu2_negative: bool
    rv: float | None
    bounds: tuple = ()
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ContourGrid:
    """Lower bound of the effect over a (C_Y, C_D) grid."""

    cy_axis: np.ndarray
    cd_axis: np.ndarray
    lower_bound: np.ndarray
    calibration_points: tuple = ()


def sigma2_hat(y: np.ndarray, ghat_obs: np.ndarray) -> float:
    """Mean squared out-of-fold outcome residual."""
    y = np.asarray(y, dtype=np.float64)
    ghat = np.asarray(ghat_obs, dtype=np.float64)
    if y.shape != ghat.shape or y.size == 0:
        raise ValueError("y and ghat_obs must be aligned and non-empty")
    r = y - ghat
    return float(np.mean(r * r))


def nu2_hat(weights: Weights) -> float:
    """Debiased weight second moment: 2 * mean(target gaps) - mean(gamma^2).

    Can be negative in finite samples; callers must flag, not clamp.
    """
    return 2.0 * float(weights.target_gap.mean()) - float(np.mean(weights.gamma**2))


def nu2_plugin(weights: Weights) -> float:
    """Plug-in alternative: mean(gamma^2). Reported alongside the debiased form."""
    return float(np.mean(weights.gamma**2))


def robustness_value(tau_hat: float, sigma2: float, nu2: float) -> float | None:
    """|tau| / sqrt(sigma2 * nu2); None when nu2 <= 0 (undefined overlap).

    This is the joint calibration strength C_Y = C_D at which the bias
    bound first crosses the point estimate.
    """
    if sigma2 <= 0:
        raise DegenerateModelError(f"sigma2 must be positive, got {sigma2}")
    if nu2 <= 0:
        return None
    return abs(tau_hat) / float(np.sqrt(sigma2 * nu2))


def ovb_bounds(tau_hat: float, sigma2: float, nu2: float, params: SensitivityParams) -> tuple[float, float]:
    """Bias interval tau_hat -+ sqrt(sigma2 nu2) * C_Y * C_D."""
    if sigma2 <= 0:
        raise DegenerateModelError(f"sigma2 must be positive, got {sigma2}")
    if nu2 <= 0:
        raise ValidationError(f"nu2 = {nu2} <= 0: bias bound undefined (overlap degenerate)")
    half = float(np.sqrt(sigma2 * nu2)) * params.c_y * params.c_d
    return (tau_hat - half, tau_hat + half)


def contour_grid(
    tau_hat: float,
    sigma2: float,
    nu2: float,
    cy_max: float,
    cd_max: float,
    steps: int,
    calibration_points: tuple = (),
) -> ContourGrid:
    """Lower bounds over the axis-aligned grid [0, cy_max] x [0, cd_max].

    Cell (0, 0) is exactly ``tau_hat``; the bound is non-increasing in both
    axes. ``calibration_points`` are (label, c_y, c_d) triples carried
    through for plotting and reporting.
    """
    if steps < 2:
        raise ValueError("steps must be >= 2")
    if cy_max <= 0 or cd_max <= 0:
        raise ValueError("grid maxima must be positive")
    if sigma2 <= 0:
        raise DegenerateModelError(f"sigma2 must be positive, got {sigma2}")
    if nu2 <= 0:
        raise ValidationError(f"nu2 = {nu2} <= 0: contour undefined")
    cy = np.linspace(0.0, cy_max, steps)
    cd = np.linspace(0.0, cd_max, steps)
    scale = float(np.sqrt(sigma2 * nu2))
    lower = tau_hat - scale * np.outer(cy, cd)
    return ContourGrid(
        cy_axis=cy, cd_axis=cd, lower_bound=lower,
        calibration_points=tuple(calibration_points),
    )


# ---------------------------------------------------------------------------
# Calibration against a deliberately weakened representation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CalibrationResult:
    """Calibration strengths plus the reduced-representation audit pieces."""

    params: SensitivityParams
    reduced_estimate: EffectEstimate
    reduced_sigma2: float
    reduced_nu2: float
    bound_halfwidth: float


def calibrate_detail(
    dataset: Dataset,
    full_fits: NuisanceFits,
    reduced_features: np.ndarray,
    kind: str = EstimandKind.IATE,
    outcome_spec: ModelSpec | None = None,
    propensity_spec: ModelSpec | None = None,
    seed: int = 0,
    clip: ClipPolicy | None = None,
) -> CalibrationResult:
    """Refit on a weakened representation and measure how much moved.

    The reduced run reuses the full run's fold plan and seed derivation so
    the out-of-fold quantities are paired row by row. C_Y compares outcome
    predictions relative to the reduced residual scale; C_D compares weight
    second moments. Omitting nothing (reduced == full) yields exactly
    (0, 0).
    """
    if kind == EstimandKind.GENERAL:
        raise ValueError("calibration supports the iate and iatt estimands")
    reduced = Dataset(y=dataset.y, a=dataset.a, features=np.asarray(reduced_features, dtype=np.float64))
    clip = clip if clip is not None else full_fits.clip
    red_fits = crossfit_nuisances(
        reduced,
        Estimand(kind),
        outcome_spec,
        propensity_spec,
        seed=seed,
        clip=clip,
        fold_plan=full_fits.fold_plan,
    )
    a = dataset.a
    w_full = weights_for(full_fits, a, kind)
    w_red = weights_for(red_fits, a, kind)

    resid_red = dataset.y - red_fits.ghat_obs
    denom_y = float(np.mean(resid_red * resid_red))
    if denom_y <= 0:
        raise DegenerateModelError("reduced model has zero residual variance")
    diff = full_fits.ghat_obs - red_fits.ghat_obs
    c_y = float(np.sqrt(np.mean(diff * diff) / denom_y))

    m_full = float(np.mean(w_full.gamma**2))
    m_red = float(np.mean(w_red.gamma**2))
    numer = m_full - m_red
    clamped = numer < 0
    if clamped:
        warnings.warn(
            "weight second moment decreased on the reduced representation; clamping C_D to 0"
        )
        numer = 0.0
    c_d = float(np.sqrt(numer / m_red))

    params = SensitivityParams(c_y=c_y, c_d=c_d, cd_clamped=clamped)
    red_est = estimate_dr(red_fits, w_red, reduced)
    red_sigma2 = sigma2_hat(dataset.y, red_fits.ghat_obs)
    red_nu2 = nu2_hat(w_red)
    half = float(np.sqrt(max(red_sigma2 * red_nu2, 0.0))) * c_y * c_d
    return CalibrationResult(
        params=params,
        reduced_estimate=red_est,
        reduced_sigma2=red_sigma2,
        reduced_nu2=red_nu2,
        bound_halfwidth=half,
    )


def calibrate_cy_cd(
    dataset: Dataset,
    full_fits: NuisanceFits,
    reduced_features: np.ndarray,
    kind: str = EstimandKind.IATE,
    outcome_spec: ModelSpec | None = None,
    propensity_spec: ModelSpec | None = None,
    seed: int = 0,
    clip: ClipPolicy | None = None,
) -> SensitivityParams:
    """(C_Y, C_D) implied by dropping information from the representation."""
    return calibrate_detail(
        dataset, full_fits, reduced_features, kind,
        outcome_spec, propensity_spec, seed=seed, clip=clip,
    ).params


def audit(
    estimate: EffectEstimate,
    dataset: Dataset,
    fits: NuisanceFits,
    weights: Weights,
    bounds_at: tuple[SensitivityParams, ...] = (),
) -> SensitivityReport:
    """Assemble the sensitivity summary for one estimate.

    When nu2 comes out non-positive the robustness value and any requested
    bounds are withheld (None / empty) rather than silently clamped.
    """
    s2 = sigma2_hat(dataset.y, fits.ghat_obs)
    n2 = nu2_hat(weights)
    n2p = nu2_plugin(weights)
    negative = n2 <= 0
    rv = None if negative else robustness_value(estimate.tau_hat, s2, n2)
    bounds = ()
    if not negative:
        bounds = tuple((p, ovb_bounds(estimate.tau_hat, s2, n2, p)) for p in bounds_at)
    return SensitivityReport(
        sigma2=s2,
        nu2=n2,
        nu2_plugin=n2p,
        nu2_negative=negative,
        rv=rv,
        bounds=bounds,
        diagnostics={"estimand": estimate.estimand, "n": estimate.n},
    )
