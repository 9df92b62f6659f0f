"""Command-line frontend.

Subcommands:

- ``synth``     generate a benchmark dataset plus its ground-truth oracle
- ``estimate``  doubly robust effect estimate with a sensitivity summary
- ``sweep``     re-estimate across nested representation dimensions
- ``contour``   bias lower bounds over a (C_Y, C_D) grid, with calibration points
- ``calibrate`` (C_Y, C_D) per omitted feature or masked pattern

All artifacts are written atomically (temp file + rename) with fixed numeric
formatting (12 significant digits), so identical configs and seeds yield
byte-identical outputs. ``ISOEFFECT_THREADS`` caps fold-level worker
threads.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import tempfile
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .core import (
    Dataset,
    EstimandKind,
    SchemaError,
    ValidationError,
    load_csv,
    write_csv,
)
from .estimator import estimate_effect, estimate_naive
from .featurize import featurize_texts, load_lexicon, mask_terms
from .nuisance import ClipPolicy, Family, ModelSpec
from .sensitivity import audit, calibrate_detail, contour_grid
from .synth import generate, oracle_tau, spec_from_json_file

__all__ = ["RunConfig", "run", "main"]


@dataclass(frozen=True)
class RunConfig:
    """One parsed invocation: the subcommand plus its options."""

    command: str
    options: dict


# ---------------------------------------------------------------------------
# deterministic formatting and atomic writes
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    if x is None:
        return "nan"
    return format(float(x), ".12g")


def _round12(obj):
    """Round floats to 12 significant digits for stable JSON artifacts."""
    if isinstance(obj, bool) or obj is None:
        return obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(_fmt(obj))
    if isinstance(obj, dict):
        return {k: _round12(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round12(v) for v in obj]
    return obj


def _write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".isoeffect-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path: str, payload: dict) -> None:
    _write_atomic(path, json.dumps(_round12(payload), indent=2) + "\n")


def _write_rows(path: str, header: Sequence[str], rows: Sequence[Sequence[str]]) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(row) for row in rows)
    _write_atomic(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# shared option plumbing
# ---------------------------------------------------------------------------


def _load_schema(path: str | None) -> dict | None:
    if path is None:
        return None
    with open(path, encoding="utf-8") as fh:
        schema = json.load(fh)
    if not isinstance(schema, dict):
        raise SchemaError("schema JSON must be an object")
    return schema


def _model_specs(model: str) -> tuple[ModelSpec, ModelSpec]:
    if model == "elastic":
        return ModelSpec(Family.ELASTIC_LINEAR), ModelSpec(Family.ELASTIC_LOGISTIC)
    if model == "gbt":
        return ModelSpec(Family.GBT_REG), ModelSpec(Family.GBT_CLF)
    raise ValueError(f"unknown model {model!r}")


def _parse_dims(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition("..")
    if not sep:
        raise ValueError(f"--dims expects 'a..b', got {text!r}")
    lo_i, hi_i = int(lo), int(hi)
    if lo_i < 1 or hi_i < lo_i:
        raise ValueError(f"--dims range {text!r} is empty or negative")
    return lo_i, hi_i


def _load_feature_matrix(path: str, schema: dict | None) -> np.ndarray:
    """Features-only loader for target corpora (no outcome/treatment needed)."""
    merged = {"feature_prefix": "x_"}
    if schema:
        merged.update(schema)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if merged.get("feature_columns"):
            try:
                idx = [header.index(str(c)) for c in merged["feature_columns"]]
            except ValueError as exc:
                raise SchemaError(f"{path}: {exc}") from None
        else:
            prefix = str(merged.get("feature_prefix", "x_"))
            idx = [i for i, name in enumerate(header) if name.startswith(prefix)]
        if not idx:
            raise SchemaError(f"{path}: no feature columns matched")
        rows = []
        for row_no, row in enumerate(reader, start=1):
            try:
                rows.append([float(row[i]) for i in idx])
            except (ValueError, IndexError):
                raise ValidationError(f"{path}: bad feature row {row_no}") from None
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    return np.asarray(rows, dtype=np.float64)


def _reductions(dataset: Dataset, options: dict) -> list[tuple[str, np.ndarray]]:
    """Labeled reduced representations from --omit-features / --mask-patterns."""
    out: list[tuple[str, np.ndarray]] = []
    omit = options.get("omit_features")
    if omit:
        names = list(dataset.feature_names)
        for group in omit.split(","):
            group = group.strip()
            if not group:
                continue
            members = [g.strip() for g in group.split("+")]
            missing = [m for m in members if m not in names]
            if missing:
                raise ValidationError(f"cannot omit unknown feature(s) {missing}")
            keep = [i for i, nm in enumerate(names) if nm not in members]
            out.append((group, dataset.features[:, keep]))
    patterns = options.get("mask_patterns")
    if patterns:
        if dataset.texts is None:
            raise ValidationError("--mask-patterns requires a text column in the data")
        if not options.get("lexicon"):
            raise ValidationError("--mask-patterns requires --lexicon to refeaturize")
        lexicon = load_lexicon(options["lexicon"])
        for pat in patterns.split(","):
            pat = pat.strip()
            if not pat:
                continue
            masked = mask_terms(dataset.texts, [pat])
            out.append((pat, featurize_texts(masked, lexicon, mode="binary")))
    return out


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_synth(opt: dict) -> int:
    spec = spec_from_json_file(opt["spec"])
    if opt.get("seed") is not None:
        spec = replace(spec, seed=int(opt["seed"]))
    os.makedirs(opt["out"], exist_ok=True)
    dataset = generate(spec)
    oracle = oracle_tau(spec)
    write_csv(dataset, os.path.join(opt["out"], "data.csv"))
    _write_json(
        os.path.join(opt["out"], "oracle.json"),
        {
            "tau_iate": oracle.tau_iate,
            "tau_iatt": oracle.tau_iatt,
            "method": oracle.method,
            "mc_samples": oracle.mc_samples,
            "mc_se": oracle.mc_se,
        },
    )
    return 0


def _estimate_with_audit(dataset: Dataset, opt: dict):
    outcome_spec, propensity_spec = _model_specs(opt.get("model", "elastic"))
    kind = opt.get("estimand", EstimandKind.IATE)
    target = None
    if kind == EstimandKind.GENERAL:
        if not opt.get("target_data"):
            raise ValidationError("--estimand general requires --target-data")
        target = _load_feature_matrix(opt["target_data"], _load_schema(opt.get("schema")))
    est, fits, weights = estimate_effect(
        dataset,
        kind=kind,
        outcome_spec=outcome_spec,
        propensity_spec=propensity_spec,
        k=int(opt.get("folds", 5)),
        seed=int(opt.get("seed", 0)),
        clip=ClipPolicy(float(opt.get("clip_eps", 0.01))),
        target_features=target,
        return_parts=True,
    )
    report = audit(est, dataset, fits, weights)
    return est, fits, weights, report


def _report_payload(dataset: Dataset, opt: dict, est, report) -> dict:
    naive = estimate_naive(dataset)
    diag = {
        "p_min": est.diagnostics.get("p_min"),
        "p_max": est.diagnostics.get("p_max"),
        "clipped_frac": est.diagnostics.get("clipped_frac"),
        "pi1": est.diagnostics.get("pi1"),
        "m_target": est.diagnostics.get("m_target"),
    }
    return {
        "estimand": est.estimand,
        "tau_hat": est.tau_hat,
        "se": est.standard_error,
        "ci95": [est.ci95[0], est.ci95[1]],
        "n": dataset.n,
        "k": int(opt.get("folds", 5)),
        "seed": int(opt.get("seed", 0)),
        "naive_tau": naive.tau_hat,
        "sigma2": report.sigma2,
        "nu2": report.nu2,
        "nu2_plugin": report.nu2_plugin,
        "nu2_negative": report.nu2_negative,
        "rv": report.rv,
        "diagnostics": diag,
    }


def _cmd_estimate(opt: dict) -> int:
    dataset = load_csv(opt["data"], _load_schema(opt.get("schema")))
    est, _, _, report = _estimate_with_audit(dataset, opt)
    _write_json(opt["out"], _report_payload(dataset, opt, est, report))
    return 0


def _cmd_sweep(opt: dict) -> int:
    if opt.get("estimand") == EstimandKind.GENERAL:
        raise ValidationError("sweep supports the iate and iatt estimands")
    dataset = load_csv(opt["data"], _load_schema(opt.get("schema")))
    focal = opt["focal"]
    names = list(dataset.feature_names)
    if focal not in names:
        raise ValidationError(f"--focal {focal!r} is not a feature column")
    fj = names.index(focal)
    a = dataset.features[:, fj]
    if not np.all(np.isin(a, (0.0, 1.0))) or a.min() == a.max():
        raise ValidationError(f"focal column {focal!r} must be binary with both arms")
    rest = [i for i in range(len(names)) if i != fj]
    matrix = dataset.features[:, rest]
    lo, hi = _parse_dims(opt.get("dims", f"1..{len(rest)}"))
    if hi > len(rest):
        raise ValueError(f"--dims upper bound {hi} exceeds {len(rest)} non-focal columns")

    rows = []
    for dims in range(lo, hi + 1):
        sub = Dataset(
            y=dataset.y, a=a, features=matrix[:, :dims],
            feature_names=tuple(names[i] for i in rest[:dims]),
        )
        est, fits, weights, report = _estimate_with_audit(sub, {**opt, "estimand": opt.get("estimand", EstimandKind.IATE)})
        rows.append([
            str(dims), _fmt(est.tau_hat), _fmt(est.ci95[0]), _fmt(est.ci95[1]),
            _fmt(report.sigma2), _fmt(report.nu2), _fmt(report.rv),
        ])
    _write_rows(opt["out"], ["dims", "tau_hat", "ci_lo", "ci_hi", "sigma2", "nu2", "rv"], rows)
    return 0


def _cmd_contour(opt: dict) -> int:
    dataset = load_csv(opt["data"], _load_schema(opt.get("schema")))
    est, fits, weights, report = _estimate_with_audit(dataset, opt)
    if report.nu2 <= 0:
        print(
            f"error: nu2 = {report.nu2:.6g} <= 0; bias bounds are undefined for this fit",
            file=sys.stderr,
        )
        return 1
    points = []
    for label, reduced in _reductions(dataset, opt):
        cal = calibrate_detail(
            dataset, fits, reduced,
            kind=opt.get("estimand", EstimandKind.IATE),
            outcome_spec=_model_specs(opt.get("model", "elastic"))[0],
            propensity_spec=_model_specs(opt.get("model", "elastic"))[1],
            seed=int(opt.get("seed", 0)),
        )
        points.append((label, cal.params.c_y, cal.params.c_d))
    grid = contour_grid(
        est.tau_hat, report.sigma2, report.nu2,
        cy_max=float(opt.get("cy_max", 1.0)),
        cd_max=float(opt.get("cd_max", 1.0)),
        steps=int(opt.get("steps", 21)),
        calibration_points=tuple(points),
    )
    rows = []
    for i, cy in enumerate(grid.cy_axis):
        for j, cd in enumerate(grid.cd_axis):
            rows.append([_fmt(cy), _fmt(cd), _fmt(grid.lower_bound[i, j])])
    scale = float(np.sqrt(report.sigma2 * report.nu2))
    for label, cy, cd in grid.calibration_points:
        rows.append([_fmt(cy), _fmt(cd), _fmt(est.tau_hat - scale * cy * cd), label])
    _write_rows(opt["out"], ["cy", "cd", "lower_bound"], rows)
    return 0


def _cmd_calibrate(opt: dict) -> int:
    dataset = load_csv(opt["data"], _load_schema(opt.get("schema")))
    reductions = _reductions(dataset, opt)
    if not reductions:
        raise ValidationError("calibrate needs --omit-features and/or --mask-patterns")
    est, fits, weights, report = _estimate_with_audit(dataset, opt)
    payload: dict = {
        "estimand": est.estimand,
        "tau_hat": est.tau_hat,
        "sigma2": report.sigma2,
        "nu2": report.nu2,
        "calibrations": {},
    }
    outcome_spec, propensity_spec = _model_specs(opt.get("model", "elastic"))
    for label, reduced in reductions:
        cal = calibrate_detail(
            dataset, fits, reduced,
            kind=opt.get("estimand", EstimandKind.IATE),
            outcome_spec=outcome_spec,
            propensity_spec=propensity_spec,
            seed=int(opt.get("seed", 0)),
        )
        payload["calibrations"][label] = {
            "c_y": cal.params.c_y,
            "c_d": cal.params.c_d,
            "cd_clamped": cal.params.cd_clamped,
            "tau_hat_reduced": cal.reduced_estimate.tau_hat,
            "sigma2_reduced": cal.reduced_sigma2,
            "nu2_reduced": cal.reduced_nu2,
            "bound_halfwidth": cal.bound_halfwidth,
        }
    _write_json(opt["out"], payload)
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "estimate": _cmd_estimate,
    "sweep": _cmd_sweep,
    "contour": _cmd_contour,
    "calibrate": _cmd_calibrate,
}


def run(config: RunConfig) -> int:
    """Execute one parsed invocation; returns a process exit code."""
    handler = _COMMANDS.get(config.command)
    if handler is None:
        raise ValueError(f"unknown subcommand {config.command!r}")
    return handler(config.options)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, estimand: bool = True) -> None:
    p.add_argument("--schema", help="schema JSON (outcome/treatment/feature columns)")
    p.add_argument("--model", choices=("elastic", "gbt"), default="elastic")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--clip-eps", dest="clip_eps", type=float, default=0.01)
    if estimand:
        p.add_argument("--estimand", choices=EstimandKind.ALL, default=EstimandKind.IATE)
        p.add_argument("--target-data", dest="target_data",
                       help="target corpus CSV (general estimand)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isoeffect",
        description="Isolated effects of binary text interventions: estimation and sensitivity audits.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic benchmark with its oracle")
    p.add_argument("--spec", required=True, help="SynthSpec JSON recipe")
    p.add_argument("--out", required=True, help="output directory (data.csv, oracle.json)")
    p.add_argument("--seed", type=int, default=None, help="override the spec's seed")

    p = sub.add_parser("estimate", help="doubly robust estimate with sensitivity summary")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="report JSON path")
    _add_common(p)

    p = sub.add_parser("sweep", help="estimate across nested representation dimensions")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="sweep CSV path")
    p.add_argument("--focal", required=True, help="feature column used as the intervention")
    p.add_argument("--dims", default=None, help="inclusive range a..b of kept non-focal columns")
    _add_common(p)

    p = sub.add_parser("contour", help="bias lower bounds over a (C_Y, C_D) grid")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="contour CSV path")
    p.add_argument("--cy-max", dest="cy_max", type=float, default=1.0)
    p.add_argument("--cd-max", dest="cd_max", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=21)
    p.add_argument("--omit-features", dest="omit_features",
                   help="comma-separated features (join groups with '+') for labeled points")
    p.add_argument("--mask-patterns", dest="mask_patterns",
                   help="comma-separated token patterns to mask for labeled points")
    p.add_argument("--lexicon", help="lexicon JSON (needed with --mask-patterns)")
    _add_common(p)

    p = sub.add_parser("calibrate", help="(C_Y, C_D) per omitted feature / masked pattern")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="calibration JSON path")
    p.add_argument("--omit-features", dest="omit_features")
    p.add_argument("--mask-patterns", dest="mask_patterns")
    p.add_argument("--lexicon")
    _add_common(p)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    options = {k: v for k, v in vars(args).items() if k != "command" and v is not None}
    config = RunConfig(command=args.command, options=options)
    try:
        return run(config)
    except (SchemaError, ValidationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
