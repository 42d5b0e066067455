"""Command-line front end: wires flag/config parsing to the library.

Every command writes its outputs into --out and finishes by writing
manifest.json listing them; the manifest is the atomic completion marker,
so exit code 0 means the manifest exists. All randomness flows from --seed.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from . import covariance as cov
from . import heavy_tail as ht
from .asymptotics import predict_tail, predictions_csv
from .berman import BermanTable, estimate_berman
from .errors import SchemaError, SojournMcError
from .experiments import (
    ExperimentConfig,
    compound_poisson_convergence_check,
    intermediate_horizon_ratio_check,
    run_comparison,
)

_CONFIG_SCHEMA_VERSION = 1
_CONFIG_REQUIRED = ("schema_version", "model", "horizon", "berman_table",
                    "u_grid", "x_grid", "replications", "seed")
_CONFIG_OPTIONAL = ("points_per_unit", "cap_quantile", "cap_m_multiple",
                    "cap_absolute")


def _parse_grid(text: str) -> list:
    vals = [float(tok) for tok in text.split(",") if tok.strip()]
    if not vals:
        raise SchemaError(f"empty grid specification: {text!r}")
    return vals


def parse_model_spec(spec) -> cov.CovarianceModel:
    """Covariance model from 'kind:key=val,...' or an equivalent dict."""
    if isinstance(spec, cov.CovarianceModel):
        return spec
    if isinstance(spec, str):
        kind, _, rest = spec.partition(":")
        params = {}
        for item in rest.split(","):
            if not item.strip():
                continue
            key, sep, val = item.partition("=")
            if not sep:
                raise SchemaError(f"bad model parameter {item!r} in {spec!r}")
            params[key.strip()] = val.strip()
    elif isinstance(spec, dict):
        params = dict(spec)
        kind = params.pop("kind", None)
        if kind is None:
            raise SchemaError("model dict needs a 'kind' entry")
    else:
        raise SchemaError(f"cannot parse model spec of type {type(spec).__name__}")
    kind = kind.strip()
    if kind == cov.FRAC_OU:
        known = {"alpha"}
        if set(params) - known:
            raise SchemaError(f"unknown frac_ou parameters: {set(params) - known}")
        return cov.frac_ou(float(params.get("alpha", 1.0)))
    if kind == cov.FBM_INCREMENT:
        known = {"alpha", "a"}
        if set(params) - known:
            raise SchemaError(
                f"unknown fbm_increment parameters: {set(params) - known}")
        return cov.fbm_increment(float(params.get("alpha", 1.0)),
                                 float(params.get("a", 1.0)))
    if kind == cov.TABULATED:
        known = {"path", "alpha"}
        if set(params) - known:
            raise SchemaError(f"unknown tabulated parameters: {set(params) - known}")
        if "path" not in params:
            raise SchemaError("tabulated model needs path=<csv>")
        return cov.load_tabulated_csv(params["path"], float(params.get("alpha", 1.0)))
    raise SchemaError(f"unknown covariance kind {kind!r}")


def _apply_thread_bound(threads: int | None) -> int:
    """Bound process parallelism by pinning to the first N allowed cores."""
    try:
        allowed = sorted(os.sched_getaffinity(0))
    except AttributeError:
        return threads or (os.cpu_count() or 1)
    if threads is None:
        return len(allowed)
    n = max(1, min(int(threads), len(allowed)))
    os.sched_setaffinity(0, set(allowed[:n]))
    return n


def _write_text(path: str, text: str):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _write_manifest(out_dir: str, command: str, seed, outputs: list,
                    started: float, warnings: list, config_path=None) -> str:
    manifest = {
        "schema_version": 1,
        "command": command,
        "config_path": config_path,
        "output_dir": out_dir,
        "seed": seed,
        "version": f"sojourn-mc {__version__}",
        "wall_clock_seconds": round(time.monotonic() - started, 3),
        "warnings": list(warnings),
        "outputs": sorted(outputs),
    }
    path = os.path.join(out_dir, "manifest.json")
    tmp = path + ".tmp"
    _write_text(tmp, json.dumps(manifest, indent=2) + "\n")
    os.replace(tmp, path)
    return path


def _dict_rows_csv(rows: list, columns: tuple) -> str:
    lines = [",".join(columns)]
    for row in rows:
        cells = []
        for c in columns:
            val = row[c]
            if isinstance(val, float):
                cells.append(repr(val))
            elif isinstance(val, (list, tuple)):
                cells.append(";".join(str(v) for v in val))
            else:
                cells.append(str(val))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def cmd_estimate_constant(args) -> int:
    started = time.monotonic()
    os.makedirs(args.out, exist_ok=True)
    x_grid = _parse_grid(args.x_grid)
    table = estimate_berman(args.alpha, x_grid, S=args.S, step=args.step,
                            R=args.R, seed=args.seed)
    table.write_json(os.path.join(args.out, "berman_table.json"))
    _write_manifest(args.out, "estimate-constant", args.seed,
                    ["berman_table.json"], started, [])
    return 0


def cmd_predict(args) -> int:
    started = time.monotonic()
    os.makedirs(args.out, exist_ok=True)
    model = parse_model_spec(args.model)
    horizon = ht.parse_horizon_spec(args.horizon)
    berman = BermanTable.read_json(args.berman_table)
    u_grid = _parse_grid(args.u_grid)
    x_grid = _parse_grid(args.x_grid)
    preds = [predict_tail(horizon.scenario, model, horizon, berman, u, x)
             for u in u_grid for x in x_grid]
    _write_text(os.path.join(args.out, "predictions.csv"),
                predictions_csv(preds))
    _write_manifest(args.out, "predict", None, ["predictions.csv"], started, [])
    return 0


def _load_compare_config(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise SchemaError("config must be a JSON object")
    unknown = set(raw) - set(_CONFIG_REQUIRED) - set(_CONFIG_OPTIONAL)
    if unknown:
        raise SchemaError(f"unknown config keys: {sorted(unknown)}")
    missing = set(_CONFIG_REQUIRED) - set(raw)
    if missing:
        raise SchemaError(f"missing config keys: {sorted(missing)}")
    if raw["schema_version"] != _CONFIG_SCHEMA_VERSION:
        raise SchemaError(
            f"config schema_version {raw['schema_version']!r} unsupported; "
            f"this tool reads version {_CONFIG_SCHEMA_VERSION}")
    return raw


def cmd_compare(args) -> int:
    started = time.monotonic()
    raw = _load_compare_config(args.config)
    os.makedirs(args.out, exist_ok=True)
    model = parse_model_spec(raw["model"])
    horizon = ht.parse_horizon_spec(raw["horizon"])
    berman = BermanTable.read_json(raw["berman_table"])
    kwargs = {k: raw[k] for k in _CONFIG_OPTIONAL if k in raw}
    cfg = ExperimentConfig(
        model=model, horizon=horizon, berman=berman,
        u_grid=np.asarray(raw["u_grid"], dtype=float),
        x_grid=np.asarray(raw["x_grid"], dtype=float),
        replications=int(raw["replications"]), seed=int(raw["seed"]), **kwargs)
    report = run_comparison(cfg)
    _write_text(os.path.join(args.out, "report.csv"), report.to_csv())
    _write_text(os.path.join(args.out, "report_diagnostics.json"),
                report.sidecar_json() + "\n")
    warnings = sorted({f for row in report.rows for f in row.flags})
    _write_manifest(args.out, "compare", int(raw["seed"]),
                    ["report.csv", "report_diagnostics.json"], started,
                    warnings, config_path=args.config)
    return 0


def cmd_cp_check(args) -> int:
    started = time.monotonic()
    os.makedirs(args.out, exist_ok=True)
    model = parse_model_spec(args.model)
    berman = BermanTable.read_json(args.berman_table)
    result = compound_poisson_convergence_check(
        model.alpha, berman, model, _parse_grid(args.u_grid),
        _parse_grid(args.l_grid), args.x, args.R, args.seed)
    _write_text(os.path.join(args.out, "cp_check.csv"),
                _dict_rows_csv(result["rows"],
                               ("u", "l", "horizon", "empirical", "se",
                                "target", "discrepancy")))
    _write_text(os.path.join(args.out, "cp_check_summary.json"),
                json.dumps(result, indent=2) + "\n")
    _write_manifest(args.out, "cp-check", args.seed,
                    ["cp_check.csv", "cp_check_summary.json"], started, [])
    return 0


def cmd_ratio_check(args) -> int:
    started = time.monotonic()
    os.makedirs(args.out, exist_ok=True)
    model = parse_model_spec(args.model)
    berman = BermanTable.read_json(args.berman_table)
    result = intermediate_horizon_ratio_check(
        model.alpha, berman, model, _parse_grid(args.u_grid), "sqrt(m/v)",
        args.x, args.R, args.seed)
    flags = sorted({f for row in result["rows"] for f in row["flags"]})
    _write_text(os.path.join(args.out, "ratio_check.csv"),
                _dict_rows_csv(result["rows"],
                               ("u", "A", "empirical", "se", "predicted",
                                "ratio")))
    _write_text(os.path.join(args.out, "ratio_check_summary.json"),
                json.dumps(result, indent=2) + "\n")
    _write_manifest(args.out, "ratio-check", args.seed,
                    ["ratio_check.csv", "ratio_check_summary.json"], started,
                    flags)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sojourn-mc",
        description="Monte Carlo laboratory for sojourn times of stationary "
                    "Gaussian processes over random horizons")
    parser.add_argument("--threads", type=int, default=None,
                        help="bound on worker parallelism (default: all "
                             "available cores)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate-constant",
                       help="estimate the limit constant table B(x)")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--S", type=float, default=50.0)
    p.add_argument("--step", type=float, default=None)
    p.add_argument("--R", type=int, default=10_000)
    p.add_argument("--x-grid", default="0")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_estimate_constant)

    p = sub.add_parser("predict", help="tabulate predicted tails")
    p.add_argument("--model", required=True)
    p.add_argument("--horizon", required=True)
    p.add_argument("--berman-table", required=True)
    p.add_argument("--u-grid", required=True)
    p.add_argument("--x-grid", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("compare",
                       help="run the empirical-vs-predicted comparison from a "
                            "JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("cp-check",
                       help="compound-Poisson convergence check on l*m(u) "
                            "horizons")
    p.add_argument("--model", required=True)
    p.add_argument("--berman-table", required=True)
    p.add_argument("--u-grid", required=True)
    p.add_argument("--l-grid", required=True)
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--R", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cp_check)

    p = sub.add_parser("ratio-check",
                       help="intermediate-horizon ratio check with the "
                            "canonical window rule")
    p.add_argument("--model", required=True)
    p.add_argument("--berman-table", required=True)
    p.add_argument("--u-grid", required=True)
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--R", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ratio_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _apply_thread_bound(args.threads)
    try:
        return args.func(args)
    except SojournMcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
