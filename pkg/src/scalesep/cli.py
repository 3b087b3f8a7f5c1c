"""Command-line interface: tabulate, decompose, aggregate, fit, simulate, report."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import io as sio
from .decompose import DecompositionConfig, decompose_batch
from .design import build_design, fit_affine_map
from .exposure import ExposureField, WindowKind, aggregate_cohort
from .mixedmodel import ExposureMode, ModelSpec, contrast_test, run_model
from .simulate import SimConfig, read_config, run_scenario, subjects_frame, write_config
from .wavelets import build_basis, cascade, daubechies_filter, mother_wavelet


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "handler"):
        parser.print_help()
        return 2
    return args.handler(args)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scalesep",
        description="Scale separation of spatial surfaces and downstream health models",
    )
    sub = parser.add_subparsers(dest="command")

    basis = sub.add_parser("basis", help="wavelet basis utilities")
    basis_sub = basis.add_subparsers(dest="basis_command")
    tab = basis_sub.add_parser("tabulate", help="emit scaling/wavelet tabulations as CSV")
    tab.add_argument("--order", type=int, default=5, help="Daubechies order (1..10)")
    tab.add_argument("--depth", type=int, default=14, help="dyadic tabulation depth")
    tab.add_argument("--out", required=True, help="output CSV path (columns x, phi, psi)")
    tab.set_defaults(handler=cmd_basis_tabulate)

    dec = sub.add_parser("decompose", help="decompose daily surfaces from a CSV")
    dec.add_argument("--input", required=True, help="long CSV with date,x1,x2,value")
    dec.add_argument("--levels", type=int, default=7)
    dec.add_argument("--cutoff", type=int, default=3, help="highest LOW wavelet level")
    dec.add_argument("--order", type=int, default=5)
    dec.add_argument("--depth", type=int, default=14)
    dec.add_argument("--folds", type=int, default=10)
    dec.add_argument("--n-lambdas", type=int, default=100)
    dec.add_argument("--lambda-min-ratio", type=float, default=1e-3)
    dec.add_argument(
        "--fixed-lambda-fraction",
        type=float,
        default=None,
        help="skip CV and use this fraction of each day's lambda_max",
    )
    dec.add_argument("--seed", type=int, default=0)
    dec.add_argument("--workers", type=int, default=1)
    dec.add_argument("--out", required=True, help="output directory")
    dec.set_defaults(handler=cmd_decompose)

    agg = sub.add_parser("aggregate", help="per-subject window averages of components")
    agg.add_argument("--subjects", required=True, help="cohort CSV")
    agg.add_argument("--decomposed", required=True, help="directory written by decompose")
    agg.add_argument("--window", default="t3", choices=[k.value for k in WindowKind])
    agg.add_argument("--coverage", type=float, default=0.8)
    agg.add_argument("--max-distance", type=float, default=float("inf"))
    agg.add_argument("--out", required=True, help="output exposures CSV")
    agg.set_defaults(handler=cmd_aggregate)

    fit = sub.add_parser("fit", help="fit a random-intercept health model")
    fit.add_argument("--subjects", required=True)
    fit.add_argument("--exposures", required=True)
    fit.add_argument("--mode", default="triple", choices=[m.value for m in ExposureMode])
    fit.add_argument("--window", default="t3", choices=[k.value for k in WindowKind])
    fit.add_argument("--spline-df", type=int, default=None)
    fit.add_argument("--alpha", type=float, default=0.05)
    fit.add_argument(
        "--confounders",
        default=None,
        help="comma-separated confounder columns (default: all extra columns)",
    )
    fit.add_argument("--out", required=True, help="output JSON path")
    fit.set_defaults(handler=cmd_fit)

    sim = sub.add_parser("simulate", help="run a synthetic scenario end to end")
    sim.add_argument("--config", default=None, help="key = value scenario file")
    sim.add_argument("--sweep", action="store_true", help="include the level-removal sweep")
    sim.add_argument("--out", required=True, help="output directory")
    sim.set_defaults(handler=cmd_simulate)

    rep = sub.add_parser("report", help="render tables and figures from scenario output")
    rep.add_argument("--in", dest="in_dir", required=True, help="scenario output directory")
    rep.add_argument("--out", required=True, help="report directory")
    rep.set_defaults(handler=cmd_report)
    return parser


def cmd_basis_tabulate(args) -> int:
    filt = daubechies_filter(args.order)
    phi = cascade(filt, args.depth)
    psi = mother_wavelet(filt, phi)
    x = phi.support_start + phi.step * np.arange(len(phi.values))
    frame = pd.DataFrame({"x": x, "phi": phi.values, "psi": psi.values})
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(args.out, index=False)
    print(f"wrote {len(frame)} knots to {args.out}")
    return 0


def _decomposition_config(args) -> DecompositionConfig:
    return DecompositionConfig(
        levels=args.levels,
        low_cutoff=args.cutoff,
        order=args.order,
        depth=args.depth,
        cv_folds=args.folds,
        n_lambdas=args.n_lambdas,
        lambda_min_ratio=args.lambda_min_ratio,
        fixed_lambda_fraction=args.fixed_lambda_fraction,
        seed=args.seed,
        workers=args.workers,
    )


def cmd_decompose(args) -> int:
    surfaces = sio.read_surfaces(args.input)
    config = _decomposition_config(args)
    results = decompose_batch(surfaces, config)
    basis = config.make_basis()
    design = build_design(surfaces[0], basis, fit_affine_map(surfaces[0].points))
    sio.write_decomposition(results, config, design, args.out)
    lambdas = [r.selected_lambda for r in results]
    print(
        f"decomposed {len(results)} day(s) into {args.out} "
        f"(lambda range {min(lambdas):.4g}..{max(lambdas):.4g})"
    )
    return 0


def cmd_aggregate(args) -> int:
    subjects = sio.subjects_from_frame(sio.read_subjects(args.subjects))
    table = sio.read_decomposition(args.decomposed)
    field = _field_from_table(table)
    kind = WindowKind(args.window)
    exposures = aggregate_cohort(
        subjects,
        kind,
        field,
        coverage_threshold=args.coverage,
        max_distance=args.max_distance,
    )
    sio.write_exposures(exposures, args.out)
    print(f"wrote {len(exposures)} exposure rows to {args.out}")
    return 0


def _field_from_table(table: pd.DataFrame) -> ExposureField:
    dates = []
    means = []
    lows = []
    highs = []
    grid = None
    for date, day in table.groupby("date", sort=True):
        pts = day[["x1", "x2"]].to_numpy(dtype=float)
        if grid is None:
            grid = pts
        elif not np.array_equal(grid, pts):
            raise ValueError("decomposed days do not share one grid")
        dates.append(date.date() if hasattr(date, "date") else date)
        means.append(float(day["mean"].iloc[0]))
        lows.append(day["low"].to_numpy(dtype=float))
        highs.append(day["high"].to_numpy(dtype=float))
    return ExposureField(
        grid, dates, np.array(means), {"low": np.vstack(lows), "high": np.vstack(highs)}
    )


def cmd_fit(args) -> int:
    subjects = sio.read_subjects(args.subjects)
    exposures = sio.read_exposures(args.exposures)
    if args.confounders is None:
        confounders = tuple(
            c for c in subjects.columns if c not in sio.RESERVED_SUBJECT_COLUMNS
        )
    else:
        confounders = tuple(c.strip() for c in args.confounders.split(",") if c.strip())
    spec = ModelSpec(
        mode=ExposureMode(args.mode),
        confounders=confounders,
        spline_df=args.spline_df,
        window=WindowKind(args.window),
    )
    fit, table = run_model(spec, subjects, exposures, alpha=args.alpha)
    contrast = None
    if spec.mode == ExposureMode.TRIPLE:
        contrast = contrast_test(fit, "pm_low", "pm_high")

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    sio.write_fit_json(out, fit, table, contrast, spec, args.alpha)
    intervals = table.to_frame()
    csv_path = out.with_name(out.stem + "_intervals.csv")
    intervals.to_csv(csv_path, index=False)
    from .plots import interval_plot

    frame = intervals.rename(columns={"coefficient": "coefficient"})
    frame["model"] = spec.mode.value
    png_path = out.with_name(out.stem + "_intervals.png")
    interval_plot(frame, png_path, title=f"{spec.mode.value} model, window {spec.window.value}")
    print(f"wrote {out}, {csv_path.name}, {png_path.name}")
    return 0


def cmd_simulate(args) -> int:
    config = read_config(args.config) if args.config else SimConfig()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = run_scenario(config, sweep=args.sweep)

    write_config(config, out / "scenario.cfg")
    result.estimates.to_csv(out / "estimates.csv", index=False)
    result.contrasts.to_csv(out / "contrasts.csv", index=False)
    if not result.sweep_estimates.empty:
        result.sweep_estimates.to_csv(out / "sweep.csv", index=False)
    (out / "scenario.json").write_text(json.dumps(result.summary_dict(), indent=2))

    # one illustrative dataset for inspection and reuse by fit/aggregate
    from .simulate import simulate_cohort, simulate_surfaces

    surfaces, truth = simulate_surfaces(config)
    sio.write_surfaces(surfaces, out / "surfaces.csv")
    subjects, cohort_truth = simulate_cohort(config, truth, 0)
    sio.write_subjects(subjects_frame(subjects), out / "subjects.csv")
    cohort_truth.to_csv(out / "cohort_truth.csv", index=False)
    np.savez_compressed(
        out / "truth.npz",
        grid=truth.grid,
        mean=truth.mean,
        low=truth.low,
        high=truth.high,
    )
    passed = all(c.passed for c in result.checks.values())
    for name, c in result.checks.items():
        print(f"[{'PASS' if c.passed else 'FAIL'}] {name}: {c.value:.4f} (threshold {c.threshold})")
    print(f"scenario artifacts in {out}")
    return 0 if passed else 1


def cmd_report(args) -> int:
    from .plots import interval_plot, sweep_plot

    in_dir = Path(args.in_dir)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    summary = {}
    scenario_json = in_dir / "scenario.json"
    if scenario_json.exists():
        summary = json.loads(scenario_json.read_text())

    artifacts = []
    estimates_path = in_dir / "estimates.csv"
    if estimates_path.exists():
        estimates = pd.read_csv(estimates_path)
        endpoints = (
            estimates.groupby(["model", "coefficient"])[["estimate", "lower", "upper"]]
            .median()
            .reset_index()
        )
        endpoints.to_csv(out / "interval_endpoints.csv", index=False)
        artifacts.append(str(interval_plot(estimates, out / "intervals.png")))
        artifacts.append(str(out / "interval_endpoints.csv"))

    sweep_path = in_dir / "sweep.csv"
    if sweep_path.exists():
        sweep = pd.read_csv(sweep_path)
        endpoints = (
            sweep.groupby(["dropped", "n_dropped_levels"])[["estimate", "lower", "upper"]]
            .median()
            .reset_index()
            .sort_values("n_dropped_levels")
        )
        endpoints.to_csv(out / "sweep_endpoints.csv", index=False)
        artifacts.append(str(sweep_plot(sweep, out / "sweep.png")))
        artifacts.append(str(out / "sweep_endpoints.csv"))

    contrasts_path = in_dir / "contrasts.csv"
    if contrasts_path.exists():
        contrasts = pd.read_csv(contrasts_path)
        if len(contrasts):
            summary["low_vs_high_contrast"] = {
                "median_estimate": float(contrasts["estimate"].median()),
                "median_p": float(contrasts["p"].median()),
                "share_p_below_0.05": float((contrasts["p"] < 0.05).mean()),
            }

    if not artifacts and not summary:
        print(f"nothing to report in {in_dir}", file=sys.stderr)
        return 1
    summary["artifacts"] = artifacts
    (out / "report.json").write_text(json.dumps(summary, indent=2))
    print(f"report written to {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
