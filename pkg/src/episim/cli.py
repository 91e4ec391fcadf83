"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error. The EPISIM_THREADS
environment variable overrides the worker count for batch commands.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from episim.calibrate import calibrate
from episim.config import ConfigError, SimConfig, load_config
from episim.engine import TimeSeries, run_simulation
from episim.morris import (
    LevelGrid,
    MorrisError,
    analyze,
    denormalize_point,
    full_factorial,
    generate_trajectories,
)
from episim.orchestrator import GridCache, Job, run_batch
from episim.scenario import load_scenario, run_scenario
from episim.sweep import SweepSpec, point_config, run_sweep, sensitivity_index
from episim.validation import (
    CaseSeries,
    ValidationError,
    correlate,
    downsample_to_daily,
    load_actual_csv,
    normalize,
    write_correlation_csv,
)

USAGE_ERROR = 1
DATA_ERROR = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _load_base_config(path) -> SimConfig:
    return load_config(path) if path else SimConfig()


def _cmd_simulate(args) -> int:
    config = _load_base_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.scenario:
        scenario = load_scenario(args.scenario)
        series = run_scenario(scenario, config)
    else:
        series = run_simulation(config)
    series.to_csv(args.out)
    if args.daily_out:
        _write_daily(series, args.daily_out)
    print(f"wrote {len(series)} ticks to {args.out}; peak {series.peak_active_pct():.3f}%")
    return 0


def _write_daily(series: TimeSeries, path):
    import csv

    days = series.day
    active = series.active
    by_day_active = {}
    by_day_new = {}
    for i, d in enumerate(days):
        by_day_active[d] = int(active[i])  # last tick of the day wins
        by_day_new[d] = by_day_new.get(d, 0) + series.new_infections[i]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["day", "active", "new_cases"])
        for d in sorted(by_day_active):
            w.writerow([d, by_day_active[d], by_day_new[d]])


def _cmd_sweep(args) -> int:
    config = _load_base_config(args.config)
    levels = [float(v) for v in args.levels.split(",") if v != ""]
    spec = SweepSpec(
        parameter=args.param,
        levels=levels,
        replicates=args.reps,
        config=config,
        seed_base=args.seed_base,
    )
    result = run_sweep(spec, workers=args.workers)
    import os

    os.makedirs(args.out, exist_ok=True)
    runs_path = os.path.join(args.out, f"{args.param}_runs.csv")
    summary_path = os.path.join(args.out, f"{args.param}_summary.csv")
    result.write_runs_csv(runs_path)
    result.write_summary_csv(summary_path)
    index = sensitivity_index(result.medians())
    print(f"medians: {[round(m, 2) for m in result.medians()]}")
    print(f"sensitivity index: {index:.3f}")
    print(f"wrote {runs_path} and {summary_path}")
    return 0


def _cmd_grid(args) -> int:
    config = _load_base_config(args.config)
    grid = LevelGrid(k=4, p=args.levels, delta=args.delta)
    cache = GridCache(config)
    points = full_factorial(grid)
    jobs = [
        Job(job_id=len(points) * j + i, config=point_config(config, pt), seed=seed)
        for j, seed in enumerate(args.seed)
        for i, pt in enumerate(points)
    ]
    report = run_batch(jobs, workers=args.workers, cache=cache)
    if report.n_failed:
        print(f"error: {report.n_failed} grid runs failed", file=sys.stderr)
        return DATA_ERROR
    cache.save(args.out)
    print(f"wrote {len(cache)} cached peaks to {args.out}")
    return 0


def _cmd_morris(args) -> int:
    grid = LevelGrid(k=4, p=args.levels, delta=args.delta)
    cache = GridCache.load(args.cache)
    trajectories = generate_trajectories(grid, args.trajectories, args.seed)

    def output(pt):
        peak = cache.get_point(denormalize_point(pt), args.grid_seed)
        if peak is None:
            raise MorrisError(f"cache has no entry for point {denormalize_point(pt)}")
        return peak

    result = analyze(trajectories, output, grid)
    import csv

    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["factor", "mu", "mu_star", "sigma", "rank"])
        for f in result.factors:
            w.writerow(
                [f.name, f"{f.mu:.6f}", f"{f.mu_star:.6f}", f"{f.sigma:.6f}", f"{f.rank:.6f}"]
            )
    order = " > ".join(f.name for f in result.factors)
    print(f"rank order: {order}")
    print(f"wrote {args.out}")
    return 0


def _cmd_validate(args) -> int:
    actual = load_actual_csv(args.actual)
    model = _load_model_series(args.model, args.column)
    sampled = downsample_to_daily(model, len(actual), args.seed)
    result = correlate(normalize(sampled), normalize(actual))
    write_correlation_csv(result, args.out)
    print(
        f"pearson {result['pearson']:.4f} (p={result['pearson_p']:.3g})  "
        f"spearman {result['spearman']:.4f} (p={result['spearman_p']:.3g})"
    )
    return 0


def _load_model_series(path, column) -> CaseSeries:
    series = TimeSeries.from_csv(path)
    if column == "active":
        values = series.active.astype(float)
        return CaseSeries(times=list(series.tick), values=values, label="model")
    if column == "new_cases":
        daily = series.daily_new_cases()
        return CaseSeries(times=list(range(len(daily))), values=np.array(daily, float), label="model")
    raise ValidationError(f"unknown model column {column!r}")


def _cmd_calibrate(args) -> int:
    config = _load_base_config(args.config)
    prob, history = calibrate(
        config, target=args.target, n_seeds=args.seeds, workers=args.workers
    )
    for step in history:
        print(f"p={step.prob:.6g} median peak {step.median_peak:.2f}%")
    print(f"calibrated base_transmission_prob: {prob:.6g}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="episim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one simulation to CSV")
    p.add_argument("--config", help="YAML configuration file")
    p.add_argument("--scenario", help="preset name (hong_kong, italy, uk) or YAML path")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="time-series CSV output")
    p.add_argument("--daily-out", help="optional day,active,new_cases CSV")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sweep", help="one-at-a-time sweep of one intervention")
    p.add_argument("--param", required=True)
    p.add_argument("--levels", required=True, help="comma-separated level values")
    p.add_argument("--reps", type=int, default=12)
    p.add_argument("--config", help="base YAML configuration")
    p.add_argument("--seed-base", type=int, default=0)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("grid", help="full factorial batch into a peak cache")
    p.add_argument("--config", help="base YAML configuration")
    p.add_argument("--levels", type=int, default=6)
    p.add_argument("--delta", type=float, default=0.2)
    p.add_argument(
        "--seed",
        type=int,
        nargs="+",
        default=[0],
        help="one or more seeds; every grid point is run once per seed",
    )
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", required=True, help="cache CSV output")
    p.set_defaults(func=_cmd_grid)

    p = sub.add_parser("morris", help="elementary-effects analysis from a cache")
    p.add_argument("--trajectories", type=int, default=30)
    p.add_argument("--levels", type=int, default=6)
    p.add_argument("--delta", type=float, default=0.2)
    p.add_argument("--cache", required=True)
    p.add_argument("--seed", type=int, default=0, help="trajectory generation seed")
    p.add_argument(
        "--grid-seed",
        type=int,
        default=None,
        help="restrict lookups to one cache seed (default: average stored seeds)",
    )
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_morris)

    p = sub.add_parser("validate", help="correlate a model run against actual data")
    p.add_argument("--model", required=True, help="time-series CSV from simulate")
    p.add_argument("--actual", required=True, help="date,value CSV")
    p.add_argument("--column", default="active", choices=["active", "new_cases"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("calibrate", help="fit the base transmission probability")
    p.add_argument("--config", help="base YAML configuration")
    p.add_argument("--target", type=float, default=45.38)
    p.add_argument("--seeds", type=int, default=12)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=_cmd_calibrate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_ERROR
    try:
        return args.func(args)
    except (ConfigError, MorrisError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
