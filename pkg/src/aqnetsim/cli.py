"""Command-line entry points: synth, calibrate, simulate, sweep, stats."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict

import numpy as np

from .calibration import (CorrectionCoefficients, QaThresholds,
                          build_residual_table, run_qa)
from .core import SynthFieldConfig, compute_quintile_masks, descriptive_stats, \
    generate_synthetic_field
from .experiment import (load_config, run_experiment, run_sweep, write_failures_csv,
                         write_results_csv, write_trials_csv, _result_rows)
from .ingest import (InstrumentSite, load_collocated, load_field, load_grid,
                     load_instruments, save_field, save_grid, save_instruments)

log = logging.getLogger(__name__)


def synthesize_monitor_sites(grid, n: int, seed: int = 0) -> list[InstrumentSite]:
    """Sample n monitor host grids weighted by population density (monitors
    cluster where people are) and return sites at those centroids."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 2)))
    weights = grid.pop_density.copy()
    if weights.sum() <= 0:
        weights = np.ones(grid.n)
    n = min(n, int((weights > 0).sum()))
    keys = rng.standard_exponential(grid.n)
    keys[weights <= 0] = np.inf
    keys[weights > 0] /= weights[weights > 0]
    hosts = np.sort(np.argsort(keys)[:n])
    return [InstrumentSite(id=i, x=float(grid.x[g]), y=float(grid.y[g]))
            for i, g in enumerate(hosts)]


def _cmd_synth(args) -> int:
    cfg = SynthFieldConfig(
        n_grids_x=args.nx, n_grids_y=args.ny, n_days=args.days,
        n_hotspots=args.hotspots, hotspot_amplitude=args.hotspot_amplitude,
        hotspot_length_scale_m=args.hotspot_scale, baseline_mean=args.baseline_mean,
        baseline_amplitude=args.baseline_amplitude, ar1_coef=args.ar1,
        noise_sd=args.noise_sd, cap=args.cap, cell_size_m=args.cell_size,
        seed=args.seed)
    grid, field = generate_synthetic_field(cfg)
    save_grid(args.out_grid, grid)
    fmt = args.field_format or ("binary" if not str(args.out_field).endswith(".csv") else "csv")
    save_field(args.out_field, field, fmt=fmt)
    print(f"wrote {grid.n} grids to {args.out_grid} and "
          f"{field.n_grids}x{field.n_days} field to {args.out_field} ({fmt})")
    if args.out_instruments:
        sites = synthesize_monitor_sites(grid, args.n_monitors, seed=args.seed)
        save_instruments(args.out_instruments, sites)
        print(f"wrote {len(sites)} monitor sites to {args.out_instruments}")
    return 0


def _cmd_calibrate(args) -> int:
    obs = load_collocated(args.collocated)
    thresholds = QaThresholds(
        min_monitor_hours=args.min_hours, min_completeness=args.min_completeness,
        abs_channel_diff=args.abs_diff, rel_channel_diff=args.rel_diff,
        monitor_cap=args.monitor_cap)
    coeffs = CorrectionCoefficients(slope_pm=args.slope_pm, slope_rh=args.slope_rh,
                                    intercept=args.intercept)
    accepted = run_qa(obs, thresholds)
    table, stats = build_residual_table(accepted, coeffs)
    table.to_csv(args.out_table)
    with open(args.out_stats, "w") as fh:
        json.dump({"n_accepted": stats.n_accepted, "rmse": stats.rmse, "r2": stats.r2},
                  fh, indent=2)
        fh.write("\n")
    print(f"accepted {stats.n_accepted}/{len(obs)} observations; "
          f"rmse={stats.rmse:.4g} r2={stats.r2:.4g}")
    return 0


def _cmd_simulate(args) -> int:
    n_override = None
    if args.n_lcs is not None:
        n_override = args.n_lcs if args.n_lcs == "all" else int(args.n_lcs)
    cfg = load_config(args.config, trials_override=args.trials,
                      base_seed_override=args.base_seed,
                      strategy_override=args.strategy,
                      n_lcs_override=n_override,
                      error_model_override=args.error_model)
    if len(cfg.scenarios) != 1:
        raise SystemExit("simulate expects a config describing exactly one scenario; "
                         "use `sweep` for lists")
    result = run_experiment(cfg.inputs, cfg.scenarios[0], cfg.trials, cfg.base_seed,
                            cfg.breakpoints)
    write_results_csv(args.out, _result_rows(result))
    if args.out_trials:
        write_trials_csv(args.out_trials, result)
    print(f"wrote averaged results over {cfg.trials} trials to {args.out}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config, trials_override=args.trials,
                      base_seed_override=args.base_seed)
    result = run_sweep(cfg.inputs, cfg.sweep, cfg.trials, cfg.base_seed, cfg.breakpoints,
                       workers=args.workers)
    write_results_csv(args.out, result.rows)
    if result.failures:
        errors_path = args.errors_out or f"{args.out}.errors.csv"
        write_failures_csv(errors_path, result.failures)
        print(f"{len(result.failures)} scenario(s) failed; details in {errors_path}",
              file=sys.stderr)
    print(f"wrote {len(result.rows)} rows to {args.out}")
    return 0


def _cmd_stats(args) -> int:
    grid = load_grid(args.grid)
    field = load_field(args.field)
    masks = compute_quintile_masks(grid, weighting=args.quintile_weighting)
    site_sets = {"school_sites": grid.has_school, "purpleair_sites": grid.has_purpleair}
    if args.instruments:
        sites = load_instruments(args.instruments)
        from .assignment import nearest_centroid_index
        if sites:
            index = nearest_centroid_index(grid)
            hosts, _ = index.query_many(np.array([s.x for s in sites]),
                                        np.array([s.y for s in sites]))
            site_sets["monitor_sites"] = np.unique(hosts)
    rows = descriptive_stats(grid, field, masks, site_sets,
                             weighted=not args.unweighted, normalize=args.normalize)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        first = asdict(rows[0])
        writer.writerow(first.keys())
        for row in rows:
            writer.writerow(asdict(row).values())
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aqnetsim",
                                     description="Sensor-network air quality "
                                                 "reporting simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic grid, field, and monitor set")
    p.add_argument("--nx", type=int, default=100)
    p.add_argument("--ny", type=int, default=100)
    p.add_argument("--days", type=int, default=60)
    p.add_argument("--hotspots", type=int, default=5)
    p.add_argument("--hotspot-amplitude", type=float, default=6.0)
    p.add_argument("--hotspot-scale", type=float, default=8000.0)
    p.add_argument("--baseline-mean", type=float, default=8.0)
    p.add_argument("--baseline-amplitude", type=float, default=3.0)
    p.add_argument("--ar1", type=float, default=0.6)
    p.add_argument("--noise-sd", type=float, default=0.8)
    p.add_argument("--cap", type=float, default=112.0)
    p.add_argument("--cell-size", type=float, default=1000.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-grid", required=True)
    p.add_argument("--out-field", required=True)
    p.add_argument("--field-format", choices=["csv", "binary"])
    p.add_argument("--out-instruments")
    p.add_argument("--n-monitors", type=int, default=8)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("calibrate", help="build a residual table from collocated data")
    p.add_argument("--collocated", required=True)
    p.add_argument("--out-table", required=True)
    p.add_argument("--out-stats", required=True)
    p.add_argument("--min-hours", type=float, default=18.0)
    p.add_argument("--min-completeness", type=float, default=0.90)
    p.add_argument("--abs-diff", type=float, default=5.0)
    p.add_argument("--rel-diff", type=float, default=0.61)
    p.add_argument("--monitor-cap", type=float, default=112.0)
    p.add_argument("--slope-pm", type=float, default=0.524)
    p.add_argument("--slope-rh", type=float, default=-0.0862)
    p.add_argument("--intercept", type=float, default=5.75)
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("simulate", help="run one scenario and write results")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--out-trials")
    p.add_argument("--trials", type=int)
    p.add_argument("--base-seed", type=int)
    p.add_argument("--strategy", help="override the config strategy")
    p.add_argument("--n-lcs", help='override the config sensor count (integer or "all")')
    p.add_argument("--error-model", help="override the config error model token")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sweep", help="run a scenario sweep and write results")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--errors-out")
    p.add_argument("--trials", type=int)
    p.add_argument("--base-seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("stats", help="descriptive statistics per location set")
    p.add_argument("--grid", required=True)
    p.add_argument("--field", required=True)
    p.add_argument("--instruments")
    p.add_argument("--quintile-weighting", choices=["none", "population"], default="none")
    p.add_argument("--unweighted", action="store_true")
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_stats)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
