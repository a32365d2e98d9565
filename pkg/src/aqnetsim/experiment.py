"""Trial, experiment, and sweep orchestration: placement, error simulation,
nearest-instrument assignment, and metric computation, with hierarchical
seeding and a fixed-order results CSV.

Seeding is hierarchical: every trial derives independent streams from
(base_seed, trial_index), and each sensor's daily error draws come from a
stream keyed additionally by its host grid, so results are identical under
any worker count or scenario execution order.
"""

from __future__ import annotations

import csv
import json
import logging
import multiprocessing
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .aqi import DEFAULT_PM25_BREAKPOINTS, validate_breakpoints
from .assignment import Instrument, InstrumentKind, assign_all, nearest_centroid_index
from .core import Grid, Point, SubgroupMasks, TruePm25Field, compute_quintile_masks
from .errors import (Differential, EmpiricalDecile, ErrorModel, NoError,
                     NonDifferential, ResidualTable, simulate_measurements)
from .ingest import InstrumentSite, load_field, load_grid, load_instruments
from .metrics import METRIC_FIELDS, SUBSETS, WEIGHTINGS, MetricsReport, MetricsRow, compute_metrics
from .placement import ALL_POOL, PlacementStrategy, eligible_count, parse_strategy, \
    select_sites, strategy_name

log = logging.getLogger(__name__)

RESULTS_HEADER = ["strategy", "n_lcs", "error_model", "subset", "weighting", "trials",
                  *METRIC_FIELDS]
TRIALS_HEADER = ["strategy", "n_lcs", "error_model", "trial", "subset", "weighting",
                 *METRIC_FIELDS]

_PLACEMENT_STREAM = 0
_ERROR_STREAM = 1


def format_error_model(model: ErrorModel) -> str:
    if isinstance(model, NoError):
        return "none"
    if isinstance(model, NonDifferential):
        return f"nondiff:{model.accuracy:g}"
    if isinstance(model, Differential):
        return f"diff:{model.accuracy:g}"
    if isinstance(model, EmpiricalDecile):
        return "empirical"
    raise TypeError(f"unknown error model {model!r}")


def parse_error_model(spec, residual_table: ResidualTable | None = None) -> ErrorModel:
    """Build an error model from a token ("none", "nondiff:0.1", "diff:0.25",
    "empirical") or a JSON-style dict with a "kind" key."""
    if isinstance(spec, dict):
        kind = spec.get("kind")
        clamp = bool(spec.get("clamp_nonnegative", False))
        if kind == "none":
            return NoError()
        if kind in {"nondiff", "nondifferential"}:
            return NonDifferential(accuracy=float(spec["accuracy"]),
                                   reference_mean=float(spec.get("reference_mean", 5.0)),
                                   clamp_nonnegative=clamp)
        if kind in {"diff", "differential"}:
            return Differential(accuracy=float(spec["accuracy"]), clamp_nonnegative=clamp)
        if kind in {"empirical", "empirical_decile"}:
            if residual_table is None:
                raise ValueError("empirical error model requires a residual table")
            return EmpiricalDecile(table=residual_table, clamp_nonnegative=clamp)
        raise ValueError(f"unknown error model kind {kind!r}")
    token = str(spec)
    if token == "none":
        return NoError()
    if token == "empirical":
        if residual_table is None:
            raise ValueError("empirical error model requires a residual table")
        return EmpiricalDecile(table=residual_table)
    for prefix, cls in (("nondiff:", NonDifferential), ("diff:", Differential)):
        if token.startswith(prefix):
            return cls(accuracy=float(token[len(prefix):]))
    raise ValueError(f"unknown error model token {token!r}")


@dataclass(frozen=True)
class Scenario:
    """One (strategy, sensor count, error model) combination."""

    strategy: PlacementStrategy
    n_lcs: int | str
    error_model: ErrorModel

    def __post_init__(self):
        if isinstance(self.n_lcs, str):
            if self.n_lcs != ALL_POOL:
                raise ValueError(f"n_lcs must be an integer or {ALL_POOL!r}")
        elif self.n_lcs < 0:
            raise ValueError("n_lcs must be nonnegative")


@dataclass(frozen=True)
class SweepSpec:
    """Cross product of strategies x sensor counts x error models, expanded
    in that nesting order (error models innermost)."""

    strategies: tuple[PlacementStrategy, ...]
    n_lcs_values: tuple[int | str, ...]
    error_models: tuple[ErrorModel, ...]

    def __post_init__(self):
        if not (self.strategies and self.n_lcs_values and self.error_models):
            raise ValueError("sweep spec lists must be nonempty")

    def scenarios(self) -> list[Scenario]:
        return [Scenario(s, n, m)
                for s in self.strategies
                for n in self.n_lcs_values
                for m in self.error_models]


class ExperimentInputs:
    """Loaded, immutable inputs shared by every trial: grid, field, monitor
    sites (snapped to host grids), subgroup masks, and the float64 view of
    the field."""

    def __init__(self, grid: Grid, field: TruePm25Field,
                 monitor_sites: Sequence[InstrumentSite],
                 quintile_weighting: str = "none"):
        if field.n_grids != grid.n:
            raise ValueError("field and grid are not aligned")
        self.grid = grid
        self.field = field
        self.true64 = np.ascontiguousarray(field.values, dtype=np.float64)
        self.true64.setflags(write=False)
        self.masks: SubgroupMasks = compute_quintile_masks(grid, quintile_weighting)
        sites = sorted(monitor_sites, key=lambda s: s.id)
        if sites:
            index = nearest_centroid_index(grid)
            hosts, _ = index.query_many(np.array([s.x for s in sites]),
                                        np.array([s.y for s in sites]))
            self.monitor_hosts = hosts
        else:
            self.monitor_hosts = np.empty(0, dtype=np.int64)

    @classmethod
    def load(cls, grid_path, field_path, instruments_path=None,
             quintile_weighting: str = "none") -> "ExperimentInputs":
        grid = load_grid(grid_path)
        field = load_field(field_path)
        sites = load_instruments(instruments_path) if instruments_path else []
        return cls(grid, field, sites, quintile_weighting)


def resolve_n_lcs(scenario: Scenario, grid: Grid) -> int:
    if scenario.n_lcs == ALL_POOL:
        return eligible_count(scenario.strategy, grid)
    return int(scenario.n_lcs)


def build_instruments(inputs: ExperimentInputs, selected_grid_ids) -> list[Instrument]:
    """Monitors first (ids 0..m-1 in site-id order), then sensors at the
    selected grids' centroids in ascending grid order."""
    grid = inputs.grid
    instruments = []
    for host in inputs.monitor_hosts:
        host = int(host)
        instruments.append(Instrument(
            id=len(instruments), kind=InstrumentKind.REFERENCE_MONITOR,
            location=Point(float(grid.x[host]), float(grid.y[host])), host_grid=host))
    for gid in np.sort(np.asarray(selected_grid_ids, dtype=np.int64)):
        gid = int(gid)
        instruments.append(Instrument(
            id=len(instruments), kind=InstrumentKind.LOW_COST_SENSOR,
            location=Point(float(grid.x[gid]), float(grid.y[gid])), host_grid=gid))
    return instruments


def _realize_readings(inputs: ExperimentInputs, instruments: Sequence[Instrument],
                      model: ErrorModel, base_seed: int, trial_index: int,
                      ) -> tuple[np.ndarray, np.ndarray]:
    """Per-instrument daily readings and their measurement errors.

    Monitors report the true value at their host grid. Each sensor draws
    its year of errors from a stream keyed by (base_seed, trial, host
    grid), one draw per day, broadcast later to all grids it serves.
    """
    true64 = inputs.true64
    n_days = true64.shape[1]
    readings = np.empty((len(instruments), n_days), dtype=np.float64)
    errors = np.zeros((len(instruments), n_days), dtype=np.float64)
    for inst in instruments:
        truth = true64[inst.host_grid]
        if inst.kind == InstrumentKind.REFERENCE_MONITOR or isinstance(model, NoError):
            readings[inst.id] = truth
        else:
            rng = np.random.default_rng(np.random.SeedSequence(
                entropy=(base_seed, trial_index, _ERROR_STREAM, inst.host_grid)))
            measured = simulate_measurements(truth, model, rng)
            readings[inst.id] = measured
            errors[inst.id] = measured - truth
    return readings, errors


def run_trial(inputs: ExperimentInputs, scenario: Scenario, base_seed: int,
              trial_index: int,
              breakpoints: Sequence[float] = DEFAULT_PM25_BREAKPOINTS) -> MetricsReport:
    """One full simulation trial: place sensors, assign every grid to its
    nearest instrument, realize daily readings, and score the reporting."""
    placement_rng = np.random.default_rng(np.random.SeedSequence(
        entropy=(base_seed, trial_index, _PLACEMENT_STREAM)))
    n = resolve_n_lcs(scenario, inputs.grid)
    placement = select_sites(scenario.strategy, n, inputs.grid, placement_rng)
    instruments = build_instruments(inputs, placement.selected)
    assignment = assign_all(inputs.grid, instruments)
    readings, reading_errors = _realize_readings(inputs, instruments,
                                                 scenario.error_model,
                                                 base_seed, trial_index)
    shown = readings[assignment.instrument_ids]
    sensor_error = reading_errors[assignment.instrument_ids]
    return compute_metrics(inputs.true64, shown, sensor_error, assignment,
                           inputs.grid, inputs.masks, breakpoints)


@dataclass(frozen=True)
class ExperimentResult:
    scenario: Scenario
    n_lcs_resolved: int
    trials: int
    mean_report: MetricsReport
    per_trial: tuple[MetricsReport, ...]
    n_contributing: dict[tuple[str, str, str], int]


def average_reports(reports: Sequence[MetricsReport],
                    ) -> tuple[MetricsReport, dict[tuple[str, str, str], int]]:
    """Arithmetic mean per metric across trials, skipping None values; also
    returns how many trials contributed to each (subset, weighting, metric)."""
    rows = []
    counts: dict[tuple[str, str, str], int] = {}
    for subset in SUBSETS:
        for weighting in WEIGHTINGS:
            cells = [r.row(subset, weighting) for r in reports]
            means = {}
            for name in METRIC_FIELDS:
                values = [getattr(c, name) for c in cells if getattr(c, name) is not None]
                counts[(subset, weighting, name)] = len(values)
                means[name] = sum(values) / len(values) if values else None
            rows.append(MetricsRow(subset=subset, weighting=weighting, **means))
    return MetricsReport(rows=tuple(rows)), counts


def run_experiment(inputs: ExperimentInputs, scenario: Scenario, trials: int = 50,
                   base_seed: int = 0,
                   breakpoints: Sequence[float] = DEFAULT_PM25_BREAKPOINTS,
                   ) -> ExperimentResult:
    if trials < 1:
        raise ValueError("trials must be at least 1")
    reports = tuple(run_trial(inputs, scenario, base_seed, t, breakpoints)
                    for t in range(trials))
    mean_report, counts = average_reports(reports)
    return ExperimentResult(scenario=scenario,
                            n_lcs_resolved=resolve_n_lcs(scenario, inputs.grid),
                            trials=trials, mean_report=mean_report,
                            per_trial=reports, n_contributing=counts)


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[tuple, ...]
    failures: tuple[tuple[str, str], ...]


def _result_rows(result: ExperimentResult) -> list[tuple]:
    name = strategy_name(result.scenario.strategy)
    model = format_error_model(result.scenario.error_model)
    rows = []
    for row in result.mean_report.rows:
        rows.append((name, result.n_lcs_resolved, model, row.subset, row.weighting,
                     result.trials, *[getattr(row, f) for f in METRIC_FIELDS]))
    return rows


# Fork-inherited context for sweep workers: (inputs, scenarios, trials,
# base_seed, breakpoints). Set only for the lifetime of the pool.
_SWEEP_CTX = None


def _sweep_job(i: int):
    inputs, scenarios, trials, base_seed, breakpoints = _SWEEP_CTX
    try:
        result = run_experiment(inputs, scenarios[i], trials, base_seed, breakpoints)
        return _result_rows(result), None
    except Exception as exc:  # noqa: BLE001 - sweep records and continues
        return None, f"{type(exc).__name__}: {exc}"


def run_sweep(inputs: ExperimentInputs, spec: SweepSpec, trials: int = 50,
              base_seed: int = 0,
              breakpoints: Sequence[float] = DEFAULT_PM25_BREAKPOINTS,
              workers: int = 1) -> SweepResult:
    """Run every scenario; output rows follow the SweepSpec expansion order
    regardless of worker count. Per-scenario failures are recorded and the
    sweep continues."""
    scenarios = spec.scenarios()
    global _SWEEP_CTX
    _SWEEP_CTX = (inputs, scenarios, trials, base_seed, breakpoints)
    try:
        if workers > 1:
            kernels.warmup()
            ctx = multiprocessing.get_context("fork")
            with ctx.Pool(processes=workers) as pool:
                outcomes = pool.map(_sweep_job, range(len(scenarios)))
        else:
            outcomes = [_sweep_job(i) for i in range(len(scenarios))]
    finally:
        _SWEEP_CTX = None
    rows: list[tuple] = []
    failures: list[tuple[str, str]] = []
    for scenario, (scenario_rows, error) in zip(scenarios, outcomes):
        if error is not None:
            label = (f"{strategy_name(scenario.strategy)},{scenario.n_lcs},"
                     f"{format_error_model(scenario.error_model)}")
            failures.append((label, error))
            log.error("scenario %s failed: %s", label, error)
        else:
            rows.extend(scenario_rows)
    return SweepResult(rows=tuple(rows), failures=tuple(failures))


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))  # plain shortest repr, also for numpy scalars
    return str(value)


def write_results_csv(path, rows: Iterable[tuple]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULTS_HEADER)
        for row in rows:
            writer.writerow([_format_cell(v) for v in row])


def write_trials_csv(path, result: ExperimentResult) -> None:
    name = strategy_name(result.scenario.strategy)
    model = format_error_model(result.scenario.error_model)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRIALS_HEADER)
        for t, report in enumerate(result.per_trial):
            for row in report.rows:
                writer.writerow([_format_cell(v) for v in
                                 (name, result.n_lcs_resolved, model, t, row.subset,
                                  row.weighting,
                                  *[getattr(row, f) for f in METRIC_FIELDS])])


def write_failures_csv(path, failures: Sequence[tuple[str, str]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario", "error"])
        for label, error in failures:
            writer.writerow([label, error])


# ---------------------------------------------------------------------------
# JSON config plumbing for the CLI
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed simulate/sweep config; paths resolved relative to the file."""

    inputs: ExperimentInputs
    sweep: SweepSpec
    trials: int
    base_seed: int
    breakpoints: tuple[float, ...]

    @property
    def scenarios(self) -> list[Scenario]:
        return self.sweep.scenarios()


def _as_list(value) -> list:
    return value if isinstance(value, list) else [value]


def load_config(path, trials_override: int | None = None,
                base_seed_override: int | None = None,
                strategy_override: str | None = None,
                n_lcs_override: int | str | None = None,
                error_model_override: str | None = None) -> ExperimentConfig:
    path = Path(path)
    with open(path) as fh:
        raw = json.load(fh)
    if strategy_override is not None:
        raw["strategy"] = strategy_override
        raw.pop("strategies", None)
    if n_lcs_override is not None:
        raw["n_lcs"] = n_lcs_override
    if error_model_override is not None:
        raw["error_model"] = error_model_override
        raw.pop("error_models", None)
    base = path.parent

    def resolve(key):
        return base / raw[key] if key in raw and raw[key] else None

    grid_path = resolve("grid")
    field_path = resolve("field")
    if grid_path is None or field_path is None:
        raise ValueError(f"{path}: config must name 'grid' and 'field' inputs")
    table = None
    table_path = resolve("residual_table")
    if table_path is not None:
        table = ResidualTable.from_csv(table_path)

    inputs = ExperimentInputs.load(grid_path, field_path, resolve("instruments"),
                                   quintile_weighting=raw.get("quintile_weighting", "none"))

    strategy_specs = _as_list(raw.get("strategies", raw.get("strategy")))
    if strategy_specs == [None]:
        raise ValueError(f"{path}: config must name 'strategy' or 'strategies'")
    strategies = [parse_strategy(s) for s in strategy_specs]
    n_values = [n if n == ALL_POOL else int(n)
                for n in _as_list(raw.get("n_lcs", raw.get("n_lcs_values", 0)))]
    model_specs = _as_list(raw.get("error_models", raw.get("error_model", "none")))
    models = [parse_error_model(m, table) for m in model_specs]

    trials = int(trials_override if trials_override is not None else raw.get("trials", 50))
    base_seed = int(base_seed_override if base_seed_override is not None
                    else raw.get("base_seed", 0))
    breakpoints = tuple(raw.get("aqi_breakpoints", DEFAULT_PM25_BREAKPOINTS))
    validate_breakpoints(breakpoints)

    sweep = SweepSpec(tuple(strategies), tuple(n_values), tuple(models))
    return ExperimentConfig(inputs=inputs, sweep=sweep, trials=trials,
                            base_seed=base_seed, breakpoints=breakpoints)
