import csv
import json

import numpy as np
import pytest

from aqnetsim.core import SynthFieldConfig, TruePm25Field, generate_synthetic_field
from aqnetsim.errors import Differential, NoError, NonDifferential
from aqnetsim.experiment import (ExperimentInputs, RESULTS_HEADER, Scenario, SweepSpec,
                                 average_reports, build_instruments, format_error_model,
                                 load_config, parse_error_model, resolve_n_lcs,
                                 run_experiment, run_sweep, run_trial,
                                 write_results_csv, write_trials_csv)
from aqnetsim.ingest import InstrumentSite, save_field, save_grid, save_instruments
from aqnetsim.metrics import METRIC_FIELDS, MetricsRow, MetricsReport, SUBSETS, WEIGHTINGS
from aqnetsim.placement import ALL_POOL, PurpleAirPool, SchoolPool, WeightedBy
from gridfixtures import build_grid


def small_inputs(n=16, n_days=4, seed=5, monitors=((500.0, 500.0),)):
    rng = np.random.default_rng(seed)
    xs = (np.tile(np.arange(4), n // 4) + 0.5) * 1000.0
    ys = (np.repeat(np.arange(n // 4), 4) + 0.5) * 1000.0
    grid = build_grid(xs, ys,
                      pop_density=rng.uniform(1, 100, n),
                      pct_poverty=rng.uniform(0, 0.6, n),
                      pct_nonwhite=rng.uniform(0, 1, n),
                      ces_score=rng.uniform(5, 80, n),
                      pollution_score=rng.uniform(5, 60, n),
                      road_length_500m=np.where(rng.random(n) < 0.4,
                                                rng.uniform(100, 3000, n), 0.0),
                      has_school=rng.random(n) < 0.5,
                      has_purpleair=rng.random(n) < 0.5)
    values = rng.uniform(0, 60, (n, n_days)).astype(np.float32)
    field = TruePm25Field(values)
    sites = [InstrumentSite(i, x, y) for i, (x, y) in enumerate(monitors)]
    return ExperimentInputs(grid, field, sites)


class TestBuildInstruments:
    def test_monitors_first_then_sensors_sorted(self):
        inputs = small_inputs(monitors=((500.0, 500.0), (3500.0, 3500.0)))
        instruments = build_instruments(inputs, [9, 2])
        assert [i.id for i in instruments] == [0, 1, 2, 3]
        assert [int(i.kind) for i in instruments] == [0, 0, 1, 1]
        assert [i.host_grid for i in instruments][2:] == [2, 9]

    def test_monitor_snaps_to_nearest_centroid(self):
        inputs = small_inputs(monitors=((710.0, 520.0),))
        assert inputs.monitor_hosts.tolist() == [0]


class TestRunTrial:
    def test_zero_lcs_equals_baseline_for_all_scenarios(self):
        inputs = small_inputs()
        baseline = run_trial(inputs, Scenario(PurpleAirPool(), 0, NoError()), 7, 0)
        strategies = [PurpleAirPool(), SchoolPool(), WeightedBy("ces_score"),
                      WeightedBy("road_length_500m"), WeightedBy("pollution_score")]
        models = [NoError(), NonDifferential(accuracy=0.25), Differential(accuracy=0.1)]
        for strategy in strategies:
            for model in models:
                report = run_trial(inputs, Scenario(strategy, 0, model), 7, 0)
                assert report == baseline  # bit-exact dataclass equality

    def test_no_error_full_coverage_is_perfect(self):
        inputs = small_inputs()
        grid = inputs.grid
        everywhere = build_grid(grid.x, grid.y, pop_density=grid.pop_density,
                                pct_nonwhite=grid.pct_nonwhite,
                                pct_poverty=grid.pct_poverty,
                                has_purpleair=np.ones(grid.n, bool))
        inputs_full = ExperimentInputs(everywhere, inputs.field, [InstrumentSite(0, 500.0, 500.0)])
        report = run_trial(inputs_full, Scenario(PurpleAirPool(), ALL_POOL, NoError()), 7, 0)
        for row in report.rows:
            assert row.mae == 0.0
            assert row.under_pct == 0.0
            assert row.over_pct == 0.0
            assert row.gap2plus_pct == 0.0
            assert row.mean_dist_km == 0.0

    def test_trial_determinism(self):
        inputs = small_inputs()
        scenario = Scenario(SchoolPool(), 3, NonDifferential(accuracy=0.25))
        a = run_trial(inputs, scenario, 11, 4)
        b = run_trial(inputs, scenario, 11, 4)
        assert a == b

    def test_different_trials_differ(self):
        inputs = small_inputs()
        scenario = Scenario(SchoolPool(), 3, NonDifferential(accuracy=0.25))
        a = run_trial(inputs, scenario, 11, 0)
        b = run_trial(inputs, scenario, 11, 1)
        assert a != b

    def test_error_draws_keyed_by_host_grid(self):
        # a sensor's draws must not depend on which other grids are selected
        inputs = small_inputs()
        pool_a = build_grid(inputs.grid.x, inputs.grid.y, has_purpleair=np.arange(16) == 3)
        both = np.zeros(16, bool)
        both[[3, 8]] = True
        pool_b = build_grid(inputs.grid.x, inputs.grid.y, has_purpleair=both)
        sites = [InstrumentSite(0, 500.0, 500.0)]
        in_a = ExperimentInputs(pool_a, inputs.field, sites)
        in_b = ExperimentInputs(pool_b, inputs.field, sites)
        from aqnetsim.experiment import _realize_readings
        model = NonDifferential(accuracy=0.25)
        inst_a = build_instruments(in_a, [3])
        inst_b = build_instruments(in_b, [3, 8])
        read_a, _ = _realize_readings(in_a, inst_a, model, 11, 0)
        read_b, _ = _realize_readings(in_b, inst_b, model, 11, 0)
        assert np.array_equal(read_a[1], read_b[1])  # grid 3's sensor row


class TestRunExperiment:
    def test_single_trial_average_is_the_trial(self):
        inputs = small_inputs()
        scenario = Scenario(PurpleAirPool(), 2, NoError())
        result = run_experiment(inputs, scenario, trials=1, base_seed=3)
        assert result.mean_report == result.per_trial[0]

    def test_mean_of_two_values(self):
        rows = []
        for mae in (1.0, 3.0):
            rows.append(MetricsReport(rows=tuple(
                MetricsRow(subset=s, weighting=w, mae=mae, p95_abs_err=0.0,
                           under_pct=0.0, over_pct=0.0, gap2plus_pct=0.0,
                           uhm_pct=None, error_sd=None, mean_dist_km=1.0,
                           mean_dist_gap2plus_km=None)
                for s in SUBSETS for w in WEIGHTINGS)))
        mean, counts = average_reports(rows)
        assert mean.row("overall", "unweighted").mae == 2.0
        assert mean.row("overall", "unweighted").uhm_pct is None
        assert counts[("overall", "unweighted", "mae")] == 2
        assert counts[("overall", "unweighted", "uhm_pct")] == 0

    def test_null_skipping_average(self):
        base = dict(p95_abs_err=0.0, under_pct=0.0, over_pct=0.0, gap2plus_pct=0.0,
                    error_sd=None, mean_dist_km=1.0, mean_dist_gap2plus_km=None)
        reports = [
            MetricsReport(rows=tuple(MetricsRow(subset=s, weighting=w, mae=1.0,
                                                uhm_pct=uhm, **base)
                                     for s in SUBSETS for w in WEIGHTINGS))
            for uhm in (30.0, None, 60.0)
        ]
        mean, counts = average_reports(reports)
        assert mean.row("overall", "unweighted").uhm_pct == pytest.approx(45.0)
        assert counts[("overall", "unweighted", "uhm_pct")] == 2

    def test_deterministic_scenario_zero_variance(self):
        inputs = small_inputs()
        scenario = Scenario(PurpleAirPool(), ALL_POOL, NoError())
        result = run_experiment(inputs, scenario, trials=3, base_seed=0)
        assert result.per_trial[0] == result.per_trial[1] == result.per_trial[2]


class TestSweep:
    def spec(self):
        return SweepSpec(strategies=(PurpleAirPool(), SchoolPool()),
                         n_lcs_values=(0, 2),
                         error_models=(NoError(), NonDifferential(accuracy=0.1)))

    def test_row_cardinality_single_scenario(self):
        inputs = small_inputs()
        spec = SweepSpec((PurpleAirPool(),), (1,), (NoError(),))
        result = run_sweep(inputs, spec, trials=2, base_seed=0)
        assert len(result.rows) == 6  # 3 subsets x 2 weightings

    def test_full_design_scenario_count(self):
        strategies = (PurpleAirPool(), SchoolPool(), WeightedBy("road_length_500m"),
                      WeightedBy("ces_score"), WeightedBy("pollution_score"))
        counts = (0, 50, 100, 250, 500, 1000)
        models = (NoError(), NonDifferential(accuracy=0.1), NonDifferential(accuracy=0.25),
                  Differential(accuracy=0.1), Differential(accuracy=0.25),
                  NonDifferential(accuracy=0.5))
        spec = SweepSpec(strategies, counts, models)
        assert len(spec.scenarios()) == 180

    def test_fixed_row_order_and_failures(self):
        inputs = small_inputs()
        # second strategy's pool is smaller than the request: that scenario
        # fails, the sweep continues, and remaining rows keep spec order
        spec = SweepSpec((PurpleAirPool(), SchoolPool()), (2, 1000), (NoError(),))
        result = run_sweep(inputs, spec, trials=1, base_seed=0)
        assert len(result.failures) == 2  # both 1000-sensor scenarios
        strategies_in_rows = [r[0] for r in result.rows[::6]]
        assert strategies_in_rows == ["purpleair", "schools"]

    def test_worker_counts_bit_identical(self, tmp_path):
        inputs = small_inputs()
        spec = self.spec()
        outputs = {}
        for workers in (1, 2):
            result = run_sweep(inputs, spec, trials=2, base_seed=9, workers=workers)
            path = tmp_path / f"w{workers}.csv"
            write_results_csv(path, result.rows)
            outputs[workers] = path.read_bytes()
        assert outputs[1] == outputs[2]

    def test_results_csv_header_exact(self, tmp_path):
        path = tmp_path / "out.csv"
        write_results_csv(path, [])
        header = path.read_text().splitlines()[0]
        assert header == ("strategy,n_lcs,error_model,subset,weighting,trials,"
                          "mae,p95_abs_err,under_pct,over_pct,gap2plus_pct,"
                          "uhm_pct,error_sd,mean_dist_km,mean_dist_gap2plus_km")
        assert header == ",".join(RESULTS_HEADER)

    def test_nulls_serialize_as_empty_cells(self, tmp_path):
        inputs = small_inputs()
        spec = SweepSpec((PurpleAirPool(),), (0,), (NoError(),))
        result = run_sweep(inputs, spec, trials=1, base_seed=0)
        path = tmp_path / "out.csv"
        write_results_csv(path, result.rows)
        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 6
        assert all(r["error_sd"] == "" for r in rows)  # no sensors anywhere
        # every populated metric cell is a plain parseable number
        for row in rows:
            for name in METRIC_FIELDS:
                if row[name] != "":
                    float(row[name])


class TestErrorModelTokens:
    @pytest.mark.parametrize("model,token", [
        (NoError(), "none"),
        (NonDifferential(accuracy=0.1), "nondiff:0.1"),
        (NonDifferential(accuracy=0.25), "nondiff:0.25"),
        (Differential(accuracy=0.25), "diff:0.25"),
    ])
    def test_round_trip(self, model, token):
        assert format_error_model(model) == token
        assert parse_error_model(token) == model

    def test_dict_form(self):
        model = parse_error_model({"kind": "nondiff", "accuracy": 0.1,
                                   "reference_mean": 7.0, "clamp_nonnegative": True})
        assert model == NonDifferential(accuracy=0.1, reference_mean=7.0,
                                        clamp_nonnegative=True)

    def test_empirical_requires_table(self):
        with pytest.raises(ValueError):
            parse_error_model("empirical")


class TestConfigLoading:
    def write_inputs(self, tmp_path):
        cfg = SynthFieldConfig(n_grids_x=4, n_grids_y=4, n_days=3, seed=2)
        grid, field = generate_synthetic_field(cfg)
        save_grid(tmp_path / "grid.csv", grid)
        save_field(tmp_path / "field.aqf", field, fmt="binary")
        save_instruments(tmp_path / "monitors.csv",
                         [InstrumentSite(0, float(grid.x[0]), float(grid.y[0]))])

    def test_single_scenario_config(self, tmp_path):
        self.write_inputs(tmp_path)
        config = {"grid": "grid.csv", "field": "field.aqf",
                  "instruments": "monitors.csv", "strategy": "schools",
                  "n_lcs": 2, "error_model": "nondiff:0.25", "trials": 4,
                  "base_seed": 17}
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(config))
        cfg = load_config(path)
        assert cfg.trials == 4
        assert cfg.base_seed == 17
        assert cfg.scenarios == [Scenario(SchoolPool(), 2, NonDifferential(accuracy=0.25))]

    def test_sweep_config_and_overrides(self, tmp_path):
        self.write_inputs(tmp_path)
        config = {"grid": "grid.csv", "field": "field.aqf",
                  "strategies": ["purpleair", "weighted:ces_score"],
                  "n_lcs": [0, 1, "all"], "error_models": ["none", "diff:0.1"]}
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(config))
        cfg = load_config(path, trials_override=2, base_seed_override=5)
        assert cfg.trials == 2 and cfg.base_seed == 5
        assert len(cfg.scenarios) == 12

    def test_missing_paths_rejected(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"strategy": "schools"}))
        with pytest.raises(ValueError, match="grid"):
            load_config(path)


class TestBreakpointsOverride:
    def test_custom_breakpoints_change_classification(self):
        inputs = small_inputs()
        scenario = Scenario(PurpleAirPool(), 0, NoError())
        default = run_trial(inputs, scenario, 0, 0)
        # absurdly low edges make every reported day unhealthy-class
        custom = run_trial(inputs, scenario, 0, 0,
                           breakpoints=(0.1, 0.2, 0.3, 0.4, 0.5))
        assert default != custom

    def test_config_breakpoints_key(self, tmp_path):
        TestConfigLoading().write_inputs(tmp_path)
        config = {"grid": "grid.csv", "field": "field.aqf", "strategy": "schools",
                  "n_lcs": 1, "error_model": "none",
                  "aqi_breakpoints": [1.0, 2.0, 3.0, 4.0, 5.0]}
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(config))
        cfg = load_config(path)
        assert cfg.breakpoints == (1.0, 2.0, 3.0, 4.0, 5.0)


class TestResolveAllPool:
    def test_all_pool_resolution(self):
        inputs = small_inputs()
        n_pa = int(inputs.grid.has_purpleair.sum())
        assert resolve_n_lcs(Scenario(PurpleAirPool(), ALL_POOL, NoError()),
                             inputs.grid) == n_pa
        n_roads = int((inputs.grid.road_length_500m > 0).sum())
        assert resolve_n_lcs(Scenario(WeightedBy("road_length_500m"), ALL_POOL, NoError()),
                             inputs.grid) == n_roads

    def test_trials_csv(self, tmp_path):
        inputs = small_inputs()
        result = run_experiment(inputs, Scenario(PurpleAirPool(), 2, NoError()),
                                trials=2, base_seed=0)
        path = tmp_path / "trials.csv"
        write_trials_csv(path, result)
        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2 * 6
        assert {r["trial"] for r in rows} == {"0", "1"}
