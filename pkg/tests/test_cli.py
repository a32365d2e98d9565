import csv
import json

import pytest

from aqnetsim.cli import main, synthesize_monitor_sites
from aqnetsim.core import SynthFieldConfig, generate_synthetic_field
from aqnetsim.ingest import load_field, load_grid, load_instruments


def run_cli(*args):
    return main([str(a) for a in args])


@pytest.fixture
def synth_files(tmp_path):
    grid = tmp_path / "grid.csv"
    field = tmp_path / "field.aqf"
    monitors = tmp_path / "monitors.csv"
    run_cli("synth", "--nx", 6, "--ny", 6, "--days", 4, "--seed", 3,
            "--out-grid", grid, "--out-field", field,
            "--out-instruments", monitors, "--n-monitors", 2)
    return grid, field, monitors


class TestSynth:
    def test_outputs_load(self, synth_files):
        grid_path, field_path, monitors_path = synth_files
        grid = load_grid(grid_path)
        field = load_field(field_path)
        monitors = load_instruments(monitors_path)
        assert grid.n == 36
        assert field.n_grids == 36 and field.n_days == 4
        assert len(monitors) == 2

    def test_csv_field_format(self, tmp_path):
        field_csv = tmp_path / "field.csv"
        run_cli("synth", "--nx", 3, "--ny", 3, "--days", 2,
                "--out-grid", tmp_path / "g.csv", "--out-field", field_csv)
        field = load_field(field_csv)
        assert field.n_grids == 9

    def test_monitor_sampler_deterministic(self):
        cfg = SynthFieldConfig(n_grids_x=8, n_grids_y=8, n_days=2, seed=1)
        grid, _ = generate_synthetic_field(cfg)
        a = synthesize_monitor_sites(grid, 4, seed=9)
        b = synthesize_monitor_sites(grid, 4, seed=9)
        assert a == b


class TestSimulateAndSweep:
    def make_config(self, tmp_path, synth_files, **extra):
        grid, field, monitors = synth_files
        config = {"grid": grid.name, "field": field.name,
                  "instruments": monitors.name, "trials": 2, "base_seed": 1}
        config.update(extra)
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(config))
        return path

    def test_simulate(self, tmp_path, synth_files):
        cfg = self.make_config(tmp_path, synth_files, strategy="schools",
                               n_lcs=2, error_model="nondiff:0.25")
        out = tmp_path / "results.csv"
        trials_out = tmp_path / "trials.csv"
        run_cli("simulate", "--config", cfg, "--out", out, "--out-trials", trials_out)
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 6
        assert rows[0]["strategy"] == "schools"
        assert rows[0]["trials"] == "2"
        with open(trials_out) as fh:
            trial_rows = list(csv.DictReader(fh))
        assert len(trial_rows) == 12

    def test_sweep(self, tmp_path, synth_files):
        cfg = self.make_config(tmp_path, synth_files,
                               strategies=["purpleair", "schools"],
                               n_lcs=[0, 2], error_models=["none", "diff:0.1"])
        out = tmp_path / "sweep.csv"
        run_cli("sweep", "--config", cfg, "--out", out, "--workers", 1)
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2 * 2 * 2 * 6

    def test_sweep_failures_go_to_sidecar(self, tmp_path, synth_files, capsys):
        cfg = self.make_config(tmp_path, synth_files,
                               strategies=["purpleair"],
                               n_lcs=[1, 10_000],  # pool is far smaller than 10k
                               error_models=["none"])
        out = tmp_path / "sweep.csv"
        run_cli("sweep", "--config", cfg, "--out", out)
        errors_path = tmp_path / "sweep.csv.errors.csv"
        assert errors_path.exists()
        with open(errors_path) as fh:
            failures = list(csv.DictReader(fh))
        assert len(failures) == 1
        assert "purpleair" in failures[0]["scenario"]
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 6  # the valid scenario still produced its rows

    def test_simulate_rejects_sweep_config(self, tmp_path, synth_files):
        cfg = self.make_config(tmp_path, synth_files,
                               strategies=["purpleair", "schools"],
                               n_lcs=[0], error_models=["none"])
        with pytest.raises(SystemExit):
            run_cli("simulate", "--config", cfg, "--out", tmp_path / "r.csv")

    def test_simulate_scalar_overrides(self, tmp_path, synth_files):
        cfg = self.make_config(tmp_path, synth_files, strategy="schools",
                               n_lcs=2, error_model="none")
        out = tmp_path / "r.csv"
        run_cli("simulate", "--config", cfg, "--out", out,
                "--strategy", "purpleair", "--n-lcs", 1, "--error-model", "diff:0.1",
                "--trials", 1)
        with open(out) as fh:
            row = next(csv.DictReader(fh))
        assert row["strategy"] == "purpleair"
        assert row["n_lcs"] == "1"
        assert row["error_model"] == "diff:0.1"
        assert row["trials"] == "1"


class TestCalibrateCli:
    def test_calibrate(self, tmp_path, rng):
        # craft collocated rows whose corrected values vary with monitor pm25
        path = tmp_path / "collocated.csv"
        rows = ["pair_id,day,monitor_pm25,monitor_hours,pa_a_pm25,pa_b_pm25,"
                "completeness_a,completeness_b,rh"]
        for day in range(40):
            monitor = 6.0 + day * 2.0
            pa = (monitor - 5.75) / 0.524  # zero residual at rh=0
            rows.append(f"0,{day},{monitor},24,{pa},{pa},1,1,0")
        path.write_text("\n".join(rows) + "\n")
        table_out = tmp_path / "table.csv"
        stats_out = tmp_path / "stats.json"
        run_cli("calibrate", "--collocated", path, "--out-table", table_out,
                "--out-stats", stats_out)
        stats = json.loads(stats_out.read_text())
        assert stats["n_accepted"] == 40
        assert stats["rmse"] == pytest.approx(0.0, abs=1e-9)
        assert stats["r2"] == pytest.approx(1.0, abs=1e-9)
        from aqnetsim.errors import ResidualTable
        table = ResidualTable.from_csv(table_out)
        assert sum(p.size for p in table.pools) == 40


class TestStatsCli:
    def test_stats(self, tmp_path, synth_files):
        grid, field, monitors = synth_files
        out = tmp_path / "stats.csv"
        run_cli("stats", "--grid", grid, "--field", field, "--instruments", monitors,
                "--out", out)
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        names = [r["location_set"] for r in rows]
        assert names[0] == "overall"
        assert "school_sites" in names
        assert "monitor_sites" in names

    def test_stats_normalized_overall(self, tmp_path, synth_files):
        grid, field, _ = synth_files
        out = tmp_path / "stats.csv"
        run_cli("stats", "--grid", grid, "--field", field, "--normalize", "--out", out)
        with open(out) as fh:
            overall = next(csv.DictReader(fh))
        assert float(overall["mean_pm25"]) == 0.0
        assert float(overall["sd_pm25"]) == 1.0
