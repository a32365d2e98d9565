import csv

import pytest

from aqplots.data import SchemaError, load_results
from aqplots.tables import NULL_CELL, parse_filter, table_summary


def parse_markdown(markdown):
    lines = [l for l in markdown.strip().splitlines() if l.startswith("|")]
    header = [c.strip() for c in lines[0].strip("|").split("|")]
    rows = [[c.strip() for c in line.strip("|").split("|")] for line in lines[2:]]
    return header, rows


class TestTableSummary:
    def test_shape_blocks_by_error_model_rows_by_subset(self, sweep_csv):
        markdown = table_summary(sweep_csv, {"strategy": "purpleair", "n_lcs": "100",
                                             "weighting": "population_density"})
        _, rows = parse_markdown(markdown)
        assert len(rows) == 2 * 3  # 2 error models x 3 subsets
        assert [r[0] for r in rows] == ["none"] * 3 + ["nondiff:0.25"] * 3
        assert [r[1] for r in rows[:3]] == ["overall", "q5_nonwhite", "q5_poverty"]

    def test_cells_equal_csv_values_at_display_precision(self, sweep_csv):
        filters = {"strategy": "schools", "n_lcs": "50",
                   "weighting": "population_density"}
        markdown = table_summary(sweep_csv, filters)
        header, rows = parse_markdown(markdown)
        with open(sweep_csv) as fh:
            csv_rows = [r for r in csv.DictReader(fh)
                        if all(r[k] == v for k, v in filters.items())]
        metric_by_label = {"MAE (ug/m3)": "mae", "UHM (%)": "uhm_pct",
                           "Under-classified (%)": "under_pct",
                           "Over-classified (%)": "over_pct",
                           "95th pct error (ug/m3)": "p95_abs_err",
                           "Sensor error SD (ug/m3)": "error_sd"}
        assert len(rows) == len(csv_rows)
        for md_row, csv_row in zip(rows, csv_rows):
            for label, column in metric_by_label.items():
                shown = md_row[header.index(label)]
                raw = csv_row[column]
                if raw == "":
                    assert shown == NULL_CELL
                else:
                    assert shown == f"{float(raw):.2f}"
                    assert float(shown) == pytest.approx(float(raw), abs=0.005)

    def test_null_cells_render_as_dash(self, sweep_csv):
        markdown = table_summary(sweep_csv, {"strategy": "purpleair", "n_lcs": "0",
                                             "weighting": "unweighted"})
        header, rows = parse_markdown(markdown)
        sd_col = header.index("Sensor error SD (ug/m3)")
        assert all(r[sd_col] == NULL_CELL for r in rows)

    def test_empty_filter_result_rejected(self, sweep_csv):
        with pytest.raises(SchemaError, match="no rows"):
            table_summary(sweep_csv, {"strategy": "nonexistent"})

    def test_unknown_filter_column_rejected(self, sweep_csv):
        with pytest.raises(SchemaError, match="unknown filter column"):
            table_summary(sweep_csv, {"bogus": "1"})

    def test_missing_column_schema_error(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("strategy,mae\npurpleair,1.0\n")
        with pytest.raises(SchemaError, match="missing required columns"):
            table_summary(path, {})

    def test_idempotent_and_input_untouched(self, sweep_csv):
        before = sweep_csv.read_bytes()
        first = table_summary(sweep_csv, {"n_lcs": "50"})
        second = table_summary(sweep_csv, {"n_lcs": "50"})
        assert first == second
        assert sweep_csv.read_bytes() == before


class TestParseFilter:
    def test_parses_pairs(self):
        assert parse_filter("a=1,b = x") == {"a": "1", "b": "x"}

    def test_empty(self):
        assert parse_filter("") == {}

    def test_malformed(self):
        with pytest.raises(ValueError):
            parse_filter("oops")


class TestAcceptanceSecondary:
    def test_two_model_three_strategy_render_and_table(self, sweep_csv, tmp_path):
        """Faceted chart + headline-shaped table from one sweep CSV; null uhm
        cells make gaps, not failures."""
        from aqplots.charts import PlotSpec, plot_metric_vs_n
        out = tmp_path / "uhm.svg"
        plot_metric_vs_n(PlotSpec(csv_path=str(sweep_csv), metric="uhm_pct",
                                  out_path=str(out)))
        content = out.read_text()
        assert content.count("error model:") == 2
        markdown = table_summary(sweep_csv, {"strategy": "purpleair", "n_lcs": "50",
                                             "weighting": "population_density"})
        header, rows = parse_markdown(markdown)
        assert len(rows) == 6
        data = load_results(sweep_csv)
        wanted = data.filtered({"strategy": "purpleair", "n_lcs": "50",
                                "weighting": "population_density"})
        for md_row, csv_row in zip(rows, wanted.rows):
            mae_shown = md_row[header.index("MAE (ug/m3)")]
            assert float(mae_shown) == pytest.approx(float(csv_row["mae"]), abs=0.005)
        print("\n[acceptance] 10 secondary chart + table render from sweep CSV: PASS")
