"""Read-only access to the simulator's results CSV."""

from __future__ import annotations

import csv
from dataclasses import dataclass

REQUIRED_COLUMNS = ("strategy", "n_lcs", "error_model", "subset", "weighting",
                    "trials", "mae", "p95_abs_err", "under_pct", "over_pct",
                    "gap2plus_pct", "uhm_pct", "error_sd", "mean_dist_km",
                    "mean_dist_gap2plus_km")

METRIC_COLUMNS = REQUIRED_COLUMNS[6:]

KEY_COLUMNS = ("strategy", "n_lcs", "error_model", "subset", "weighting")


class SchemaError(ValueError):
    """The CSV does not carry the expected results columns."""


@dataclass(frozen=True)
class ResultsData:
    """Rows as dicts of raw strings, in file order."""

    columns: tuple[str, ...]
    rows: tuple[dict, ...]

    def distinct(self, column: str) -> list[str]:
        """Distinct values of a column in first-appearance order."""
        seen: dict[str, None] = {}
        for row in self.rows:
            seen.setdefault(row[column], None)
        return list(seen)

    def filtered(self, filters: dict[str, str]) -> "ResultsData":
        for key in filters:
            if key not in self.columns:
                raise SchemaError(f"unknown filter column {key!r}; "
                                  f"available: {', '.join(KEY_COLUMNS)}")
        rows = tuple(r for r in self.rows
                     if all(r[k] == v for k, v in filters.items()))
        return ResultsData(columns=self.columns, rows=rows)


def load_results(path) -> ResultsData:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        columns = tuple(reader.fieldnames or ())
        missing = [c for c in REQUIRED_COLUMNS if c not in columns]
        if missing:
            raise SchemaError(f"{path}: missing required columns: {', '.join(missing)}")
        rows = tuple(reader)
    return ResultsData(columns=columns, rows=rows)


def as_float(cell: str) -> float | None:
    """Numeric cell value; empty cells are nulls."""
    text = cell.strip()
    return float(text) if text else None
