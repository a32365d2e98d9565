"""Scenario summary tables in markdown, shaped like the headline results
table: one block per error model, one row per population subset."""

from __future__ import annotations

from .data import SchemaError, as_float, load_results

TABLE_COLUMNS = (
    ("error_sd", "Sensor error SD (ug/m3)"),
    ("mae", "MAE (ug/m3)"),
    ("p95_abs_err", "95th pct error (ug/m3)"),
    ("under_pct", "Under-classified (%)"),
    ("over_pct", "Over-classified (%)"),
    ("uhm_pct", "UHM (%)"),
)

NULL_CELL = "—"


def format_cell(cell: str) -> str:
    value = as_float(cell)
    if value is None:
        return NULL_CELL
    return f"{value:.2f}"


def table_summary(csv_path, filters: dict[str, str] | None = None) -> str:
    """Markdown table of the headline metrics for the filtered rows.

    Cells show the CSV values at two-decimal display precision; empty CSV
    cells render as a dash. Rows are grouped by error model in file order,
    subsets in file order within each block.
    """
    data = load_results(csv_path)
    rows = data.filtered(filters or {})
    if not rows.rows:
        raise SchemaError(f"no rows match filter {filters!r}")

    header = ["Scenario (error model)", "Subset"] + [label for _, label in TABLE_COLUMNS]
    lines = ["| " + " | ".join(header) + " |",
             "|" + "|".join(["---"] * len(header)) + "|"]
    for model in rows.distinct("error_model"):
        block = [r for r in rows.rows if r["error_model"] == model]
        for row in block:
            cells = [model, row["subset"]]
            cells += [format_cell(row[name]) for name, _ in TABLE_COLUMNS]
            lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def parse_filter(text: str) -> dict[str, str]:
    """Parse "key=value,key=value" filter syntax."""
    filters: dict[str, str] = {}
    if not text:
        return filters
    for chunk in text.split(","):
        if "=" not in chunk:
            raise ValueError(f"bad filter chunk {chunk!r}, expected key=value")
        key, value = chunk.split("=", 1)
        filters[key.strip()] = value.strip()
    return filters
