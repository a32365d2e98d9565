"""Faceted metric-versus-sensor-count line charts.

One panel per error model, one line per strategy, x = number of sensors,
y = the chosen metric. Null metric cells become gaps in the line. Output
is deterministic for a fixed input (pinned SVG hash salt, no timestamps).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402 - backend must be set first

from .data import METRIC_COLUMNS, SchemaError, as_float, load_results

matplotlib.rcParams["svg.hashsalt"] = "aqplots"

METRIC_LABELS = {
    "mae": "MAE (ug/m3)",
    "p95_abs_err": "95th percentile abs. error (ug/m3)",
    "under_pct": "Under-classified (%)",
    "over_pct": "Over-classified (%)",
    "gap2plus_pct": "Misclassified by 2+ levels (%)",
    "uhm_pct": "Unhealthy shown healthy (%)",
    "error_sd": "Sensor error SD (ug/m3)",
    "mean_dist_km": "Mean distance to instrument (km)",
    "mean_dist_gap2plus_km": "Mean distance, 2+ level misses (km)",
}


@dataclass(frozen=True)
class PlotSpec:
    csv_path: str
    metric: str
    out_path: str
    subset: str = "overall"
    weighting: str = "population_density"
    strategies: tuple[str, ...] = field(default=())  # empty = all in the CSV


def _sort_key(n_lcs: str):
    try:
        return (0, float(n_lcs))
    except ValueError:
        return (1, n_lcs)


def plot_metric_vs_n(spec: PlotSpec) -> str:
    """Render the chart and return the output path."""
    data = load_results(spec.csv_path)
    if spec.metric not in METRIC_COLUMNS:
        raise SchemaError(f"unknown metric {spec.metric!r}; "
                          f"available: {', '.join(METRIC_COLUMNS)}")
    available = data.distinct("strategy")
    strategies = list(spec.strategies) or available
    unknown = [s for s in strategies if s not in available]
    if unknown:
        raise SchemaError(f"unknown strategies {', '.join(unknown)}; "
                          f"available: {', '.join(available)}")
    rows = data.filtered({"subset": spec.subset, "weighting": spec.weighting})
    if not rows.rows:
        raise SchemaError(f"no rows for subset={spec.subset!r} "
                          f"weighting={spec.weighting!r}")
    panels = rows.distinct("error_model")

    fig, axes = plt.subplots(1, len(panels), figsize=(4.2 * len(panels), 3.4),
                             squeeze=False)
    for ax, model in zip(axes[0], panels):
        panel_rows = [r for r in rows.rows if r["error_model"] == model]
        for strategy in strategies:
            points = sorted(((r["n_lcs"], as_float(r[spec.metric]))
                             for r in panel_rows if r["strategy"] == strategy),
                            key=lambda p: _sort_key(p[0]))
            xs = [float(n) for n, _ in points]
            ys = [math.nan if v is None else v for _, v in points]
            ax.plot(xs, ys, marker="o", markersize=3, label=strategy)
        ax.set_title(f"error model: {model}", fontsize=9)
        ax.set_xlabel("sensors deployed")
        ax.set_ylabel(METRIC_LABELS.get(spec.metric, spec.metric))
        ax.grid(True, alpha=0.3)
    axes[0][-1].legend(fontsize=7)
    fig.suptitle(f"{spec.subset}, {spec.weighting}", fontsize=10)
    fig.tight_layout()
    fig.savefig(spec.out_path, metadata=_stable_metadata(spec.out_path))
    plt.close(fig)
    return spec.out_path


def _stable_metadata(out_path: str) -> dict:
    # strip volatile fields so byte output depends only on the input data
    if str(out_path).endswith(".svg"):
        return {"Date": None}
    if str(out_path).endswith(".png"):
        return {"Software": None}
    return {}
