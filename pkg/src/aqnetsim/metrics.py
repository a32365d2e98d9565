"""Evaluation metrics for one realized reporting scenario: absolute-error
statistics, classification error rates, unhealthy-shown-healthy rates, and
distance diagnostics, stratified by subgroup and weighting.

Grid-day weights are the grid's population density (or 1 when unweighted);
a weight applies to every day of its grid. Metrics with an empty
denominator are None rather than zero so trial averaging can skip them.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .aqi import DEFAULT_PM25_BREAKPOINTS, classify_codes
from .assignment import AssignmentMap
from .core import Grid, SubgroupMasks

log = logging.getLogger(__name__)

SUBSETS = ("overall", "q5_nonwhite", "q5_poverty")
WEIGHTINGS = ("population_density", "unweighted")

METRIC_FIELDS = ("mae", "p95_abs_err", "under_pct", "over_pct", "gap2plus_pct",
                 "uhm_pct", "error_sd", "mean_dist_km", "mean_dist_gap2plus_km")


@dataclass(frozen=True)
class MetricsRow:
    subset: str
    weighting: str
    mae: float | None
    p95_abs_err: float | None
    under_pct: float | None
    over_pct: float | None
    gap2plus_pct: float | None
    uhm_pct: float | None
    error_sd: float | None
    mean_dist_km: float | None
    mean_dist_gap2plus_km: float | None


@dataclass(frozen=True)
class MetricsReport:
    """Rows in fixed (subset x weighting) order."""

    rows: tuple[MetricsRow, ...]

    def row(self, subset: str, weighting: str) -> MetricsRow:
        for r in self.rows:
            if r.subset == subset and r.weighting == weighting:
                return r
        raise KeyError((subset, weighting))


def _empty_row(subset: str, weighting: str) -> MetricsRow:
    return MetricsRow(subset=subset, weighting=weighting,
                      **{name: None for name in METRIC_FIELDS})


def compute_metrics(true_values, shown_values, sensor_error, assignment: AssignmentMap,
                    grid: Grid, masks: SubgroupMasks,
                    breakpoints: Sequence[float] = DEFAULT_PM25_BREAKPOINTS,
                    ) -> MetricsReport:
    """Full metric suite over aligned (n_grids, n_days) matrices.

    ``sensor_error`` holds, per grid-day, the measurement error of the
    serving instrument (zero where a monitor serves); its SD is computed
    over sensor-served grid-days only. The weighted 95th percentile of
    absolute reporting error is the smallest value whose cumulative weight
    reaches 95% of the subset total.
    """
    true_values = np.ascontiguousarray(true_values, dtype=np.float64)
    shown_values = np.ascontiguousarray(shown_values, dtype=np.float64)
    sensor_error = np.ascontiguousarray(sensor_error, dtype=np.float64)
    if not (true_values.shape == shown_values.shape == sensor_error.shape):
        raise ValueError("true, shown, and sensor-error matrices must share one shape")
    n_grids, n_days = true_values.shape
    if n_grids != grid.n:
        raise ValueError("field matrices are not aligned with the grid")

    absdiff = np.abs(shown_values - true_values)
    true_cls = classify_codes(true_values, breakpoints)
    shown_cls = classify_codes(shown_values, breakpoints)
    order = np.argsort(absdiff, axis=None, kind="stable")
    absdiff_flat = absdiff.reshape(-1)

    subset_masks = {
        "overall": np.ones(grid.n, dtype=bool),
        "q5_nonwhite": masks.q5_nonwhite,
        "q5_poverty": masks.q5_poverty,
    }
    weight_vectors = {
        "population_density": grid.pop_density,
        "unweighted": np.ones(grid.n, dtype=np.float64),
    }

    rows = []
    for subset in SUBSETS:
        mask = np.ascontiguousarray(subset_masks[subset])
        for weighting in WEIGHTINGS:
            w = np.ascontiguousarray(weight_vectors[weighting])
            sums = kernels.scenario_sums(absdiff, true_cls, shown_cls, sensor_error,
                                         assignment.lcs_served, assignment.distance_m,
                                         w, mask)
            (w_days, abs_sum, under_w, over_w, gap2_w, unhealthy_w, uhm_w,
             err_w, err_sum, err_sq, dist_sum, dist_gap2) = sums
            if w_days == 0.0:
                log.warning("subset %r has zero total weight under %s weighting; "
                            "metrics are null", subset, weighting)
                rows.append(_empty_row(subset, weighting))
                continue
            w_masked = np.where(mask, w, 0.0)
            p95 = kernels.weighted_percentile(absdiff_flat, order, w_masked, n_days)
            if err_w > 0.0:
                err_mean = err_sum / err_w
                error_sd = float(np.sqrt(max(err_sq / err_w - err_mean * err_mean, 0.0)))
            else:
                error_sd = None
            rows.append(MetricsRow(
                subset=subset,
                weighting=weighting,
                mae=float(abs_sum / w_days),
                p95_abs_err=float(p95),
                under_pct=float(100.0 * under_w / w_days),
                over_pct=float(100.0 * over_w / w_days),
                gap2plus_pct=float(100.0 * gap2_w / w_days),
                uhm_pct=float(100.0 * uhm_w / unhealthy_w) if unhealthy_w > 0.0 else None,
                error_sd=error_sd,
                mean_dist_km=float(dist_sum / w_days / 1000.0),
                mean_dist_gap2plus_km=(float(dist_gap2 / gap2_w / 1000.0)
                                       if gap2_w > 0.0 else None),
            ))
    return MetricsReport(rows=tuple(rows))
