"""Collocation quality assurance, humidity correction, and residual-table
construction from paired monitor/sensor daily observations.

The pipeline: pair sites within the collocation radius, gate each daily
observation on monitor hours, channel completeness, channel agreement
(absolute OR relative), and the monitor concentration cap, average the two
sensor channels, apply the correction equation, and bucket the residuals
(monitor minus corrected sensor) by decile of the monitor concentration.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ResidualTable
from .ingest import CollocatedDailyObs, InstrumentSite

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CorrectionCoefficients:
    """Affine humidity correction: slope_pm * sensor + slope_rh * rh + intercept."""

    slope_pm: float = 0.524
    slope_rh: float = -0.0862
    intercept: float = 5.75

    def __post_init__(self):
        for v in (self.slope_pm, self.slope_rh, self.intercept):
            if not math.isfinite(v):
                raise ValueError("correction coefficients must be finite")


@dataclass(frozen=True)
class QaThresholds:
    min_monitor_hours: float = 18.0
    min_completeness: float = 0.90
    abs_channel_diff: float = 5.0
    rel_channel_diff: float = 0.61
    monitor_cap: float = 112.0
    pairing_radius_m: float = 50.0

    def __post_init__(self):
        for v in (self.min_monitor_hours, self.min_completeness, self.abs_channel_diff,
                  self.rel_channel_diff, self.monitor_cap, self.pairing_radius_m):
            if not (math.isfinite(v) and v > 0):
                raise ValueError("QA thresholds must be positive and finite")


@dataclass(frozen=True)
class AcceptedObs:
    """A QA-passing observation with the two sensor channels averaged."""

    monitor_pm25: float
    pa_pm25: float
    rh: float


@dataclass(frozen=True)
class FitStats:
    n_accepted: int
    rmse: float
    r2: float


def apply_correction(pa_pm25, rh, coeffs: CorrectionCoefficients = CorrectionCoefficients()):
    """Corrected concentration; affine, no clamping. Accepts scalars or arrays."""
    return coeffs.slope_pm * np.asarray(pa_pm25, dtype=np.float64) \
        + coeffs.slope_rh * np.asarray(rh, dtype=np.float64) + coeffs.intercept


def qa_filter(obs: CollocatedDailyObs,
              thresholds: QaThresholds = QaThresholds()) -> tuple[bool, float | None]:
    """Gate one observation; returns (accepted, channel-averaged sensor value).

    Channels must agree absolutely (|A-B| below the absolute threshold) or
    relatively (|A-B| over the channel mean below the relative threshold);
    a zero channel mean skips the relative test.
    """
    if obs.monitor_hours < thresholds.min_monitor_hours:
        return False, None
    if obs.completeness_a < thresholds.min_completeness \
            or obs.completeness_b < thresholds.min_completeness:
        return False, None
    diff = abs(obs.pa_a_pm25 - obs.pa_b_pm25)
    mean = (obs.pa_a_pm25 + obs.pa_b_pm25) / 2.0
    abs_ok = diff < thresholds.abs_channel_diff
    rel_ok = mean > 0.0 and diff / mean < thresholds.rel_channel_diff
    if not (abs_ok or rel_ok):
        return False, None
    if obs.monitor_pm25 > thresholds.monitor_cap:
        return False, None
    return True, mean


def run_qa(observations: Sequence[CollocatedDailyObs],
           thresholds: QaThresholds = QaThresholds()) -> list[AcceptedObs]:
    accepted = []
    for obs in observations:
        ok, pa_mean = qa_filter(obs, thresholds)
        if ok:
            accepted.append(AcceptedObs(obs.monitor_pm25, pa_mean, obs.rh))
    return accepted


def pair_collocated(monitor_sites: Sequence[InstrumentSite],
                    sensor_sites: Sequence[InstrumentSite],
                    radius_m: float = 50.0) -> list[tuple[int, int]]:
    """All (monitor id, sensor id) pairs within the Euclidean radius."""
    pairs = []
    for m in monitor_sites:
        for s in sensor_sites:
            if math.hypot(m.x - s.x, m.y - s.y) <= radius_m:
                pairs.append((m.id, s.id))
    return pairs


class CalibrationError(ValueError):
    pass


def build_residual_table(accepted: Sequence[AcceptedObs],
                         coeffs: CorrectionCoefficients = CorrectionCoefficients(),
                         ) -> tuple[ResidualTable, FitStats]:
    """Decile-bucketed residual pools plus RMSE and R2 of the correction.

    Decile boundaries are nearest-rank sample deciles of the monitor
    concentration; each residual joins the pool of its monitor value's
    decile (boundary ties go to the lower decile).
    """
    n = len(accepted)
    if n < 10:
        raise CalibrationError(f"need at least 10 accepted observations, got {n}")
    monitor = np.array([o.monitor_pm25 for o in accepted], dtype=np.float64)
    corrected = apply_correction(np.array([o.pa_pm25 for o in accepted]),
                                 np.array([o.rh for o in accepted]), coeffs)
    residuals = monitor - corrected

    sorted_monitor = np.sort(monitor)
    # nearest-rank percentile: rank = ceil(j*n/10), exact in integer arithmetic
    ranks = [(j * n + 9) // 10 - 1 for j in range(1, 10)]
    boundaries = sorted_monitor[ranks]
    if np.any(np.diff(boundaries) <= 0):
        raise CalibrationError("tied decile boundaries; supply more varied data "
                               "or merge pools upstream")

    # 1 + count of boundaries strictly below the value; ties take the lower decile.
    deciles = np.searchsorted(boundaries, monitor, side="left") + 1
    pools = []
    for k in range(1, 11):
        pool = residuals[deciles == k]
        if pool.size == 0:
            raise CalibrationError(f"decile {k} pool is empty; merge pools or "
                                   "supply more data")
        pools.append(pool)

    rmse = math.sqrt(float(np.mean(residuals ** 2)))
    ss_res = float(np.sum(residuals ** 2))
    ss_tot = float(np.sum((monitor - monitor.mean()) ** 2))
    if ss_tot == 0.0:
        log.warning("monitor values are constant; R2 undefined, reporting NaN")
        r2 = math.nan
    else:
        r2 = 1.0 - ss_res / ss_tot
    table = ResidualTable(boundaries=boundaries, pools=tuple(pools))
    return table, FitStats(n_accepted=n, rmse=rmse, r2=r2)
