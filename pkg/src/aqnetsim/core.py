"""Domain types, synthetic-field generation, quintile subgroup masks, and
descriptive statistics shared by the rest of the simulator.

Coordinates are planar meters in a caller-chosen equal-area projection so
Euclidean distances are exact. All container types are immutable after
construction (arrays are marked read-only) and safe for concurrent reads.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels

log = logging.getLogger(__name__)

# Attribute columns carried per grid cell, in canonical order.
GRID_ATTRS = ("pop_density", "pct_poverty", "pct_nonwhite", "ces_score",
              "pollution_score", "road_length_500m")
FRACTION_ATTRS = ("pct_poverty", "pct_nonwhite")


@dataclass(frozen=True)
class Point:
    """Planar location in meters (easting, northing)."""

    x: float
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        for v in (self.x, self.y):
            if not math.isfinite(v) or abs(v) > 1e7:
                raise ValueError(f"coordinate out of range: {v!r}")


def haversine_m(lon1_deg: float, lat1_deg: float, lon2_deg: float, lat2_deg: float) -> float:
    """Great-circle distance in meters for degree inputs (optional lat/lon mode)."""
    r = 6_371_000.0
    p1 = math.radians(lat1_deg)
    p2 = math.radians(lat2_deg)
    dp = p2 - p1
    dl = math.radians(lon2_deg - lon1_deg)
    a = math.sin(dp / 2.0) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2.0) ** 2
    return 2.0 * r * math.asin(math.sqrt(a))


@dataclass(frozen=True)
class GridCell:
    """One 1 km grid cell: centroid plus census and siting attributes."""

    id: int
    centroid: Point
    pop_density: float
    pct_poverty: float
    pct_nonwhite: float
    ces_score: float
    pollution_score: float
    road_length_500m: float
    has_school: bool
    has_purpleair: bool


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


class Grid:
    """Columnar, immutable collection of grid cells with dense ids [0, n)."""

    __slots__ = ("x", "y", "pop_density", "pct_poverty", "pct_nonwhite",
                 "ces_score", "pollution_score", "road_length_500m",
                 "has_school", "has_purpleair")

    def __init__(self, x, y, pop_density, pct_poverty, pct_nonwhite, ces_score,
                 pollution_score, road_length_500m, has_school, has_purpleair):
        self.x = _readonly(np.asarray(x, dtype=np.float64))
        self.y = _readonly(np.asarray(y, dtype=np.float64))
        n = self.x.shape[0]
        floats = {
            "pop_density": pop_density,
            "pct_poverty": pct_poverty,
            "pct_nonwhite": pct_nonwhite,
            "ces_score": ces_score,
            "pollution_score": pollution_score,
            "road_length_500m": road_length_500m,
        }
        for name, raw in floats.items():
            setattr(self, name, _readonly(np.asarray(raw, dtype=np.float64)))
        self.has_school = _readonly(np.asarray(has_school, dtype=bool))
        self.has_purpleair = _readonly(np.asarray(has_purpleair, dtype=bool))
        for name in ("y", *floats, "has_school", "has_purpleair"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"{name} must have shape ({n},)")
        self._validate()

    def _validate(self) -> None:
        coords = np.concatenate([self.x, self.y])
        if not np.all(np.isfinite(coords)) or np.any(np.abs(coords) > 1e7):
            raise ValueError("grid coordinates must be finite and within 1e7 m")
        for name in FRACTION_ATTRS:
            arr = getattr(self, name)
            if np.any(arr < 0.0) or np.any(arr > 1.0) or not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} values must lie in [0, 1]")
        for name in ("pop_density", "ces_score", "pollution_score", "road_length_500m"):
            arr = getattr(self, name)
            if np.any(arr < 0.0) or not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} values must be finite and nonnegative")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def __len__(self) -> int:
        return self.n

    def cell(self, grid_id: int) -> GridCell:
        i = int(grid_id)
        return GridCell(
            id=i,
            centroid=Point(float(self.x[i]), float(self.y[i])),
            pop_density=float(self.pop_density[i]),
            pct_poverty=float(self.pct_poverty[i]),
            pct_nonwhite=float(self.pct_nonwhite[i]),
            ces_score=float(self.ces_score[i]),
            pollution_score=float(self.pollution_score[i]),
            road_length_500m=float(self.road_length_500m[i]),
            has_school=bool(self.has_school[i]),
            has_purpleair=bool(self.has_purpleair[i]),
        )

    def cells(self) -> Iterable[GridCell]:
        return (self.cell(i) for i in range(self.n))

    @classmethod
    def from_cells(cls, cells: Sequence[GridCell]) -> "Grid":
        cells = sorted(cells, key=lambda c: c.id)
        ids = [c.id for c in cells]
        if ids != list(range(len(cells))):
            raise ValueError("cell ids must be unique and dense in [0, n)")
        return cls(
            x=[c.centroid.x for c in cells],
            y=[c.centroid.y for c in cells],
            pop_density=[c.pop_density for c in cells],
            pct_poverty=[c.pct_poverty for c in cells],
            pct_nonwhite=[c.pct_nonwhite for c in cells],
            ces_score=[c.ces_score for c in cells],
            pollution_score=[c.pollution_score for c in cells],
            road_length_500m=[c.road_length_500m for c in cells],
            has_school=[c.has_school for c in cells],
            has_purpleair=[c.has_purpleair for c in cells],
        )


@dataclass(frozen=True, eq=False)
class TruePm25Field:
    """Dense grid x day matrix of true PM2.5 concentrations (ug/m3, float32)."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float32)
        if values.ndim != 2:
            raise ValueError("field values must be a (n_grids, n_days) matrix")
        if not np.all(np.isfinite(values)) or np.any(values < 0.0):
            raise ValueError("field values must be finite and nonnegative")
        object.__setattr__(self, "values", _readonly(values))

    @property
    def n_grids(self) -> int:
        return self.values.shape[0]

    @property
    def n_days(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class SubgroupMasks:
    """Boolean membership of each grid in the top-quintile subgroups."""

    q5_nonwhite: np.ndarray
    q5_poverty: np.ndarray
    nonwhite_threshold: float
    poverty_threshold: float

    def __post_init__(self):
        object.__setattr__(self, "q5_nonwhite", _readonly(np.asarray(self.q5_nonwhite, bool)))
        object.__setattr__(self, "q5_poverty", _readonly(np.asarray(self.q5_poverty, bool)))


@dataclass(frozen=True)
class SynthFieldConfig:
    """Knobs for the synthetic desk-scale stand-in field.

    The field is clamp(base(day) + hotspots(grid) + noise, 0, cap) where
    base is a seasonal cosine plus an AR(1) perturbation and hotspots are
    Gaussian bumps. ``noise_sd`` drives both the AR(1) innovations and the
    iid per-grid-day noise.
    """

    n_grids_x: int
    n_grids_y: int
    n_days: int
    n_hotspots: int = 5
    hotspot_amplitude: float = 6.0
    hotspot_length_scale_m: float = 8_000.0
    baseline_mean: float = 8.0
    baseline_amplitude: float = 3.0
    ar1_coef: float = 0.6
    noise_sd: float = 0.8
    cap: float = 112.0
    cell_size_m: float = 1_000.0
    seed: int = 0

    def __post_init__(self):
        if self.n_grids_x <= 0 or self.n_grids_y <= 0:
            raise ValueError("grid dimensions must be positive")
        if self.n_days <= 0:
            raise ValueError("n_days must be positive")
        if self.n_hotspots < 0:
            raise ValueError("n_hotspots must be nonnegative")
        if self.cell_size_m <= 0 or self.hotspot_length_scale_m <= 0 or self.cap <= 0:
            raise ValueError("scales must be positive")
        if self.hotspot_amplitude < 0 or self.baseline_amplitude < 0 or self.noise_sd < 0:
            raise ValueError("amplitudes and noise sd must be nonnegative")
        if not 0.0 <= self.ar1_coef < 1.0:
            raise ValueError("AR(1) coefficient must lie in [0, 1)")

    @property
    def n_grids(self) -> int:
        return self.n_grids_x * self.n_grids_y


SEASONAL_PERIOD_DAYS = 365.0


def generate_synthetic_field(cfg: SynthFieldConfig) -> tuple[Grid, TruePm25Field]:
    """Deterministic synthetic grid and daily PM2.5 field for a given seed.

    Census attributes are synthesized so that pollution_score correlates
    positively with hotspot proximity, population clusters around a few
    centers, and school/purpleair flags skew toward dense (and, for
    purpleair, lower-poverty) cells.
    """
    rng = np.random.default_rng(cfg.seed)
    nx, ny, n_days = cfg.n_grids_x, cfg.n_grids_y, cfg.n_days
    n = cfg.n_grids
    cell = cfg.cell_size_m
    gx = (np.tile(np.arange(nx), ny) + 0.5) * cell
    gy = (np.repeat(np.arange(ny), nx) + 0.5) * cell
    width, height = nx * cell, ny * cell

    k = cfg.n_hotspots
    hot_x = rng.uniform(0.0, width, size=k)
    hot_y = rng.uniform(0.0, height, size=k)
    amp = cfg.hotspot_amplitude * rng.uniform(0.5, 1.5, size=k)
    scale = cfg.hotspot_length_scale_m * rng.uniform(0.5, 1.5, size=k)
    bumps = kernels.gaussian_bumps(gx, gy, hot_x, hot_y, amp, scale)

    days = np.arange(n_days, dtype=np.float64)
    seasonal = cfg.baseline_mean + cfg.baseline_amplitude * np.cos(
        2.0 * np.pi * days / SEASONAL_PERIOD_DAYS)
    ar = np.zeros(n_days)
    innov = rng.normal(0.0, cfg.noise_sd, size=n_days) if cfg.noise_sd > 0 else np.zeros(n_days)
    state = 0.0
    for d in range(n_days):
        state = cfg.ar1_coef * state + innov[d]
        ar[d] = state
    base = seasonal + ar

    noise = (rng.normal(0.0, cfg.noise_sd, size=(n, n_days))
             if cfg.noise_sd > 0 else np.zeros((n, n_days)))
    values = np.clip(base[None, :] + bumps[:, None] + noise, 0.0, cfg.cap)
    fld = TruePm25Field(values.astype(np.float32))

    # Census attributes (plausible stand-ins, deterministic for the seed).
    bmax = float(bumps.max())
    burden = bumps / bmax if bmax > 0.0 else np.zeros(n)
    pollution_score = np.clip(20.0 + 55.0 * burden + rng.normal(0.0, 6.0, n), 0.0, 100.0)
    pct_poverty = np.clip(rng.beta(2.0, 8.0, n) + 0.15 * burden, 0.0, 1.0)
    pct_nonwhite = np.clip(0.5 * pct_poverty + rng.beta(2.0, 3.0, n), 0.0, 1.0)
    ces_score = np.clip(0.6 * pollution_score + 55.0 * pct_poverty
                        + rng.normal(0.0, 4.0, n), 0.0, 100.0)

    n_centers = max(1, min(3, k)) if k > 0 else 1
    cx = hot_x[:n_centers] if k > 0 else np.array([width / 2.0])
    cy = hot_y[:n_centers] if k > 0 else np.array([height / 2.0])
    city_scale = max(width, height) / 6.0
    city = kernels.gaussian_bumps(gx, gy, cx, cy, np.ones(cx.shape[0]),
                                  np.full(cx.shape[0], city_scale))
    city = city / city.max() if city.max() > 0 else city
    pop_density = np.exp(rng.normal(3.0, 1.2, n)) * (1.0 + 40.0 * city)

    road_present = rng.random(n) < np.clip(0.03 + 0.25 * city, 0.0, 0.6)
    road_length = np.where(road_present, rng.gamma(2.0, 1000.0, n), 0.0)
    dens_rank = pop_density / (pop_density + np.median(pop_density))
    has_school = rng.random(n) < np.clip(0.25 * dens_rank, 0.0, 0.9)
    has_purpleair = rng.random(n) < np.clip(0.3 * dens_rank * (1.0 - pct_poverty), 0.0, 0.9)
    # Keep both pools nonempty so pool strategies stay usable on tiny grids.
    if not has_school.any():
        has_school = has_school.copy()
        has_school[int(np.argmax(pop_density))] = True
    if not has_purpleair.any():
        has_purpleair = has_purpleair.copy()
        has_purpleair[int(np.argmax(pop_density))] = True

    grid = Grid(gx, gy, pop_density, pct_poverty, pct_nonwhite, ces_score,
                pollution_score, road_length, has_school, has_purpleair)
    return grid, fld


def nearest_rank_threshold(values, weights, quantile: float) -> float:
    """Smallest value whose cumulative weight reaches quantile * total."""
    v = np.asarray(values, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if v.size == 0:
        raise ValueError("cannot take a percentile of no values")
    if np.any(w < 0.0):
        raise ValueError("weights must be nonnegative")
    order = np.argsort(v, kind="stable")
    cum = np.cumsum(w[order])
    total = cum[-1]
    if total <= 0.0:
        raise ValueError("total weight must be positive")
    i = int(np.searchsorted(cum, quantile * total, side="left"))
    i = min(i, v.size - 1)
    return float(v[order[i]])


def compute_quintile_masks(grid: Grid, weighting: str = "none") -> SubgroupMasks:
    """Top-quintile membership for % nonwhite and % poverty.

    The threshold is the nearest-rank 80th percentile of the attribute
    (population-density weighted when ``weighting="population"``) and
    membership requires strictly exceeding it, so ties fall outside the
    top quintile. An all-equal attribute therefore yields an empty mask,
    which is signalled with a warning rather than an error.
    """
    if grid.n < 5:
        raise ValueError("quintiles require at least 5 grid cells")
    if weighting == "population":
        weights = grid.pop_density
        if float(weights.sum()) <= 0.0:
            raise ValueError("population weighting requires positive total density")
    elif weighting == "none":
        weights = np.ones(grid.n)
    else:
        raise ValueError(f"unknown weighting {weighting!r}")

    masks = {}
    thresholds = {}
    for name, attr in (("nonwhite", grid.pct_nonwhite), ("poverty", grid.pct_poverty)):
        threshold = nearest_rank_threshold(attr, weights, 0.8)
        mask = attr > threshold
        if not mask.any():
            log.warning("top-quintile mask for %s is empty (threshold %.6g ties all values)",
                        name, threshold)
        masks[name] = mask
        thresholds[name] = threshold
    return SubgroupMasks(q5_nonwhite=masks["nonwhite"], q5_poverty=masks["poverty"],
                         nonwhite_threshold=thresholds["nonwhite"],
                         poverty_threshold=thresholds["poverty"])


@dataclass(frozen=True)
class StatsRow:
    """Mean and SD of each attribute over one location set."""

    location_set: str
    n_grids: int
    mean_pm25: float
    sd_pm25: float
    mean_pct_poverty: float
    sd_pct_poverty: float
    mean_ces_score: float
    sd_ces_score: float
    mean_pct_nonwhite: float
    sd_pct_nonwhite: float
    mean_pop_density: float
    sd_pop_density: float


STATS_COLUMNS = ("pm25", "pct_poverty", "ces_score", "pct_nonwhite", "pop_density")


def _weighted_mean_sd(values: np.ndarray, weights: np.ndarray) -> tuple[float, float]:
    total = float(weights.sum())
    mean = float(weights @ values) / total
    var = float(weights @ ((values - mean) ** 2)) / total
    return mean, math.sqrt(max(var, 0.0))


def descriptive_stats(grid: Grid, fld: TruePm25Field, masks: SubgroupMasks,
                      site_sets: Mapping[str, np.ndarray] | None = None,
                      weighted: bool = True, normalize: bool = False) -> list[StatsRow]:
    """Per-location-set summary of annual PM2.5 and census attributes.

    Rows cover the whole grid, the two top-quintile subgroups, and any
    extra named site sets (boolean masks or index arrays). When
    ``weighted``, means and SDs use population density as weights, except
    the population-density column itself which is always unweighted. With
    ``normalize``, rows are z-scaled against the overall population so the
    overall row reads exactly mean 0, SD 1.
    """
    if fld.n_grids != grid.n:
        raise ValueError("field and grid are not aligned")
    annual = fld.values.mean(axis=1, dtype=np.float64)
    columns = {
        "pm25": annual,
        "pct_poverty": grid.pct_poverty,
        "ces_score": grid.ces_score,
        "pct_nonwhite": grid.pct_nonwhite,
        "pop_density": grid.pop_density,
    }

    sets: dict[str, np.ndarray] = {
        "overall": np.ones(grid.n, dtype=bool),
        "q5_nonwhite": masks.q5_nonwhite,
        "q5_poverty": masks.q5_poverty,
    }
    for name, sel in (site_sets or {}).items():
        sel = np.asarray(sel)
        if sel.dtype == bool:
            mask = sel
        else:
            mask = np.zeros(grid.n, dtype=bool)
            mask[sel] = True
        sets[name] = mask

    def stats_for(mask: np.ndarray, column: str) -> tuple[float, float]:
        vals = columns[column][mask]
        if weighted and column != "pop_density":
            w = grid.pop_density[mask]
            if float(w.sum()) <= 0.0:
                w = np.ones(vals.size)
        else:
            w = np.ones(vals.size)
        return _weighted_mean_sd(vals, w)

    overall_ref = {c: stats_for(sets["overall"], c) for c in STATS_COLUMNS}

    rows: list[StatsRow] = []
    for name, mask in sets.items():
        count = int(mask.sum())
        if count == 0:
            log.warning("location set %r is empty; row omitted", name)
            continue
        means_sds = {}
        for column in STATS_COLUMNS:
            mean, sd = stats_for(mask, column)
            if normalize:
                ref_mean, ref_sd = overall_ref[column]
                if ref_sd == 0.0:
                    log.warning("column %s is constant overall; normalized stats are NaN", column)
                    mean, sd = math.nan, math.nan
                else:
                    mean = (mean - ref_mean) / ref_sd
                    sd = sd / ref_sd
            means_sds[column] = (mean, sd)
        rows.append(StatsRow(
            location_set=name,
            n_grids=count,
            mean_pm25=means_sds["pm25"][0], sd_pm25=means_sds["pm25"][1],
            mean_pct_poverty=means_sds["pct_poverty"][0],
            sd_pct_poverty=means_sds["pct_poverty"][1],
            mean_ces_score=means_sds["ces_score"][0],
            sd_ces_score=means_sds["ces_score"][1],
            mean_pct_nonwhite=means_sds["pct_nonwhite"][0],
            sd_pct_nonwhite=means_sds["pct_nonwhite"][1],
            mean_pop_density=means_sds["pop_density"][0],
            sd_pop_density=means_sds["pop_density"][1],
        ))
    return rows
