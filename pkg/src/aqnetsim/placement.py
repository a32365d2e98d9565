"""Sensor-host selection strategies over grid cells.

Pool strategies pick uniformly at random from flagged grids; weighted
strategies sample all grids without replacement with probability
proportional to a nonnegative attribute, via exponential-key order
statistics (equivalent in distribution to sequential draws with removal
and renormalization, single pass). Zero-weight grids are never selectable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .core import Grid

WEIGHT_ATTRIBUTES = ("road_length_500m", "ces_score", "pollution_score")

ALL_POOL = "all"


@dataclass(frozen=True)
class PurpleAirPool:
    pass


@dataclass(frozen=True)
class SchoolPool:
    pass


@dataclass(frozen=True)
class WeightedBy:
    attribute: str

    def __post_init__(self):
        if self.attribute not in WEIGHT_ATTRIBUTES:
            raise ValueError(f"attribute must be one of {WEIGHT_ATTRIBUTES}, "
                             f"got {self.attribute!r}")


PlacementStrategy = Union[PurpleAirPool, SchoolPool, WeightedBy]


def strategy_name(strategy: PlacementStrategy) -> str:
    if isinstance(strategy, PurpleAirPool):
        return "purpleair"
    if isinstance(strategy, SchoolPool):
        return "schools"
    if isinstance(strategy, WeightedBy):
        return f"weighted:{strategy.attribute}"
    raise TypeError(f"unknown strategy {strategy!r}")


def parse_strategy(name: str) -> PlacementStrategy:
    if name == "purpleair":
        return PurpleAirPool()
    if name == "schools":
        return SchoolPool()
    if name.startswith("weighted:"):
        return WeightedBy(name.split(":", 1)[1])
    raise ValueError(f"unknown strategy name {name!r}")


@dataclass(frozen=True, eq=False)
class PlacementResult:
    """Selected host grid ids (sorted, unique) for one strategy draw."""

    selected: np.ndarray
    strategy: PlacementStrategy
    n_requested: int

    def __post_init__(self):
        sel = np.asarray(self.selected, dtype=np.int64)
        if sel.size != np.unique(sel).size:
            raise ValueError("selected grid ids must be unique")
        sel = np.sort(sel)
        sel.setflags(write=False)
        object.__setattr__(self, "selected", sel)


def weighted_sample_without_replacement(weights, n: int,
                                        rng: np.random.Generator) -> np.ndarray:
    """Indices of n draws proportional to weight, without replacement.

    Draws an exponential key per positive-weight item (key = Exp(1)/weight)
    and keeps the n smallest, which matches sequential weighted draws with
    removal. Deterministic for a given rng state.
    """
    w = np.asarray(weights, dtype=np.float64)
    if np.any(w < 0.0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return np.empty(0, dtype=np.int64)
    positive = np.flatnonzero(w > 0.0)
    if n > positive.size:
        raise ValueError(f"requested {n} draws but only {positive.size} items "
                         "have positive weight")
    keys = rng.standard_exponential(positive.size) / w[positive]
    if n == positive.size:
        chosen = positive
    else:
        chosen = positive[np.argpartition(keys, n - 1)[:n]]
    return np.sort(chosen).astype(np.int64)


def eligible_count(strategy: PlacementStrategy, grid: Grid) -> int:
    """Pool size (flagged grids) or count of positive-weight grids."""
    if isinstance(strategy, PurpleAirPool):
        return int(grid.has_purpleair.sum())
    if isinstance(strategy, SchoolPool):
        return int(grid.has_school.sum())
    if isinstance(strategy, WeightedBy):
        return int((getattr(grid, strategy.attribute) > 0.0).sum())
    raise TypeError(f"unknown strategy {strategy!r}")


def select_sites(strategy: PlacementStrategy, n: int, grid: Grid,
                 rng: np.random.Generator) -> PlacementResult:
    """Draw n host grids per the strategy; n=0 yields the no-sensor baseline."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return PlacementResult(np.empty(0, dtype=np.int64), strategy, 0)
    if isinstance(strategy, (PurpleAirPool, SchoolPool)):
        flags = grid.has_purpleair if isinstance(strategy, PurpleAirPool) else grid.has_school
        pool = np.flatnonzero(flags)
        if pool.size == 0:
            raise ValueError(f"{strategy_name(strategy)} pool is empty")
        if n > pool.size:
            raise ValueError(f"requested {n} sites but the {strategy_name(strategy)} "
                             f"pool has only {pool.size}")
        chosen = np.sort(rng.choice(pool, size=n, replace=False))
    elif isinstance(strategy, WeightedBy):
        chosen = weighted_sample_without_replacement(getattr(grid, strategy.attribute), n, rng)
    else:
        raise TypeError(f"unknown strategy {strategy!r}")
    return PlacementResult(chosen, strategy, n)
