"""Exact nearest-instrument lookup for grid centroids plus distance
diagnostics.

Queries are exact: results always equal a brute-force linear scan, with
distance ties broken by the lowest instrument id. Instruments sit at their
host grid's centroid, so a hosting grid self-assigns at distance zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Sequence

import numpy as np

from . import kernels
from .core import Grid, Point


class InstrumentKind(IntEnum):
    REFERENCE_MONITOR = 0
    LOW_COST_SENSOR = 1


@dataclass(frozen=True)
class Instrument:
    """A placed instrument; monitors and sensors share one dense id space,
    monitors first."""

    id: int
    kind: InstrumentKind
    location: Point
    host_grid: int


class NearestIndex:
    """Immutable exact nearest-neighbor index over instrument locations."""

    def __init__(self, x, y):
        self._x = np.ascontiguousarray(x, dtype=np.float64)
        self._y = np.ascontiguousarray(y, dtype=np.float64)
        if self._x.shape[0] == 0:
            raise ValueError("cannot build an index over zero instruments")
        if self._x.shape != self._y.shape:
            raise ValueError("x and y must have matching shapes")

    @property
    def n(self) -> int:
        return self._x.shape[0]

    def query_many(self, qx, qy) -> tuple[np.ndarray, np.ndarray]:
        """Nearest candidate index and distance (meters) per query point."""
        return kernels.nearest_neighbor(qx, qy, self._x, self._y)

    def query(self, x: float, y: float) -> tuple[int, float]:
        idx, dist = self.query_many(np.asarray([x]), np.asarray([y]))
        return int(idx[0]), float(dist[0])


def build_index(instruments: Sequence[Instrument]) -> NearestIndex:
    """Index over instruments; requires ids dense and ascending 0..n-1 so
    positional results map directly to instrument ids."""
    if len(instruments) == 0:
        raise ValueError("cannot build an index over zero instruments")
    ids = [inst.id for inst in instruments]
    if ids != list(range(len(instruments))):
        raise ValueError("instrument ids must be dense and ascending from 0")
    x = np.array([inst.location.x for inst in instruments])
    y = np.array([inst.location.y for inst in instruments])
    return NearestIndex(x, y)


@dataclass(frozen=True, eq=False)
class AssignmentMap:
    """Per grid: nearest instrument id, exact distance (m), and whether the
    serving instrument is a low-cost sensor."""

    instrument_ids: np.ndarray
    distance_m: np.ndarray
    lcs_served: np.ndarray

    def __post_init__(self):
        ids = np.asarray(self.instrument_ids, dtype=np.int64)
        dist = np.asarray(self.distance_m, dtype=np.float64)
        lcs = np.asarray(self.lcs_served, dtype=bool)
        if not (ids.shape == dist.shape == lcs.shape):
            raise ValueError("assignment arrays must share one shape")
        for arr in (ids, dist, lcs):
            arr.setflags(write=False)
        object.__setattr__(self, "instrument_ids", ids)
        object.__setattr__(self, "distance_m", dist)
        object.__setattr__(self, "lcs_served", lcs)


def assign_all(grid: Grid, instruments: Sequence[Instrument]) -> AssignmentMap:
    """Exact nearest instrument for every grid centroid."""
    index = build_index(instruments)
    ids, dist = index.query_many(grid.x, grid.y)
    kinds = np.array([int(inst.kind) for inst in instruments], dtype=np.int8)
    return AssignmentMap(instrument_ids=ids, distance_m=dist,
                         lcs_served=kinds[ids] == int(InstrumentKind.LOW_COST_SENSOR))


def nearest_centroid_index(grid: Grid) -> NearestIndex:
    """Index over grid centroids, for snapping arbitrary sites to host grids."""
    return NearestIndex(grid.x, grid.y)


def mean_distance(assignment: AssignmentMap, weights, mask=None) -> float | None:
    """Weighted mean nearest-instrument distance in km over masked grids;
    None when the mask is empty or carries no weight."""
    w = np.asarray(weights, dtype=np.float64)
    if np.any(w < 0.0):
        raise ValueError("weights must be nonnegative")
    if mask is None:
        mask = np.ones(w.shape, dtype=bool)
    else:
        mask = np.asarray(mask, dtype=bool)
    total = float(w[mask].sum())
    if mask.sum() == 0 or total <= 0.0:
        return None
    return float((w[mask] * assignment.distance_m[mask]).sum()) / total / 1000.0
