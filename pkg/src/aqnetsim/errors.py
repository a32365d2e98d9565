"""Simulated low-cost-sensor measurement error models.

Four families: no error, additive Gaussian with fixed SD (accuracy times a
reference mean), additive Gaussian whose SD scales with the true value, and
draws from an empirical residual pool matched on the decile of the true
value. Reported values may go negative unless the model's clamp flag is on;
classification handles flooring separately.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Union

import numpy as np

DEFAULT_REFERENCE_MEAN = 5.0  # ug/m3, regional annual average used to scale fixed-SD error


@dataclass(frozen=True, eq=False)
class ResidualTable:
    """Nine ascending cut points over true PM2.5 and a residual pool per decile."""

    boundaries: np.ndarray
    pools: tuple[np.ndarray, ...]

    def __post_init__(self):
        boundaries = np.asarray(self.boundaries, dtype=np.float64)
        if boundaries.shape != (9,):
            raise ValueError("a residual table needs exactly 9 decile boundaries")
        if not np.all(np.isfinite(boundaries)) or np.any(np.diff(boundaries) <= 0):
            raise ValueError("decile boundaries must be finite and strictly ascending")
        pools = tuple(np.asarray(p, dtype=np.float64) for p in self.pools)
        if len(pools) != 10:
            raise ValueError("a residual table needs exactly 10 pools")
        for k, pool in enumerate(pools, start=1):
            if pool.size == 0:
                raise ValueError(f"residual pool for decile {k} is empty")
            if not np.all(np.isfinite(pool)):
                raise ValueError(f"residual pool for decile {k} contains non-finite values")
        boundaries.setflags(write=False)
        for pool in pools:
            pool.setflags(write=False)
        object.__setattr__(self, "boundaries", boundaries)
        object.__setattr__(self, "pools", pools)

    def to_csv(self, path) -> None:
        # 9 rows "boundary,<value>" then one "<decile>,<residual>" row per sample.
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            for b in self.boundaries:
                writer.writerow(["boundary", repr(float(b))])
            for decile, pool in enumerate(self.pools, start=1):
                for r in pool:
                    writer.writerow([decile, repr(float(r))])

    @classmethod
    def from_csv(cls, path) -> "ResidualTable":
        boundaries: list[float] = []
        pools: list[list[float]] = [[] for _ in range(10)]
        with open(path, newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row:
                    continue
                if len(row) != 2:
                    raise ValueError(f"{path}: line {lineno}: expected 2 fields")
                tag, value = row
                if tag == "boundary":
                    boundaries.append(float(value))
                else:
                    decile = int(tag)
                    if not 1 <= decile <= 10:
                        raise ValueError(f"{path}: line {lineno}: decile {decile} out of range")
                    pools[decile - 1].append(float(value))
        return cls(boundaries=np.asarray(boundaries),
                   pools=tuple(np.asarray(p) for p in pools))


@dataclass(frozen=True)
class NoError:
    pass


@dataclass(frozen=True)
class NonDifferential:
    """Additive Normal(0, (accuracy * reference_mean)^2) error."""

    accuracy: float
    reference_mean: float = DEFAULT_REFERENCE_MEAN
    clamp_nonnegative: bool = False

    def __post_init__(self):
        if self.accuracy <= 0 or self.reference_mean <= 0:
            raise ValueError("accuracy and reference_mean must be positive")


@dataclass(frozen=True)
class Differential:
    """Additive Normal(0, (accuracy * true)^2) error; SD grows with the truth."""

    accuracy: float
    clamp_nonnegative: bool = False

    def __post_init__(self):
        if self.accuracy <= 0:
            raise ValueError("accuracy must be positive")


@dataclass(frozen=True)
class EmpiricalDecile:
    """Additive residual drawn from the pool matching the truth's decile."""

    table: ResidualTable
    clamp_nonnegative: bool = False


ErrorModel = Union[NoError, NonDifferential, Differential, EmpiricalDecile]


def decile_indices(true_pm25, boundaries) -> np.ndarray:
    """Decile (1..10) of each value: 1 + count of boundaries strictly below it.

    Values exactly on a boundary belong to the lower decile.
    """
    v = np.asarray(true_pm25, dtype=np.float64)
    b = np.asarray(boundaries, dtype=np.float64)
    return (np.searchsorted(b, v, side="left") + 1).astype(np.int64)


def decile_index(true_pm25: float, boundaries) -> int:
    return int(decile_indices(np.asarray([true_pm25]), boundaries)[0])


def simulate_measurements(true_values, model: ErrorModel,
                          rng: np.random.Generator) -> np.ndarray:
    """Vectorized simulated sensor readings for an array of true values."""
    truth = np.asarray(true_values, dtype=np.float64)
    if np.any(truth < 0.0):
        raise ValueError("true concentrations must be nonnegative")
    if isinstance(model, NoError):
        return truth.copy()
    if isinstance(model, NonDifferential):
        out = truth + rng.normal(0.0, model.accuracy * model.reference_mean,
                                 size=truth.shape)
    elif isinstance(model, Differential):
        out = truth + rng.normal(0.0, model.accuracy * truth)
    elif isinstance(model, EmpiricalDecile):
        deciles = decile_indices(truth, model.table.boundaries)
        out = truth.copy()
        for k in range(1, 11):
            sel = np.flatnonzero(deciles == k)
            if sel.size == 0:
                continue
            pool = model.table.pools[k - 1]
            out[sel] += pool[rng.integers(0, pool.size, size=sel.size)]
    else:
        raise TypeError(f"unknown error model {model!r}")
    if model.clamp_nonnegative:
        np.maximum(out, 0.0, out=out)
    return out


def simulate_measurement(true_pm25: float, model: ErrorModel,
                         rng: np.random.Generator) -> float:
    return float(simulate_measurements(np.asarray([true_pm25]), model, rng)[0])
