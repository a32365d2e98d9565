"""Six-level PM2.5 air quality classification and misclassification typing."""

from __future__ import annotations

from enum import IntEnum
from typing import Sequence

import numpy as np

# Upper concentration edges (ug/m3) separating the six classes, 24-hour
# PM2.5 standard in force in 2016. Overridable everywhere they are used.
DEFAULT_PM25_BREAKPOINTS: tuple[float, ...] = (12.0, 35.4, 55.4, 150.4, 250.4)


class AqiClass(IntEnum):
    GREEN = 0
    YELLOW = 1
    ORANGE = 2
    RED = 3
    PURPLE = 4
    MAROON = 5


class Misclass(IntEnum):
    CORRECT = 0
    UNDER = 1
    OVER = 2


def validate_breakpoints(breakpoints: Sequence[float]) -> np.ndarray:
    edges = np.asarray(breakpoints, dtype=np.float64)
    if edges.shape != (5,):
        raise ValueError("breakpoints must contain exactly 5 upper edges")
    if not np.all(np.isfinite(edges)) or edges[0] <= 0 or np.any(np.diff(edges) <= 0):
        raise ValueError("breakpoints must be positive and strictly ascending")
    return edges


def classify_codes(pm25, breakpoints: Sequence[float] = DEFAULT_PM25_BREAKPOINTS) -> np.ndarray:
    """Vectorized class codes (0..5) for an array of concentrations.

    Negative readings are floored to zero for classification only, and the
    concentration is truncated to one decimal before the edge lookup.
    """
    edges = validate_breakpoints(breakpoints)
    v = np.maximum(np.asarray(pm25, dtype=np.float64), 0.0)
    truncated = np.floor(v * 10.0) / 10.0
    return np.searchsorted(edges, truncated, side="left").astype(np.int8)


def classify(pm25: float, breakpoints: Sequence[float] = DEFAULT_PM25_BREAKPOINTS) -> AqiClass:
    return AqiClass(int(classify_codes(np.asarray([pm25]), breakpoints)[0]))


def is_healthy(aqi_class: AqiClass | int) -> bool:
    """Green and Yellow count as healthy; Orange and above do not."""
    cls = int(aqi_class)
    if not 0 <= cls <= 5:
        raise ValueError(f"invalid AQI class {aqi_class!r}")
    return cls <= AqiClass.YELLOW


def misclass(true_class: AqiClass | int, shown_class: AqiClass | int) -> tuple[Misclass, int]:
    """Type of misclassification and the absolute level gap between classes."""
    t = int(true_class)
    s = int(shown_class)
    for cls in (t, s):
        if not 0 <= cls <= 5:
            raise ValueError(f"invalid AQI class {cls!r}")
    if t > s:
        kind = Misclass.UNDER
    elif s > t:
        kind = Misclass.OVER
    else:
        kind = Misclass.CORRECT
    return kind, abs(t - s)
