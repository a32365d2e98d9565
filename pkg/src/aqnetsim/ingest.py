"""Bit-exact file formats for grids, fields, instrument sites, collocated
observations, and road segments, plus the road-buffer length computation.

CSV is the canonical interchange; the dense ``AQF1`` binary field format
exists because full-scale fields are impractical as text. Parsers reject
out-of-range rows with their line numbers and never silently clamp.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Grid, Point, TruePm25Field

FIELD_MAGIC = b"AQF1"

GRID_HEADER = ["grid_id", "x_m", "y_m", "pop_density", "pct_poverty", "pct_nonwhite",
               "ces_score", "pollution_score", "road_length_500m", "school", "purpleair"]
TRACT_FALLBACK_COLUMN = "tract_pct_nonwhite"
FIELD_HEADER = ["grid_id", "day", "pm25"]
INSTRUMENT_HEADER = ["instrument_id", "x_m", "y_m"]
COLLOCATED_HEADER = ["pair_id", "day", "monitor_pm25", "monitor_hours", "pa_a_pm25",
                     "pa_b_pm25", "completeness_a", "completeness_b", "rh"]
ROAD_HEADER = ["x1", "y1", "x2", "y2"]


class IngestError(ValueError):
    """Malformed or out-of-range input data; message lists offending lines."""


@dataclass(frozen=True)
class RoadSegment:
    a: Point
    b: Point

    def __post_init__(self):
        if self.a.x == self.b.x and self.a.y == self.b.y:
            raise ValueError("degenerate road segment: endpoints coincide")


@dataclass(frozen=True)
class InstrumentSite:
    """A fixed reference-monitor location from the instruments file."""

    id: int
    x: float
    y: float


@dataclass(frozen=True)
class CollocatedDailyObs:
    """One paired daily observation from a collocated monitor/sensor site."""

    pair_id: int
    day: int
    monitor_pm25: float
    monitor_hours: float
    pa_a_pm25: float
    pa_b_pm25: float
    completeness_a: float
    completeness_b: float
    rh: float


def _fail(path, problems: list[str]) -> None:
    if problems:
        shown = problems[:20]
        more = f" (+{len(problems) - 20} more)" if len(problems) > 20 else ""
        raise IngestError(f"{path}: " + "; ".join(shown) + more)


def _check_header(path, header: list[str] | None, expected: list[str],
                  optional: Sequence[str] = ()) -> list[str]:
    if header is None:
        raise IngestError(f"{path}: empty file, expected header {','.join(expected)}")
    clean = [h.strip() for h in header]
    if clean[:len(expected)] != expected or any(h not in optional for h in clean[len(expected):]):
        raise IngestError(f"{path}: bad header {','.join(header)!r}, "
                          f"expected {','.join(expected)}")
    return clean


def load_grid(path) -> Grid:
    """Parse the grid CSV, backfilling missing pct_nonwhite from the optional
    tract-level column; rows lacking both are rejected."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        cols = _check_header(path, header, GRID_HEADER, optional=(TRACT_FALLBACK_COLUMN,))
        has_tract = TRACT_FALLBACK_COLUMN in cols
        rows = []
        problems: list[str] = []
        seen: set[int] = set()
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(cols):
                problems.append(f"line {lineno}: expected {len(cols)} fields, got {len(row)}")
                continue
            try:
                gid = int(row[0])
                x, y = float(row[1]), float(row[2])
                pop = float(row[3])
                pov = float(row[4])
                nonwhite_raw = row[5].strip()
                ces, pol, road = float(row[6]), float(row[7]), float(row[8])
                school = _parse_bool(row[9])
                purpleair = _parse_bool(row[10])
            except ValueError as exc:
                problems.append(f"line {lineno}: {exc}")
                continue
            if nonwhite_raw:
                nonwhite = float(nonwhite_raw)
            elif has_tract and row[11].strip():
                nonwhite = float(row[11])
            else:
                problems.append(f"line {lineno}: pct_nonwhite missing and no "
                                f"{TRACT_FALLBACK_COLUMN} fallback")
                continue
            if gid in seen:
                problems.append(f"line {lineno}: duplicate grid_id {gid}")
                continue
            seen.add(gid)
            for name, value, lo, hi in (("pct_poverty", pov, 0.0, 1.0),
                                        ("pct_nonwhite", nonwhite, 0.0, 1.0)):
                if not lo <= value <= hi:
                    problems.append(f"line {lineno}: {name}={value!r} outside [{lo}, {hi}]")
                    break
            else:
                if min(pop, ces, pol, road) < 0:
                    problems.append(f"line {lineno}: negative weight column")
                    continue
                rows.append((gid, x, y, pop, pov, nonwhite, ces, pol, road,
                             school, purpleair))
        _fail(path, problems)
    if not rows:
        raise IngestError(f"{path}: no grid rows")
    rows.sort(key=lambda r: r[0])
    ids = [r[0] for r in rows]
    if ids != list(range(len(rows))):
        raise IngestError(f"{path}: grid ids must be dense in [0, {len(rows)})")
    arr = list(zip(*rows))
    return Grid(x=arr[1], y=arr[2], pop_density=arr[3], pct_poverty=arr[4],
                pct_nonwhite=arr[5], ces_score=arr[6], pollution_score=arr[7],
                road_length_500m=arr[8], has_school=arr[9], has_purpleair=arr[10])


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in {"1", "true"}:
        return True
    if t in {"0", "false"}:
        return False
    raise ValueError(f"invalid boolean {text!r}")


def save_grid(path, grid: Grid) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(GRID_HEADER)
        for i in range(grid.n):
            writer.writerow([i, repr(float(grid.x[i])), repr(float(grid.y[i])),
                             repr(float(grid.pop_density[i])),
                             repr(float(grid.pct_poverty[i])),
                             repr(float(grid.pct_nonwhite[i])),
                             repr(float(grid.ces_score[i])),
                             repr(float(grid.pollution_score[i])),
                             repr(float(grid.road_length_500m[i])),
                             int(grid.has_school[i]), int(grid.has_purpleair[i])])


def load_field(path) -> TruePm25Field:
    """Load a field from long CSV or AQF1 binary (sniffed by magic bytes)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == FIELD_MAGIC:
        return _load_field_binary(path)
    return _load_field_csv(path)


def _load_field_csv(path) -> TruePm25Field:
    entries: dict[tuple[int, int], float] = {}
    problems: list[str] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        _check_header(path, header, FIELD_HEADER)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                gid, day, pm = int(row[0]), int(row[1]), float(row[2])
            except (ValueError, IndexError) as exc:
                problems.append(f"line {lineno}: {exc}")
                continue
            if not math.isfinite(pm) or pm < 0.0:
                problems.append(f"line {lineno}: pm25={pm!r} must be finite and nonnegative")
                continue
            if (gid, day) in entries:
                problems.append(f"line {lineno}: duplicate (grid_id, day) ({gid}, {day})")
                continue
            entries[(gid, day)] = pm
    _fail(path, problems)
    if not entries:
        raise IngestError(f"{path}: no field rows")
    n_grids = max(g for g, _ in entries) + 1
    n_days = max(d for _, d in entries) + 1
    if len(entries) != n_grids * n_days:
        raise IngestError(f"{path}: incomplete field: {len(entries)} entries for "
                          f"{n_grids} grids x {n_days} days")
    values = np.empty((n_grids, n_days), dtype=np.float32)
    for (g, d), pm in entries.items():
        values[g, d] = np.float32(pm)
    return TruePm25Field(values)


def _load_field_binary(path) -> TruePm25Field:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != FIELD_MAGIC:
            raise IngestError(f"{path}: bad magic {magic!r}")
        head = fh.read(8)
        if len(head) != 8:
            raise IngestError(f"{path}: truncated header")
        n_grids, n_days = struct.unpack("<II", head)
        data = np.fromfile(fh, dtype="<f4")
    if data.size != n_grids * n_days:
        raise IngestError(f"{path}: expected {n_grids * n_days} values, found {data.size}")
    return TruePm25Field(data.reshape(n_grids, n_days))


def save_field(path, fld: TruePm25Field, fmt: str = "csv") -> None:
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(FIELD_HEADER)
            for g in range(fld.n_grids):
                for d in range(fld.n_days):
                    writer.writerow([g, d, repr(float(fld.values[g, d]))])
    elif fmt == "binary":
        with open(path, "wb") as fh:
            fh.write(FIELD_MAGIC)
            fh.write(struct.pack("<II", fld.n_grids, fld.n_days))
            fld.values.astype("<f4").tofile(fh)
    else:
        raise ValueError(f"unknown field format {fmt!r}")


def load_instruments(path) -> list[InstrumentSite]:
    sites: list[InstrumentSite] = []
    problems: list[str] = []
    seen: set[int] = set()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        _check_header(path, header, INSTRUMENT_HEADER)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                sid, x, y = int(row[0]), float(row[1]), float(row[2])
            except (ValueError, IndexError) as exc:
                problems.append(f"line {lineno}: {exc}")
                continue
            if not (math.isfinite(x) and math.isfinite(y)):
                problems.append(f"line {lineno}: non-finite coordinates")
                continue
            if sid in seen:
                problems.append(f"line {lineno}: duplicate instrument_id {sid}")
                continue
            seen.add(sid)
            sites.append(InstrumentSite(sid, x, y))
    _fail(path, problems)
    return sites


def save_instruments(path, sites: Sequence[InstrumentSite]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(INSTRUMENT_HEADER)
        for s in sites:
            writer.writerow([s.id, repr(float(s.x)), repr(float(s.y))])


_COLLOCATED_RANGES = (("monitor_pm25", 0.0, math.inf), ("monitor_hours", 0.0, 24.0),
                      ("pa_a_pm25", 0.0, math.inf), ("pa_b_pm25", 0.0, math.inf),
                      ("completeness_a", 0.0, 1.0), ("completeness_b", 0.0, 1.0),
                      ("rh", 0.0, 100.0))


def load_collocated(path) -> list[CollocatedDailyObs]:
    obs: list[CollocatedDailyObs] = []
    problems: list[str] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        _check_header(path, header, COLLOCATED_HEADER)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                pair_id, day = int(row[0]), int(row[1])
                values = [float(v) for v in row[2:9]]
            except (ValueError, IndexError) as exc:
                problems.append(f"line {lineno}: {exc}")
                continue
            bad = False
            for (name, lo, hi), value in zip(_COLLOCATED_RANGES, values):
                if not (math.isfinite(value) and lo <= value <= hi):
                    problems.append(f"line {lineno}: {name}={value!r} outside [{lo}, {hi}]")
                    bad = True
                    break
            if bad:
                continue
            obs.append(CollocatedDailyObs(pair_id, day, *values))
    _fail(path, problems)
    return obs


def save_collocated(path, obs: Sequence[CollocatedDailyObs]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(COLLOCATED_HEADER)
        for o in obs:
            writer.writerow([o.pair_id, o.day, repr(o.monitor_pm25), repr(o.monitor_hours),
                             repr(o.pa_a_pm25), repr(o.pa_b_pm25), repr(o.completeness_a),
                             repr(o.completeness_b), repr(o.rh)])


def load_road_segments(path) -> list[RoadSegment]:
    segments: list[RoadSegment] = []
    problems: list[str] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        _check_header(path, header, ROAD_HEADER)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                x1, y1, x2, y2 = (float(v) for v in row[:4])
                segments.append(RoadSegment(Point(x1, y1), Point(x2, y2)))
            except ValueError as exc:
                problems.append(f"line {lineno}: {exc}")
    _fail(path, problems)
    return segments


def save_road_segments(path, segments: Sequence[RoadSegment]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ROAD_HEADER)
        for s in segments:
            writer.writerow([repr(s.a.x), repr(s.a.y), repr(s.b.x), repr(s.b.y)])


def road_length_in_buffer(segments: Sequence[RoadSegment], center: Point,
                          radius: float) -> float:
    """Total length of segment portions inside the closed disk, clipped
    analytically (each segment intersects the disk in one parameter interval)."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    total = 0.0
    for seg in segments:
        dx = seg.b.x - seg.a.x
        dy = seg.b.y - seg.a.y
        fx = seg.a.x - center.x
        fy = seg.a.y - center.y
        a = dx * dx + dy * dy
        b = 2.0 * (fx * dx + fy * dy)
        c = fx * fx + fy * fy - radius * radius
        disc = b * b - 4.0 * a * c
        if disc < 0.0:
            continue
        root = math.sqrt(disc)
        t_lo = max((-b - root) / (2.0 * a), 0.0)
        t_hi = min((-b + root) / (2.0 * a), 1.0)
        if t_hi > t_lo:
            total += (t_hi - t_lo) * math.sqrt(a)
    return total


def compute_road_lengths(grid: Grid, segments: Sequence[RoadSegment],
                         radius: float = 500.0) -> np.ndarray:
    """Road length within the buffer radius of every grid centroid."""
    return np.array([road_length_in_buffer(segments, Point(float(grid.x[i]), float(grid.y[i])),
                                           radius) for i in range(grid.n)])
