"""Parse heterogeneous taxi trace files into a canonical per-taxi point stream.

Supported input layouts:

* ``canonical``      -- ``taxi_id;timestamp;lat;lon[;occupancy]`` with UTC epoch seconds
* ``rome``           -- ``id;YYYY-MM-DD HH:MM:SS.ffffff+TZ;POINT(lat lon)``
* ``sanfrancisco``   -- ``lat lon occupancy epoch`` (one file per cab, id supplied by caller)
* ``beijing``        -- ``id,YYYY-MM-DD HH:MM:SS,lon,lat`` (naive local time, offset supplied)

All adapters normalize timestamps to UTC epoch seconds. Occupancy flags, where
present, ride along as optional metadata and play no role downstream.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import IO, Iterable, Iterator, Sequence


@dataclass(frozen=True)
class GpsPoint:
    """One timestamped position of one taxi (timestamp = UTC epoch seconds)."""

    taxi_id: str
    timestamp: float
    lat: float
    lon: float
    occupied: bool | None = None


@dataclass(frozen=True)
class CityBounds:
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def __post_init__(self) -> None:
        if not (self.lat_min < self.lat_max and self.lon_min < self.lon_max):
            raise ValueError(f"invalid bounds: {self}")

    def contains(self, lat: float, lon: float) -> bool:
        """Closed-interval containment on all four edges."""
        return (self.lat_min <= lat <= self.lat_max
                and self.lon_min <= lon <= self.lon_max)


@dataclass(frozen=True)
class GridCounts:
    """Row-major uniform-grid cell counts; row 0 is the southernmost band."""

    bounds: CityBounds
    rows: int
    cols: int
    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ValueError("rows and cols must be >= 1")
        if len(self.counts) != self.rows * self.cols:
            raise ValueError(
                f"expected {self.rows * self.cols} counts, got {len(self.counts)}")
        if any(c < 0 for c in self.counts):
            raise ValueError("counts must be non-negative")


@dataclass
class ParseReport:
    """Per-line accounting: every input line is accepted, deduplicated or rejected."""

    total_lines: int = 0
    accepted: int = 0
    deduplicated: int = 0
    rejects: list[tuple[int, str]] = field(default_factory=list)

    @property
    def rejected(self) -> int:
        return len(self.rejects)


FORMATS = ("canonical", "rome", "sanfrancisco", "beijing")

_ROME_TZ_RE = re.compile(r"([+-]\d{2})(:?\d{2})?$")
_ROME_FRAC_RE = re.compile(r"\.(\d+)")


def _check_point(taxi_id: str, ts: float, lat: float, lon: float) -> str | None:
    """Return a rejection reason for an out-of-validity point, else None."""
    if not math.isfinite(ts) or ts < 0:
        return f"timestamp out of range: {ts}"
    if not (math.isfinite(lat) and -90.0 <= lat <= 90.0):
        return f"latitude out of range: {lat}"
    if not (math.isfinite(lon) and -180.0 <= lon <= 180.0):
        return f"longitude out of range: {lon}"
    if not taxi_id:
        return "empty taxi id"
    return None


def _parse_canonical(line: str, ctx: _AdapterContext) -> GpsPoint:
    parts = line.split(";")
    if len(parts) not in (4, 5):
        raise ValueError(f"expected 4 or 5 ';'-separated fields, got {len(parts)}")
    occupied = None
    if len(parts) == 5:
        if parts[4] not in ("0", "1"):
            raise ValueError(f"bad occupancy flag: {parts[4]!r}")
        occupied = parts[4] == "1"
    return GpsPoint(parts[0].strip(), float(parts[1]), float(parts[2]),
                    float(parts[3]), occupied)


def _parse_rome_timestamp(text: str) -> float:
    """Rome timestamps carry an explicit UTC offset, sometimes hour-only ('+01')."""
    text = text.strip()
    m = _ROME_TZ_RE.search(text)
    if m and m.group(2) is None:
        text = text + ":00"
    # fromisoformat on 3.10 wants exactly 6 fractional digits
    frac = _ROME_FRAC_RE.search(text)
    if frac:
        digits = frac.group(1)[:6].ljust(6, "0")
        text = text[:frac.start()] + "." + digits + text[frac.end():]
    return datetime.fromisoformat(text).timestamp()


def _parse_rome(line: str, ctx: _AdapterContext) -> GpsPoint:
    parts = line.split(";")
    if len(parts) != 3:
        raise ValueError(f"expected 3 ';'-separated fields, got {len(parts)}")
    pos = parts[2].strip()
    if not (pos.startswith("POINT(") and pos.endswith(")")):
        raise ValueError(f"bad position field: {pos!r}")
    coords = pos[len("POINT("):-1].split()
    if len(coords) != 2:
        raise ValueError(f"bad POINT contents: {pos!r}")
    ts = _parse_rome_timestamp(parts[1])
    return GpsPoint(parts[0].strip(), ts, float(coords[0]), float(coords[1]))


def _parse_sanfrancisco(line: str, ctx: _AdapterContext) -> GpsPoint:
    parts = line.split()
    if len(parts) != 4:
        raise ValueError(f"expected 4 space-separated fields, got {len(parts)}")
    if parts[2] not in ("0", "1"):
        raise ValueError(f"bad occupancy flag: {parts[2]!r}")
    return GpsPoint(ctx.taxi_id, float(parts[3]), float(parts[0]),
                    float(parts[1]), parts[2] == "1")


def _parse_beijing(line: str, ctx: _AdapterContext) -> GpsPoint:
    parts = line.split(",")
    if len(parts) != 4:
        raise ValueError(f"expected 4 ','-separated fields, got {len(parts)}")
    local = datetime.strptime(parts[1].strip(), "%Y-%m-%d %H:%M:%S")
    tz = timezone(timedelta(hours=ctx.utc_offset_hours))
    ts = local.replace(tzinfo=tz).timestamp()
    # T-Drive order is longitude first
    return GpsPoint(parts[0].strip(), ts, float(parts[3]), float(parts[2]))


@dataclass(frozen=True)
class _AdapterContext:
    taxi_id: str | None
    utc_offset_hours: float


_LINE_PARSERS = {
    "canonical": _parse_canonical,
    "rome": _parse_rome,
    "sanfrancisco": _parse_sanfrancisco,
    "beijing": _parse_beijing,
}


def _iter_lines(source: IO[bytes] | IO[str] | Iterable[str]) -> Iterator[str]:
    for raw in source:
        yield raw.decode("utf-8", errors="replace") if isinstance(raw, bytes) else raw


def parse_trace(source: IO[bytes] | IO[str] | Iterable[str],
                fmt: str,
                *,
                taxi_id: str | None = None,
                utc_offset_hours: float = 0.0) -> tuple[list[GpsPoint], ParseReport]:
    """Parse one trace file into points grouped by taxi and sorted by time.

    Returns the points plus a ParseReport. Malformed or out-of-validity lines
    land in the report's rejects with their 1-based line number; repeated
    (taxi_id, timestamp) pairs keep the first occurrence and count as
    deduplicated. Grouping order is ascending taxi_id.
    """
    if fmt not in _LINE_PARSERS:
        raise ValueError(f"unknown trace format {fmt!r}; expected one of {FORMATS}")
    if fmt == "sanfrancisco" and taxi_id is None:
        raise ValueError("sanfrancisco files carry no inline taxi id; pass taxi_id=")
    parse_line = _LINE_PARSERS[fmt]
    ctx = _AdapterContext(taxi_id=taxi_id, utc_offset_hours=utc_offset_hours)

    report = ParseReport()
    seen: set[tuple[str, float]] = set()
    by_taxi: dict[str, list[GpsPoint]] = {}
    for lineno, line in enumerate(_iter_lines(source), start=1):
        report.total_lines += 1
        line = line.strip()
        if not line:
            report.rejects.append((lineno, "blank line"))
            continue
        try:
            point = parse_line(line, ctx)
        except ValueError as exc:
            report.rejects.append((lineno, str(exc)))
            continue
        reason = _check_point(point.taxi_id, point.timestamp, point.lat, point.lon)
        if reason is not None:
            report.rejects.append((lineno, reason))
            continue
        key = (point.taxi_id, point.timestamp)
        if key in seen:
            report.deduplicated += 1
            continue
        seen.add(key)
        by_taxi.setdefault(point.taxi_id, []).append(point)
        report.accepted += 1

    points: list[GpsPoint] = []
    for tid in sorted(by_taxi):
        points.extend(sorted(by_taxi[tid], key=lambda p: p.timestamp))
    return points, report


def parse_trace_file(path: str, fmt: str, *, taxi_id: str | None = None,
                     utc_offset_hours: float = 0.0) -> tuple[list[GpsPoint], ParseReport]:
    with open(path, "rb") as fh:
        return parse_trace(fh, fmt, taxi_id=taxi_id, utc_offset_hours=utc_offset_hours)


def clip_to_bounds(points: Sequence[GpsPoint], bounds: CityBounds) -> list[GpsPoint]:
    """Keep points inside the closed bounding box, preserving order."""
    return [p for p in points if bounds.contains(p.lat, p.lon)]


def format_number(x: float) -> str:
    """Integral floats print as ints; everything else as shortest round-trip repr."""
    if isinstance(x, float) and x.is_integer() and abs(x) < 2**53:
        return str(int(x))
    return repr(x)


def canonical_line(p: GpsPoint) -> str:
    line = f"{p.taxi_id};{format_number(p.timestamp)};{format_number(p.lat)};{format_number(p.lon)}"
    if p.occupied is not None:
        line += f";{int(p.occupied)}"
    return line


def write_canonical(points: Iterable[GpsPoint], fh: IO[str]) -> None:
    for p in points:
        fh.write(canonical_line(p) + "\n")


def write_rejects(report: ParseReport, fh: IO[str]) -> None:
    for lineno, reason in report.rejects:
        fh.write(f"{lineno};{reason}\n")


def write_grid_counts(grid: GridCounts, fh: IO[str]) -> None:
    b = grid.bounds
    fh.write(f"{grid.rows};{grid.cols};{format_number(b.lat_min)};"
             f"{format_number(b.lat_max)};{format_number(b.lon_min)};"
             f"{format_number(b.lon_max)}\n")
    for c in grid.counts:
        fh.write(f"{c}\n")


def load_grid_counts(fh: IO[str]) -> GridCounts:
    header = fh.readline().strip().split(";")
    if len(header) != 6:
        raise ValueError("grid header must be rows;cols;lat_min;lat_max;lon_min;lon_max")
    rows, cols = int(header[0]), int(header[1])
    bounds = CityBounds(float(header[2]), float(header[3]),
                        float(header[4]), float(header[5]))
    counts = tuple(int(line.strip()) for line in fh if line.strip())
    return GridCounts(bounds=bounds, rows=rows, cols=cols, counts=counts)
