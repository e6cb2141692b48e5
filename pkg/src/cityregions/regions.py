"""Visit-density quad-tree partition of a city, plus event mapping onto regions.

A node splits into four equal quadrants (NW, NE, SW, SE) whenever it holds
more than ``threshold_fraction`` of all visits, up to a depth cap that guards
against coincident points. Leaves get consecutive region ids in depth-first
NW, NE, SW, SE order.

Cell membership is half-open: a point on an interior split line belongs to
the cell north/east of the line; the outer north/east edges of the root are
closed so the tiling is total over the closed root box.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from .ingest import CityBounds, GridCounts, format_number
from .trajectory import Trip

DEFAULT_THRESHOLD_FRACTION = 0.01
DEFAULT_DEPTH_CAP = 16

VISIT = "visit"
DEPARTURE = "departure"


class OutOfBoundsError(ValueError):
    """Point lies outside the quad-tree root bounds."""


@dataclass
class QuadNode:
    bounds: CityBounds
    visit_count: int
    children: tuple["QuadNode", "QuadNode", "QuadNode", "QuadNode"] | None = None
    region_id: int | None = None

    @property
    def is_leaf(self) -> bool:
        return self.children is None


@dataclass(frozen=True)
class VisitEvent:
    """A taxi entering (visit) or leaving (departure) a region."""

    taxi_id: str
    region_id: int
    timestamp: float
    kind: str  # VISIT or DEPARTURE

    def __post_init__(self) -> None:
        if self.kind not in (VISIT, DEPARTURE):
            raise ValueError(f"kind must be {VISIT!r} or {DEPARTURE!r}")


def _as_coord_arrays(events: object) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(events, dtype=float)
    if arr.size == 0:
        return np.empty(0), np.empty(0)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("events must be a sequence of (lat, lon) pairs")
    return np.ascontiguousarray(arr[:, 0]), np.ascontiguousarray(arr[:, 1])


def build_quadtree(events: Sequence[tuple[float, float]] | np.ndarray,
                   bounds: CityBounds,
                   threshold_fraction: float = DEFAULT_THRESHOLD_FRACTION,
                   depth_cap: int = DEFAULT_DEPTH_CAP) -> QuadNode:
    """Recursively split the city box until no leaf exceeds the visit threshold.

    The split condition is strict: a node divides only when its count is
    greater than threshold_fraction times the total event count. Nodes at
    depth_cap never split, so coincident points cannot recurse forever.
    """
    if not (0.0 < threshold_fraction <= 1.0):
        raise ValueError("threshold_fraction must be in (0, 1]")
    if depth_cap < 0:
        raise ValueError("depth_cap must be >= 0")
    lats, lons = _as_coord_arrays(events)
    total = lats.size
    if total:
        inside = ((lats >= bounds.lat_min) & (lats <= bounds.lat_max)
                  & (lons >= bounds.lon_min) & (lons <= bounds.lon_max))
        n_out = int(total - inside.sum())
        if n_out:
            raise OutOfBoundsError(f"{n_out} event(s) outside {bounds}")
    limit = threshold_fraction * total

    def build(b: CityBounds, la: np.ndarray, lo: np.ndarray, depth: int) -> QuadNode:
        node = QuadNode(bounds=b, visit_count=int(la.size))
        if la.size > limit and depth < depth_cap:
            mlat = (b.lat_min + b.lat_max) / 2.0
            mlon = (b.lon_min + b.lon_max) / 2.0
            north = la >= mlat
            east = lo >= mlon
            quads = (
                (CityBounds(mlat, b.lat_max, b.lon_min, mlon), north & ~east),   # NW
                (CityBounds(mlat, b.lat_max, mlon, b.lon_max), north & east),    # NE
                (CityBounds(b.lat_min, mlat, b.lon_min, mlon), ~north & ~east),  # SW
                (CityBounds(b.lat_min, mlat, mlon, b.lon_max), ~north & east),   # SE
            )
            node.children = tuple(build(cb, la[m], lo[m], depth + 1)
                                  for cb, m in quads)
        return node

    root = build(bounds, lats, lons, 0)
    _assign_region_ids(root)
    return root


def _assign_region_ids(root: QuadNode) -> None:
    next_id = 0

    def walk(node: QuadNode) -> None:
        nonlocal next_id
        if node.is_leaf:
            node.region_id = next_id
            next_id += 1
        else:
            for child in node.children:
                walk(child)

    walk(root)


def leaves(root: QuadNode) -> list[QuadNode]:
    """All leaves in region-id (depth-first NW, NE, SW, SE) order."""
    out: list[QuadNode] = []

    def walk(node: QuadNode) -> None:
        if node.is_leaf:
            out.append(node)
        else:
            for child in node.children:
                walk(child)

    walk(root)
    return out


def locate(tree: QuadNode, lat: float, lon: float) -> int:
    """Region id of the unique leaf containing (lat, lon)."""
    b = tree.bounds
    if not b.contains(lat, lon):
        raise OutOfBoundsError(f"point ({lat}, {lon}) outside {b}")
    node = tree
    while not node.is_leaf:
        nb = node.bounds
        north = lat >= (nb.lat_min + nb.lat_max) / 2.0
        east = lon >= (nb.lon_min + nb.lon_max) / 2.0
        node = node.children[(0 if not east else 1) if north else (2 if not east else 3)]
    return node.region_id


def trips_to_events(trips: Sequence[Trip], tree: QuadNode) -> tuple[list[VisitEvent], int]:
    """One departure event per trip origin and one visit event per destination.

    Endpoints outside the root bounds are skipped; the second return value
    counts them.
    """
    events: list[VisitEvent] = []
    dropped = 0
    for trip in trips:
        try:
            rid = locate(tree, trip.depart.lat, trip.depart.lon)
        except OutOfBoundsError:
            dropped += 1
        else:
            events.append(VisitEvent(trip.taxi_id, rid, trip.depart.timestamp, DEPARTURE))
        try:
            rid = locate(tree, trip.arrive.lat, trip.arrive.lon)
        except OutOfBoundsError:
            dropped += 1
        else:
            events.append(VisitEvent(trip.taxi_id, rid, trip.arrive.timestamp, VISIT))
    return events, dropped


def grid_visit_counts(events: Sequence[tuple[float, float]] | np.ndarray,
                      bounds: CityBounds, rows: int, cols: int) -> GridCounts:
    """Uniform rows x cols histogram with the same edge rule as locate."""
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    lats, lons = _as_coord_arrays(events)
    counts = np.zeros(rows * cols, dtype=np.int64)
    if lats.size:
        inside = ((lats >= bounds.lat_min) & (lats <= bounds.lat_max)
                  & (lons >= bounds.lon_min) & (lons <= bounds.lon_max))
        la, lo = lats[inside], lons[inside]
        r = np.floor((la - bounds.lat_min) / (bounds.lat_max - bounds.lat_min) * rows)
        c = np.floor((lo - bounds.lon_min) / (bounds.lon_max - bounds.lon_min) * cols)
        r = np.clip(r.astype(np.int64), 0, rows - 1)
        c = np.clip(c.astype(np.int64), 0, cols - 1)
        np.add.at(counts, r * cols + c, 1)
    return GridCounts(bounds=bounds, rows=rows, cols=cols,
                      counts=tuple(int(x) for x in counts))


def leaf_line(leaf: QuadNode) -> str:
    b = leaf.bounds
    return ";".join((str(leaf.region_id),
                     format_number(b.lat_min), format_number(b.lat_max),
                     format_number(b.lon_min), format_number(b.lon_max),
                     str(leaf.visit_count)))


def write_tree(root: QuadNode, fh: IO[str]) -> None:
    for leaf in leaves(root):
        fh.write(leaf_line(leaf) + "\n")


def load_tree(fh: IO[str]) -> QuadNode:
    """Rebuild the tree from its leaf lines.

    Split midpoints are recomputed from the root box with the same float
    arithmetic used at build time, so leaf boxes match exactly.
    """
    entries: list[tuple[int, CityBounds, int]] = []
    for line in fh:
        line = line.strip()
        if not line:
            continue
        f = line.split(";")
        if len(f) != 6:
            raise ValueError(f"expected 6 leaf fields, got {len(f)}")
        entries.append((int(f[0]),
                        CityBounds(float(f[1]), float(f[2]), float(f[3]), float(f[4])),
                        int(f[5])))
    if not entries:
        raise ValueError("empty tree file")
    root_bounds = CityBounds(min(b.lat_min for _, b, _ in entries),
                             max(b.lat_max for _, b, _ in entries),
                             min(b.lon_min for _, b, _ in entries),
                             max(b.lon_max for _, b, _ in entries))

    def assemble(b: CityBounds, pool: list[tuple[int, CityBounds, int]]) -> QuadNode:
        if len(pool) == 1 and pool[0][1] == b:
            rid, _, count = pool[0]
            return QuadNode(bounds=b, visit_count=count, region_id=rid)
        mlat = (b.lat_min + b.lat_max) / 2.0
        mlon = (b.lon_min + b.lon_max) / 2.0
        quads: tuple[tuple[CityBounds, list], ...] = (
            (CityBounds(mlat, b.lat_max, b.lon_min, mlon), []),
            (CityBounds(mlat, b.lat_max, mlon, b.lon_max), []),
            (CityBounds(b.lat_min, mlat, b.lon_min, mlon), []),
            (CityBounds(b.lat_min, mlat, mlon, b.lon_max), []),
        )
        for entry in pool:
            eb = entry[1]
            placed = False
            for qb, items in quads:
                if (qb.lat_min <= eb.lat_min and eb.lat_max <= qb.lat_max
                        and qb.lon_min <= eb.lon_min and eb.lon_max <= qb.lon_max):
                    items.append(entry)
                    placed = True
                    break
            if not placed:
                raise ValueError(f"leaf {entry[0]} does not nest in any quadrant of {b}")
        children = []
        for qb, items in quads:
            if not items:
                raise ValueError(f"no leaves cover quadrant {qb}")
            children.append(assemble(qb, items))
        node = QuadNode(bounds=b,
                        visit_count=sum(c.visit_count for c in children))
        node.children = tuple(children)
        return node

    return assemble(root_bounds, entries)


def event_line(e: VisitEvent) -> str:
    return f"{e.taxi_id};{e.region_id};{format_number(e.timestamp)};{e.kind}"


def write_events(events: Iterable[VisitEvent], fh: IO[str]) -> None:
    for e in events:
        fh.write(event_line(e) + "\n")


def load_events(fh: IO[str]) -> list[VisitEvent]:
    events = []
    for line in fh:
        line = line.strip()
        if not line:
            continue
        f = line.split(";")
        if len(f) != 4:
            raise ValueError(f"expected 4 event fields, got {len(f)}")
        events.append(VisitEvent(f[0], int(f[1]), float(f[2]), f[3]))
    return events
