"""Staged end-to-end pipeline: ingest, trips, regions, stats, functions, dtn.

Each stage reads its predecessor's artifacts from the output directory and
writes its own atomically (temp file + rename). A manifest records the config
hash and every stage's input/output hashes; nothing in the manifest depends
on wall-clock time, so rerunning a stage on unchanged inputs reproduces the
artifacts byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Callable, Iterable

from . import dtn as dtn_mod
from . import functions as functions_mod
from . import regions as regions_mod
from . import stats as stats_mod
from . import trajectory as trajectory_mod
from .ingest import (CityBounds, clip_to_bounds, load_grid_counts,
                     parse_trace_file, write_canonical)
from .trajectory import trips_for_points

STAGES = ("ingest", "trips", "regions", "stats", "functions", "dtn")

MANIFEST_NAME = "manifest.json"


class ConfigError(ValueError):
    """Invalid pipeline config; carries every violation found."""

    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("invalid config: " + "; ".join(violations))


class MissingArtifactError(RuntimeError):
    """A stage dependency is absent from the output directory."""

    def __init__(self, path: str, needed_stage: str):
        self.needed_stage = needed_stage
        super().__init__(f"missing artifact {path!r}: run stage '{needed_stage}' first")


@dataclass(frozen=True)
class DatasetSpec:
    path: str
    format: str
    taxi_id: str | None = None


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    eval_start: float
    eval_end: float
    history_start: float
    history_end: float


@dataclass(frozen=True)
class PipelineConfig:
    datasets: tuple[DatasetSpec, ...]
    bounds: CityBounds
    out_dir: str
    utc_offset_hours: float = 0.0
    segment_gap_s: float = trajectory_mod.DEFAULT_SEGMENT_GAP_S
    stop_distance_m: float = trajectory_mod.DEFAULT_STOP_DISTANCE_M
    stop_duration_s: float = trajectory_mod.DEFAULT_STOP_DURATION_S
    quadtree_threshold_fraction: float = regions_mod.DEFAULT_THRESHOLD_FRACTION
    quadtree_depth_cap: int = regions_mod.DEFAULT_DEPTH_CAP
    quadtree_visit_source: str = "points"  # or "trip_endpoints"
    minsup: float = functions_mod.DEFAULT_MINSUP
    time_windows: functions_mod.TimeWindows = field(
        default_factory=functions_mod.TimeWindows.default)
    stats_x_min: float | None = None
    grid_counts_path: str | None = None
    dtn_bin_width_s: float = dtn_mod.DEFAULT_BIN_WIDTH_S
    dtn_publishers: int = 100
    dtn_subscribers: int = 100
    dtn_runs: int = 10
    dtn_policies: tuple[str, ...] = dtn_mod.POLICIES
    dtn_scenarios: tuple[ScenarioSpec, ...] = ()
    rng_seed: int = 0
    raw: dict = field(default_factory=dict, compare=False)


def _parse_time_windows(obj: dict) -> functions_mod.TimeWindows:
    slots = {name: frozenset((int(d), int(h)) for d, h in obj.get(name, ()))
             for name in ("work", "entertainment", "home")}
    return functions_mod.TimeWindows(**slots)


def parse_config(raw: dict) -> PipelineConfig:
    """Validate a raw config dict, reporting every violated field at once."""
    violations: list[str] = []

    def check(cond: bool, message: str) -> bool:
        if not cond:
            violations.append(message)
        return cond

    datasets: list[DatasetSpec] = []
    ds_raw = raw.get("datasets")
    if check(isinstance(ds_raw, list) and len(ds_raw) > 0,
             "datasets: need a non-empty list"):
        for i, d in enumerate(ds_raw):
            fmt = d.get("format")
            check(fmt in ("canonical", "rome", "sanfrancisco", "beijing"),
                  f"datasets[{i}].format: unknown format {fmt!r}")
            check(bool(d.get("path")), f"datasets[{i}].path: required")
            datasets.append(DatasetSpec(path=str(d.get("path", "")),
                                        format=str(fmt),
                                        taxi_id=d.get("taxi_id")))

    bounds = None
    b = raw.get("bounds", {})
    try:
        bounds = CityBounds(float(b["lat_min"]), float(b["lat_max"]),
                            float(b["lon_min"]), float(b["lon_max"]))
    except (KeyError, TypeError, ValueError) as exc:
        violations.append(f"bounds: {exc}")

    out_dir = raw.get("out_dir")
    check(bool(out_dir), "out_dir: required")

    def positive(key: str, default: float) -> float:
        v = raw.get(key, default)
        try:
            v = float(v)
        except (TypeError, ValueError):
            violations.append(f"{key}: not a number")
            return default
        check(v > 0, f"{key}: must be positive, got {v}")
        return v

    segment_gap = positive("segment_gap_s", trajectory_mod.DEFAULT_SEGMENT_GAP_S)
    stop_distance = positive("stop_distance_m", trajectory_mod.DEFAULT_STOP_DISTANCE_M)
    stop_duration = positive("stop_duration_s", trajectory_mod.DEFAULT_STOP_DURATION_S)

    qt = raw.get("quadtree", {})
    threshold = qt.get("threshold_fraction", regions_mod.DEFAULT_THRESHOLD_FRACTION)
    check(isinstance(threshold, (int, float)) and 0 < threshold <= 1,
          f"quadtree.threshold_fraction: must be in (0, 1], got {threshold}")
    depth_cap = qt.get("depth_cap", regions_mod.DEFAULT_DEPTH_CAP)
    check(isinstance(depth_cap, int) and depth_cap >= 0,
          f"quadtree.depth_cap: must be a non-negative int, got {depth_cap}")
    visit_source = qt.get("visit_source", "points")
    check(visit_source in ("points", "trip_endpoints"),
          f"quadtree.visit_source: must be 'points' or 'trip_endpoints', got {visit_source!r}")

    minsup = raw.get("minsup", functions_mod.DEFAULT_MINSUP)
    check(isinstance(minsup, (int, float)) and 0 < minsup <= 1,
          f"minsup: must be in (0, 1], got {minsup}")

    try:
        windows = (_parse_time_windows(raw["time_windows"])
                   if "time_windows" in raw else functions_mod.TimeWindows.default())
    except (TypeError, ValueError) as exc:
        violations.append(f"time_windows: {exc}")
        windows = functions_mod.TimeWindows.default()

    stats_x_min = raw.get("stats_x_min")
    if stats_x_min is not None:
        check(isinstance(stats_x_min, (int, float)) and stats_x_min > 0,
              f"stats_x_min: must be positive, got {stats_x_min}")

    d = raw.get("dtn", {})
    bin_width = d.get("bin_width_s", dtn_mod.DEFAULT_BIN_WIDTH_S)
    check(isinstance(bin_width, (int, float)) and bin_width > 0,
          f"dtn.bin_width_s: must be positive, got {bin_width}")
    publishers = d.get("publishers", 100)
    subscribers = d.get("subscribers", 100)
    runs = d.get("runs", 10)
    for key, val in (("publishers", publishers), ("subscribers", subscribers),
                     ("runs", runs)):
        check(isinstance(val, int) and val > 0,
              f"dtn.{key}: must be a positive int, got {val}")
    policies = tuple(d.get("policies", list(dtn_mod.POLICIES)))
    for p in policies:
        check(p in dtn_mod.POLICIES, f"dtn.policies: unknown policy {p!r}")
    scenarios: list[ScenarioSpec] = []
    for i, s in enumerate(d.get("scenarios", [])):
        try:
            spec = ScenarioSpec(name=str(s["name"]),
                                eval_start=float(s["eval_start"]),
                                eval_end=float(s["eval_end"]),
                                history_start=float(s["history_start"]),
                                history_end=float(s["history_end"]))
            check(spec.eval_start < spec.eval_end,
                  f"dtn.scenarios[{i}]: empty eval window")
            check(spec.history_start < spec.history_end,
                  f"dtn.scenarios[{i}]: empty history window")
            scenarios.append(spec)
        except (KeyError, TypeError, ValueError) as exc:
            violations.append(f"dtn.scenarios[{i}]: {exc}")

    rng_seed = raw.get("rng_seed", 0)
    check(isinstance(rng_seed, int), f"rng_seed: must be an int, got {rng_seed!r}")

    if violations:
        raise ConfigError(violations)
    return PipelineConfig(datasets=tuple(datasets),
                          bounds=bounds,
                          out_dir=str(out_dir),
                          utc_offset_hours=float(raw.get("utc_offset_hours", 0.0)),
                          segment_gap_s=segment_gap,
                          stop_distance_m=stop_distance,
                          stop_duration_s=stop_duration,
                          quadtree_threshold_fraction=float(threshold),
                          quadtree_depth_cap=int(depth_cap),
                          quadtree_visit_source=str(visit_source),
                          minsup=float(minsup),
                          time_windows=windows,
                          stats_x_min=stats_x_min,
                          grid_counts_path=raw.get("grid_counts_path"),
                          dtn_bin_width_s=float(bin_width),
                          dtn_publishers=int(publishers),
                          dtn_subscribers=int(subscribers),
                          dtn_runs=int(runs),
                          dtn_policies=policies,
                          dtn_scenarios=tuple(scenarios),
                          rng_seed=int(rng_seed),
                          raw=raw)


def load_config(path: str, overrides: Iterable[tuple[str, object]] = ()) -> PipelineConfig:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    for key, value in overrides:
        node = raw
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return parse_config(raw)


def config_hash(cfg: PipelineConfig) -> str:
    blob = json.dumps(cfg.raw, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def file_hash(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def derive_seed(global_seed: int, label: str) -> int:
    digest = hashlib.sha256(f"{global_seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def atomic_write(path: str, write: Callable) -> None:
    """Write via a sibling temp file and rename into place."""
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        write(fh)
    os.replace(tmp, path)


class _Workspace:
    """Artifact paths, dependency checks, and manifest bookkeeping for one run."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.out = cfg.out_dir
        os.makedirs(self.out, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.out, name)

    def require(self, name: str, produced_by: str) -> str:
        p = self.path(name)
        if not os.path.exists(p):
            raise MissingArtifactError(p, produced_by)
        return p

    def record(self, stage: str, inputs: list[str], outputs: list[str]) -> None:
        manifest_path = self.path(MANIFEST_NAME)
        manifest = {"config_hash": config_hash(self.cfg), "stages": {}}
        if os.path.exists(manifest_path):
            with open(manifest_path, "r", encoding="utf-8") as fh:
                previous = json.load(fh)
            if previous.get("config_hash") == manifest["config_hash"]:
                manifest["stages"] = previous.get("stages", {})
        manifest["stages"][stage] = {
            "inputs": {os.path.basename(p) if p.startswith(self.out) else p:
                       file_hash(p) for p in inputs},
            "outputs": {os.path.basename(p): file_hash(p) for p in outputs},
        }
        atomic_write(manifest_path,
                     lambda fh: fh.write(json.dumps(manifest, sort_keys=True,
                                                    indent=2) + "\n"))


def _stage_ingest(ws: _Workspace) -> None:
    cfg = ws.cfg
    all_points = []
    merged_rejects = []
    offset_lines = 0
    accepted = deduplicated = 0
    seen: set[tuple[str, float]] = set()
    for ds in cfg.datasets:
        points, report = parse_trace_file(ds.path, ds.format, taxi_id=ds.taxi_id,
                                          utc_offset_hours=cfg.utc_offset_hours)
        deduplicated += report.deduplicated
        for p in points:  # the same fix may recur across dataset files
            key = (p.taxi_id, p.timestamp)
            if key in seen:
                deduplicated += 1
            else:
                seen.add(key)
                all_points.append(p)
                accepted += 1
        merged_rejects.extend((lineno + offset_lines, reason)
                              for lineno, reason in report.rejects)
        offset_lines += report.total_lines
    by_taxi: dict[str, list] = {}
    for p in all_points:
        by_taxi.setdefault(p.taxi_id, []).append(p)
    ordered = []
    for tid in sorted(by_taxi):
        ordered.extend(sorted(by_taxi[tid], key=lambda p: p.timestamp))
    clipped = clip_to_bounds(ordered, cfg.bounds)

    atomic_write(ws.path("trace.txt"), lambda fh: write_canonical(clipped, fh))

    def write_rej(fh):
        for lineno, reason in merged_rejects:
            fh.write(f"{lineno};{reason}\n")

    atomic_write(ws.path("rejects.txt"), write_rej)

    def write_summary(fh):
        fh.write(f"input_lines;{offset_lines}\n")
        fh.write(f"accepted;{accepted}\n")
        fh.write(f"deduplicated;{deduplicated}\n")
        fh.write(f"rejected;{len(merged_rejects)}\n")
        fh.write(f"clipped_out_of_bounds;{len(ordered) - len(clipped)}\n")
        fh.write(f"points_written;{len(clipped)}\n")

    atomic_write(ws.path("ingest_summary.txt"), write_summary)
    ws.record("ingest", [ds.path for ds in cfg.datasets],
              [ws.path("trace.txt"), ws.path("rejects.txt"),
               ws.path("ingest_summary.txt")])


def _load_trace_points(ws: _Workspace):
    path = ws.require("trace.txt", "ingest")
    points, _ = parse_trace_file(path, "canonical")
    return points


def _stage_trips(ws: _Workspace) -> None:
    cfg = ws.cfg
    points = _load_trace_points(ws)
    by_taxi: dict[str, list] = {}
    for p in points:
        by_taxi.setdefault(p.taxi_id, []).append(p)
    all_stops = []
    all_trips = []
    for tid in sorted(by_taxi):
        _, stops, trips = trips_for_points(by_taxi[tid], cfg.segment_gap_s,
                                           cfg.stop_distance_m, cfg.stop_duration_s)
        all_stops.extend(stops)
        all_trips.extend(trips)
    atomic_write(ws.path("trips.txt"),
                 lambda fh: trajectory_mod.write_trips(all_trips, fh))
    atomic_write(ws.path("stops.txt"),
                 lambda fh: trajectory_mod.write_stops(all_stops, fh))
    ws.record("trips", [ws.path("trace.txt")],
              [ws.path("trips.txt"), ws.path("stops.txt")])


def _stage_regions(ws: _Workspace) -> None:
    cfg = ws.cfg
    trips_path = ws.require("trips.txt", "trips")
    with open(trips_path, "r", encoding="utf-8") as fh:
        trips = trajectory_mod.load_trips(fh)
    if cfg.quadtree_visit_source == "trip_endpoints":
        coords = [(t.depart.lat, t.depart.lon) for t in trips]
        coords += [(t.arrive.lat, t.arrive.lon) for t in trips]
        inputs = [trips_path]
    else:
        points = _load_trace_points(ws)
        coords = [(p.lat, p.lon) for p in points]
        inputs = [ws.path("trace.txt"), trips_path]
    tree = regions_mod.build_quadtree(coords, cfg.bounds,
                                      cfg.quadtree_threshold_fraction,
                                      cfg.quadtree_depth_cap)
    events, dropped = regions_mod.trips_to_events(trips, tree)
    atomic_write(ws.path("tree.txt"), lambda fh: regions_mod.write_tree(tree, fh))
    atomic_write(ws.path("events.txt"),
                 lambda fh: regions_mod.write_events(events, fh))
    atomic_write(ws.path("regions_dropped.txt"),
                 lambda fh: fh.write(f"dropped_endpoints;{dropped}\n"))
    ws.record("regions", inputs,
              [ws.path("tree.txt"), ws.path("events.txt"),
               ws.path("regions_dropped.txt")])


def _fit_sample_set(name: str, samples, ws: _Workspace) -> list[str]:
    cfg = ws.cfg
    positive = [s for s in samples if s > 0]
    dropped = len(samples) - len(positive)
    fits = stats_mod.fit_all(positive, cfg.stats_x_min)
    cmp = stats_mod.compare_models(fits)
    fit_path = ws.path(f"fits_{name}.txt")
    ccdf_path = ws.path(f"ccdf_{name}.txt")

    def write_fits(fh):
        stats_mod.write_comparison(cmp, fh)
        for f in fits:
            if not f.converged:
                fh.write(f"# excluded: {f.model} did not converge\n")
        if dropped:
            fh.write(f"# dropped {dropped} non-positive sample(s)\n")

    atomic_write(fit_path, write_fits)
    atomic_write(ccdf_path,
                 lambda fh: stats_mod.write_ccdf(stats_mod.empirical_ccdf(positive), fh))
    return [fit_path, ccdf_path]


def _stage_stats(ws: _Workspace) -> None:
    cfg = ws.cfg
    trips_path = ws.require("trips.txt", "trips")
    stops_path = ws.require("stops.txt", "trips")
    with open(trips_path, "r", encoding="utf-8") as fh:
        trips = trajectory_mod.load_trips(fh)
    with open(stops_path, "r", encoding="utf-8") as fh:
        stay_times = trajectory_mod.load_stay_times(fh)
    outputs = []
    outputs += _fit_sample_set("trip_length", [t.length_m for t in trips], ws)
    outputs += _fit_sample_set("trip_duration", [t.duration_s for t in trips], ws)
    outputs += _fit_sample_set("stay_time", stay_times, ws)
    inputs = [trips_path, stops_path]
    if cfg.grid_counts_path:
        with open(cfg.grid_counts_path, "r", encoding="utf-8") as fh:
            road_grid = load_grid_counts(fh)
        visit_coords = [(t.arrive.lat, t.arrive.lon) for t in trips]
        visit_grid = regions_mod.grid_visit_counts(visit_coords, road_grid.bounds,
                                                   road_grid.rows, road_grid.cols)
        corr = stats_mod.pearson(road_grid.counts, visit_grid.counts)
        corr_path = ws.path("correlation.txt")
        atomic_write(corr_path,
                     lambda fh: fh.write(f"r;{repr(corr.r)}\nn;{corr.n}\n"))
        outputs.append(corr_path)
        inputs.append(cfg.grid_counts_path)
    ws.record("stats", inputs, outputs)


def _stage_functions(ws: _Workspace) -> None:
    cfg = ws.cfg
    events_path = ws.require("events.txt", "regions")
    tree_path = ws.require("tree.txt", "regions")
    with open(events_path, "r", encoding="utf-8") as fh:
        events = regions_mod.load_events(fh)
    with open(tree_path, "r", encoding="utf-8") as fh:
        tree = regions_mod.load_tree(fh)
    visits = [e for e in events if e.kind == regions_mod.VISIT]
    tables = functions_mod.hourly_transactions(visits, cfg.utc_offset_hours)
    hourly = {key: functions_mod.apriori(table, cfg.minsup)
              for key, table in tables.items()}
    all_regions = [leaf.region_id for leaf in regions_mod.leaves(tree)]
    labels = functions_mod.classify_regions(hourly, cfg.time_windows, all_regions)
    atomic_write(ws.path("labels.txt"),
                 lambda fh: functions_mod.write_labels(labels, fh))
    atomic_write(ws.path("itemsets.txt"),
                 lambda fh: functions_mod.write_itemsets(hourly, fh))

    def write_plot(fh):
        by_id = {rf.region_id: rf.label for rf in labels}
        for leaf in regions_mod.leaves(tree):
            fh.write(regions_mod.leaf_line(leaf) + ";"
                     + by_id.get(leaf.region_id, functions_mod.OTHER) + "\n")

    atomic_write(ws.path("region_labels_plot.txt"), write_plot)
    ws.record("functions", [events_path, tree_path],
              [ws.path("labels.txt"), ws.path("itemsets.txt"),
               ws.path("region_labels_plot.txt")])


def _stage_dtn(ws: _Workspace) -> None:
    cfg = ws.cfg
    events_path = ws.require("events.txt", "regions")
    labels_path = ws.require("labels.txt", "functions")
    with open(events_path, "r", encoding="utf-8") as fh:
        events = regions_mod.load_events(fh)
    with open(labels_path, "r", encoding="utf-8") as fh:
        labels = functions_mod.load_labels(fh)
    visits = [e for e in events if e.kind == regions_mod.VISIT]
    population = sorted({e.taxi_id for e in visits})
    rows = []
    for scenario in cfg.dtn_scenarios:
        eval_window = (scenario.eval_start, scenario.eval_end)
        history_window = (scenario.history_start, scenario.history_end)
        hot = dtn_mod.hot_regions_for_window(eval_window, labels, cfg.time_windows,
                                             cfg.utc_offset_hours)
        for run in range(cfg.dtn_runs):
            sub_seed = derive_seed(cfg.rng_seed, f"dtn:{scenario.name}:{run}:subs")
            subscribers = dtn_mod.select_random(population, cfg.dtn_subscribers,
                                                sub_seed)
            for policy in cfg.dtn_policies:
                sim = dtn_mod.SimScenario(
                    eval_window=eval_window,
                    hot_regions=hot,
                    subscribers=frozenset(subscribers),
                    publisher_count=cfg.dtn_publishers,
                    policy=policy,
                    history_window=history_window,
                    rng_seed=derive_seed(cfg.rng_seed,
                                         f"dtn:{scenario.name}:{run}:{policy}"))
                outcome = dtn_mod.run_scenario(visits, sim, cfg.dtn_bin_width_s)
                rows.append((f"{scenario.name}:{policy}", run, outcome))
    atomic_write(ws.path("dtn_results.txt"),
                 lambda fh: dtn_mod.write_results(rows, fh))
    summary = dtn_mod.summarize([(p.rsplit(":", 1)[-1], run, o) for p, run, o in rows])
    atomic_write(ws.path("dtn_summary.txt"),
                 lambda fh: dtn_mod.write_summary(summary, fh))
    ws.record("dtn", [events_path, labels_path],
              [ws.path("dtn_results.txt"), ws.path("dtn_summary.txt")])


_STAGE_FUNCS = {
    "ingest": _stage_ingest,
    "trips": _stage_trips,
    "regions": _stage_regions,
    "stats": _stage_stats,
    "functions": _stage_functions,
    "dtn": _stage_dtn,
}


def run(cfg: PipelineConfig, stage: str) -> None:
    """Run one stage, or every stage in order for stage='all'."""
    if stage == "all":
        ws = _Workspace(cfg)
        for name in STAGES:
            _STAGE_FUNCS[name](ws)
        return
    if stage not in _STAGE_FUNCS:
        raise ValueError(f"unknown stage {stage!r}; expected one of {STAGES + ('all',)}")
    _STAGE_FUNCS[stage](_Workspace(cfg))
