import json
import os

import pytest

from cityregions.cli import main
from cityregions.fixtures import write_fixture
from cityregions.pipeline import (ConfigError, MissingArtifactError, STAGES,
                                  config_hash, derive_seed, load_config,
                                  parse_config, run)


def hash_dir(path):
    from cityregions.pipeline import file_hash
    return {name: file_hash(os.path.join(path, name))
            for name in sorted(os.listdir(path))}


@pytest.fixture(scope="module")
def fixture_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("fixture")
    write_fixture(str(d))
    return d


@pytest.fixture(scope="module")
def completed_run(fixture_dir):
    cfg = load_config(str(fixture_dir / "config.json"))
    run(cfg, "all")
    return cfg


class TestRunAll:
    def test_manifest_lists_all_six_stages(self, completed_run):
        with open(os.path.join(completed_run.out_dir, "manifest.json")) as fh:
            manifest = json.load(fh)
        assert sorted(manifest["stages"]) == sorted(STAGES)
        assert manifest["config_hash"] == config_hash(completed_run)

    def test_ingest_summary_accounts_for_all_lines(self, completed_run):
        with open(os.path.join(completed_run.out_dir, "ingest_summary.txt")) as fh:
            summary = dict(line.strip().split(";") for line in fh)
        assert (int(summary["accepted"]) + int(summary["deduplicated"])
                + int(summary["rejected"])) == int(summary["input_lines"])
        assert int(summary["points_written"]) == (
            int(summary["accepted"]) - int(summary["clipped_out_of_bounds"]))

    def test_expected_artifacts_exist(self, completed_run):
        for name in ("trace.txt", "rejects.txt", "ingest_summary.txt",
                     "trips.txt", "stops.txt",
                     "tree.txt", "events.txt", "fits_trip_length.txt",
                     "ccdf_stay_time.txt", "labels.txt", "itemsets.txt",
                     "region_labels_plot.txt", "dtn_results.txt",
                     "dtn_summary.txt"):
            assert os.path.exists(os.path.join(completed_run.out_dir, name)), name

    def test_dtn_rows_cover_policies_and_runs(self, completed_run):
        with open(os.path.join(completed_run.out_dir, "dtn_results.txt")) as fh:
            rows = [line.split(";") for line in fh.read().splitlines()]
        assert len(rows) == 6  # 2 runs x 3 policies
        assert {r[0].split(":")[1] for r in rows} == {"oracle", "history", "random"}

    def test_fixture_produces_nontrivial_mobility(self, completed_run):
        with open(os.path.join(completed_run.out_dir, "trips.txt")) as fh:
            trips = fh.read().splitlines()
        assert len(trips) == 24  # 3 taxis x 2 days x 4 trips
        with open(os.path.join(completed_run.out_dir, "dtn_results.txt")) as fh:
            delivered = [int(line.split(";")[2]) for line in fh]
        assert any(d > 0 for d in delivered)


class TestDeterminism:
    def test_rerun_stage_is_byte_identical(self, fixture_dir, completed_run):
        before = hash_dir(completed_run.out_dir)
        run(completed_run, "stats")
        assert hash_dir(completed_run.out_dir) == before

    def test_rerun_all_is_byte_identical(self, fixture_dir, completed_run):
        before = hash_dir(completed_run.out_dir)
        run(completed_run, "all")
        assert hash_dir(completed_run.out_dir) == before

    def test_later_stages_do_not_mutate_predecessors(self, completed_run):
        trace_before = hash_dir(completed_run.out_dir)["trace.txt"]
        run(completed_run, "dtn")
        assert hash_dir(completed_run.out_dir)["trace.txt"] == trace_before


class TestDependencies:
    def test_dtn_without_regions_names_the_stage(self, fixture_dir, tmp_path):
        cfg = load_config(str(fixture_dir / "config.json"),
                          overrides=[("out_dir", str(tmp_path / "fresh"))])
        with pytest.raises(MissingArtifactError, match="run stage 'regions' first"):
            run(cfg, "dtn")

    def test_trips_without_ingest(self, fixture_dir, tmp_path):
        cfg = load_config(str(fixture_dir / "config.json"),
                          overrides=[("out_dir", str(tmp_path / "fresh2"))])
        with pytest.raises(MissingArtifactError, match="run stage 'ingest' first"):
            run(cfg, "trips")

    def test_unknown_stage(self, completed_run):
        with pytest.raises(ValueError, match="unknown stage"):
            run(completed_run, "render")


class TestConfig:
    def good_raw(self, tmp_path):
        return {
            "datasets": [{"path": str(tmp_path / "x.txt"), "format": "canonical"}],
            "bounds": {"lat_min": 0, "lat_max": 1, "lon_min": 0, "lon_max": 1},
            "out_dir": str(tmp_path / "out"),
        }

    def test_validation_lists_every_violation(self, tmp_path):
        raw = self.good_raw(tmp_path)
        raw["segment_gap_s"] = -5
        raw["minsup"] = 3.0
        raw["datasets"][0]["format"] = "nyc"
        with pytest.raises(ConfigError) as err:
            parse_config(raw)
        text = "\n".join(err.value.violations)
        assert "segment_gap_s" in text
        assert "minsup" in text
        assert "format" in text
        assert len(err.value.violations) == 3

    def test_defaults_fill_in(self, tmp_path):
        cfg = parse_config(self.good_raw(tmp_path))
        assert cfg.segment_gap_s == 1800.0
        assert cfg.quadtree_threshold_fraction == 0.01
        assert cfg.minsup == 0.2
        assert cfg.dtn_policies == ("oracle", "history", "random")

    def test_config_hash_changes_iff_fields_change(self, tmp_path):
        raw = self.good_raw(tmp_path)
        base = config_hash(parse_config(raw))
        assert config_hash(parse_config(json.loads(json.dumps(raw)))) == base
        raw["minsup"] = 0.25
        assert config_hash(parse_config(raw)) != base

    def test_overrides_apply_dotted_keys(self, fixture_dir):
        cfg = load_config(str(fixture_dir / "config.json"),
                          overrides=[("quadtree.threshold_fraction", 0.5),
                                     ("rng_seed", 99)])
        assert cfg.quadtree_threshold_fraction == 0.5
        assert cfg.rng_seed == 99

    def test_derive_seed_stable_and_label_sensitive(self):
        assert derive_seed(7, "dtn:a:0") == derive_seed(7, "dtn:a:0")
        assert derive_seed(7, "dtn:a:0") != derive_seed(7, "dtn:a:1")
        assert derive_seed(7, "x") != derive_seed(8, "x")


class TestCorrelationPath:
    def test_stats_stage_emits_correlation_with_grid_file(self, fixture_dir, tmp_path):
        import random

        from cityregions.ingest import CityBounds, GridCounts, write_grid_counts

        grid_path = tmp_path / "roads.txt"
        rng = random.Random(0)
        grid = GridCounts(CityBounds(39.90, 40.00, 116.30, 116.50), 4, 4,
                          tuple(rng.randrange(0, 50) for _ in range(16)))
        with open(grid_path, "w") as fh:
            write_grid_counts(grid, fh)
        out = str(tmp_path / "out")
        cfg = load_config(str(fixture_dir / "config.json"),
                          overrides=[("out_dir", out),
                                     ("grid_counts_path", str(grid_path))])
        for stage in ("ingest", "trips", "stats"):
            run(cfg, stage)
        corr = (tmp_path / "out" / "correlation.txt").read_text()
        assert corr.startswith("r;")
        r = float(corr.splitlines()[0].split(";")[1])
        assert -1.0 <= r <= 1.0


class TestPresets:
    def test_beijing_preset_parses_and_pins_paper_hours(self, tmp_path):
        from datetime import datetime, timedelta, timezone

        from cityregions.presets import beijing_config

        raw = beijing_config([str(tmp_path / "taxi1.txt")], str(tmp_path / "out"))
        cfg = parse_config(raw)
        assert cfg.utc_offset_hours == 8.0
        assert cfg.dtn_publishers == 100 and cfg.dtn_subscribers == 100
        assert [s.name for s in cfg.dtn_scenarios] == [
            "sunday_entertainment", "tuesday_work"]
        tz = timezone(timedelta(hours=8))
        for spec, (day, weekday) in zip(cfg.dtn_scenarios,
                                        [(3, 6), (5, 1)]):  # Sunday, Tuesday
            start = datetime.fromtimestamp(spec.eval_start, tz)
            assert (start.day, start.weekday(), start.hour) == (day, weekday, 15)
            assert spec.eval_end - spec.eval_start == 3600
            assert spec.eval_start - spec.history_start == 86400


class TestCli:
    def test_fixture_and_full_run(self, tmp_path, capsys):
        d = str(tmp_path / "demo")
        assert main(["fixture", "--out", d]) == 0
        assert main(["all", "--config", os.path.join(d, "config.json")]) == 0
        out = capsys.readouterr().out
        assert "complete" in out

    def test_stage_override_flag(self, tmp_path):
        d = str(tmp_path / "demo2")
        main(["fixture", "--out", d])
        code = main(["ingest", "--config", os.path.join(d, "config.json"),
                     "--stage-override", "rng_seed=3"])
        assert code == 0

    def test_bad_config_exit_code(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text('{"datasets": [], "out_dir": "x"}')
        assert main(["all", "--config", str(p)]) == 2
        assert "config error" in capsys.readouterr().err

    def test_missing_artifact_exit_code(self, tmp_path, capsys):
        d = str(tmp_path / "demo3")
        main(["fixture", "--out", d])
        assert main(["dtn", "--config", os.path.join(d, "config.json")]) == 3
        assert "regions" in capsys.readouterr().err

    def test_fit_subcommand(self, tmp_path, capsys):
        samples = tmp_path / "samples.txt"
        import numpy as np
        rng = np.random.default_rng(0)
        samples.write_text("\n".join(str(v) for v in rng.exponential(10, 500)))
        assert main(["fit", str(samples)]) == 0
        out = capsys.readouterr().out
        assert "exponential" in out and "weight" in out
