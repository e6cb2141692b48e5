import io
from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given, strategies as st

from cityregions.ingest import (CityBounds, GpsPoint, GridCounts, clip_to_bounds,
                                load_grid_counts, parse_trace, parse_trace_file,
                                write_canonical, write_grid_counts)

BEIJING = CityBounds(39.41, 41.08, 115.37, 117.5)


def parse_lines(text, fmt, **kw):
    return parse_trace(io.StringIO(text), fmt, **kw)


class TestCanonical:
    def test_paper_example_line(self):
        points, report = parse_lines("42;1202921600;39.92911;116.44933\n", "canonical")
        assert points == [GpsPoint("42", 1202921600.0, 39.92911, 116.44933)]
        assert (report.accepted, report.deduplicated, report.rejected) == (1, 0, 0)

    def test_empty_file(self):
        points, report = parse_lines("", "canonical")
        assert points == []
        assert report.total_lines == 0 and report.rejected == 0

    def test_duplicate_lines_dedup_keeps_first(self):
        text = "1;100;39.0;116.0\n1;100;39.0;116.0\n"
        points, report = parse_lines(text, "canonical")
        assert len(points) == 1
        assert report.deduplicated == 1 and report.accepted == 1

    def test_dedup_is_per_taxi_timestamp(self):
        text = "1;100;39.0;116.0\n2;100;39.5;116.5\n1;100;40.0;117.0\n"
        points, _ = parse_lines(text, "canonical")
        assert len(points) == 2
        # first occurrence wins
        assert [p for p in points if p.taxi_id == "1"][0].lat == 39.0

    def test_malformed_line_recorded_with_line_number(self):
        text = "1;100;39.0;116.0\nnot a line\n1;oops;39.0;116.0\n"
        points, report = parse_lines(text, "canonical")
        assert len(points) == 1
        assert [lineno for lineno, _ in report.rejects] == [2, 3]

    def test_out_of_range_coordinates_rejected(self):
        text = "1;100;95.0;116.0\n1;200;39.0;181.0\n1;-5;39.0;116.0\n1;nan;39.0;116.0\n"
        points, report = parse_lines(text, "canonical")
        assert points == []
        assert report.rejected == 4

    def test_counts_partition_all_lines(self):
        text = ("1;100;39.0;116.0\n"
                "1;100;39.0;116.0\n"
                "garbage\n"
                "\n"
                "2;50;39.5;116.5\n")
        _, report = parse_lines(text, "canonical")
        assert report.accepted + report.deduplicated + report.rejected == report.total_lines
        assert report.total_lines == 5

    def test_grouped_by_taxi_sorted_by_time(self):
        text = ("9;300;39.0;116.0\n"
                "2;200;39.1;116.1\n"
                "9;100;39.2;116.2\n"
                "2;50;39.3;116.3\n")
        points, _ = parse_lines(text, "canonical")
        assert [(p.taxi_id, p.timestamp) for p in points] == [
            ("2", 50.0), ("2", 200.0), ("9", 100.0), ("9", 300.0)]

    def test_occupancy_round_trip(self):
        pts = [GpsPoint("7", 10.0, 39.5, 116.5, occupied=True),
               GpsPoint("7", 20.0, 39.6, 116.6, occupied=False),
               GpsPoint("7", 30.0, 39.7, 116.7)]
        buf = io.StringIO()
        write_canonical(pts, buf)
        reparsed, report = parse_lines(buf.getvalue(), "canonical")
        assert reparsed == pts
        assert report.rejected == 0

    def test_parse_is_deterministic(self):
        text = "3;10;39.0;116.0\n1;5;39.9;116.9\n3;7;39.1;116.1\n"
        a = parse_lines(text, "canonical")
        b = parse_lines(text, "canonical")
        assert a[0] == b[0]

    def test_unknown_format_rejected(self):
        with pytest.raises(ValueError, match="unknown trace format"):
            parse_lines("", "nyc")

    def test_unreadable_source_is_fatal(self):
        with pytest.raises(OSError):
            parse_trace_file("/nonexistent/trace.txt", "canonical")


class TestAdapters:
    def test_rome_line(self):
        line = "156;2014-02-01 00:00:00.739166+01;POINT(41.8945463 12.4771871)\n"
        points, report = parse_lines(line, "rome")
        assert report.accepted == 1
        p = points[0]
        expected = datetime(2014, 2, 1, 0, 0, 0, 739166,
                            tzinfo=timezone(timedelta(hours=1))).timestamp()
        assert p.taxi_id == "156"
        assert p.timestamp == expected
        assert (p.lat, p.lon) == (41.8945463, 12.4771871)

    def test_rome_full_offset_and_short_fraction(self):
        line = "9;2014-02-01 12:30:00.5+01:00;POINT(41.9 12.5)\n"
        points, _ = parse_lines(line, "rome")
        expected = datetime(2014, 2, 1, 12, 30, 0, 500000,
                            tzinfo=timezone(timedelta(hours=1))).timestamp()
        assert points[0].timestamp == expected

    def test_sanfrancisco_needs_taxi_id(self):
        with pytest.raises(ValueError, match="taxi_id"):
            parse_lines("37.75134 -122.39488 0 1213084687\n", "sanfrancisco")

    def test_sanfrancisco_line(self):
        points, _ = parse_lines("37.75134 -122.39488 1 1213084687\n",
                                "sanfrancisco", taxi_id="abboip")
        p = points[0]
        assert p == GpsPoint("abboip", 1213084687.0, 37.75134, -122.39488, True)

    def test_beijing_line_swaps_lon_lat_and_applies_offset(self):
        points, _ = parse_lines("1,2008-02-02 15:36:08,116.51172,39.92123\n",
                                "beijing", utc_offset_hours=8)
        p = points[0]
        expected = datetime(2008, 2, 2, 15, 36, 8,
                            tzinfo=timezone(timedelta(hours=8))).timestamp()
        assert p.timestamp == expected
        assert (p.lat, p.lon) == (39.92123, 116.51172)

    def test_beijing_malformed_timestamp_rejected(self):
        _, report = parse_lines("1,2008-13-45 99:00:00,116.5,39.9\n", "beijing")
        assert report.rejected == 1


class TestClip:
    def test_beijing_point_retained(self):
        pts = [GpsPoint("1", 0.0, 39.93, 116.45)]
        assert clip_to_bounds(pts, BEIJING) == pts

    def test_point_on_lat_min_retained(self):
        pts = [GpsPoint("1", 0.0, BEIJING.lat_min, 116.0)]
        assert clip_to_bounds(pts, BEIJING) == pts

    def test_origin_dropped(self):
        assert clip_to_bounds([GpsPoint("1", 0.0, 0.0, 0.0)], BEIJING) == []

    def test_order_preserved(self):
        pts = [GpsPoint("1", 3.0, 40.0, 116.0), GpsPoint("1", 1.0, 0.0, 0.0),
               GpsPoint("1", 2.0, 40.5, 116.5)]
        assert [p.timestamp for p in clip_to_bounds(pts, BEIJING)] == [3.0, 2.0]

    @given(st.lists(st.tuples(st.floats(-90, 90), st.floats(-180, 180)), max_size=50))
    def test_idempotent(self, coords):
        pts = [GpsPoint("1", float(i), lat, lon) for i, (lat, lon) in enumerate(coords)]
        once = clip_to_bounds(pts, BEIJING)
        assert clip_to_bounds(once, BEIJING) == once


class TestGridCounts:
    def test_round_trip(self):
        grid = GridCounts(BEIJING, 2, 3, (1, 2, 3, 4, 5, 6))
        buf = io.StringIO()
        write_grid_counts(grid, buf)
        buf.seek(0)
        assert load_grid_counts(buf) == grid

    def test_count_length_enforced(self):
        with pytest.raises(ValueError, match="expected 6 counts"):
            GridCounts(BEIJING, 2, 3, (1, 2, 3))

    def test_invalid_bounds_rejected(self):
        with pytest.raises(ValueError, match="invalid bounds"):
            CityBounds(40.0, 39.0, 116.0, 117.0)
