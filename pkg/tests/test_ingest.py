"""Parsing, cleaning and aggregation of the raw corpus."""

import datetime as dt
import textwrap

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stormrider.features import apparent_temperature
from stormrider.ingest import (CalendarConfig, StopHourCounts, TripRecord,
                               WeatherReading, aggregate_ridership,
                               clean_trips, counts_from_grid, hourly_weather,
                               parse_amenities, parse_calendar,
                               parse_service_windows, parse_stops,
                               parse_trips, parse_weather)

ORIGIN = dt.datetime(2021, 5, 3)  # a Monday


def trip(stop, board, alight_min=None):
    at = board + dt.timedelta(minutes=alight_min) if alight_min is not None else None
    return TripRecord("c1", "j1", "r66", stop, board,
                      "S99" if at else None, at)


def write(path, text):
    path.write_text(textwrap.dedent(text).lstrip())
    return path


class TestParseTrips:
    def test_round_trip(self, tmp_path):
        p = write(tmp_path / "t.csv", """
            card_id,journey_id,route_id,board_stop,alight_stop,board_time,alight_time
            c1,j1,r66,S1,S2,2021-05-03T07:15:00,2021-05-03T07:40:00
            c2,j2,r66,S2,,2021-05-03T08:05:30,
        """)
        trips, bad = parse_trips(p)
        assert bad == 0
        assert len(trips) == 2
        assert trips[0].board_stop == "S1"
        assert trips[0].duration_minutes == 25.0
        assert trips[1].alight_stop is None
        assert trips[1].duration_minutes is None

    def test_column_remapping(self, tmp_path):
        p = write(tmp_path / "t.csv", """
            smartcard,jid,line,origin,when
            c1,j1,r66,S1,2021-05-03T07:15:00
        """)
        trips, bad = parse_trips(p, columns={
            "card_id": "smartcard", "journey_id": "jid", "route_id": "line",
            "board_stop": "origin", "board_time": "when"})
        assert bad == 0 and trips[0].board_stop == "S1"

    def test_malformed_rows_counted_not_fatal(self, tmp_path):
        p = write(tmp_path / "t.csv", """
            card_id,journey_id,route_id,board_stop,board_time
            c1,j1,r66,S1,2021-05-03T07:15:00
            c2,j2,r66,S2,not-a-time
            c3,j3,r66,,2021-05-03T09:00:00
        """)
        trips, bad = parse_trips(p)
        assert len(trips) == 1
        assert bad == 2

    def test_missing_required_column_fatal(self, tmp_path):
        p = write(tmp_path / "t.csv", """
            card_id,journey_id,route_id,board_time
            c1,j1,r66,2021-05-03T07:15:00
        """)
        with pytest.raises(ValueError, match="required columns"):
            parse_trips(p)

    def test_unknown_remap_key_fatal(self, tmp_path):
        p = write(tmp_path / "t.csv", """
            card_id,journey_id,route_id,board_stop,board_time
        """)
        with pytest.raises(ValueError, match="unknown canonical"):
            parse_trips(p, columns={"bogus": "x"})


class TestParseWeather:
    def test_sorted_and_validated(self, tmp_path):
        p = write(tmp_path / "w.csv", """
            time,temperature,humidity,wind_speed,rainfall
            2021-05-03T00:10:00,21.5,60,1.2,0.0
            2021-05-03T00:05:00,21.6,61,1.1,0.0
            2021-05-03T00:15:00,21.4,101,1.0,0.0
            2021-05-03T00:20:00,21.4,60,-0.5,0.0
            2021-05-03T00:25:00,21.4,60,1.0,-0.1
        """)
        readings, bad = parse_weather(p)
        assert bad == 3  # humidity 101, negative wind, negative rain
        assert [r.time.minute for r in readings] == [5, 10]


class TestGeometryParsers:
    def test_stops(self, tmp_path):
        p = write(tmp_path / "s.csv", """
            stop_id,lon,lat,busway
            S1,153.02,-27.47,0
            S2,153.03,-27.46,1
        """)
        rows = parse_stops(p)
        assert rows[1] == {"stop_id": "S2", "lon": 153.03, "lat": -27.46,
                           "busway": 1}

    def test_amenities_grouped_by_category(self, tmp_path):
        p = write(tmp_path / "a.csv", """
            category,lon,lat
            shops,153.02,-27.47
            shops,153.03,-27.46
            civic,153.00,-27.45
        """)
        cats = parse_amenities(p)
        assert cats["shops"].shape == (2, 2)
        assert cats["civic"].shape == (1, 2)

    def test_service_windows_validate(self, tmp_path):
        good = write(tmp_path / "w.csv", """
            stop_id,day_of_week,start_hour,end_hour
            S1,1,5,23
        """)
        assert parse_service_windows(good)[0].end_hour == 23
        bad = write(tmp_path / "b.csv", """
            stop_id,day_of_week,start_hour,end_hour
            S1,8,5,23
        """)
        with pytest.raises(ValueError, match="day_of_week"):
            parse_service_windows(bad)
        inverted = write(tmp_path / "i.csv", """
            stop_id,day_of_week,start_hour,end_hour
            S1,1,23,5
        """)
        with pytest.raises(ValueError, match="bad window"):
            parse_service_windows(inverted)


class TestParseCalendar:
    def test_full_config(self, tmp_path):
        p = write(tmp_path / "c.toml", """
            [holidays]
            public = ["2021-05-31"]
            school_ranges = [["2021-06-28", "2021-07-09"]]
            flexible_dev = ["2021-06-11"]

            [windows]
            am_peak = [7, 8]
            pm_peak = [15, 17]
            weekend_peak = [9, 17]
            night = [22, 5]
        """)
        cal = parse_calendar(p)
        assert dt.date(2021, 5, 31) in cal.public_holidays
        assert cal.is_school_holiday(dt.date(2021, 7, 1))
        assert not cal.is_school_holiday(dt.date(2021, 7, 10))
        assert cal.night_hours == (22, 5)

    def test_defaults_when_sections_absent(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text("")
        cal = parse_calendar(p)
        assert cal == CalendarConfig()


class TestCleanTrips:
    """Exclusion rules: unknown boarding stop, duration > cap, negative."""

    def test_rule_by_rule(self):
        t0 = ORIGIN.replace(hour=7)
        trips = [
            trip("S1", t0, 30),      # kept
            trip("GHOST", t0, 30),   # unknown stop
            trip("S1", t0, 200),     # overlong
            trip("S1", t0, -5),      # negative duration
            trip("S1", t0, None),    # no alight evidence: kept
            trip("S1", t0, 180.0),   # exactly at the cap: kept
        ]
        kept, report = clean_trips(trips, {"S1", "S2"})
        assert len(kept) == 3
        assert (report.ungeocodable, report.overlong,
                report.negative_duration) == (1, 1, 1)
        assert report.kept + report.dropped() == report.total == 6

    def test_idempotent(self):
        t0 = ORIGIN.replace(hour=7)
        trips = [trip("S1", t0, 30), trip("GHOST", t0, 30)]
        once, _ = clean_trips(trips, {"S1"})
        twice, rep = clean_trips(once, {"S1"})
        assert twice == once
        assert rep.dropped() == 0


class TestAggregate:
    def test_hand_counted_grid(self):
        trips = [
            trip("S1", ORIGIN + dt.timedelta(minutes=10)),
            trip("S1", ORIGIN + dt.timedelta(minutes=59)),
            trip("S1", ORIGIN + dt.timedelta(hours=1)),
            trip("S2", ORIGIN + dt.timedelta(hours=2, minutes=30)),
        ]
        counts = aggregate_ridership(trips, ("S1", "S2"), ORIGIN, 3)
        assert counts.get("S1", 0) == 2
        assert counts.get("S1", 1) == 1
        assert counts.get("S2", 2) == 1
        assert counts.total() == 4

    def test_out_of_window_is_fatal(self):
        late = [trip("S1", ORIGIN + dt.timedelta(hours=3))]
        with pytest.raises(ValueError, match="outside"):
            aggregate_ridership(late, ("S1",), ORIGIN, 3)
        early = [trip("S1", ORIGIN - dt.timedelta(seconds=1))]
        with pytest.raises(ValueError, match="outside"):
            aggregate_ridership(early, ("S1",), ORIGIN, 3)

    def test_unknown_stop_is_fatal(self):
        trips = [trip("GHOST", ORIGIN)]
        with pytest.raises(ValueError, match="clean_trips"):
            aggregate_ridership(trips, ("S1",), ORIGIN, 3)

    def test_counts_grid_validation(self):
        with pytest.raises(ValueError, match="non-negative"):
            counts_from_grid(("S1",), ORIGIN, np.array([[1, -1]]))
        with pytest.raises(ValueError, match="shape"):
            StopHourCounts(("S1", "S2"), ORIGIN, 2, np.zeros((1, 2), int))


class TestHourlyWeather:
    def reading(self, minutes, t, h, ws, rf):
        return WeatherReading(ORIGIN + dt.timedelta(minutes=minutes),
                              t, h, ws, rf)

    def test_means_sums_and_gap_fill(self):
        readings = [
            self.reading(0, 20.0, 60.0, 1.0, 0.2),
            self.reading(30, 22.0, 64.0, 2.0, 0.3),
            self.reading(125, 26.0, 70.0, 3.0, 1.0),
        ]
        hw = hourly_weather(readings, ORIGIN, 4)
        assert [w.interpolated for w in hw] == [False, True, False, True]
        assert hw[0].temperature == 21.0
        assert hw[0].humidity == 62.0
        assert hw[0].rainfall == pytest.approx(0.5)
        # hour 1 sits midway between the hour-0 and hour-2 means
        assert hw[1].temperature == pytest.approx(23.5)
        assert hw[1].wind_speed == pytest.approx(2.25)
        assert hw[1].rainfall == 0.0
        # trailing edge gap extends the last observed hour
        assert hw[3].temperature == 26.0
        assert hw[3].rainfall == 0.0
        for w in hw:
            assert w.apparent_temp == apparent_temperature(
                w.temperature, w.humidity, w.wind_speed)

    def test_readings_outside_window_ignored(self):
        readings = [self.reading(-10, 20, 60, 1, 0),
                    self.reading(10, 21, 60, 1, 0),
                    self.reading(130, 22, 60, 1, 0)]
        hw = hourly_weather(readings, ORIGIN, 2)
        assert hw[0].temperature == 21.0
        assert len(hw) == 2

    def test_empty_window_fatal(self):
        with pytest.raises(ValueError, match="no weather readings"):
            hourly_weather([], ORIGIN, 3)


@st.composite
def trip_batches(draw):
    n = draw(st.integers(0, 40))
    stops = ["S1", "S2", "S3", "GHOST"]
    out = []
    for i in range(n):
        stop = draw(st.sampled_from(stops))
        minute = draw(st.integers(0, 179))
        dur = draw(st.one_of(st.none(),
                             st.floats(-30, 400, allow_nan=False)))
        out.append(trip(stop, ORIGIN + dt.timedelta(minutes=minute), dur))
    return out


@given(trip_batches())
@settings(max_examples=60, deadline=None)
def test_clean_conserves_and_is_idempotent(trips):
    """kept + dropped == total, and a second pass is a no-op."""
    known = {"S1", "S2", "S3"}
    kept, report = clean_trips(trips, known)
    assert report.kept + report.dropped() == report.total == len(trips)
    again, rep2 = clean_trips(kept, known)
    assert again == kept and rep2.dropped() == 0


@given(trip_batches())
@settings(max_examples=60, deadline=None)
def test_aggregation_conserves_boardings(trips):
    kept, _ = clean_trips(trips, {"S1", "S2", "S3"})
    counts = aggregate_ridership(kept, ("S1", "S2", "S3"), ORIGIN, 3)
    assert counts.total() == len(kept)
