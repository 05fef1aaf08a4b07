"""Feature primitives: weather transforms, geometry, breaks, panel assembly."""

import datetime as dt
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import stormrider.features as ft
from stormrider.ingest import (CalendarConfig, HourlyWeather, ServiceWindow,
                               StopHourCounts, TripRecord)

ORIGIN = dt.datetime(2021, 5, 3)  # a Monday
M_PER_DEG_LAT = ft.EARTH_RADIUS_M * math.pi / 180.0


def north_of(lon, lat, metres):
    """A point displaced due north; meridian arcs make the great-circle
    distance equal the displacement exactly."""
    return lon, lat + metres / M_PER_DEG_LAT


class TestApparentTemperature:
    def test_dry_still_air_offset(self):
        # with no vapour and no wind the formula collapses to T - 4
        for t in (-5.0, 0.0, 17.3, 45.0):
            assert ft.apparent_temperature(t, 0.0, 0.0) == t - 4.00

    def test_wind_term_linear(self):
        base = ft.apparent_temperature(20.0, 50.0, 0.0)
        assert ft.apparent_temperature(20.0, 50.0, 2.0) == pytest.approx(
            base - 1.40, abs=1e-12)

    def test_high_precision_grid(self):
        """1,000-point grid against a 50-digit mpmath evaluation."""
        import mpmath
        mpmath.mp.dps = 50
        ts = np.linspace(-5.0, 45.0, 10)
        hs = np.linspace(0.0, 100.0, 10)
        ws = np.linspace(0.0, 20.0, 10)
        tt, hh, ww = np.meshgrid(ts, hs, ws, indexing="ij")
        got = ft.apparent_temperature(tt, hh, ww)
        for i, j, k in itertools.product(range(10), repeat=3):
            t = mpmath.mpf(float(ts[i]))
            h = mpmath.mpf(float(hs[j]))
            w = mpmath.mpf(float(ws[k]))
            e = (h / 100) * mpmath.mpf("6.105") * mpmath.exp(
                mpmath.mpf("17.27") * t / (mpmath.mpf("237.7") + t))
            ref = t + mpmath.mpf("0.33") * e - mpmath.mpf("0.70") * w - 4
            assert abs(got[i, j, k] - float(ref)) < 1e-9

    def test_vapour_pole_rejected(self):
        with pytest.raises(ValueError, match="vapour"):
            ft.apparent_temperature(-237.7, 50.0, 1.0)

    def test_array_shape_preserved(self):
        out = ft.apparent_temperature(np.full((3, 2), 20.0), 50.0, 1.0)
        assert out.shape == (3, 2)
        assert isinstance(ft.apparent_temperature(20.0, 50.0, 1.0), float)


class TestHaversine:
    def test_coincident_points(self):
        assert ft.haversine(153.0, -27.5, 153.0, -27.5) == 0.0

    def test_equatorial_degree(self):
        # one degree of longitude on the equator is R * pi / 180
        d = ft.haversine(0.0, 0.0, 1.0, 0.0)
        assert d == pytest.approx(M_PER_DEG_LAT, rel=1e-12)

    def test_meridian_arc(self):
        lon, lat = north_of(153.0, -27.5, 1234.5)
        assert ft.haversine(153.0, -27.5, lon, lat) == pytest.approx(
            1234.5, abs=1e-6)

    def test_antipodal(self):
        d = ft.haversine(0.0, 0.0, 180.0, 0.0)
        assert d == pytest.approx(math.pi * ft.EARTH_RADIUS_M, rel=1e-12)

    def test_symmetry_and_broadcast(self):
        lons = np.array([153.0, 153.1, 152.9])
        lats = np.array([-27.4, -27.5, -27.6])
        fwd = ft.haversine(lons, lats, 153.02, -27.47)
        rev = ft.haversine(153.02, -27.47, lons, lats)
        np.testing.assert_array_equal(fwd, rev)


class TestAssignRings:
    def stop(self, sid, lon, lat):
        return ft.StopRecord(stop_id=sid, lon=lon, lat=lat)

    def test_boundaries(self):
        cbd = (153.026, -27.468)
        stops = [
            self.stop("a", *north_of(*cbd, 10.0)),
            self.stop("b", *north_of(*cbd, 1499.5)),
            self.stop("c", *north_of(*cbd, 1500.5)),   # just past cc radius
            self.stop("d", *north_of(*cbd, 4999.5)),
            self.stop("e", *north_of(*cbd, 5000.5)),   # just past ic radius
        ]
        ft.assign_rings(stops, cbd[0], cbd[1], 1500.0, 5000.0)
        flags = [(s.city_centre, s.inner_city, s.outer_ring) for s in stops]
        assert flags == [(1, 0, 0), (1, 0, 0), (0, 1, 0), (0, 1, 0), (0, 0, 1)]
        for s in stops:
            assert s.city_centre + s.inner_city + s.outer_ring == 1

    def test_radius_order_validated(self):
        with pytest.raises(ValueError):
            ft.assign_rings([], 153.0, -27.5, 5000.0, 1500.0)

    def test_exactly_one_flag_enforced(self):
        with pytest.raises(ValueError, match="exactly one ring flag"):
            ft.StopRecord("x", 153.0, -27.5, city_centre=1)


def slow_buffer_counts(coords, amenities, radius_m, categories):
    """Independent quadratic haversine counting, no chunking."""
    r = ft.EARTH_RADIUS_M
    out = np.zeros((len(coords), len(categories)), dtype=np.int64)
    for j, cat in enumerate(categories):
        pts = amenities.get(cat)
        if pts is None or len(pts) == 0:
            continue
        lon1 = np.radians(coords[:, 0])[:, None]
        lat1 = np.radians(coords[:, 1])[:, None]
        lon2 = np.radians(pts[:, 0])[None, :]
        lat2 = np.radians(pts[:, 1])[None, :]
        a = (np.sin((lat2 - lat1) / 2) ** 2
             + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2)
        d = 2 * r * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))
        out[:, j] = (d <= radius_m).sum(axis=1)
    return out


class TestAmenityDensity:
    def test_boundary_fixtures(self):
        """395 m in the buffer, 494 m out of it, 400 m inclusive."""
        stop = np.array([[153.026, -27.468]])
        cats = ("shops",)
        for dist, expect in ((395.0, 1), (494.0, 0), (400.0, 1), (400.02, 0)):
            pt = np.array([north_of(153.026, -27.468, dist)])
            raw, norm = ft.amenity_density(stop, {"shops": pt},
                                           categories=cats)
            assert raw[0, 0] == expect, dist

    def test_matches_brute_force(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            coords = np.column_stack([
                rng.uniform(152.9, 153.1, 200),
                rng.uniform(-27.6, -27.4, 200)])
            amen = {c: np.column_stack([
                rng.uniform(152.9, 153.1, 100),
                rng.uniform(-27.6, -27.4, 100)])
                for c in ("shops", "civic", "leisure", "transport", "tourism")}
            cats = ("shops", "civic", "leisure", "transport", "tourism")
            raw, _ = ft.amenity_density(coords, amen, categories=cats)
            ref = slow_buffer_counts(coords, amen, 400.0, cats)
            np.testing.assert_array_equal(raw, ref)

    def test_normalisation(self):
        coords = np.array([[153.0, -27.5], [153.5, -27.5]])
        near = np.array([north_of(153.0, -27.5, d) for d in (50, 100, 150)])
        raw, norm = ft.amenity_density(
            coords, {"shops": near, "civic": np.empty((0, 2))},
            categories=("shops", "civic"))
        np.testing.assert_array_equal(raw[:, 0], [3, 0])
        np.testing.assert_array_equal(norm[:, 0], [1.0, 0.0])
        np.testing.assert_array_equal(norm[:, 1], [0.0, 0.0])  # empty category

    def test_stop_record_input(self):
        stops = [ft.StopRecord("a", 153.0, -27.5)]
        pts = np.array([north_of(153.0, -27.5, 100.0)])
        raw, _ = ft.amenity_density(stops, {"shops": pts},
                                    categories=("shops",))
        assert raw[0, 0] == 1


def exhaustive_jenks_ssd(values, k):
    """Minimum within-class SSD over every contiguous partition.

    Searches cut positions between distinct sorted values and prices each
    run with the same prefix-sum expression the production code uses, so
    the comparison isolates the partition search itself.
    """
    v = np.sort(np.asarray(values, dtype=np.float64))
    uniq, start = np.unique(v, return_index=True)
    w = np.diff(np.append(start, v.size)).astype(np.float64)
    cw = np.concatenate(([0.0], np.cumsum(w)))
    cwv = np.concatenate(([0.0], np.cumsum(w * uniq)))
    cwv2 = np.concatenate(([0.0], np.cumsum(w * uniq * uniq)))

    def run_cost(i, j):  # inclusive run of distinct values [i, j]
        tw = cw[j + 1] - cw[i]
        tv = cwv[j + 1] - cwv[i]
        return cwv2[j + 1] - cwv2[i] - tv * tv / tw

    m = uniq.size
    best = math.inf
    for cuts in itertools.combinations(range(1, m), k - 1):
        edges = (0,) + cuts + (m,)
        ssd = sum(run_cost(edges[c], edges[c + 1] - 1) for c in range(k))
        best = min(best, ssd)
    return best


class TestJenksBreaks:
    def test_known_partition(self):
        # two tight clusters and an outlier
        values = [1.0, 1.1, 1.2, 5.0, 5.1, 20.0]
        jb = ft.jenks_breaks(values, 3)
        assert jb.breaks == (1.2, 5.1)
        np.testing.assert_array_equal(jb.classify([1.0, 1.2, 3.0, 5.1, 20.0]),
                                      [0, 0, 1, 1, 2])

    def test_matches_exhaustive_search(self):
        """200 random arrays: DP SSD equals brute-force SSD exactly."""
        rng = np.random.default_rng(5)
        for trial in range(200):
            n = int(rng.integers(2, 13))
            values = rng.integers(0, 15, size=n).astype(float)
            k = int(rng.integers(1, min(4, np.unique(values).size) + 1))
            jb = ft.jenks_breaks(values, k)
            assert jb.within_class_ssd == exhaustive_jenks_ssd(values, k), \
                (trial, values.tolist(), k)
            assert len(jb.breaks) == k - 1
            assert list(jb.breaks) == sorted(set(jb.breaks))

    def test_single_class(self):
        jb = ft.jenks_breaks([4.0, 1.0, 7.0], 1)
        assert jb.breaks == ()
        assert jb.within_class_ssd == pytest.approx(18.0)  # var*n of {1,4,7}

    def test_weights_shift_optimum(self):
        # unweighted isolates 0 (ssd 8 vs 12.5); a heavy 9 flips the cut
        unweighted = ft.jenks_breaks([0.0, 5.0, 9.0], 2)
        assert unweighted.breaks == (0.0,)
        weighted = ft.jenks_breaks([0.0, 5.0, 9.0], 2, weights=[1, 1, 100])
        assert weighted.breaks == (5.0,)

    def test_validation(self):
        with pytest.raises(ValueError, match="empty"):
            ft.jenks_breaks([], 2)
        with pytest.raises(ValueError, match="distinct"):
            ft.jenks_breaks([1.0, 1.0, 1.0], 2)
        with pytest.raises(ValueError, match="positive"):
            ft.jenks_breaks([1.0, 2.0], 2, weights=[1.0, 0.0])
        with pytest.raises(ValueError, match="match"):
            ft.jenks_breaks([1.0, 2.0], 2, weights=[1.0])

    def test_ties_collapse(self):
        jb = ft.jenks_breaks([2.0] * 40 + [9.0] * 25, 2)
        assert jb.breaks == (2.0,)
        assert jb.within_class_ssd == 0.0


class TestJourneyShares:
    def breaks(self):
        return ft.jenks_breaks([5.0, 10.0, 20.0, 40.0, 80.0], 5)

    def test_hand_fixture(self):
        jb = self.breaks()
        t0 = ORIGIN
        trips = [
            TripRecord("c", "j", "r", "S1", t0, "S2",
                       t0 + dt.timedelta(minutes=m))
            for m in (4.0, 6.0, 6.0, 85.0)
        ] + [TripRecord("c", "j", "r", "S2", t0)]  # no duration: skipped
        shares = ft.journey_time_shares(trips, jb, ("S1", "S2"))
        np.testing.assert_allclose(shares[0], [0.25, 0.5, 0.0, 0.0, 0.25])
        np.testing.assert_array_equal(shares[1], np.zeros(5))

    def test_rows_sum_to_one_or_zero(self):
        rng = np.random.default_rng(2)
        idx = rng.integers(0, 6, 200)
        dur = rng.uniform(1.0, 120.0, 200)
        shares = ft.shares_from_durations(idx, dur, 8, self.breaks())
        sums = shares.sum(axis=1)
        assert np.all((np.abs(sums - 1.0) < 1e-12) | (sums == 0.0))
        assert sums[6] == 0.0 and sums[7] == 0.0


HOLIDAY_CAL = CalendarConfig(
    public_holidays=frozenset({dt.date(2021, 5, 4)}),  # the Tuesday
    school_holiday_ranges=((dt.date(2021, 5, 6), dt.date(2021, 5, 7)),),
    flexible_dev_days=frozenset({dt.date(2021, 5, 5)}),
)


class TestHourFeatures:
    def test_week_structure(self):
        hf = ft.hour_feature_matrix(ORIGIN, 168, HOLIDAY_CAL)
        assert hf.shape == (168, 10)
        # hour_of_day runs 1..24, day_of_week 1..7 from Monday
        assert hf[0, 0] == 1 and hf[23, 0] == 24
        np.testing.assert_array_equal(np.unique(hf[:, 1]), np.arange(1, 8))
        assert hf[0, 1] == 1 and hf[144, 1] == 7
        # weekend flag covers exactly Saturday + Sunday
        assert hf[:, 2].sum() == 48

    def test_day_flags(self):
        hf = ft.hour_feature_matrix(ORIGIN, 168, HOLIDAY_CAL)
        assert hf[24:48, 3].all() and hf[:24, 3].sum() == 0   # public Tue
        assert hf[48:72, 5].all()                             # flex Wed
        assert hf[72:120, 4].all() and hf[120:, 4].sum() == 0  # school Thu+Fri

    def test_peak_windows(self):
        hf = ft.hour_feature_matrix(ORIGIN, 168, HOLIDAY_CAL)
        am, pm, wp = hf[:, 6], hf[:, 7], hf[:, 8]
        # Monday 07:00 and 08:00 are AM peak; the holiday Tuesday is not
        assert am[7] == 1 and am[8] == 1 and am[6] == 0
        assert am[24 + 7] == 0 and pm[24 + 16] == 0
        # weekend peak exists only on the weekend, 09..17 inclusive
        assert wp[:120].sum() == 0
        assert wp[120 + 9] == 1 and wp[120 + 17] == 1 and wp[120 + 8] == 0
        # no AM/PM peak on weekends
        assert am[120:].sum() == 0 and pm[120:].sum() == 0

    def test_night_wraps_midnight(self):
        hf = ft.hour_feature_matrix(ORIGIN, 48, CalendarConfig())
        night = hf[:, 9]
        assert night[22] == 1 and night[23] == 1
        assert night[24] == 1 and night[29] == 1  # 00:00..05:00 next day
        assert night[6] == 0 and night[21] == 0

    def test_midnight_alignment_required(self):
        with pytest.raises(ValueError, match="whole hour"):
            ft.hour_feature_matrix(ORIGIN.replace(minute=30), 24,
                                   CalendarConfig())


class TestServiceMatrix:
    def test_windows_applied_half_open(self):
        windows = [ServiceWindow("S1", 1, 5, 23),
                   ServiceWindow("S1", 2, 6, 22)]
        si = ft.service_matrix(("S1", "S2"), windows, ORIGIN, 48)
        assert si[0, 5] == 1 and si[0, 22] == 1 and si[0, 23] == 0
        assert si[0, 4] == 0
        assert si[0, 24 + 6] == 1 and si[0, 24 + 22] == 0
        assert si[1].sum() == 0  # no declared windows

    def test_calendar_features_agree(self):
        windows = [ServiceWindow("S1", 1, 5, 23)]
        row = ft.calendar_features(ORIGIN, 7, HOLIDAY_CAL, windows)
        hf = ft.hour_feature_matrix(ORIGIN, 8, HOLIDAY_CAL)
        np.testing.assert_array_equal(row[:10], hf[7])
        assert row[10] == 1.0
        assert ft.calendar_features(ORIGIN, 3, HOLIDAY_CAL, windows)[10] == 0.0


def tiny_panel(n_stops=3, hours=172, warmup=168, seed=0):
    rng = np.random.default_rng(seed)
    counts = StopHourCounts(
        tuple(f"S{i}" for i in range(n_stops)), ORIGIN, hours,
        rng.integers(0, 30, size=(n_stops, hours)))
    weather = [HourlyWeather(h, 20.0 + (h % 24), 60.0, 1.0, 19.0, 0.1 * (h % 3))
               for h in range(hours)]
    stops = [ft.StopRecord(f"S{i}", 153.0 + 0.01 * i, -27.5,
                           jt_shares=rng.dirichlet(np.ones(5)),
                           amenity_densities=rng.uniform(0, 1, 15))
             for i in range(n_stops)]
    windows = [ServiceWindow(f"S{i}", d, 5, 23)
               for i in range(n_stops) for d in range(1, 8)]
    panel = ft.build_panel(counts, weather, stops, CalendarConfig(),
                           windows, warmup=warmup)
    return panel, counts


class TestPanel:
    def test_row_count_and_hour_range(self):
        panel, _ = tiny_panel()
        assert len(panel) == 3 * (172 - 168)
        assert panel.first_hour == 167
        hours = panel.observation_hours()
        assert hours.min() == 167 and hours.max() == 170

    def test_lag_columns_read_from_counts(self):
        panel, counts = tiny_panel()
        x = panel.matrix()
        y = panel.targets()
        s, t = panel._locate(None)
        np.testing.assert_array_equal(x[:, 0], counts.values[s, t])
        np.testing.assert_array_equal(x[:, 1], counts.values[s, t - 23])
        np.testing.assert_array_equal(x[:, 2], counts.values[s, t - 167])
        np.testing.assert_array_equal(y, counts.values[s, t + 1])

    def test_sequence_protocol_matches_bulk(self):
        panel, _ = tiny_panel()
        row = panel[5]
        np.testing.assert_array_equal(row.features, panel.matrix()[5])
        assert row.target == panel.targets()[5]
        assert panel[-1].hour_index == 170
        assert len(panel[1:4]) == 3
        with pytest.raises(IndexError):
            panel[len(panel)]

    def test_schema_width(self):
        panel, _ = tiny_panel()
        assert panel.matrix().shape[1] == len(ft.PANEL_SCHEMA) == 43
        assert ft.PANEL_SCHEMA.index("hour_lag") == 0
        assert ft.PANEL_SCHEMA.index("service_running") == 18
        assert ft.PANEL_SCHEMA.index("city_centre") == 24

    def test_stop_block_constant_within_stop(self):
        panel, _ = tiny_panel()
        x = panel.matrix()
        per_stop = x[:, 19:].reshape(3, 4, 24)
        for i in range(3):
            assert (per_stop[i] == per_stop[i, 0]).all()

    def test_too_short_span_rejected(self):
        with pytest.raises(ValueError, match="too short"):
            tiny_panel(hours=169)

    def test_warmup_below_weekly_lag_rejected(self):
        with pytest.raises(ValueError, match="weekly lag"):
            tiny_panel(hours=300, warmup=100)

    def test_weather_length_mismatch_rejected(self):
        panel, counts = tiny_panel()
        weather = [HourlyWeather(h, 20.0, 60.0, 1.0, 19.0, 0.0)
                   for h in range(100)]
        with pytest.raises(ValueError, match="weather spans"):
            ft.build_panel(counts, weather, [], CalendarConfig())

    def test_missing_stop_record_rejected(self):
        panel, counts = tiny_panel()
        weather = [HourlyWeather(h, 20.0, 60.0, 1.0, 19.0, 0.0)
                   for h in range(172)]
        with pytest.raises(ValueError, match="missing from stop records"):
            ft.build_panel(counts, weather, [ft.StopRecord("S0", 153.0, -27.5)],
                           CalendarConfig())


@given(st.integers(2, 6), st.integers(170, 200), st.integers(168, 168))
@settings(max_examples=25, deadline=None)
def test_panel_lags_always_align(n_stops, hours, warmup):
    """Lag columns always equal the count grid shifted by 1/24/168 hours
    relative to the predicted hour."""
    panel, counts = tiny_panel(n_stops=n_stops, hours=hours, warmup=warmup,
                               seed=hours)
    rows = np.arange(0, len(panel), 7)
    x = panel.matrix(rows)
    s, t = panel._locate(rows)
    u = t + 1
    np.testing.assert_array_equal(x[:, 0], counts.values[s, u - 1])
    np.testing.assert_array_equal(x[:, 1], counts.values[s, u - 24])
    np.testing.assert_array_equal(x[:, 2], counts.values[s, u - 168])
