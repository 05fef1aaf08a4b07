"""Synthetic city, weather and ridership generation.

Everything here is a pure function of (spec, seed).  Randomness comes
exclusively from Philox counter-based streams keyed as
``(seed << 64) | stream_tag``, so any corpus can be regenerated from its
seed on any platform, and per-stop ridership streams are independent of
stop order and scheduling.

The ridership model is a zero-inflated Poisson-gamma: a Bernoulli gate
decides "no boardings at all", otherwise a gamma-mixed Poisson draw with

    mean = base_rate[class] * weekly_profile[hour-of-week]
           * holiday/school factors * exp(sum_v elasticity[class][v] * anomaly_v)

where the conditional rate is inflated by 1 / (1 - zero_inflation) so the
unconditional mean equals the formula above.  expected_mean_matrix exposes
that mean exactly, which is what the distributional tests check against.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .features import (AMENITY_CATEGORIES, EARTH_RADIUS_M, StopRecord,
                       assign_rings, service_matrix)
from .ingest import (CalendarConfig, HourlyWeather, ServiceWindow,
                     StopHourCounts, WeatherReading, counts_from_grid)

DEFAULT_ORIGIN = dt.datetime(2019, 3, 4, 0, 0)  # a Monday
READINGS_PER_HOUR = 12
READINGS_PER_DAY = 288

STOP_CLASSES = ("city_centre", "inner_city", "outer_ring", "busway")
WEATHER_VARS = ("temperature", "humidity", "wind_speed", "apparent_temp",
                "rainfall")

_MASK64 = (1 << 64) - 1

# stream tags; per-stop ridership streams start at _STOP_TAG_BASE
_TAG_CITY_POS = 1
_TAG_CITY_BUSWAY = 2
_TAG_CITY_AMENITY = 3
_TAG_WEATHER_T = 101
_TAG_WEATHER_H = 102
_TAG_WEATHER_W = 103
_TAG_WEATHER_R = 104
_TAG_TRIPS = 7001
_STOP_TAG_BASE = 1 << 32
_ACT_TAG_BASE = 1 << 33


def _stream(seed: int, tag: int) -> np.random.Generator:
    """A Philox generator keyed by (seed, tag); splittable and portable."""
    key = ((int(seed) & _MASK64) << 64) | (int(tag) & _MASK64)
    return np.random.Generator(np.random.Philox(key=key))


# ---------------------------------------------------------------------------
# specs


@dataclass(frozen=True)
class CitySpec:
    """Layout knobs for the synthetic city.

    ring_radii are the metre boundaries of the city-centre, inner-city and
    outer-ring zones; ring_shares gives the cumulative probability that a
    stop falls inside the first / first two rings.
    """

    n_stops: int = 200
    cbd_center: tuple[float, float] = (153.026, -27.468)  # lon, lat
    ring_radii: tuple[float, float, float] = (1500.0, 5000.0, 12000.0)
    busway_fraction: float = 0.06
    amenity_intensity: float = 1.0
    seed: int = 0
    ring_shares: tuple[float, float] = (0.05, 0.55)

    def __post_init__(self) -> None:
        r1, r2, r3 = self.ring_radii
        if not 0.0 < r1 < r2 < r3:
            raise ValueError(f"degenerate ring radii {self.ring_radii}")
        if not 0.0 <= self.busway_fraction <= 1.0:
            raise ValueError("busway_fraction must lie in [0, 1]")
        if self.n_stops < 2:
            raise ValueError("need at least 2 stops")
        s1, s2 = self.ring_shares
        if not 0.0 < s1 < s2 < 1.0:
            raise ValueError("ring_shares must be increasing within (0, 1)")
        if self.amenity_intensity < 0.0:
            raise ValueError("amenity_intensity must be non-negative")


@dataclass(frozen=True)
class ClimateSpec:
    """Subtropical weather parameters (5-minute cadence).

    Temperature is a diurnal sinusoid peaking mid-afternoon plus a slow
    seasonal drift and AR(1) noise.  Humidity moves against the
    temperature deviation and is clipped to [20, 100].  Wind is a
    log-normal AR process.  Rain arrives as Poisson-scheduled storm
    bursts whose per-storm intensity is log-normal, so a 90-day run
    contains a handful of hours above the 3 mm heavy-rain threshold.
    """

    temp_mean: float = 22.4
    temp_trend_per_day: float = -0.008
    diurnal_amp: float = 4.5
    temp_ar: float = 0.98
    temp_noise_sd: float = 0.18
    humidity_base: float = 62.0
    humidity_slope: float = 3.0
    humidity_ar: float = 0.90
    humidity_noise_sd: float = 1.0
    wind_median: float = 1.3
    wind_log_sd: float = 0.45
    wind_ar: float = 0.85
    storm_rate_per_day: float = 0.18
    storm_mean_hours: float = 1.25
    storm_gamma_shape: float = 0.7
    storm_scale_mm: float = 0.45
    storm_intensity_log_sd: float = 0.8


def default_weekly_profile() -> np.ndarray:
    """168 hour-of-week multipliers, Monday 00:00 first, mean 1.

    Weekdays carry sharp AM/PM commute peaks; weekends a broad daytime
    shoulder; nights are close to dead.
    """
    prof = np.empty(168)
    for dow in range(7):
        for hod in range(24):
            if dow < 5:
                if 7 <= hod <= 8:
                    v = 3.2
                elif 15 <= hod <= 17:
                    v = 3.0
                elif 9 <= hod <= 14:
                    v = 1.1
                elif hod in (6, 18, 19):
                    v = 0.9
                elif 20 <= hod <= 21:
                    v = 0.5
                else:
                    v = 0.12
            else:
                if 9 <= hod <= 17:
                    v = 1.5
                elif hod in (8, 18, 19):
                    v = 0.8
                elif 20 <= hod <= 21:
                    v = 0.45
                else:
                    v = 0.1
            prof[dow * 24 + hod] = v
    return prof / prof.mean()


def _default_elasticities() -> dict[str, dict[str, float]]:
    # commuter-type stops (busway, outer ring) gain riders in rain,
    # discretionary inner-city / CBD stops lose them
    return {
        "city_centre": {"rainfall": -0.050, "apparent_temp": -0.020,
                        "humidity": -0.010},
        "inner_city": {"rainfall": -0.025, "apparent_temp": -0.010,
                       "humidity": -0.008},
        "outer_ring": {"rainfall": 0.020, "wind_speed": -0.010},
        "busway": {"rainfall": 0.035, "wind_speed": -0.010},
    }


def _default_refs() -> dict[str, tuple[float, float]]:
    return {
        "temperature": (22.4, 5.0),
        "humidity": (62.0, 20.0),
        "wind_speed": (1.6, 1.5),
        "apparent_temp": (24.2, 5.0),
        "rainfall": (0.0, 1.0),  # anomaly is plain mm
    }


@dataclass(frozen=True)
class DemandSpec:
    """Ridership process parameters.

    base_rate maps stop class (busway beats ring membership) to mean
    boardings per hour at a profile multiplier of 1.  weather_refs gives
    the (reference, scale) pair defining each variable's anomaly
    ``(value - reference) / scale``; rainfall uses scale 1 so its
    elasticity reads "per millimetre".

    activity_rho / activity_sd shape a per-stop lognormal AR(1) demand
    multiplier: real boarding series run hot or cold for stretches of
    hours beyond what the weekly profile explains, and this is what makes
    lagged counts informative.  The multiplier has mean exactly 1 at
    every hour, so it never shifts the expected count.  activity_sd 0
    switches the process off.
    """

    base_rate: Mapping[str, float] = field(
        default_factory=lambda: {"city_centre": 5.0, "inner_city": 1.8,
                                 "outer_ring": 0.8, "busway": 6.0})
    zero_inflation: float = 0.35
    weekly_profile: np.ndarray = field(default_factory=default_weekly_profile)
    weather_elasticities: Mapping[str, Mapping[str, float]] = field(
        default_factory=_default_elasticities)
    weather_refs: Mapping[str, tuple[float, float]] = field(
        default_factory=_default_refs)
    dispersion: float = 1.5
    school_factor: float = 0.85
    holiday_factor: float = 0.9
    flexdev_factor: float = 0.95
    activity_rho: float = 0.99
    activity_sd: float = 0.7

    def __post_init__(self) -> None:
        prof = np.asarray(self.weekly_profile, dtype=np.float64)
        if prof.shape != (168,):
            raise ValueError("weekly_profile must have 168 entries")
        if np.any(prof < 0.0):
            raise ValueError("weekly_profile multipliers must be >= 0")
        object.__setattr__(self, "weekly_profile", prof)
        if not 0.0 <= self.zero_inflation <= 1.0:
            raise ValueError("zero_inflation must lie in [0, 1]")
        if self.dispersion <= 0.0:
            raise ValueError("dispersion must be positive")
        missing = [c for c in STOP_CLASSES if c not in self.base_rate]
        if missing:
            raise ValueError(f"base_rate missing stop classes {missing}")
        for cls, elas in self.weather_elasticities.items():
            unknown = set(elas) - set(WEATHER_VARS)
            if unknown:
                raise ValueError(f"unknown weather variables for {cls}: "
                                 f"{sorted(unknown)}")
        if not 0.0 <= self.activity_rho < 1.0:
            raise ValueError("activity_rho must lie in [0, 1)")
        if self.activity_sd < 0.0:
            raise ValueError("activity_sd must be non-negative")


def stop_class(stop: StopRecord) -> str:
    """Demand class of a stop: busway wins, otherwise the ring name."""
    if stop.busway:
        return "busway"
    if stop.city_centre:
        return "city_centre"
    if stop.inner_city:
        return "inner_city"
    return "outer_ring"


# ---------------------------------------------------------------------------
# city


_CATEGORY_WEIGHTS = {
    "sustenance": 3.0, "education": 1.2, "university": 0.3, "transport": 1.6,
    "financial": 0.8, "healthcare": 1.0, "small_day_entertainment": 0.9,
    "large_day_entertainment": 0.3, "night_entertainment": 0.7,
    "religious": 0.6, "civic": 0.5, "infrastructure": 1.4, "leisure": 1.2,
    "shops": 2.5, "tourism": 0.4,
}


def _offset_lonlat(lon0: float, lat0: float, dx_m, dy_m):
    """Move east/north by metres on the local tangent plane."""
    scale = 180.0 / (math.pi * EARTH_RADIUS_M)
    lat = lat0 + np.asarray(dy_m) * scale
    lon = lon0 + np.asarray(dx_m) * scale / math.cos(math.radians(lat0))
    return lon, lat


def gen_city(spec: CitySpec) -> tuple[list[StopRecord], dict[str, np.ndarray],
                                      list[ServiceWindow]]:
    """Lay out stops, amenity points and service windows.

    Stops scatter area-uniformly within their ring band; a busway subset
    is re-seated along two straight corridors through the CBD and runs a
    24-hour service, all other stops run 05-23 weekdays and 06-22
    weekends.  Amenities cluster around the CBD and three satellite
    activity centres.
    """
    lon0, lat0 = spec.cbd_center
    r1, r2, r3 = spec.ring_radii
    n = spec.n_stops

    rng = _stream(spec.seed, _TAG_CITY_POS)
    u = rng.random(n)
    v = rng.random(n)
    theta = rng.random(n) * 2.0 * math.pi
    s1, s2 = spec.ring_shares
    r = np.empty(n)
    band_cc = u < s1
    band_ic = (u >= s1) & (u < s2)
    band_or = u >= s2
    r[band_cc] = np.sqrt(v[band_cc]) * r1
    r[band_ic] = np.sqrt(r1 ** 2 + v[band_ic] * (r2 ** 2 - r1 ** 2))
    r[band_or] = np.sqrt(r2 ** 2 + v[band_or] * (r3 ** 2 - r2 ** 2))
    dx = r * np.cos(theta)
    dy = r * np.sin(theta)

    busway = np.zeros(n, dtype=np.int64)
    k = int(round(spec.busway_fraction * n))
    if k:
        brng = _stream(spec.seed, _TAG_CITY_BUSWAY)
        chosen = brng.choice(n, size=k, replace=False)
        angles = brng.random(2) * 2.0 * math.pi
        along = 300.0 + brng.random(k) * (0.9 * r3 - 300.0)
        jitter = brng.normal(0.0, 60.0, size=k)
        corridor = angles[np.arange(k) % 2]
        dx[chosen] = along * np.cos(corridor) - jitter * np.sin(corridor)
        dy[chosen] = along * np.sin(corridor) + jitter * np.cos(corridor)
        busway[chosen] = 1

    lon, lat = _offset_lonlat(lon0, lat0, dx, dy)
    stops = [StopRecord(stop_id=f"S{i:04d}", lon=float(lon[i]),
                        lat=float(lat[i]), busway=int(busway[i]))
             for i in range(n)]
    assign_rings(stops, lon0, lat0, r1, r2)

    arng = _stream(spec.seed, _TAG_CITY_AMENITY)
    centre_angle = arng.random(3) * 2.0 * math.pi
    centre_r = 3000.0 + arng.random(3) * (0.8 * r3 - 3000.0)
    cx = np.concatenate(([0.0], centre_r * np.cos(centre_angle)))
    cy = np.concatenate(([0.0], centre_r * np.sin(centre_angle)))
    centre_p = np.array([0.55, 0.15, 0.15, 0.15])
    per_cat = max(8.0, n / 25.0)
    amenities: dict[str, np.ndarray] = {}
    for cat in AMENITY_CATEGORIES:
        m = int(arng.poisson(spec.amenity_intensity
                             * _CATEGORY_WEIGHTS[cat] * per_cat))
        if m == 0:
            continue
        which = arng.choice(4, size=m, p=centre_p)
        ax = cx[which] + arng.normal(0.0, 700.0, size=m)
        ay = cy[which] + arng.normal(0.0, 700.0, size=m)
        alon, alat = _offset_lonlat(lon0, lat0, ax, ay)
        amenities[cat] = np.column_stack([alon, alat])

    windows: list[ServiceWindow] = []
    for s in stops:
        for d in range(1, 8):
            if s.busway:
                windows.append(ServiceWindow(s.stop_id, d, 0, 24))
            elif d <= 5:
                windows.append(ServiceWindow(s.stop_id, d, 5, 23))
            else:
                windows.append(ServiceWindow(s.stop_id, d, 6, 22))
    return stops, amenities, windows


def gen_calendar(start: dt.date, days: int) -> CalendarConfig:
    """Public holidays, a school-holiday fortnight and flex days.

    Deterministic by construction: roughly every 45 days a Monday public
    holiday, a 14-day school break centred mid-span, and an occasional
    flexible-development day.
    """
    publics = []
    for d in range(24, days, 45):
        date = start + dt.timedelta(days=d)
        date += dt.timedelta(days=(7 - date.weekday()) % 7)  # next Monday
        if (date - start).days < days:
            publics.append(date)
    school: tuple[tuple[dt.date, dt.date], ...] = ()
    if days >= 28:
        mid = start + dt.timedelta(days=days // 2 - 7)
        school = ((mid, mid + dt.timedelta(days=13)),)
    flex = [start + dt.timedelta(days=d) for d in range(50, days, 61)]
    return CalendarConfig(public_holidays=frozenset(publics),
                          school_holiday_ranges=school,
                          flexible_dev_days=frozenset(flex))


# ---------------------------------------------------------------------------
# weather


def _ar1(rng: np.random.Generator, n: int, ar: float, noise_sd: float,
         unit_variance: bool = False) -> np.ndarray:
    z = rng.standard_normal(n)
    if unit_variance:
        z *= math.sqrt(1.0 - ar * ar)
    else:
        z *= noise_sd
    out = np.empty(n)
    acc = 0.0
    for i in range(n):
        acc = ar * acc + z[i]
        out[i] = acc
    return out


def gen_weather(days: int, seed: int, climate: ClimateSpec | None = None,
                origin: dt.datetime = DEFAULT_ORIGIN) -> list[WeatherReading]:
    """Five-minute weather readings for ``days`` days from ``origin``.

    Values are quantised to three decimals so a written corpus round-trips
    bit-exactly through the CSV ingester.
    """
    if days < 1:
        raise ValueError("days must be >= 1")
    climate = climate if climate is not None else ClimateSpec()
    n = days * READINGS_PER_DAY
    step = np.arange(n)
    tod_hours = (step % READINGS_PER_DAY) / READINGS_PER_HOUR
    day = step // READINGS_PER_DAY

    level = climate.temp_mean + climate.temp_trend_per_day * day
    diurnal = climate.diurnal_amp * np.cos(2.0 * math.pi * (tod_hours - 14.0) / 24.0)
    t_noise = _ar1(_stream(seed, _TAG_WEATHER_T), n, climate.temp_ar,
                   climate.temp_noise_sd)
    temp = level + diurnal + t_noise

    h_noise = _ar1(_stream(seed, _TAG_WEATHER_H), n, climate.humidity_ar,
                   climate.humidity_noise_sd)
    hum = np.clip(climate.humidity_base
                  - climate.humidity_slope * (temp - level) + h_noise,
                  20.0, 100.0)

    w_ar = _ar1(_stream(seed, _TAG_WEATHER_W), n, climate.wind_ar, 0.0,
                unit_variance=True)
    wind = np.exp(math.log(climate.wind_median) + climate.wind_log_sd * w_ar)

    rrng = _stream(seed, _TAG_WEATHER_R)
    rain = np.zeros(n)
    n_storms = int(rrng.poisson(climate.storm_rate_per_day * days))
    starts = rrng.integers(0, n, size=n_storms)
    lengths = np.maximum(
        1, rrng.poisson(climate.storm_mean_hours * READINGS_PER_HOUR,
                        size=n_storms))
    intensity = rrng.lognormal(0.0, climate.storm_intensity_log_sd,
                               size=n_storms)
    for s0, ln, inten in zip(starts, lengths, intensity):
        s1 = min(int(s0) + int(ln), n)
        burst = rrng.gamma(climate.storm_gamma_shape,
                           climate.storm_scale_mm * inten, size=s1 - int(s0))
        rain[int(s0):s1] += burst

    temp = np.round(temp, 3)
    hum = np.round(hum, 3)
    wind = np.round(wind, 3)
    rain = np.round(rain, 3)
    return [WeatherReading(time=origin + dt.timedelta(minutes=5 * int(i)),
                           temperature=float(temp[i]), humidity=float(hum[i]),
                           wind_speed=float(wind[i]), rainfall=float(rain[i]))
            for i in range(n)]


# ---------------------------------------------------------------------------
# ridership


def _profile_and_factors(calendar: CalendarConfig, demand: DemandSpec,
                         origin: dt.datetime, hours: int) -> np.ndarray:
    """Hourly profile multiplier with holiday handling applied.

    Public holidays swap in the Sunday profile column and apply
    holiday_factor; school holidays damp weekdays by school_factor;
    flexible-development days damp weekdays by flexdev_factor.
    """
    out = np.empty(hours)
    prof = demand.weekly_profile
    for h in range(hours):
        when = origin + dt.timedelta(hours=h)
        date = when.date()
        dow = date.weekday()  # Monday=0
        hod = when.hour
        if date in calendar.public_holidays:
            out[h] = prof[6 * 24 + hod] * demand.holiday_factor
            continue
        m = prof[dow * 24 + hod]
        if dow < 5 and calendar.is_school_holiday(date):
            m *= demand.school_factor
        if dow < 5 and date in calendar.flexible_dev_days:
            m *= demand.flexdev_factor
        out[h] = m
    return out


def _weather_anomalies(weather: Sequence[HourlyWeather],
                       demand: DemandSpec) -> dict[str, np.ndarray]:
    cols = {
        "temperature": np.array([w.temperature for w in weather]),
        "humidity": np.array([w.humidity for w in weather]),
        "wind_speed": np.array([w.wind_speed for w in weather]),
        "apparent_temp": np.array([w.apparent_temp for w in weather]),
        "rainfall": np.array([w.rainfall for w in weather]),
    }
    out = {}
    for var, (ref, scale) in demand.weather_refs.items():
        out[var] = (cols[var] - ref) / scale
    return out


def expected_mean_matrix(stops: Sequence[StopRecord],
                         weather: Sequence[HourlyWeather],
                         calendar: CalendarConfig, demand: DemandSpec,
                         origin: dt.datetime = DEFAULT_ORIGIN,
                         windows: Iterable[ServiceWindow] | None = None,
                         ) -> np.ndarray:
    """The exact unconditional mean used by gen_ridership, (n_stops, H).

    With ``windows`` given, hours outside a stop's declared service are
    zeroed.  This is the analytic oracle for all distributional tests.
    """
    hours = len(weather)
    profile = _profile_and_factors(calendar, demand, origin, hours)
    anomalies = _weather_anomalies(weather, demand)

    class_mult = {}
    for cls in STOP_CLASSES:
        log_m = np.zeros(hours)
        for var, coef in demand.weather_elasticities.get(cls, {}).items():
            log_m += coef * anomalies[var]
        class_mult[cls] = np.exp(log_m)

    mean = np.empty((len(stops), hours))
    for i, s in enumerate(stops):
        cls = stop_class(s)
        mean[i] = demand.base_rate[cls] * profile * class_mult[cls]
    if windows is not None:
        mask = service_matrix([s.stop_id for s in stops], windows, origin,
                              hours)
        mean *= mask
    return mean


def _log_activity(rng: np.random.Generator, n: int, rho: float,
                  sd: float) -> np.ndarray:
    """Mean-one lognormal AR(1) multiplier.

    The latent series starts from its stationary distribution, so every
    hour has log-variance exactly sd**2 and the lognormal correction
    exp(-sd**2 / 2) makes the expectation exactly 1 throughout.
    """
    z = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = acc = z[0]
    w = math.sqrt(1.0 - rho * rho)
    for i in range(1, n):
        acc = rho * acc + w * z[i]
        x[i] = acc
    return np.exp(sd * x - 0.5 * sd * sd)


def gen_ridership(stops: Sequence[StopRecord],
                  weather: Sequence[HourlyWeather],
                  calendar: CalendarConfig, demand: DemandSpec, seed: int,
                  origin: dt.datetime = DEFAULT_ORIGIN,
                  windows: Iterable[ServiceWindow] | None = None,
                  ) -> StopHourCounts:
    """Draw the stop-hour boarding grid.

    Per stop, in a dedicated Philox stream, the draw order per series is
    gate uniforms, gamma mixture, Poisson counts.  A gated hour is zero;
    otherwise the Poisson rate is mean / (1 - zero_inflation) times the
    gamma mixture variable, times the stop's activity multiplier (drawn
    from its own stream so the count stream layout never changes).  The
    multiplier has mean 1 at every hour, so the unconditional mean still
    matches expected_mean_matrix.
    """
    if not stops:
        raise ValueError("need at least one stop")
    hours = len(weather)
    if hours == 0:
        raise ValueError("weather sequence is empty")
    for i, w in enumerate(weather):
        if w.hour_index != i:
            raise ValueError(f"weather hours not contiguous at index {i}: "
                             f"got hour_index {w.hour_index}")

    mean = expected_mean_matrix(stops, weather, calendar, demand, origin,
                                windows)
    zi = demand.zero_inflation
    k = demand.dispersion
    counts = np.zeros((len(stops), hours), dtype=np.int64)
    if zi < 1.0:
        lam_all = mean / (1.0 - zi)
        for i in range(len(stops)):
            rng = _stream(seed, _STOP_TAG_BASE + i)
            gate = rng.random(hours) < zi
            mix = rng.gamma(k, 1.0 / k, size=hours)
            lam = lam_all[i]
            if demand.activity_sd > 0.0:
                lam = lam * _log_activity(_stream(seed, _ACT_TAG_BASE + i),
                                          hours, demand.activity_rho,
                                          demand.activity_sd)
            draws = rng.poisson(lam * mix)
            counts[i] = np.where(gate, 0, draws)
    return counts_from_grid([s.stop_id for s in stops], origin, counts)


# ---------------------------------------------------------------------------
# trips


def gen_trip_arrays(counts: StopHourCounts, seed: int,
                    n_unknown_stop: int = 25, n_overlong: int = 15,
                    ) -> dict[str, np.ndarray]:
    """Explode the count grid into raw tap-on rows, plus junk the cleaner
    must drop.

    Every boarding becomes one trip row with a uniform within-hour board
    second and a log-normal duration capped under the 180-minute limit,
    so cleaning and aggregation reproduce ``counts`` exactly.  Junk rows
    board at an unknown stop or run over the duration cap; both kinds
    stay inside the time window so they are dropped by cleaning, not by
    aggregation.  Rows come out in a seeded shuffle.
    """
    rng = _stream(seed, _TAG_TRIPS)
    grid = counts.values
    n_stops, hours = grid.shape
    flat = grid.ravel()
    idx = np.repeat(np.arange(flat.size), flat)
    s = idx // hours
    h = idx % hours
    total = idx.size

    origin64 = np.datetime64(counts.origin.replace(tzinfo=None), "s")
    board_sec = rng.integers(0, 3600, size=total)
    board = origin64 + (h * 3600 + board_sec).astype("timedelta64[s]")
    dur_sec = np.minimum(
        (rng.lognormal(math.log(22.0), 0.45, size=total) * 60.0).astype(np.int64),
        175 * 60)
    alight = board + dur_sec.astype("timedelta64[s]")

    stop_ids = np.asarray(counts.stop_ids)
    board_stop = stop_ids[s]
    alight_stop = stop_ids[rng.integers(0, n_stops, size=total)]
    card = np.char.mod("c%06d", rng.integers(0, max(total // 3, 1), size=total))
    journey = np.char.mod("j%08d", np.arange(total))
    route = np.char.mod("r%03d", s % 40)

    def junk(n_rows, stop_col, minutes):
        bsec = rng.integers(0, hours * 3600, size=n_rows)
        b = origin64 + bsec.astype("timedelta64[s]")
        return {
            "card_id": np.char.mod("c%06d", rng.integers(0, 999, size=n_rows)),
            "journey_id": np.char.mod("x%08d", np.arange(n_rows)),
            "route_id": np.full(n_rows, "r999"),
            "board_stop": stop_col,
            "alight_stop": stop_ids[rng.integers(0, n_stops, size=n_rows)],
            "board": b,
            "alight": b + (minutes * 60).astype("timedelta64[s]"),
        }

    ghost = junk(n_unknown_stop, np.full(n_unknown_stop, "ghost-404"),
                 rng.integers(10, 60, size=n_unknown_stop))
    slow = junk(n_overlong, stop_ids[rng.integers(0, n_stops, size=n_overlong)],
                rng.integers(181, 300, size=n_overlong))

    cols = {
        "card_id": np.concatenate([card, ghost["card_id"], slow["card_id"]]),
        "journey_id": np.concatenate([journey, ghost["journey_id"],
                                      slow["journey_id"]]),
        "route_id": np.concatenate([route, ghost["route_id"], slow["route_id"]]),
        "board_stop": np.concatenate([board_stop, ghost["board_stop"],
                                      slow["board_stop"]]),
        "alight_stop": np.concatenate([alight_stop, ghost["alight_stop"],
                                       slow["alight_stop"]]),
        "board": np.concatenate([board, ghost["board"], slow["board"]]),
        "alight": np.concatenate([alight, ghost["alight"], slow["alight"]]),
    }
    perm = rng.permutation(cols["board"].size)
    return {name: arr[perm] for name, arr in cols.items()}


# ---------------------------------------------------------------------------
# corpus files


def _write_lines(path, header: str, line_arrays: Sequence[np.ndarray]) -> None:
    body = line_arrays[0]
    for part in line_arrays[1:]:
        body = np.char.add(np.char.add(body, ","), part)
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        if body.size:
            fh.write("\n".join(body.tolist()))
            fh.write("\n")


def write_trips_csv(path, trips: dict[str, np.ndarray]) -> None:
    _write_lines(path, "card_id,journey_id,route_id,board_stop,alight_stop,"
                 "board_time,alight_time",
                 [trips["card_id"], trips["journey_id"], trips["route_id"],
                  trips["board_stop"], trips["alight_stop"],
                  np.datetime_as_string(trips["board"], unit="s"),
                  np.datetime_as_string(trips["alight"], unit="s")])


def write_weather_csv(path, readings: Sequence[WeatherReading]) -> None:
    times = np.array([r.time.isoformat(sep="T", timespec="seconds")
                      for r in readings])
    cols = [times]
    for attr in ("temperature", "humidity", "wind_speed", "rainfall"):
        vals = np.array([getattr(r, attr) for r in readings])
        cols.append(np.char.mod("%.3f", vals))
    _write_lines(path, "time,temperature,humidity,wind_speed,rainfall", cols)


def write_stops_csv(path, stops: Sequence[StopRecord]) -> None:
    _write_lines(path, "stop_id,lon,lat,busway",
                 [np.array([s.stop_id for s in stops]),
                  np.char.mod("%.8f", np.array([s.lon for s in stops])),
                  np.char.mod("%.8f", np.array([s.lat for s in stops])),
                  np.array([str(int(s.busway)) for s in stops])])


def write_amenities_csv(path, amenities: dict[str, np.ndarray]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("category,lon,lat\n")
        for cat in sorted(amenities):
            for lon, lat in amenities[cat]:
                fh.write(f"{cat},{lon:.8f},{lat:.8f}\n")


def write_service_windows_csv(path, windows: Sequence[ServiceWindow]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("stop_id,day_of_week,start_hour,end_hour\n")
        for w in windows:
            fh.write(f"{w.stop_id},{w.day_of_week},{w.start_hour},{w.end_hour}\n")


def write_calendar_toml(path, calendar: CalendarConfig) -> None:
    def dates(values) -> str:
        return "[" + ", ".join(f'"{d.isoformat()}"' for d in sorted(values)) + "]"

    ranges = ", ".join(f'["{lo.isoformat()}", "{hi.isoformat()}"]'
                       for lo, hi in calendar.school_holiday_ranges)
    with open(path, "w") as fh:
        fh.write("[holidays]\n")
        fh.write(f"public = {dates(calendar.public_holidays)}\n")
        fh.write(f"school_ranges = [{ranges}]\n")
        fh.write(f"flexible_dev = {dates(calendar.flexible_dev_days)}\n\n")
        fh.write("[windows]\n")
        fh.write(f"am_peak = [{calendar.am_peak[0]}, {calendar.am_peak[1]}]\n")
        fh.write(f"pm_peak = [{calendar.pm_peak[0]}, {calendar.pm_peak[1]}]\n")
        fh.write(f"weekend_peak = [{calendar.weekend_peak[0]}, "
                 f"{calendar.weekend_peak[1]}]\n")
        fh.write(f"night = [{calendar.night_hours[0]}, "
                 f"{calendar.night_hours[1]}]\n")


def synth_corpus(out_dir, days: int = 90, n_stops: int = 200, seed: int = 0,
                 city: CitySpec | None = None,
                 climate: ClimateSpec | None = None,
                 demand: DemandSpec | None = None,
                 origin: dt.datetime = DEFAULT_ORIGIN) -> dict[str, str]:
    """Generate and write a complete corpus; returns the file paths.

    The written files are exactly what the ingest module reads back:
    trips.csv, weather.csv, stops.csv, amenities.csv,
    service_windows.csv, calendar.toml.
    """
    from pathlib import Path

    from .ingest import hourly_weather

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if city is None:
        city = CitySpec(n_stops=n_stops, seed=seed)
    demand = demand if demand is not None else DemandSpec()

    stops, amenities, windows = gen_city(city)
    readings = gen_weather(days, seed, climate, origin)
    calendar = gen_calendar(origin.date(), days)
    hourly = hourly_weather(readings, origin, days * 24)
    counts = gen_ridership(stops, hourly, calendar, demand, seed, origin,
                           windows)
    trips = gen_trip_arrays(counts, seed)

    paths = {
        "trips": str(out / "trips.csv"),
        "weather": str(out / "weather.csv"),
        "stops": str(out / "stops.csv"),
        "amenities": str(out / "amenities.csv"),
        "service_windows": str(out / "service_windows.csv"),
        "calendar": str(out / "calendar.toml"),
    }
    write_trips_csv(paths["trips"], trips)
    write_weather_csv(paths["weather"], readings)
    write_stops_csv(paths["stops"], stops)
    write_amenities_csv(paths["amenities"], amenities)
    write_service_windows_csv(paths["service_windows"], windows)
    write_calendar_toml(paths["calendar"], calendar)
    return paths
