"""Smart-card and weather ingestion.

Reads the raw corpus (tap-on trip records, five-minute weather readings,
stop/amenity geometry, service windows, a calendar config) into typed
records, applies the cleaning rules, and aggregates boardings into a dense
stop-by-hour count grid that the feature builder consumes.

Every trip is a tap-on event; linked journeys are counted once per boarding
leg.  Cleaning drops trips that board at an unknown stop, run longer than
180 minutes, or have a negative duration.  Weather hours with no readings
are filled by linear interpolation of the neighbouring hourly means
(rainfall filled with zero) and flagged as interpolated.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field

import numpy as np

from .features import apparent_temperature

TRIP_COLUMNS = (
    "card_id",
    "journey_id",
    "route_id",
    "board_stop",
    "alight_stop",
    "board_time",
    "alight_time",
)
_TRIP_REQUIRED = ("card_id", "journey_id", "route_id", "board_stop", "board_time")

WEATHER_COLUMNS = ("time", "temperature", "humidity", "wind_speed", "rainfall")

MAX_DURATION_MINUTES = 180.0


@dataclass(frozen=True, slots=True)
class TripRecord:
    """One tap-on leg from the ticketing system."""

    card_id: str
    journey_id: str
    route_id: str
    board_stop: str
    board_time: dt.datetime
    alight_stop: str | None = None
    alight_time: dt.datetime | None = None

    @property
    def duration_minutes(self) -> float | None:
        """Leg duration, or None when the alight time is missing."""
        if self.alight_time is None:
            return None
        return (self.alight_time - self.board_time).total_seconds() / 60.0


@dataclass(frozen=True, slots=True)
class WeatherReading:
    """One five-minute station reading."""

    time: dt.datetime
    temperature: float
    humidity: float
    wind_speed: float
    rainfall: float


@dataclass(frozen=True, slots=True)
class HourlyWeather:
    """Weather aggregated to one panel hour.

    temperature/humidity/wind_speed are means over in-hour readings,
    rainfall is the in-hour sum, apparent_temp is computed from the hourly
    aggregates.  ``interpolated`` marks hours that had no readings.
    """

    hour_index: int
    temperature: float
    humidity: float
    wind_speed: float
    apparent_temp: float
    rainfall: float
    interpolated: bool = False


@dataclass(frozen=True, slots=True)
class ServiceWindow:
    """Half-open [start_hour, end_hour) service interval on one weekday.

    day_of_week uses Monday=1 .. Sunday=7.
    """

    stop_id: str
    day_of_week: int
    start_hour: int
    end_hour: int


@dataclass(frozen=True)
class CalendarConfig:
    """Holiday sets and peak/night hour windows.

    Hour windows are inclusive of both endpoints; the night window wraps
    midnight when start > end.
    """

    public_holidays: frozenset[dt.date] = frozenset()
    school_holiday_ranges: tuple[tuple[dt.date, dt.date], ...] = ()
    flexible_dev_days: frozenset[dt.date] = frozenset()
    am_peak: tuple[int, int] = (7, 8)
    pm_peak: tuple[int, int] = (15, 17)
    weekend_peak: tuple[int, int] = (9, 17)
    night_hours: tuple[int, int] = (22, 5)

    def is_school_holiday(self, day: dt.date) -> bool:
        return any(lo <= day <= hi for lo, hi in self.school_holiday_ranges)


@dataclass
class StopHourCounts:
    """Dense boardings grid: one row per stop, one column per hour.

    Cells are explicit (zeros included) so downstream lag features never
    have to distinguish "no trips" from "missing".
    """

    stop_ids: tuple[str, ...]
    origin: dt.datetime
    hours: int
    values: np.ndarray  # shape (n_stops, hours), integer dtype
    _index: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if self.values.shape != (len(self.stop_ids), self.hours):
            raise ValueError(
                f"count grid shape {self.values.shape} does not match "
                f"{len(self.stop_ids)} stops x {self.hours} hours"
            )
        if np.any(self.values < 0):
            raise ValueError("boarding counts must be non-negative")
        self._index = {s: i for i, s in enumerate(self.stop_ids)}

    def stop_index(self, stop_id: str) -> int:
        return self._index[stop_id]

    def get(self, stop_id: str, hour: int) -> int:
        return int(self.values[self._index[stop_id], hour])

    def total(self) -> int:
        return int(self.values.sum())


@dataclass(frozen=True)
class DropReport:
    """Cleaning tally; kept + dropped categories sum to the input size."""

    total: int
    kept: int
    ungeocodable: int
    overlong: int
    negative_duration: int

    def dropped(self) -> int:
        return self.ungeocodable + self.overlong + self.negative_duration


def _parse_timestamp(text: str) -> dt.datetime:
    return dt.datetime.fromisoformat(text.strip())


def _resolve_columns(header: list[str], columns: dict[str, str] | None,
                     canonical: tuple[str, ...], required: tuple[str, ...]) -> dict[str, str]:
    """Map canonical field names to CSV header names, validating presence."""
    mapping = {name: name for name in canonical}
    if columns:
        unknown = set(columns) - set(canonical)
        if unknown:
            raise ValueError(f"unknown canonical column names: {sorted(unknown)}")
        mapping.update(columns)
    missing = [mapping[name] for name in required if mapping[name] not in header]
    if missing:
        raise ValueError(f"required columns missing from header: {missing}")
    return mapping


def parse_trips(path, columns: dict[str, str] | None = None) -> tuple[list[TripRecord], int]:
    """Read a trips CSV into TripRecords.

    ``columns`` optionally maps canonical names (card_id, journey_id,
    route_id, board_stop, alight_stop, board_time, alight_time) to the
    file's header names.  Unknown header columns are ignored.  Malformed
    rows (bad timestamp, empty required field) are skipped and counted;
    a missing required column is a hard error.

    Returns (records, n_malformed).
    """
    trips: list[TripRecord] = []
    malformed = 0
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty file, no header row")
        mapping = _resolve_columns(list(reader.fieldnames), columns,
                                   TRIP_COLUMNS, _TRIP_REQUIRED)
        has_alight_stop = mapping["alight_stop"] in reader.fieldnames
        has_alight_time = mapping["alight_time"] in reader.fieldnames
        for row in reader:
            try:
                card = row[mapping["card_id"]].strip()
                journey = row[mapping["journey_id"]].strip()
                route = row[mapping["route_id"]].strip()
                stop = row[mapping["board_stop"]].strip()
                board = _parse_timestamp(row[mapping["board_time"]])
                if not (card and journey and route and stop):
                    malformed += 1
                    continue
                alight_stop = None
                alight_time = None
                if has_alight_stop:
                    raw = (row[mapping["alight_stop"]] or "").strip()
                    alight_stop = raw or None
                if has_alight_time:
                    raw = (row[mapping["alight_time"]] or "").strip()
                    alight_time = _parse_timestamp(raw) if raw else None
            except (ValueError, AttributeError, TypeError, KeyError):
                malformed += 1
                continue
            trips.append(TripRecord(card, journey, route, stop, board,
                                    alight_stop, alight_time))
    return trips, malformed


def parse_weather(path, columns: dict[str, str] | None = None) -> tuple[list[WeatherReading], int]:
    """Read a weather CSV into readings sorted by time.

    Rows violating the physical ranges (humidity outside [0, 100],
    negative wind or rainfall) are treated as malformed and skipped.
    Returns (readings, n_malformed).
    """
    readings: list[WeatherReading] = []
    malformed = 0
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty file, no header row")
        mapping = _resolve_columns(list(reader.fieldnames), columns,
                                   WEATHER_COLUMNS, WEATHER_COLUMNS)
        for row in reader:
            try:
                when = _parse_timestamp(row[mapping["time"]])
                t = float(row[mapping["temperature"]])
                h = float(row[mapping["humidity"]])
                ws = float(row[mapping["wind_speed"]])
                rf = float(row[mapping["rainfall"]])
            except (ValueError, TypeError, KeyError):
                malformed += 1
                continue
            if not (0.0 <= h <= 100.0) or ws < 0.0 or rf < 0.0:
                malformed += 1
                continue
            readings.append(WeatherReading(when, t, h, ws, rf))
    readings.sort(key=lambda r: r.time)
    return readings, malformed


def parse_stops(path) -> list[dict]:
    """Read stops.csv rows: stop_id, lon, lat, busway (0/1, optional)."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append({
                "stop_id": row["stop_id"].strip(),
                "lon": float(row["lon"]),
                "lat": float(row["lat"]),
                "busway": int(row.get("busway", "0") or 0),
            })
    return out


def parse_amenities(path) -> dict[str, np.ndarray]:
    """Read amenities.csv (category, lon, lat) into per-category point arrays."""
    cats: dict[str, list[tuple[float, float]]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            cats.setdefault(row["category"].strip(), []).append(
                (float(row["lon"]), float(row["lat"])))
    return {c: np.asarray(pts, dtype=np.float64) for c, pts in cats.items()}


def parse_service_windows(path) -> list[ServiceWindow]:
    """Read service_windows.csv: stop_id, day_of_week, start_hour, end_hour."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            w = ServiceWindow(row["stop_id"].strip(), int(row["day_of_week"]),
                              int(row["start_hour"]), int(row["end_hour"]))
            if not (1 <= w.day_of_week <= 7):
                raise ValueError(f"day_of_week out of range: {w.day_of_week}")
            if not (0 <= w.start_hour < w.end_hour <= 24):
                raise ValueError(
                    f"bad window [{w.start_hour}, {w.end_hour}) for {w.stop_id}")
            out.append(w)
    return out


def parse_calendar(path) -> CalendarConfig:
    """Read a TOML calendar config.

    Recognised keys: [holidays] public / school_ranges / flexible_dev,
    [windows] am_peak / pm_peak / weekend_peak / night.  Dates are
    ISO strings; windows are two-element [start, end] hour lists with
    inclusive endpoints.
    """
    try:
        import tomllib  # Python >= 3.11
    except ModuleNotFoundError:  # pragma: no cover - version dependent
        import tomli as tomllib
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)

    def _date(s) -> dt.date:
        return s if isinstance(s, dt.date) else dt.date.fromisoformat(str(s))

    holidays = raw.get("holidays", {})
    windows = raw.get("windows", {})
    kwargs = {}
    if "public" in holidays:
        kwargs["public_holidays"] = frozenset(_date(d) for d in holidays["public"])
    if "school_ranges" in holidays:
        kwargs["school_holiday_ranges"] = tuple(
            (_date(lo), _date(hi)) for lo, hi in holidays["school_ranges"])
    if "flexible_dev" in holidays:
        kwargs["flexible_dev_days"] = frozenset(_date(d) for d in holidays["flexible_dev"])
    for key, name in (("am_peak", "am_peak"), ("pm_peak", "pm_peak"),
                      ("weekend_peak", "weekend_peak"), ("night", "night_hours")):
        if key in windows:
            lo, hi = windows[key]
            kwargs[name] = (int(lo), int(hi))
    return CalendarConfig(**kwargs)


def clean_trips(trips: list[TripRecord], known_stops,
                max_duration_minutes: float = MAX_DURATION_MINUTES,
                ) -> tuple[list[TripRecord], DropReport]:
    """Apply the exclusion rules; pure filter, so idempotent.

    Drops trips boarding at a stop not in ``known_stops``, trips longer
    than ``max_duration_minutes`` (strictly), and trips with negative
    duration.  Trips with no alight time have unknown duration and are
    kept on the boarding evidence alone.
    """
    known = set(known_stops)
    kept: list[TripRecord] = []
    ungeocodable = overlong = negative = 0
    for trip in trips:
        if trip.board_stop not in known:
            ungeocodable += 1
            continue
        duration = trip.duration_minutes
        if duration is not None:
            if duration < 0.0:
                negative += 1
                continue
            if duration > max_duration_minutes:
                overlong += 1
                continue
        kept.append(trip)
    report = DropReport(total=len(trips), kept=len(kept),
                        ungeocodable=ungeocodable, overlong=overlong,
                        negative_duration=negative)
    return kept, report


def aggregate_ridership(trips: list[TripRecord], stop_ids, origin: dt.datetime,
                        hours: int) -> StopHourCounts:
    """Count boardings per (stop, hour) over [origin, origin + hours).

    Trips must already be cleaned: a boarding stop outside ``stop_ids`` or
    a boarding time outside the window is a hard error.
    """
    stop_ids = tuple(stop_ids)
    index = {s: i for i, s in enumerate(stop_ids)}
    values = np.zeros((len(stop_ids), hours), dtype=np.int64)
    for trip in trips:
        offset = (trip.board_time - origin).total_seconds() / 3600.0
        hour = int(offset)
        if offset < 0.0 or hour >= hours:
            raise ValueError(
                f"trip at {trip.board_time.isoformat()} outside the "
                f"{hours}-hour window from {origin.isoformat()}")
        try:
            row = index[trip.board_stop]
        except KeyError:
            raise ValueError(f"trip boards at unknown stop {trip.board_stop!r}; "
                             "clean_trips must run first") from None
        values[row, hour] += 1
    return StopHourCounts(stop_ids=stop_ids, origin=origin, hours=hours,
                          values=values)


def counts_from_grid(stop_ids, origin: dt.datetime, grid: np.ndarray) -> StopHourCounts:
    """Wrap an existing (n_stops, hours) integer grid as StopHourCounts."""
    grid = np.asarray(grid)
    return StopHourCounts(stop_ids=tuple(stop_ids), origin=origin,
                          hours=grid.shape[1], values=grid)


def hourly_weather(readings: list[WeatherReading], origin: dt.datetime,
                   hours: int) -> list[HourlyWeather]:
    """Aggregate five-minute readings to panel hours.

    Means for temperature/humidity/wind, sum for rainfall.  Hours without
    readings are filled by linear interpolation between the nearest
    observed hourly means (edge gaps extend the nearest value), get zero
    rainfall, and are flagged interpolated.  Readings outside the window
    are ignored; a window with no readings at all is a hard error.
    """
    if hours <= 0:
        raise ValueError("hours must be positive")
    sums = np.zeros((hours, 3), dtype=np.float64)  # T, H, WS
    rain = np.zeros(hours, dtype=np.float64)
    n = np.zeros(hours, dtype=np.int64)
    for r in readings:
        offset = (r.time - origin).total_seconds() / 3600.0
        if offset < 0.0:
            continue
        hour = int(offset)
        if hour >= hours:
            continue
        sums[hour] += (r.temperature, r.humidity, r.wind_speed)
        rain[hour] += r.rainfall
        n[hour] += 1

    observed = n > 0
    if not observed.any():
        raise ValueError("no weather readings fall inside the window")
    means = np.full((hours, 3), np.nan)
    means[observed] = sums[observed] / n[observed, None]
    # Fill gaps channel-wise from the observed hourly means.
    obs_idx = np.flatnonzero(observed)
    gap_idx = np.flatnonzero(~observed)
    if gap_idx.size:
        for ch in range(3):
            means[gap_idx, ch] = np.interp(gap_idx, obs_idx, means[obs_idx, ch])
    rain = np.maximum(rain, 0.0)  # normalise -0.0 sums

    out = []
    for h in range(hours):
        t, rh, ws = means[h]
        out.append(HourlyWeather(
            hour_index=h, temperature=float(t), humidity=float(rh),
            wind_speed=float(ws),
            apparent_temp=float(apparent_temperature(t, rh, ws)),
            rainfall=float(rain[h]), interpolated=bool(~observed[h])))
    return out
