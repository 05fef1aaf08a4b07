"""Feature engineering for the stop-hour panel.

Turns cleaned counts, hourly weather, stop geometry, amenity points and the
calendar into the fixed 43-column feature panel: three ridership lags, five
weather variables, eleven calendar/service dummies, five journey-time-class
shares, four location flags and fifteen walk-shed amenity densities.

The panel is a lazy column store.  Stop-constant and hour-constant blocks
are kept factored; rows, the training matrix and targets are materialised
on demand, so row-count arithmetic on city-scale panels costs no memory.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .ingest import CalendarConfig, HourlyWeather, ServiceWindow, StopHourCounts, TripRecord

EARTH_RADIUS_M = 6_371_000.0
_M_PER_DEG_LAT = EARTH_RADIUS_M * math.pi / 180.0

AMENITY_RADIUS_M = 400.0

#: Walk-shed amenity categories, fixed panel order.
AMENITY_CATEGORIES: tuple[str, ...] = (
    "sustenance",
    "education",
    "university",
    "transport",
    "financial",
    "healthcare",
    "small_day_entertainment",
    "large_day_entertainment",
    "night_entertainment",
    "religious",
    "civic",
    "infrastructure",
    "leisure",
    "shops",
    "tourism",
)

CALENDAR_FEATURES: tuple[str, ...] = (
    "hour_of_day", "day_of_week", "weekend", "public_holiday",
    "school_holiday", "flexible_dev_day", "am_peak", "pm_peak",
    "weekend_peak", "night", "service_running",
)

#: The 43 model features, fixed column order of the panel matrix.
PANEL_SCHEMA: tuple[str, ...] = (
    ("hour_lag", "day_lag", "week_lag",
     "temperature", "humidity", "wind_speed", "apparent_temp", "rainfall")
    + CALENDAR_FEATURES
    + ("jt_share_q1", "jt_share_q2", "jt_share_q3", "jt_share_q4", "jt_share_q5",
       "city_centre", "inner_city", "outer_ring", "busway")
    + tuple(f"density_{c}" for c in AMENITY_CATEGORIES)
)

TARGET_NAME = "target"

WARMUP_HOURS = 168


# ---------------------------------------------------------------------------
# scalar/array physical primitives


def apparent_temperature(temperature, humidity, wind_speed):
    """Steadman apparent temperature (non-radiative form).

    AT = T + 0.33 e - 0.70 WS - 4.00 with water vapour pressure
    e = (H/100) * 6.105 * exp(17.27 T / (237.7 + T)).  T in deg C, H in
    percent, WS in m/s.  Accepts scalars or arrays; temperatures at or
    below -237.7 C make the vapour term undefined and raise.
    """
    t = np.asarray(temperature, dtype=np.float64)
    h = np.asarray(humidity, dtype=np.float64)
    ws = np.asarray(wind_speed, dtype=np.float64)
    if np.any(t <= -237.7):
        raise ValueError("temperature at or below -237.7 C: vapour pressure undefined")
    e = (h / 100.0) * 6.105 * np.exp(17.27 * t / (237.7 + t))
    at = t + 0.33 * e - 0.70 * ws - 4.00
    if at.ndim == 0:
        return float(at)
    return at


def haversine(lon1, lat1, lon2, lat2):
    """Great-circle distance in metres on a 6,371,000 m sphere.

    Broadcasts over array inputs; coordinates in decimal degrees.
    """
    lon1, lat1, lon2, lat2 = (np.radians(np.asarray(a, dtype=np.float64))
                              for a in (lon1, lat1, lon2, lat2))
    s_lat = np.sin((lat2 - lat1) / 2.0)
    s_lon = np.sin((lon2 - lon1) / 2.0)
    a = s_lat * s_lat + np.cos(lat1) * np.cos(lat2) * s_lon * s_lon
    d = 2.0 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))
    if d.ndim == 0:
        return float(d)
    return d


# ---------------------------------------------------------------------------
# stop records


@dataclass
class StopRecord:
    """A stop with location flags and (optionally filled) walk-shed features.

    Exactly one of city_centre / inner_city / outer_ring is set; busway is
    an independent flag.  jt_shares and amenity_densities start as zeros
    and are filled by the feature pipeline.
    """

    stop_id: str
    lon: float
    lat: float
    city_centre: int = 0
    inner_city: int = 0
    outer_ring: int = 1
    busway: int = 0
    jt_shares: np.ndarray = field(default_factory=lambda: np.zeros(5))
    amenity_densities: np.ndarray = field(
        default_factory=lambda: np.zeros(len(AMENITY_CATEGORIES)))

    def __post_init__(self) -> None:
        if int(self.city_centre) + int(self.inner_city) + int(self.outer_ring) != 1:
            raise ValueError(
                f"stop {self.stop_id}: exactly one ring flag must be set")


def assign_rings(stops: Sequence[StopRecord], cbd_lon: float, cbd_lat: float,
                 cc_radius_m: float, ic_radius_m: float) -> None:
    """Set city-centre / inner-city / outer-ring flags in place.

    A stop is city-centre when its great-circle distance to the declared
    CBD point is below cc_radius_m, inner-city below ic_radius_m,
    otherwise outer-ring.
    """
    if not 0.0 < cc_radius_m < ic_radius_m:
        raise ValueError("need 0 < cc_radius_m < ic_radius_m")
    for s in stops:
        d = haversine(s.lon, s.lat, cbd_lon, cbd_lat)
        s.city_centre = int(d < cc_radius_m)
        s.inner_city = int(cc_radius_m <= d < ic_radius_m)
        s.outer_ring = int(d >= ic_radius_m)


# ---------------------------------------------------------------------------
# amenity densities


def amenity_density(stops, amenities: dict[str, np.ndarray],
                    radius_m: float = AMENITY_RADIUS_M,
                    categories: Sequence[str] = AMENITY_CATEGORIES,
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Count amenity points within a walk-shed buffer of each stop.

    ``stops`` is an (n, 2) lon/lat array or a sequence of StopRecord.
    ``amenities`` maps category name to an (m, 2) lon/lat point array.
    The buffer is inclusive (distance <= radius_m).  Returns
    (raw_counts, normalised) with one column per entry of ``categories``;
    normalisation divides by the per-category maximum over stops, so
    values lie in [0, 1] and a category with no points is all zeros.
    """
    coords = _stop_coords(stops)
    n = coords.shape[0]
    raw = np.zeros((n, len(categories)), dtype=np.int64)
    for j, cat in enumerate(categories):
        pts = amenities.get(cat)
        if pts is None or len(pts) == 0:
            continue
        pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
        # Pairwise distances in stop chunks to bound the broadcast size.
        for lo in range(0, n, 512):
            hi = min(lo + 512, n)
            d = haversine(coords[lo:hi, 0:1], coords[lo:hi, 1:2],
                          pts[None, :, 0], pts[None, :, 1])
            raw[lo:hi, j] = np.count_nonzero(d <= radius_m, axis=1)
    peaks = raw.max(axis=0)
    norm = np.zeros_like(raw, dtype=np.float64)
    nz = peaks > 0
    norm[:, nz] = raw[:, nz] / peaks[nz]
    return raw, norm


def _stop_coords(stops) -> np.ndarray:
    if isinstance(stops, np.ndarray):
        return np.asarray(stops, dtype=np.float64).reshape(-1, 2)
    first = stops[0] if len(stops) else None
    if hasattr(first, "lon"):
        return np.array([(s.lon, s.lat) for s in stops], dtype=np.float64)
    return np.asarray(stops, dtype=np.float64).reshape(-1, 2)


# ---------------------------------------------------------------------------
# Fisher-Jenks natural breaks


@dataclass(frozen=True)
class JenksBreaks:
    """Optimal k-class partition of a 1-D distribution.

    ``breaks`` holds the upper bound of each class except the last
    (k - 1 strictly increasing values); ``within_class_ssd`` is the
    minimised total within-class sum of squared deviations.
    """

    breaks: tuple[float, ...]
    n_classes: int
    within_class_ssd: float

    def classify(self, values) -> np.ndarray:
        """Class index (0-based) per value; a value equal to a break goes
        to the lower class."""
        return np.searchsorted(np.asarray(self.breaks), np.asarray(values), side="left")


def jenks_breaks(values, n_classes: int, weights=None) -> JenksBreaks:
    """Fisher's optimal partition minimising within-class SSD.

    Classes are contiguous runs of the sorted values.  Repeated values are
    collapsed to weighted distinct values first, so cost grows with the
    number of distinct values, not observations.  ``n_classes`` larger
    than the distinct-value count is an error.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("cannot classify an empty distribution")
    if n_classes < 1:
        raise ValueError("n_classes must be >= 1")
    if weights is None:
        w = np.ones_like(v)
    else:
        w = np.asarray(weights, dtype=np.float64).ravel()
        if w.shape != v.shape:
            raise ValueError("weights must match values")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")

    order = np.argsort(v, kind="stable")
    v, w = v[order], w[order]
    uniq, start = np.unique(v, return_index=True)
    wsum = np.add.reduceat(w, start)
    m = uniq.size
    if n_classes > m:
        raise ValueError(f"{n_classes} classes requested but only {m} distinct values")

    # Prefix sums make any contiguous-run SSD O(1):
    # ssd(i..j) = sum(w v^2) - sum(w v)^2 / sum(w).
    cw = np.concatenate(([0.0], np.cumsum(wsum)))
    cwv = np.concatenate(([0.0], np.cumsum(wsum * uniq)))
    cwv2 = np.concatenate(([0.0], np.cumsum(wsum * uniq * uniq)))

    def run_ssd(i: np.ndarray, j: int) -> np.ndarray:
        # inclusive distinct-value runs [i, j], vectorised over i
        tw = cw[j + 1] - cw[i]
        tv = cwv[j + 1] - cwv[i]
        tv2 = cwv2[j + 1] - cwv2[i]
        return tv2 - tv * tv / tw

    best = np.full((n_classes, m), np.inf)
    cut = np.zeros((n_classes, m), dtype=np.int64)
    all_i = np.arange(m)
    best[0, :] = cwv2[1:] - cwv[1:] * cwv[1:] / cw[1:]  # single class [0, j]
    for c in range(1, n_classes):
        for j in range(c, m):
            i = all_i[c:j + 1]  # last class starts at i, previous classes fill [0, i-1]
            cand = best[c - 1, i - 1] + run_ssd(i, j)
            k = int(np.argmin(cand))
            best[c, j] = cand[k]
            cut[c, j] = i[k]

    # Recover class upper bounds by walking the cut matrix back.
    uppers = []
    j = m - 1
    for c in range(n_classes - 1, 0, -1):
        i = int(cut[c, j])
        uppers.append(float(uniq[i - 1]))
        j = i - 1
    uppers.reverse()
    return JenksBreaks(breaks=tuple(uppers), n_classes=n_classes,
                       within_class_ssd=float(best[n_classes - 1, m - 1]))


# ---------------------------------------------------------------------------
# journey-time class shares


def journey_time_shares(trips: Iterable["TripRecord"], breaks: JenksBreaks,
                        stop_ids: Sequence[str]) -> np.ndarray:
    """Per-stop composition of boardings over journey-time classes.

    Returns an (n_stops, k) share matrix.  Trips without a computable
    duration carry no class evidence and are skipped; a stop with no
    classifiable trips gets an all-zero row, otherwise its row sums to 1.
    """
    index = {s: i for i, s in enumerate(stop_ids)}
    stop_idx = []
    durations = []
    for t in trips:
        d = t.duration_minutes
        if d is None:
            continue
        stop_idx.append(index[t.board_stop])
        durations.append(d)
    return shares_from_durations(
        np.asarray(stop_idx, dtype=np.int64),
        np.asarray(durations, dtype=np.float64),
        len(stop_ids), breaks)


def shares_from_durations(stop_idx: np.ndarray, durations: np.ndarray,
                          n_stops: int, breaks: JenksBreaks) -> np.ndarray:
    """Vector form of journey_time_shares for pre-extracted arrays."""
    k = breaks.n_classes
    counts = np.zeros((n_stops, k), dtype=np.int64)
    if durations.size:
        cls = breaks.classify(durations)
        np.add.at(counts, (stop_idx, cls), 1)
    totals = counts.sum(axis=1, keepdims=True)
    shares = np.zeros((n_stops, k), dtype=np.float64)
    nz = totals[:, 0] > 0
    shares[nz] = counts[nz] / totals[nz]
    return shares


# ---------------------------------------------------------------------------
# calendar features


def _hour_wheel(origin: dt.datetime, hours: int):
    """Vectorised hour-of-day, day-offset and weekday for each panel hour."""
    if origin.minute or origin.second or origin.microsecond:
        raise ValueError("panel origin must be aligned to a whole hour")
    absolute = origin.hour + np.arange(hours, dtype=np.int64)
    hod = absolute % 24
    day_offset = absolute // 24
    dow = (origin.weekday() + day_offset) % 7 + 1  # Monday=1
    return hod, day_offset, dow


def _in_window(hod: np.ndarray, window: tuple[int, int]) -> np.ndarray:
    lo, hi = window
    if lo <= hi:
        return (hod >= lo) & (hod <= hi)
    return (hod >= lo) | (hod <= hi)  # wraps midnight


def hour_feature_matrix(origin: dt.datetime, hours: int,
                        calendar: "CalendarConfig") -> np.ndarray:
    """The ten stop-independent calendar features for every panel hour.

    Columns: hour_of_day (1..24), day_of_week (Mon=1..Sun=7), weekend,
    public_holiday, school_holiday, flexible_dev_day, am_peak, pm_peak,
    weekend_peak, night.  Workday peak dummies are suppressed on public
    holidays.
    """
    hod, day_offset, dow = _hour_wheel(origin, hours)
    n_days = int(day_offset.max()) + 1 if hours else 0
    base = origin.date()
    day_flags = np.zeros((n_days, 3))
    for d in range(n_days):
        date = base + dt.timedelta(days=d)
        day_flags[d, 0] = date in calendar.public_holidays
        day_flags[d, 1] = calendar.is_school_holiday(date)
        day_flags[d, 2] = date in calendar.flexible_dev_days

    weekend = (dow >= 6).astype(np.float64)
    public = day_flags[day_offset, 0]
    school = day_flags[day_offset, 1]
    flex = day_flags[day_offset, 2]
    workday = (1.0 - weekend) * (1.0 - public)
    am = _in_window(hod, calendar.am_peak) * workday
    pm = _in_window(hod, calendar.pm_peak) * workday
    wp = _in_window(hod, calendar.weekend_peak) * weekend
    night = _in_window(hod, calendar.night_hours).astype(np.float64)

    out = np.empty((hours, 10))
    out[:, 0] = hod + 1
    out[:, 1] = dow
    out[:, 2] = weekend
    out[:, 3] = public
    out[:, 4] = school
    out[:, 5] = flex
    out[:, 6] = am
    out[:, 7] = pm
    out[:, 8] = wp
    out[:, 9] = night
    return out


def service_matrix(stop_ids: Sequence[str], windows: Iterable["ServiceWindow"],
                   origin: dt.datetime, hours: int) -> np.ndarray:
    """Service-running flag per (stop, hour).

    A cell is 1 when some declared [start, end) window for that stop and
    weekday covers the hour.  Stops with no declared windows are flagged
    out of service for every hour.
    """
    hod, _, dow = _hour_wheel(origin, hours)
    index = {s: i for i, s in enumerate(stop_ids)}
    week = np.zeros((len(stop_ids), 7, 24), dtype=np.uint8)
    for w in windows:
        i = index.get(w.stop_id)
        if i is None:
            continue
        week[i, w.day_of_week - 1, w.start_hour:w.end_hour] = 1
    return week[:, dow - 1, hod]


def calendar_features(origin: dt.datetime, hour_index: int,
                      calendar: "CalendarConfig",
                      stop_windows: Iterable["ServiceWindow"] = (),
                      ) -> np.ndarray:
    """The eleven calendar/service features for one (stop, hour).

    ``stop_windows`` are the service windows of the stop in question;
    with none given the service flag is 0.
    """
    hourly = hour_feature_matrix(origin, hour_index + 1, calendar)[hour_index]
    dow = int(hourly[1])
    hod = int(hourly[0]) - 1
    si = any(w.day_of_week == dow and w.start_hour <= hod < w.end_hour
             for w in stop_windows)
    return np.concatenate([hourly, [float(si)]])


# ---------------------------------------------------------------------------
# panel assembly


@dataclass(frozen=True)
class FeatureRow:
    """One materialised panel row.

    ``hour_index`` is the observation hour t; the 43 features describe the
    stop and hour t, while ``target`` is the boarding count of hour t + 1.
    """

    stop_id: str
    hour_index: int
    features: np.ndarray
    target: float


class Panel(Sequence):
    """Lazy stop-hour feature panel.

    Rows are ordered stop-major, then by observation hour t which runs
    over [warmup - 1, hours - 2].  Lags look back from the predicted hour
    u = t + 1: hour_lag = counts[t], day_lag = counts[u - 24], week_lag =
    counts[u - 168]; the warm-up drop therefore removes exactly
    ``warmup`` hours per stop and the panel has
    n_stops * (hours - warmup) rows.
    """

    def __init__(self, stop_ids, origin, warmup, counts, hour_block, si,
                 stop_block):
        self.stop_ids: tuple[str, ...] = tuple(stop_ids)
        self.origin: dt.datetime = origin
        self.warmup: int = int(warmup)
        self.counts: np.ndarray = counts              # (n_stops, H) ints
        self.hour_block: np.ndarray = hour_block      # (H, 15) float64
        self.si: np.ndarray = si                      # (n_stops, H) uint8
        self.stop_block: np.ndarray = stop_block      # (n_stops, 24) float64
        self.hours: int = counts.shape[1]
        self.schema: tuple[str, ...] = PANEL_SCHEMA
        self.first_hour: int = self.warmup - 1
        self.n_panel_hours: int = self.hours - self.warmup

    # -- sequence protocol --------------------------------------------------

    def __len__(self) -> int:
        return len(self.stop_ids) * self.n_panel_hours

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        n = len(self)
        if i < 0:
            i += n
        if not 0 <= i < n:
            raise IndexError(i)
        s, k = divmod(i, self.n_panel_hours)
        t = self.first_hour + k
        return FeatureRow(stop_id=self.stop_ids[s], hour_index=t,
                          features=self.matrix(np.array([i]))[0],
                          target=float(self.counts[s, t + 1]))

    # -- bulk access ---------------------------------------------------------

    def _locate(self, rows: np.ndarray | None):
        if rows is None:
            n = len(self)
            rows = np.arange(n, dtype=np.int64)
        else:
            rows = np.asarray(rows, dtype=np.int64)
        s = rows // self.n_panel_hours
        t = self.first_hour + rows % self.n_panel_hours
        return s, t

    def matrix(self, rows: np.ndarray | None = None) -> np.ndarray:
        """Materialise the (n_rows, 43) float64 feature matrix."""
        s, t = self._locate(rows)
        x = np.empty((s.size, len(PANEL_SCHEMA)))
        x[:, 0] = self.counts[s, t]
        x[:, 1] = self.counts[s, t - 23]   # 24 h before the predicted hour
        x[:, 2] = self.counts[s, t - 167]  # 168 h before the predicted hour
        x[:, 3:18] = self.hour_block[t]
        x[:, 18] = self.si[s, t]
        x[:, 19:] = self.stop_block[s]
        return x

    def targets(self, rows: np.ndarray | None = None) -> np.ndarray:
        s, t = self._locate(rows)
        return self.counts[s, t + 1].astype(np.float64)

    def row_stop_hour(self, rows: np.ndarray | None = None):
        """(stop_id array, observation hour array) for the given rows."""
        s, t = self._locate(rows)
        ids = np.asarray(self.stop_ids, dtype=object)
        return ids[s], t

    def observation_hours(self, rows: np.ndarray | None = None) -> np.ndarray:
        return self._locate(rows)[1]


def build_panel(counts: "StopHourCounts", weather: Sequence["HourlyWeather"],
                stops: Sequence[StopRecord], calendar: "CalendarConfig",
                windows: Iterable["ServiceWindow"] = (),
                warmup: int = WARMUP_HOURS) -> Panel:
    """Assemble the 43-feature panel from aligned inputs.

    All inputs must span the same ``counts.hours`` hours from
    ``counts.origin``.  The first ``warmup`` hours provide lag history
    only; the panel then holds one row per stop per remaining hour.
    """
    H = counts.hours
    if warmup < WARMUP_HOURS:
        # week_lag reads counts[t - 167]; anything shorter would index
        # before the span starts
        raise ValueError(f"warmup must be >= {WARMUP_HOURS} to cover the "
                         f"weekly lag, got {warmup}")
    if H < warmup + 2:
        raise ValueError(f"{H}-hour span too short for warmup {warmup}: "
                         f"need at least {warmup + 2} hours")
    if len(weather) != H:
        raise ValueError(f"weather spans {len(weather)} hours, counts span {H}")

    by_id = {s.stop_id: s for s in stops}
    missing = [sid for sid in counts.stop_ids if sid not in by_id]
    if missing:
        raise ValueError(f"stops missing from stop records: {missing[:5]}")

    hour_block = np.empty((H, 15))
    for h, w in enumerate(weather):
        if w.hour_index != h:
            raise ValueError("weather sequence must be contiguous from hour 0")
        hour_block[h, 0:5] = (w.temperature, w.humidity, w.wind_speed,
                              w.apparent_temp, w.rainfall)
    hour_block[:, 5:15] = hour_feature_matrix(counts.origin, H, calendar)

    si = service_matrix(counts.stop_ids, windows, counts.origin, H)

    stop_block = np.empty((len(counts.stop_ids), 24))
    for i, sid in enumerate(counts.stop_ids):
        s = by_id[sid]
        shares = np.asarray(s.jt_shares, dtype=np.float64)
        dens = np.asarray(s.amenity_densities, dtype=np.float64)
        if shares.shape != (5,):
            raise ValueError(f"stop {sid}: jt_shares must have 5 entries")
        if dens.shape != (len(AMENITY_CATEGORIES),):
            raise ValueError(f"stop {sid}: expected {len(AMENITY_CATEGORIES)} "
                             "amenity densities")
        stop_block[i, 0:5] = shares
        stop_block[i, 5:9] = (s.city_centre, s.inner_city, s.outer_ring, s.busway)
        stop_block[i, 9:] = dens

    return Panel(stop_ids=counts.stop_ids, origin=counts.origin, warmup=warmup,
                 counts=counts.values, hour_block=hour_block, si=si,
                 stop_block=stop_block)
