"""Metric battery and spatio-temporal error analyses.

Works on sequences of PredictionRecord (stop, hour, observed, predicted).
The residual convention throughout is predicted minus observed, so a
positive residual means over-prediction.  Bucketing happens on residuals
rounded half-away-from-zero to integers; the nine buckets partition the
integers with tails at +-101 and beyond.

All functions are pure; nothing here draws random numbers.
"""

from __future__ import annotations

import datetime as dt
import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .features import haversine, hour_feature_matrix
from .ingest import CalendarConfig, HourlyWeather, StopHourCounts

BUCKET_LABELS = ("<=-101", "-100..-51", "-50..-23", "-22..-1", "0",
                 "1..22", "23..50", "51..100", ">=101")
WITHIN_BAND = 22
RAIN_THRESHOLD_MM = 3.0
BAND_SD_MULTIPLE = 1.5
EXACT_HIT_M = 1.0

FILTERS = ("all", "peak", "offpeak", "weekday", "weekend")

MASK_VARIABLES = ("temperature", "humidity", "wind_speed", "apparent_temp",
                  "rainfall")


@dataclass(frozen=True, slots=True)
class PredictionRecord:
    """One evaluated (stop, hour) cell.

    hour_index is the observation hour of the feature row, i.e. the hour
    whose weather and calendar state produced the forecast.
    """

    stop_id: str
    hour_index: int
    observed: float
    predicted: float

    def __post_init__(self) -> None:
        if self.hour_index < 0:
            raise ValueError("hour_index must be non-negative")
        if self.predicted < 0.0:
            raise ValueError(f"negative prediction {self.predicted} "
                             f"for stop {self.stop_id}")
        if self.observed < 0.0:
            raise ValueError("observed count cannot be negative")

    @property
    def residual(self) -> float:
        return self.predicted - self.observed


@dataclass(frozen=True)
class MetricsReport:
    """Headline error statistics for one model run."""

    rmse: float
    error_quartiles: tuple[float, float, float]
    bucket_percentages: tuple[float, ...]
    pearson: float | None
    within_band_fraction: float
    n_rows: int
    training_time_minutes: float | None = None

    def as_dict(self) -> dict:
        return {
            "rmse": self.rmse,
            "error_quartiles": list(self.error_quartiles),
            "bucket_labels": list(BUCKET_LABELS),
            "bucket_percentages": list(self.bucket_percentages),
            "pearson": self.pearson,
            "within_band_fraction": self.within_band_fraction,
            "n_rows": self.n_rows,
            "training_time_minutes": self.training_time_minutes,
        }


@dataclass(frozen=True)
class ExtremeWeatherMask:
    """Per-variable extreme-hour flags over one weather span.

    Band variables (T, H, WS, AT) are extreme strictly outside
    mean +- 1.5 SD; rainfall is extreme strictly above 3 mm regardless of
    its distribution.  ``band`` records the (low, high) thresholds used.
    """

    flags: Mapping[str, np.ndarray]
    band: Mapping[str, tuple[float, float]]
    rain_threshold: float
    hours: int

    def extreme_hours(self, variable: str) -> np.ndarray:
        return np.flatnonzero(self.flags[variable])


@dataclass(frozen=True)
class ErrorSurfaceGrid:
    """IDW-interpolated raster over a lon/lat bounding box.

    values[i, j] is the cell at the i-th latitude row (south to north)
    and j-th longitude column (west to east); cell centres are offset
    half a cell from the box edges.
    """

    bbox: tuple[float, float, float, float]  # lon_min, lat_min, lon_max, lat_max
    n_cols: int
    n_rows: int
    values: np.ndarray
    nodata: float = math.nan

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        lon_min, lat_min, lon_max, lat_max = self.bbox
        lon = lon_min + (np.arange(self.n_cols) + 0.5) * (lon_max - lon_min) / self.n_cols
        lat = lat_min + (np.arange(self.n_rows) + 0.5) * (lat_max - lat_min) / self.n_rows
        return lon, lat


# ---------------------------------------------------------------------------
# record plumbing


def predictions_from_arrays(stop_ids, hour_index, observed,
                            predicted) -> list[PredictionRecord]:
    """Zip parallel arrays into PredictionRecords."""
    return [PredictionRecord(str(s), int(h), float(o), float(p))
            for s, h, o, p in zip(stop_ids, hour_index, observed, predicted)]


def _arrays(predictions: Sequence[PredictionRecord]):
    if len(predictions) == 0:
        raise ValueError("no predictions to evaluate")
    stops = np.array([p.stop_id for p in predictions])
    hours = np.array([p.hour_index for p in predictions], dtype=np.int64)
    obs = np.array([p.observed for p in predictions])
    pred = np.array([p.predicted for p in predictions])
    return stops, hours, obs, pred


def round_half_away(values: np.ndarray) -> np.ndarray:
    """Round to integer, halves away from zero (1.5 -> 2, -1.5 -> -2)."""
    values = np.asarray(values, dtype=np.float64)
    return np.sign(values) * np.floor(np.abs(values) + 0.5)


def bucket_counts(residuals: np.ndarray) -> np.ndarray:
    """Counts per residual bucket after half-away-from-zero rounding."""
    r = round_half_away(residuals)
    out = np.empty(9, dtype=np.int64)
    out[0] = np.count_nonzero(r <= -101)
    out[1] = np.count_nonzero((r >= -100) & (r <= -51))
    out[2] = np.count_nonzero((r >= -50) & (r <= -23))
    out[3] = np.count_nonzero((r >= -22) & (r <= -1))
    out[4] = np.count_nonzero(r == 0)
    out[5] = np.count_nonzero((r >= 1) & (r <= 22))
    out[6] = np.count_nonzero((r >= 23) & (r <= 50))
    out[7] = np.count_nonzero((r >= 51) & (r <= 100))
    out[8] = np.count_nonzero(r >= 101)
    return out


def metrics(predictions: Sequence[PredictionRecord],
            training_time_minutes: float | None = None) -> MetricsReport:
    """Headline statistics: RMSE, residual quartiles, bucket shares,
    Pearson correlation and the within +-22 fraction.

    Pearson is None when either side has zero variance.
    """
    _, _, obs, pred = _arrays(predictions)
    resid = pred - obs
    rmse = float(np.sqrt(np.mean(resid ** 2)))
    q1, med, q3 = np.percentile(resid, [25.0, 50.0, 75.0])
    counts = bucket_counts(resid)
    pct = tuple(100.0 * c / resid.size for c in counts)
    if obs.std() == 0.0 or pred.std() == 0.0:
        pearson = None
    else:
        pearson = float(np.corrcoef(obs, pred)[0, 1])
    within = float(np.mean(np.abs(round_half_away(resid)) <= WITHIN_BAND))
    return MetricsReport(rmse=rmse, error_quartiles=(float(q1), float(med), float(q3)),
                         bucket_percentages=pct, pearson=pearson,
                         within_band_fraction=within, n_rows=resid.size,
                         training_time_minutes=training_time_minutes)


def hourly_mean_error(predictions: Sequence[PredictionRecord],
                      ) -> list[tuple[int, float, int]]:
    """Mean residual across stops per hour, ascending, with the record
    count that produced each mean."""
    _, hours, obs, pred = _arrays(predictions)
    resid = pred - obs
    uniq, inv = np.unique(hours, return_inverse=True)
    sums = np.bincount(inv, weights=resid)
    n = np.bincount(inv)
    return [(int(h), float(s / c), int(c)) for h, s, c in zip(uniq, sums, n)]


def _peak_flags(origin: dt.datetime, hours: int,
                calendar: CalendarConfig) -> np.ndarray:
    hf = hour_feature_matrix(origin, hours, calendar)
    # am/pm columns already exclude weekends and public holidays,
    # weekend-peak column is weekend-only
    return (hf[:, 6] + hf[:, 7] + hf[:, 8]) > 0


def _filter_mask(filt: str, hours: np.ndarray, origin, calendar) -> np.ndarray:
    if filt == "all":
        return np.ones(hours.size, dtype=bool)
    if filt not in FILTERS:
        raise ValueError(f"unknown filter {filt!r}; expected one of {FILTERS}")
    if origin is None or calendar is None:
        raise ValueError(f"filter {filt!r} needs origin and calendar")
    span = int(hours.max()) + 1
    hf = hour_feature_matrix(origin, span, calendar)
    if filt == "weekday":
        per_hour = hf[:, 2] == 0
    elif filt == "weekend":
        per_hour = hf[:, 2] == 1
    else:
        peak = _peak_flags(origin, span, calendar)
        per_hour = peak if filt == "peak" else ~peak
    return per_hour[hours]


def stop_mean_error(predictions: Sequence[PredictionRecord],
                    filt: str = "all",
                    calendar: CalendarConfig | None = None,
                    origin: dt.datetime | None = None,
                    ) -> tuple[list[tuple[str, float, int]], list[str]]:
    """Per-stop mean residual under an hour filter.

    Filters: all, peak (workday AM/PM plus weekend peak), offpeak
    (complement of peak), weekday, weekend.  Returns (rows, omitted)
    where rows are (stop_id, mean_residual, n) sorted by stop id and
    omitted lists stops the filter left without records.
    """
    stops, hours, obs, pred = _arrays(predictions)
    resid = pred - obs
    keep = _filter_mask(filt, hours, origin, calendar)
    all_ids, inv_all = np.unique(stops, return_inverse=True)
    sums = np.bincount(inv_all[keep], weights=resid[keep],
                       minlength=all_ids.size)
    n = np.bincount(inv_all[keep], minlength=all_ids.size)
    rows = [(str(all_ids[i]), float(sums[i] / n[i]), int(n[i]))
            for i in range(all_ids.size) if n[i] > 0]
    omitted = [str(all_ids[i]) for i in range(all_ids.size) if n[i] == 0]
    return rows, omitted


# ---------------------------------------------------------------------------
# extreme weather


def extreme_mask(weather: Sequence[HourlyWeather], ddof: int = 0,
                 stat_hours: Sequence[int] | None = None) -> ExtremeWeatherMask:
    """Flag hours with extreme weather.

    Band variables are extreme strictly outside mean +- 1.5 SD computed
    over ``stat_hours`` (default: the whole span) with population SD
    unless ddof says otherwise; rainfall is extreme strictly above 3 mm.
    A constant series has SD 0 and flags nothing.
    """
    hours = len(weather)
    if hours < 2:
        raise ValueError("need at least 2 hours of weather")
    cols = {
        "temperature": np.array([w.temperature for w in weather]),
        "humidity": np.array([w.humidity for w in weather]),
        "wind_speed": np.array([w.wind_speed for w in weather]),
        "apparent_temp": np.array([w.apparent_temp for w in weather]),
        "rainfall": np.array([w.rainfall for w in weather]),
    }
    stat_idx = (np.arange(hours) if stat_hours is None
                else np.asarray(stat_hours, dtype=np.int64))
    if stat_idx.size < 2:
        raise ValueError("need at least 2 hours for mask statistics")
    flags = {}
    band = {}
    for var in ("temperature", "humidity", "wind_speed", "apparent_temp"):
        v = cols[var]
        mu = float(v[stat_idx].mean())
        sd = float(v[stat_idx].std(ddof=ddof))
        lo = mu - BAND_SD_MULTIPLE * sd
        hi = mu + BAND_SD_MULTIPLE * sd
        flags[var] = (v < lo) | (v > hi)
        band[var] = (lo, hi)
    flags["rainfall"] = cols["rainfall"] > RAIN_THRESHOLD_MM
    return ExtremeWeatherMask(flags=flags, band=band,
                              rain_threshold=RAIN_THRESHOLD_MM, hours=hours)


def extreme_stop_error(predictions: Sequence[PredictionRecord],
                       mask: ExtremeWeatherMask, variable: str,
                       ) -> tuple[list[tuple[str, float, int]], list[str]]:
    """stop_mean_error restricted to one variable's extreme hours."""
    if variable not in mask.flags:
        raise ValueError(f"unknown mask variable {variable!r}")
    stops, hours, obs, pred = _arrays(predictions)
    if int(hours.max()) >= mask.hours:
        raise ValueError(f"mask covers {mask.hours} hours but predictions "
                         f"reach hour {int(hours.max())}")
    var_flags = mask.flags[variable]
    if not var_flags.any():
        warnings.warn(f"no extreme hours for {variable}; empty result",
                      stacklevel=2)
        all_ids = sorted(set(stops.tolist()))
        return [], [str(s) for s in all_ids]
    keep = var_flags[hours]
    resid = pred - obs
    all_ids, inv_all = np.unique(stops, return_inverse=True)
    sums = np.bincount(inv_all[keep], weights=resid[keep],
                       minlength=all_ids.size)
    n = np.bincount(inv_all[keep], minlength=all_ids.size)
    rows = [(str(all_ids[i]), float(sums[i] / n[i]), int(n[i]))
            for i in range(all_ids.size) if n[i] > 0]
    omitted = [str(all_ids[i]) for i in range(all_ids.size) if n[i] == 0]
    return rows, omitted


def error_vs_weather(predictions: Sequence[PredictionRecord],
                     weather: Sequence[HourlyWeather], variable: str,
                     n_bins: int = 20) -> list[tuple[float, float, int]]:
    """Mean residual binned against a weather variable.

    Bins are equal width over the variable's range at the predicted
    hours.  Returns (bin_centre, mean_residual, n) for every bin; empty
    bins carry NaN means and zero counts.  A degenerate range collapses
    to one populated bin.
    """
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    if variable not in MASK_VARIABLES:
        raise ValueError(f"unknown weather variable {variable!r}")
    _, hours, obs, pred = _arrays(predictions)
    if int(hours.max()) >= len(weather):
        raise ValueError("weather does not cover the prediction hours")
    values = np.array([getattr(w, variable) for w in weather])[hours]
    resid = pred - obs
    vmin = float(values.min())
    vmax = float(values.max())
    if vmax == vmin:
        idx = np.zeros(values.size, dtype=np.int64)
        width = 0.0
    else:
        width = (vmax - vmin) / n_bins
        idx = np.minimum(((values - vmin) / width).astype(np.int64), n_bins - 1)
    sums = np.bincount(idx, weights=resid, minlength=n_bins)
    n = np.bincount(idx, minlength=n_bins)
    out = []
    for b in range(n_bins):
        centre = vmin + (b + 0.5) * width
        mean = float(sums[b] / n[b]) if n[b] else math.nan
        out.append((float(centre), mean, int(n[b])))
    return out


def extreme_vs_normal_diff(counts: StopHourCounts, mask: ExtremeWeatherMask,
                           variable: str) -> list[tuple[str, float]]:
    """Observed mean ridership in extreme hours minus in normal hours.

    Positive values mean more boardings when the variable runs extreme.
    When either hour subset is empty the result is empty with a warning,
    since the subsets are shared by every stop on a dense grid.
    """
    if variable not in mask.flags:
        raise ValueError(f"unknown mask variable {variable!r}")
    if counts.hours != mask.hours:
        raise ValueError(f"counts span {counts.hours} hours, "
                         f"mask covers {mask.hours}")
    flags = mask.flags[variable]
    n_ex = int(flags.sum())
    if n_ex == 0 or n_ex == flags.size:
        warnings.warn(f"{variable}: extreme/normal split is empty on one "
                      "side; no stops comparable", stacklevel=2)
        return []
    grid = counts.values
    diff = grid[:, flags].mean(axis=1) - grid[:, ~flags].mean(axis=1)
    return [(sid, float(d)) for sid, d in zip(counts.stop_ids, diff)]


# ---------------------------------------------------------------------------
# IDW surfaces


def idw_surface(points, bbox: tuple[float, float, float, float],
                n_cols: int, n_rows: int, power: float = 2.0,
                ) -> ErrorSurfaceGrid:
    """Inverse-distance-weighted raster of point values.

    ``points`` is an (n, 3) array-like of (lon, lat, value).  Cell
    centres are haversine-weighted by d^-power over all points; a cell
    within 1 m of any point takes the nearest point's value outright.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] == 0:
        raise ValueError("points must be a non-empty (n, 3) array of "
                         "(lon, lat, value)")
    if power <= 0.0:
        raise ValueError("power must be positive")
    if n_cols < 1 or n_rows < 1:
        raise ValueError("grid must have at least one cell")
    lon_min, lat_min, lon_max, lat_max = bbox
    if not (lon_min < lon_max and lat_min < lat_max):
        raise ValueError(f"degenerate bounding box {bbox}")

    grid = ErrorSurfaceGrid(bbox=bbox, n_cols=n_cols, n_rows=n_rows,
                            values=np.empty((n_rows, n_cols)))
    lon, lat = grid.cell_centers()
    vals = pts[:, 2]
    for i in range(n_rows):
        d = haversine(lon[:, None], np.full((n_cols, 1), lat[i]),
                      pts[None, :, 0], pts[None, :, 1])
        with np.errstate(divide="ignore", invalid="ignore"):
            w = d ** (-power)
            row = (w * vals).sum(axis=1) / w.sum(axis=1)
        # zero-distance cells produce inf weights; the exact-hit rule
        # overwrites them below
        hit = d.min(axis=1) < EXACT_HIT_M
        if hit.any():
            row[hit] = vals[d[hit].argmin(axis=1)]
        grid.values[i] = row
    return grid
