"""End-to-end orchestration: corpus -> panel -> split -> train -> evaluate.

A run is described by a RunConfig (TOML or JSON), owns one output
directory, and leaves behind the panel, fitted models, metric reports,
error tables, IDW surfaces, importance tables and a manifest tying it all
to the config hash and seeds.  Any stage failure writes a FAILED marker
next to the partial artifacts and raises PipelineError.

The default row split mirrors the random 80/20 holdout; note that lag
features straddle a random split, so a time-ordered holdout of the final
span is available via split mode "time".  Cross-validation for tuning
runs inside the training split only.
"""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import sys
import time
import traceback
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import evaluation as ev
from . import features as ft
from . import ingest
from . import synth
from .learn import (Hyperparameters, TreeEnsemble, fit_gbdt,
                    fit_random_forest, predict, random_forest_defaults,
                    random_grid_search, save_model, tweedie_defaults,
                    variable_importance, xgboost_defaults)

ALGORITHMS = ("random_forest", "xgboost", "tweedie")
_DEFAULTS = {"random_forest": random_forest_defaults,
             "xgboost": xgboost_defaults,
             "tweedie": tweedie_defaults}

FLOAT_FMT = "%.12g"


class PipelineError(RuntimeError):
    """A pipeline stage failed; artifacts up to that stage are on disk."""


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    """Declarative description of one end-to-end run.

    Exactly one of ``synth`` (days/stops/seed for a generated corpus) or
    ``inputs`` (paths to the six corpus files) must be given.  ``params``
    overrides hyperparameters per algorithm; ``tune`` optionally searches
    a space for one algorithm before final training.
    """

    out_dir: str
    synth: dict | None = None
    inputs: dict | None = None
    origin: str | None = None
    hours: int | None = None
    warmup: int = ft.WARMUP_HOURS
    split: dict = field(default_factory=lambda: {"fraction": 0.2, "seed": 0,
                                                 "mode": "random"})
    cv_folds: int = 5
    algorithms: list = field(default_factory=lambda: list(ALGORITHMS))
    params: dict = field(default_factory=dict)
    tune: dict | None = None
    surfaces: dict = field(default_factory=lambda: {"grid": [60, 60],
                                                    "filters": ["all", "peak",
                                                                "offpeak"]})
    extremes: list = field(default_factory=lambda: ["rainfall"])
    geometry: dict = field(default_factory=lambda: {
        "cbd": [153.026, -27.468], "ring_radii": [1500.0, 5000.0, 12000.0]})
    seed: int = 0
    threads: int = 1

    def __post_init__(self) -> None:
        if (self.synth is None) == (self.inputs is None):
            raise ValueError("exactly one of 'synth' or 'inputs' must be set")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {a!r}; "
                                 f"expected one of {ALGORITHMS}")
        for a in self.params:
            if a not in ALGORITHMS:
                raise ValueError(f"params for unknown algorithm {a!r}")
        frac = self.split.get("fraction", 0.2)
        if not 0.0 < frac < 1.0:
            raise ValueError("split fraction must lie in (0, 1)")
        if self.split.get("mode", "random") not in ("random", "time"):
            raise ValueError("split mode must be 'random' or 'time'")
        if self.inputs is not None:
            needed = {"trips", "weather", "stops", "amenities",
                      "service_windows", "calendar"}
            missing = needed - set(self.inputs)
            if missing:
                raise ValueError(f"inputs missing {sorted(missing)}")
            if self.origin is None or self.hours is None:
                raise ValueError("path inputs need 'origin' and 'hours'")
        if self.tune is not None:
            algo = self.tune.get("algorithm")
            if algo not in self.algorithms:
                raise ValueError(f"tune.algorithm {algo!r} not in algorithms")
            if "space" not in self.tune or not self.tune["space"]:
                raise ValueError("tune needs a non-empty 'space'")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be >= 2")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def resolved_origin(self) -> dt.datetime:
        if self.origin is not None:
            return dt.datetime.fromisoformat(self.origin)
        return synth.DEFAULT_ORIGIN

    def resolved_hours(self) -> int:
        if self.hours is not None:
            return int(self.hours)
        return int(self.synth.get("days", 90)) * 24

    def as_dict(self) -> dict:
        return {
            "out_dir": self.out_dir, "synth": self.synth,
            "inputs": self.inputs, "origin": self.origin, "hours": self.hours,
            "warmup": self.warmup, "split": self.split,
            "cv_folds": self.cv_folds, "algorithms": list(self.algorithms),
            "params": self.params, "tune": self.tune,
            "surfaces": self.surfaces, "extremes": list(self.extremes),
            "geometry": self.geometry, "seed": self.seed,
            "threads": self.threads,
        }


def load_config(path) -> RunConfig:
    """Read a RunConfig from a .toml or .json file."""
    path = Path(path)
    if path.suffix == ".json":
        with open(path) as fh:
            raw = json.load(fh)
    else:
        try:
            import tomllib
        except ModuleNotFoundError:  # pragma: no cover - version dependent
            import tomli as tomllib
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config keys {sorted(unknown)}")
    return RunConfig(**raw)


def config_hash(config: RunConfig) -> str:
    blob = json.dumps(config.as_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


# ---------------------------------------------------------------------------
# splitting


def split(panel, fraction: float = 0.2, seed: int = 0, mode: str = "random",
          ) -> tuple[np.ndarray, np.ndarray]:
    """Partition panel rows into (train_idx, test_idx).

    Random mode permutes all rows with the given seed and takes
    round(n * fraction) of them as the test set; time mode holds out the
    final round(panel_hours * fraction) observation hours of every stop.
    Both index arrays come back sorted, disjoint and covering.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    n = int(panel) if isinstance(panel, (int, np.integer)) else len(panel)
    if n == 0:
        raise ValueError("cannot split an empty panel")
    if mode == "random":
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        perm = rng.permutation(n)
        n_test = int(n * fraction + 0.5)
        test = np.sort(perm[:n_test])
        train = np.sort(perm[n_test:])
        return train, test
    if mode != "time":
        raise ValueError(f"unknown split mode {mode!r}")
    if isinstance(panel, (int, np.integer)):
        raise ValueError("time split needs a Panel, not a row count")
    n_ph = panel.n_panel_hours
    k = max(1, int(n_ph * fraction + 0.5))
    j = np.arange(n) % n_ph
    test = np.flatnonzero(j >= n_ph - k)
    train = np.flatnonzero(j < n_ph - k)
    return train, test


# ---------------------------------------------------------------------------
# fast CSV helpers


def _fmt_floats(values: np.ndarray) -> np.ndarray:
    return np.char.mod(FLOAT_FMT, np.asarray(values, dtype=np.float64))


def _write_columns(path, header: str, cols: list) -> None:
    cols = [np.asarray(c, dtype=np.str_) for c in cols]
    body = cols[0]
    for part in cols[1:]:
        body = np.char.add(np.char.add(body, ","), part)
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        if body.size:
            fh.write("\n".join(body.tolist()))
            fh.write("\n")


def write_panel_csv(path, panel: ft.Panel) -> None:
    """Materialise the lazy panel as stop_id,hour_index,<43 features>,target."""
    x = panel.matrix()
    y = panel.targets()
    n_ph = panel.n_panel_hours
    stop_rep = np.repeat(np.asarray(panel.stop_ids), n_ph)
    hour_idx = np.tile(np.arange(panel.first_hour, panel.first_hour + n_ph),
                       len(panel.stop_ids))
    cols = [stop_rep, hour_idx.astype(np.str_)]
    cols += [_fmt_floats(x[:, j]) for j in range(x.shape[1])]
    cols.append(_fmt_floats(y))
    header = "stop_id,hour_index," + ",".join(panel.schema) + ",target"
    _write_columns(path, header, cols)


def read_panel_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray,
                                  np.ndarray, list[str]]:
    """Read a panel CSV back as (stop_ids, hour_index, x, y, feature_names)."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if header[:2] != ["stop_id", "hour_index"] or header[-1] != "target":
        raise ValueError(f"{path}: not a panel CSV (header {header[:3]}...)")
    names = header[2:-1]
    ncol = len(header)
    data = np.loadtxt(path, delimiter=",", skiprows=1,
                      usecols=range(1, ncol), ndmin=2)
    ids = np.loadtxt(path, delimiter=",", skiprows=1, usecols=0, dtype=str,
                     ndmin=1)
    return (ids, data[:, 0].astype(np.int64), data[:, 1:-1], data[:, -1],
            names)


def write_errors_csv(path, records) -> None:
    ids = np.array([r.stop_id for r in records])
    hours = np.array([r.hour_index for r in records], dtype=np.int64)
    obs = np.array([r.observed for r in records])
    pred = np.array([r.predicted for r in records])
    _write_columns(path, "stop_id,hour_index,observed,predicted,residual",
                   [ids, hours.astype(np.str_), _fmt_floats(obs),
                    _fmt_floats(pred), _fmt_floats(pred - obs)])


def read_errors_csv(path) -> list[ev.PredictionRecord]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(ev.PredictionRecord(row["stop_id"],
                                           int(row["hour_index"]),
                                           float(row["observed"]),
                                           float(row["predicted"])))
    if not out:
        raise ValueError(f"{path}: no prediction rows")
    return out


def write_surface_csv(path, grid: ev.ErrorSurfaceGrid) -> None:
    """Cell rows (lon, lat, value) under a bbox-naming comment header."""
    lon, lat = grid.cell_centers()
    lon_col = np.tile(lon, grid.n_rows)
    lat_col = np.repeat(lat, grid.n_cols)
    with open(path, "w", newline="") as fh:
        fh.write("# bbox %.8f,%.8f,%.8f,%.8f cols %d rows %d\n"
                 % (*grid.bbox, grid.n_cols, grid.n_rows))
        fh.write("lon,lat,value\n")
        body = np.char.add(np.char.add(
            np.char.add(np.char.mod("%.8f", lon_col), ","),
            np.char.add(np.char.mod("%.8f", lat_col), ",")),
            _fmt_floats(grid.values.ravel()))
        fh.write("\n".join(body.tolist()))
        fh.write("\n")


def write_hourly_weather_csv(path, weather) -> None:
    _write_columns(
        path,
        "hour_index,temperature,humidity,wind_speed,apparent_temp,"
        "rainfall,interpolated",
        [np.array([w.hour_index for w in weather], dtype=np.str_),
         _fmt_floats([w.temperature for w in weather]),
         _fmt_floats([w.humidity for w in weather]),
         _fmt_floats([w.wind_speed for w in weather]),
         _fmt_floats([w.apparent_temp for w in weather]),
         _fmt_floats([w.rainfall for w in weather]),
         np.array([int(w.interpolated) for w in weather], dtype=np.str_)])


def write_counts_csv(path, counts: ingest.StopHourCounts) -> None:
    """Long-form stop_id,hour_index,boardings with zeros included."""
    n, hours = counts.values.shape
    _write_columns(path, "stop_id,hour_index,boardings",
                   [np.repeat(np.asarray(counts.stop_ids), hours),
                    np.tile(np.arange(hours), n).astype(np.str_),
                    counts.values.ravel().astype(np.str_)])


def read_counts_csv(path, origin: dt.datetime) -> ingest.StopHourCounts:
    """Read the long-form counts CSV back into a dense grid."""
    ids: list[str] = []
    index: dict[str, int] = {}
    cells: list[tuple[int, int, int]] = []
    max_hour = -1
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            sid = row["stop_id"]
            if sid not in index:
                index[sid] = len(ids)
                ids.append(sid)
            h = int(row["hour_index"])
            max_hour = max(max_hour, h)
            cells.append((index[sid], h, int(row["boardings"])))
    if max_hour < 0:
        raise ValueError(f"{path}: no count rows")
    grid = np.zeros((len(ids), max_hour + 1), dtype=np.int64)
    for i, h, v in cells:
        grid[i, h] = v
    return ingest.counts_from_grid(ids, origin, grid)


def write_importance_csv(path, ensemble: TreeEnsemble) -> None:
    scores = variable_importance(ensemble)
    order = np.argsort(-scores, kind="stable")
    _write_columns(path, "feature,score",
                   [np.asarray(ensemble.feature_names)[order],
                    _fmt_floats(scores[order])])


# ---------------------------------------------------------------------------
# corpus loading and feature assembly


def load_corpus(paths: dict, origin: dt.datetime, hours: int,
                geometry: dict):
    """Parse the six corpus files and aggregate boardings.

    Returns (stops, amenities, windows, calendar, readings, counts,
    kept_trips, drop_report).  Stop ring flags are assigned from the
    configured geometry; walk-shed features are filled in later by
    assemble_panel.
    """
    stop_rows = ingest.parse_stops(paths["stops"])
    stops = [ft.StopRecord(stop_id=r["stop_id"], lon=r["lon"], lat=r["lat"],
                           busway=r["busway"]) for r in stop_rows]
    cbd = geometry["cbd"]
    r1, r2, _ = geometry["ring_radii"]
    ft.assign_rings(stops, cbd[0], cbd[1], r1, r2)
    amenities = ingest.parse_amenities(paths["amenities"])
    windows = ingest.parse_service_windows(paths["service_windows"])
    calendar = ingest.parse_calendar(paths["calendar"])
    readings, _ = ingest.parse_weather(paths["weather"])
    trips, _ = ingest.parse_trips(paths["trips"])
    kept, report = ingest.clean_trips(trips, [s.stop_id for s in stops])
    counts = ingest.aggregate_ridership(kept, [s.stop_id for s in stops],
                                        origin, hours)
    return stops, amenities, windows, calendar, readings, counts, kept, report


def assemble_panel(stops, amenities, windows, calendar, readings, counts,
                   kept_trips, origin: dt.datetime, hours: int,
                   warmup: int = ft.WARMUP_HOURS):
    """Fill stop walk-shed features and build the lazy panel.

    Journey times are rounded to whole minutes before the Jenks
    classification, matching ticketing-export precision and keeping the
    break search small.
    """
    _, densities = ft.amenity_density(stops, amenities)
    idx = {s.stop_id: i for i, s in enumerate(stops)}
    stop_idx = []
    durations = []
    for t in kept_trips:
        d = t.duration_minutes
        if d is None:
            continue
        stop_idx.append(idx[t.board_stop])
        durations.append(round(d))
    durations = np.asarray(durations, dtype=np.float64)
    stop_idx = np.asarray(stop_idx, dtype=np.int64)
    breaks = ft.jenks_breaks(durations, 5)
    shares = ft.shares_from_durations(stop_idx, durations, len(stops), breaks)
    for i, s in enumerate(stops):
        s.amenity_densities = densities[i]
        s.jt_shares = shares[i]
    weather = ingest.hourly_weather(readings, origin, hours)
    panel = ft.build_panel(counts, weather, stops, calendar, windows,
                           warmup=warmup)
    return panel, weather, breaks


def _hp_for(algo: str, overrides: dict | None) -> Hyperparameters:
    hp = _DEFAULTS[algo]()
    if overrides:
        from dataclasses import replace
        hp = replace(hp, **overrides)
    return hp


def _fit(algo: str, hp: Hyperparameters, x, y, seed, names, threads: int,
         ) -> TreeEnsemble:
    if algo == "random_forest":
        return fit_random_forest(x, y, hp, seed=seed, feature_names=names,
                                 threads=threads)
    return fit_gbdt(x, y, hp, seed=seed, feature_names=names)


def _baseline_rmse(x_test, y_test) -> dict:
    persistence = x_test[:, ft.PANEL_SCHEMA.index("hour_lag")]
    seasonal = x_test[:, ft.PANEL_SCHEMA.index("week_lag")]
    return {
        "persistence_rmse": float(np.sqrt(np.mean((persistence - y_test) ** 2))),
        "seasonal_naive_rmse": float(np.sqrt(np.mean((seasonal - y_test) ** 2))),
    }


# ---------------------------------------------------------------------------
# the run


def run(config: RunConfig) -> dict:
    """Execute the full workflow; returns the manifest dict.

    Stages: corpus (synth or ingest), features, split, optional tuning,
    per-algorithm training + evaluation + surfaces, importance.  On any
    stage failure a FAILED marker and a partial manifest are written and
    PipelineError is raised.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for sub in ("models", "metrics", "errors", "importance", "surfaces",
                "extremes"):
        (out / sub).mkdir(exist_ok=True)

    manifest: dict = {
        "config": config.as_dict(),
        "config_hash": config_hash(config),
        "package_version": _package_version(),
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "status": "running",
        "stage_seconds": {},
        "models": {},
    }
    t_stage = time.perf_counter()
    stage = "corpus"
    try:
        origin = config.resolved_origin()
        hours = config.resolved_hours()
        if config.synth is not None:
            corpus_dir = out / "corpus"
            paths = synth.synth_corpus(
                corpus_dir,
                days=int(config.synth.get("days", 90)),
                n_stops=int(config.synth.get("stops", 200)),
                seed=int(config.synth.get("seed", config.seed)),
                origin=origin)
        else:
            paths = dict(config.inputs)
        (stops, amenities, windows, calendar, readings, counts, kept,
         report) = load_corpus(paths, origin, hours, config.geometry)
        write_counts_csv(out / "counts.csv", counts)
        with open(out / "drop_report.json", "w") as fh:
            json.dump(report.__dict__, fh, indent=1)
        manifest["stage_seconds"][stage] = _lap(t_stage)

        stage = "features"
        t_stage = time.perf_counter()
        panel, weather, _ = assemble_panel(stops, amenities, windows,
                                           calendar, readings, counts, kept,
                                           origin, hours, config.warmup)
        write_hourly_weather_csv(out / "hourly_weather.csv", weather)
        write_panel_csv(out / "panel.csv", panel)
        with open(out / "panel_schema.json", "w") as fh:
            json.dump({"columns": list(panel.schema),
                       "origin": origin.isoformat(),
                       "warmup": panel.warmup,
                       "n_stops": len(panel.stop_ids),
                       "hours": panel.hours}, fh, indent=1)
        manifest["stage_seconds"][stage] = _lap(t_stage)

        stage = "split"
        t_stage = time.perf_counter()
        frac = config.split.get("fraction", 0.2)
        mode = config.split.get("mode", "random")
        split_seed = config.split.get("seed", 0)
        train_idx, test_idx = split(panel, frac, split_seed, mode)
        x = panel.matrix()
        y = panel.targets().astype(np.float64)
        x_train, y_train = x[train_idx], y[train_idx]
        x_test, y_test = x[test_idx], y[test_idx]
        manifest["split"] = {"fraction": frac, "seed": split_seed,
                             "mode": mode, "n_train": int(train_idx.size),
                             "n_test": int(test_idx.size)}
        manifest["baselines"] = _baseline_rmse(x_test, y_test)
        manifest["stage_seconds"][stage] = _lap(t_stage)

        tuned: dict[str, dict] = {}
        if config.tune is not None:
            stage = "tune"
            t_stage = time.perf_counter()
            algo = config.tune["algorithm"]
            base = _hp_for(algo, config.params.get(algo))
            result = random_grid_search(
                x_train, y_train, config.tune["space"],
                budget=int(config.tune.get("budget", 10)),
                base=base, n_folds=config.cv_folds,
                seed=np.random.SeedSequence((config.seed, 7777)),
                algorithm=("random_forest" if algo == "random_forest"
                           else "gbdt"),
                threads=config.threads)
            space_keys = list(config.tune["space"])
            tuned[algo] = {k: getattr(result.best, k) for k in space_keys}
            with open(out / "tuning.json", "w") as fh:
                json.dump({"algorithm": algo,
                           "best": tuned[algo],
                           "best_cv_mse": result.best_score,
                           "trials": [{"params": {k: getattr(t.hp, k)
                                                  for k in space_keys},
                                       "cv_mse": t.score}
                                      for t in result.trials]}, fh, indent=1)
            manifest["stage_seconds"][stage] = _lap(t_stage)

        n_ph = panel.n_panel_hours
        test_stop = np.asarray(panel.stop_ids)[test_idx // n_ph]
        test_hour = panel.first_hour + (test_idx % n_ph)
        mask = ev.extreme_mask(weather)

        for ai, algo in enumerate(config.algorithms):
            stage = f"train[{algo}]"
            t_stage = time.perf_counter()
            overrides = dict(config.params.get(algo, {}))
            overrides.update(tuned.get(algo, {}))
            hp = _hp_for(algo, overrides)
            fit_seed = np.random.SeedSequence(
                (config.seed, ALGORITHMS.index(algo)))
            model = _fit(algo, hp, x_train, y_train, fit_seed,
                         panel.schema, config.threads)
            minutes = _lap(t_stage) / 60.0
            save_model(model, out / "models" / f"{algo}.srm")
            manifest["stage_seconds"][stage] = minutes * 60.0

            stage = f"evaluate[{algo}]"
            t_stage = time.perf_counter()
            pred = predict(model, x_test)
            records = ev.predictions_from_arrays(test_stop, test_hour,
                                                 y_test, pred)
            report_m = ev.metrics(records, training_time_minutes=minutes)
            with open(out / "metrics" / f"{algo}.json", "w") as fh:
                json.dump(report_m.as_dict(), fh, indent=1)
            write_errors_csv(out / "errors" / f"{algo}.csv", records)
            write_importance_csv(out / "importance" / f"{algo}.csv", model)

            coords = {s.stop_id: (s.lon, s.lat) for s in stops}
            bbox = _stops_bbox(stops)
            n_cols, n_rows = config.surfaces.get("grid", [60, 60])
            for filt in config.surfaces.get("filters", ["all"]):
                rows, _ = ev.stop_mean_error(records, filt, calendar, origin)
                if not rows:
                    continue
                pts = [(coords[sid][0], coords[sid][1], m)
                       for sid, m, _ in rows]
                grid = ev.idw_surface(pts, bbox, int(n_cols), int(n_rows))
                write_surface_csv(out / "surfaces" / f"{algo}_{filt}.csv",
                                  grid)
            for var in config.extremes:
                rows, _ = ev.extreme_stop_error(records, mask, var)
                _write_columns(out / "extremes" / f"{algo}_{var}.csv",
                               "stop_id,mean_residual,n",
                               [np.array([r[0] for r in rows]),
                                _fmt_floats([r[1] for r in rows]),
                                np.array([r[2] for r in rows],
                                         dtype=np.str_)])
            manifest["models"][algo] = {
                "hyperparameters": _hp_dict(hp),
                "training_time_minutes": minutes,
                "rmse": report_m.rmse,
                "pearson": report_m.pearson,
                "within_band_fraction": report_m.within_band_fraction,
            }
            manifest["stage_seconds"][stage] = _lap(t_stage)

        stage = "extremes"
        for var in config.extremes:
            diffs = ev.extreme_vs_normal_diff(counts, mask, var)
            _write_columns(out / "extremes" / f"observed_diff_{var}.csv",
                           "stop_id,ridership_diff",
                           [np.array([d[0] for d in diffs]),
                            _fmt_floats([d[1] for d in diffs])])

        manifest["status"] = "ok"
    except Exception as exc:
        manifest["status"] = "failed"
        manifest["failed_stage"] = stage
        manifest["error"] = repr(exc)
        with open(out / "FAILED", "w") as fh:
            fh.write(f"stage: {stage}\n\n")
            fh.write(traceback.format_exc())
        with open(out / "manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=1)
        raise PipelineError(f"stage {stage} failed: {exc}") from exc

    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1)
    return manifest


def _lap(t0: float) -> float:
    return time.perf_counter() - t0


def _package_version() -> str:
    from . import __version__
    return __version__


def _hp_dict(hp: Hyperparameters) -> dict:
    from dataclasses import asdict
    return asdict(hp)


def _stops_bbox(stops) -> tuple[float, float, float, float]:
    lon = np.array([s.lon for s in stops])
    lat = np.array([s.lat for s in stops])
    pad_lon = max((lon.max() - lon.min()) * 0.02, 1e-4)
    pad_lat = max((lat.max() - lat.min()) * 0.02, 1e-4)
    return (float(lon.min() - pad_lon), float(lat.min() - pad_lat),
            float(lon.max() + pad_lon), float(lat.max() + pad_lat))
