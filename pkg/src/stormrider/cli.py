"""Command-line entry points.

Subcommands: synth, ingest, features, train, tune, evaluate, surface,
extremes, importance, run.  Global flags --seed, --threads and --config
sit before the subcommand; outputs are plain CSV/JSON plus the .srm model
format.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import evaluation as ev
from . import features as ft
from . import ingest
from . import pipeline as pl
from . import synth
from .learn import (load_model, predict, random_grid_search, save_model,
                    variable_importance)


def _parse_pair(text: str, sep: str = ",") -> tuple[float, float]:
    a, b = text.split(sep)
    return float(a), float(b)


def _parse_grid(text: str) -> tuple[int, int]:
    cols, rows = text.lower().split("x")
    return int(cols), int(rows)


def _add_corpus_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--trips", required=True)
    p.add_argument("--weather", required=True)
    p.add_argument("--stops", required=True)
    p.add_argument("--amenities", required=True)
    p.add_argument("--windows", required=True, help="service_windows.csv")
    p.add_argument("--calendar", required=True, help="calendar.toml")
    p.add_argument("--origin", required=True, help="panel origin, ISO datetime")
    p.add_argument("--hours", required=True, type=int, help="panel span")


def _geometry(args) -> dict:
    cbd = _parse_pair(args.cbd)
    radii = [float(v) for v in args.ring_radii.split(",")]
    if len(radii) != 3:
        raise SystemExit("--ring-radii needs three comma-separated metres")
    return {"cbd": list(cbd), "ring_radii": radii}


def _load_corpus(args):
    paths = {"trips": args.trips, "weather": args.weather,
             "stops": args.stops, "amenities": args.amenities,
             "service_windows": args.windows, "calendar": args.calendar}
    origin = dt.datetime.fromisoformat(args.origin)
    return pl.load_corpus(paths, origin, args.hours, _geometry(args)), origin


def cmd_synth(args) -> int:
    paths = synth.synth_corpus(args.out, days=args.days, n_stops=args.stops,
                               seed=args.seed if args.seed is not None else 0)
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


def cmd_ingest(args) -> int:
    (stops, _, _, _, readings, counts, _, report), origin = _load_corpus(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pl.write_counts_csv(out / "counts.csv", counts)
    weather = ingest.hourly_weather(readings, origin, args.hours)
    pl.write_hourly_weather_csv(out / "hourly_weather.csv", weather)
    with open(out / "drop_report.json", "w") as fh:
        json.dump(report.__dict__, fh, indent=1)
    print(f"{counts.total()} boardings over {len(stops)} stops x "
          f"{args.hours} hours; dropped {report.dropped()} trips")
    return 0


def cmd_features(args) -> int:
    (stops, amenities, windows, calendar, readings, counts, kept,
     _), origin = _load_corpus(args)
    panel, _, _ = pl.assemble_panel(stops, amenities, windows, calendar,
                                    readings, counts, kept, origin,
                                    args.hours, args.warmup)
    out = Path(args.out)
    pl.write_panel_csv(out, panel)
    schema_path = out.with_name(out.stem + "_schema.json")
    with open(schema_path, "w") as fh:
        json.dump({"columns": list(panel.schema),
                   "origin": origin.isoformat(), "warmup": panel.warmup,
                   "n_stops": len(panel.stop_ids), "hours": panel.hours},
                  fh, indent=1)
    print(f"{len(panel)} rows x {len(panel.schema)} features -> {out}")
    return 0


def _panel_xy(path):
    ids, hour_idx, x, y, names = pl.read_panel_csv(path)
    return ids, hour_idx, x, y, names


def cmd_train(args) -> int:
    _, _, x, y, names = _panel_xy(args.panel)
    overrides = {}
    if args.params:
        with open(args.params) as fh:
            overrides = json.load(fh)
    hp = pl._hp_for(args.algorithm, overrides)
    seed = np.random.SeedSequence(
        (args.seed or 0, pl.ALGORITHMS.index(args.algorithm)))
    t0 = time.perf_counter()
    model = pl._fit(args.algorithm, hp, x, y, seed, names,
                    args.threads or 1)
    minutes = (time.perf_counter() - t0) / 60.0
    save_model(model, args.out)
    print(f"trained {args.algorithm} on {y.size} rows in "
          f"{minutes:.2f} min -> {args.out}")
    return 0


def cmd_tune(args) -> int:
    _, _, x, y, _ = _panel_xy(args.panel)
    with open(args.space) as fh:
        space = json.load(fh)
    base = pl._hp_for(args.algorithm, None)
    result = random_grid_search(
        x, y, space, budget=args.budget, base=base, n_folds=args.folds,
        seed=np.random.SeedSequence((args.seed or 0, 7777)),
        algorithm=("random_forest" if args.algorithm == "random_forest"
                   else "gbdt"),
        threads=args.threads or 1)
    best = {k: getattr(result.best, k) for k in space}
    with open(args.out, "w") as fh:
        json.dump({"algorithm": args.algorithm, "best": best,
                   "best_cv_mse": result.best_score,
                   "trials": [{"params": {k: getattr(t.hp, k) for k in space},
                               "cv_mse": t.score} for t in result.trials]},
                  fh, indent=1)
    print(f"best CV MSE {result.best_score:.4f} with {best}")
    return 0


def cmd_evaluate(args) -> int:
    ids, hour_idx, x, y, _ = _panel_xy(args.panel)
    model = load_model(args.model)
    pred = predict(model, x)
    records = ev.predictions_from_arrays(ids, hour_idx, y, pred)
    report = ev.metrics(records)
    with open(args.out, "w") as fh:
        json.dump(report.as_dict(), fh, indent=1)
    if args.errors:
        pl.write_errors_csv(args.errors, records)
    print(f"rmse {report.rmse:.4f}, pearson "
          f"{report.pearson if report.pearson is not None else 'undefined'}, "
          f"{report.n_rows} rows")
    return 0


def cmd_surface(args) -> int:
    records = pl.read_errors_csv(args.errors)
    stop_rows = ingest.parse_stops(args.stops)
    coords = {r["stop_id"]: (r["lon"], r["lat"]) for r in stop_rows}
    calendar = ingest.parse_calendar(args.calendar) if args.calendar else None
    origin = (dt.datetime.fromisoformat(args.origin) if args.origin else None)
    rows, omitted = ev.stop_mean_error(records, args.filter, calendar, origin)
    if omitted:
        print(f"note: {len(omitted)} stops had no records under "
              f"filter {args.filter!r}", file=sys.stderr)
    pts = [(coords[sid][0], coords[sid][1], m) for sid, m, _ in rows
           if sid in coords]
    if not pts:
        raise SystemExit("no stops with both coordinates and residuals")
    lon = np.array([p[0] for p in pts])
    lat = np.array([p[1] for p in pts])
    pad = max(float(lon.max() - lon.min()), float(lat.max() - lat.min()),
              1e-3) * 0.02
    bbox = (float(lon.min() - pad), float(lat.min() - pad),
            float(lon.max() + pad), float(lat.max() + pad))
    n_cols, n_rows = _parse_grid(args.grid)
    grid = ev.idw_surface(pts, bbox, n_cols, n_rows, power=args.power)
    pl.write_surface_csv(args.out, grid)
    print(f"{n_cols}x{n_rows} surface from {len(pts)} stops -> {args.out}")
    return 0


def cmd_extremes(args) -> int:
    readings, _ = ingest.parse_weather(args.weather)
    origin = dt.datetime.fromisoformat(args.origin)
    weather = ingest.hourly_weather(readings, origin, args.hours)
    mask = ev.extreme_mask(weather)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records = pl.read_errors_csv(args.errors)
    rows, omitted = ev.extreme_stop_error(records, mask, args.variable)
    with open(out / f"extreme_error_{args.variable}.csv", "w") as fh:
        fh.write("stop_id,mean_residual,n\n")
        for sid, m, n in rows:
            fh.write(f"{sid},{m:.12g},{n}\n")
    n_hours = int(mask.flags[args.variable].sum())
    print(f"{args.variable}: {n_hours} extreme hours, "
          f"{len(rows)} stops covered, {len(omitted)} omitted")
    if args.counts:
        counts = pl.read_counts_csv(args.counts, origin)
        diffs = ev.extreme_vs_normal_diff(counts, mask, args.variable)
        with open(out / f"observed_diff_{args.variable}.csv", "w") as fh:
            fh.write("stop_id,ridership_diff\n")
            for sid, d in diffs:
                fh.write(f"{sid},{d:.12g}\n")
    return 0


def cmd_importance(args) -> int:
    model = load_model(args.model)
    pl.write_importance_csv(args.out, model)
    scores = variable_importance(model)
    top = np.argsort(-scores)[:5]
    names = [model.feature_names[i] for i in top]
    print("top features: " + ", ".join(names))
    return 0


def cmd_run(args) -> int:
    if not args.config:
        raise SystemExit("run needs --config")
    config = pl.load_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.threads is not None:
        config.threads = args.threads
    manifest = pl.run(config)
    print(f"run ok -> {config.out_dir}")
    for algo, info in manifest["models"].items():
        print(f"  {algo}: rmse {info['rmse']:.4f}, "
              f"{info['training_time_minutes']:.2f} min")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stormrider",
        description="Stop-hour transit ridership forecasting toolkit")
    parser.add_argument("--seed", type=int, default=None,
                        help="master random seed")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads for tree fitting")
    parser.add_argument("--config", default=None,
                        help="run configuration file (TOML or JSON)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--days", type=int, default=90)
    p.add_argument("--stops", type=int, default=200)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="parse, clean and aggregate a corpus")
    _add_corpus_args(p)
    p.add_argument("--cbd", default="153.026,-27.468")
    p.add_argument("--ring-radii", default="1500,5000,12000")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("features", help="assemble the stop-hour panel")
    _add_corpus_args(p)
    p.add_argument("--cbd", default="153.026,-27.468")
    p.add_argument("--ring-radii", default="1500,5000,12000")
    p.add_argument("--warmup", type=int, default=ft.WARMUP_HOURS)
    p.add_argument("--out", required=True, help="panel CSV path")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="fit one model on a panel")
    p.add_argument("--panel", required=True)
    p.add_argument("--algorithm", required=True, choices=pl.ALGORITHMS)
    p.add_argument("--params", help="JSON file of hyperparameter overrides")
    p.add_argument("--out", required=True, help="model path (.srm)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("tune", help="random search over a hyperparameter space")
    p.add_argument("--panel", required=True)
    p.add_argument("--algorithm", required=True, choices=pl.ALGORITHMS)
    p.add_argument("--space", required=True,
                   help="JSON file: field -> candidate values")
    p.add_argument("--budget", type=int, default=10)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("evaluate", help="score a model against a panel")
    p.add_argument("--model", required=True)
    p.add_argument("--panel", required=True)
    p.add_argument("--out", required=True, help="metrics JSON path")
    p.add_argument("--errors", help="optional per-row errors CSV")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("surface", help="IDW surface from per-stop errors")
    p.add_argument("--errors", required=True)
    p.add_argument("--stops", required=True)
    p.add_argument("--filter", default="all", choices=ev.FILTERS)
    p.add_argument("--calendar", help="needed for peak/weekday filters")
    p.add_argument("--origin", help="panel origin, ISO datetime")
    p.add_argument("--grid", default="60x60")
    p.add_argument("--power", type=float, default=2.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_surface)

    p = sub.add_parser("extremes", help="errors under extreme weather")
    p.add_argument("--weather", required=True, help="5-minute readings CSV")
    p.add_argument("--origin", required=True)
    p.add_argument("--hours", required=True, type=int)
    p.add_argument("--errors", required=True)
    p.add_argument("--variable", required=True, choices=ev.MASK_VARIABLES)
    p.add_argument("--counts", help="counts CSV for observed differences")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_extremes)

    p = sub.add_parser("importance", help="per-feature split-gain table")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_importance)

    p = sub.add_parser("run", help="full pipeline from a config file")
    p.set_defaults(func=cmd_run)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except pl.PipelineError as exc:
        print(f"pipeline failed: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
