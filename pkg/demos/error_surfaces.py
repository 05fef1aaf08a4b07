"""Where a model is wrong: stop-level error maps via IDW interpolation.

Fits a forest on two weeks of synthetic data, averages held-out residuals
per stop, interpolates them onto a grid with inverse-distance weighting
and prints a coarse ASCII rendering (o = overprediction, u = under, . =
near zero). The same grids land in CSV files any GIS or plotting tool can
read.

    python3 demos/error_surfaces.py [out_dir]
"""

import sys
import tempfile
from pathlib import Path

import numpy as np

import stormrider as sr

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp())
DAYS, STOPS = 14, 80

paths = sr.synth_corpus(out / "corpus", days=DAYS, n_stops=STOPS, seed=11)
origin, hours = sr.DEFAULT_ORIGIN, DAYS * 24
geometry = {"cbd": [153.026, -27.468], "ring_radii": [1500.0, 5000.0, 12000.0]}
(stops, amenities, windows, calendar, readings, counts, kept,
 _) = sr.load_corpus(paths, origin, hours, geometry)
panel, weather, _ = sr.assemble_panel(stops, amenities, windows, calendar,
                                      readings, counts, kept, origin, hours)

x = panel.matrix()
y = panel.targets().astype(float)
train_idx, test_idx = sr.split(panel, fraction=0.2, seed=0)
model = sr.fit_random_forest(x[train_idx], y[train_idx],
                             sr.random_forest_defaults(), seed=0,
                             feature_names=panel.schema)
pred = sr.predict(model, x[test_idx])
n_ph = panel.n_panel_hours
records = sr.predictions_from_arrays(
    np.asarray(panel.stop_ids)[test_idx // n_ph],
    panel.first_hour + (test_idx % n_ph), y[test_idx], pred)
print(f"forest held-out RMSE "
      f"{np.sqrt(np.mean((pred - y[test_idx]) ** 2)):.3f} "
      f"on {len(records)} rows")

coords = {s.stop_id: (s.lon, s.lat) for s in stops}
lon = np.array([s.lon for s in stops])
lat = np.array([s.lat for s in stops])
bbox = (lon.min() - 0.003, lat.min() - 0.003,
        lon.max() + 0.003, lat.max() + 0.003)


def render(grid):
    """Down-and-dirty console picture; rows print north to south."""
    lo, hi = np.nanmin(grid.values), np.nanmax(grid.values)
    span = max(abs(lo), abs(hi), 1e-9)
    for i in range(grid.n_rows - 1, -1, -1):
        line = ""
        for v in grid.values[i]:
            t = v / span
            line += ("O" if t > 0.5 else "o" if t > 0.15 else
                     "U" if t < -0.5 else "u" if t < -0.15 else ".")
        print("   " + line)
    print(f"   value range [{lo:+.2f}, {hi:+.2f}] "
          "(O/o over, U/u under, . near zero)")


for filt in ("all", "peak", "weekend"):
    rows, omitted = sr.stop_mean_error(records, filt, calendar, origin)
    pts = [(coords[sid][0], coords[sid][1], m) for sid, m, _ in rows]
    grid = sr.idw_surface(pts, bbox, 48, 16)
    path = out / f"surface_{filt}.csv"
    sr.write_surface_csv(path, grid)
    note = f", {len(omitted)} stops omitted" if omitted else ""
    print(f"\n{filt}: {len(pts)} stops{note} -> {path}")
    render(grid)
