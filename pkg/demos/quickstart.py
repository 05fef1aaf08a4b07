"""Smallest end-to-end tour: corpus -> panel -> model -> metrics.

Generates three weeks of synthetic smart-card data for a 40-stop network,
assembles the stop-hour feature panel, trains a gradient-boosted model on
an 80/20 holdout and prints the headline numbers next to two naive
baselines. Runs in well under a minute on one core.

    python3 demos/quickstart.py [out_dir]
"""

import sys
import tempfile
from pathlib import Path

import numpy as np

import stormrider as sr

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp())
print(f"working in {out}\n")

# --- 1. a corpus ----------------------------------------------------------
# Six files, same shapes a real ticketing/weather export would have:
# trips.csv, weather.csv (5-minute readings), stops.csv, amenities.csv,
# service_windows.csv, calendar.toml.
paths = sr.synth_corpus(out / "corpus", days=21, n_stops=40, seed=7)
n_lines = sum(1 for _ in open(paths["trips"])) - 1
print(f"generated {n_lines} trips over 21 days x 40 stops")

# --- 2. ingest and feature assembly ---------------------------------------
origin = sr.DEFAULT_ORIGIN
hours = 21 * 24
geometry = {"cbd": [153.026, -27.468], "ring_radii": [1500.0, 5000.0, 12000.0]}
(stops, amenities, windows, calendar, readings, counts, kept,
 report) = sr.load_corpus(paths, origin, hours, geometry)
print(f"kept {report.kept} trips ({report.dropped()} dropped in cleaning)")

panel, weather, breaks = sr.assemble_panel(stops, amenities, windows,
                                           calendar, readings, counts, kept,
                                           origin, hours)
print(f"panel: {len(panel)} rows x {len(panel.schema)} features "
      f"(first week is lag warmup)")
print(f"journey-time class breaks at {[round(b) for b in breaks.breaks]} min")

# --- 3. train on a random 80/20 split -------------------------------------
x = panel.matrix()
y = panel.targets().astype(float)
train_idx, test_idx = sr.split(panel, fraction=0.2, seed=0)

hp = sr.xgboost_defaults()
model = sr.fit_gbdt(x[train_idx], y[train_idx], hp, seed=0,
                    feature_names=panel.schema)
pred = sr.predict(model, x[test_idx])

# --- 4. score against two things anyone could do without a model ----------
rmse = float(np.sqrt(np.mean((pred - y[test_idx]) ** 2)))
persistence = x[test_idx, panel.schema.index("hour_lag")]
seasonal = x[test_idx, panel.schema.index("week_lag")]
p_rmse = float(np.sqrt(np.mean((persistence - y[test_idx]) ** 2)))
s_rmse = float(np.sqrt(np.mean((seasonal - y[test_idx]) ** 2)))

print(f"\nheld-out RMSE           {rmse:6.3f}")
print(f"persistence baseline    {p_rmse:6.3f}  (predict last hour's count)")
print(f"seasonal-naive baseline {s_rmse:6.3f}  (predict last week's count)")

imp = sr.variable_importance(model)
top = np.argsort(-imp)[:6]
print("\ntop split-gain features:")
for i in top:
    print(f"  {panel.schema[i]:<16} {imp[i]:.3f}")
