"""What happens to forecasts when the weather turns violent.

Trains the squared-loss and Tweedie boosters on the same 30-day synthetic
corpus, then compares their held-out errors three ways:

  1. which hours count as extreme, per weather variable;
  2. mean error as rainfall climbs;
  3. the residual spread during rainy hours (> 3 mm), where the
     heavy-tailed Tweedie objective is supposed to earn its keep.

    python3 demos/extreme_weather.py
"""

import dataclasses
import tempfile

import numpy as np

import stormrider as sr

DAYS, STOPS, SEED = 30, 60, 4

print(f"building a {DAYS}-day, {STOPS}-stop corpus (seed {SEED})...")
paths = sr.synth_corpus(tempfile.mkdtemp(), days=DAYS, n_stops=STOPS,
                        seed=SEED)
origin, hours = sr.DEFAULT_ORIGIN, DAYS * 24
geometry = {"cbd": [153.026, -27.468], "ring_radii": [1500.0, 5000.0, 12000.0]}
corpus = sr.load_corpus(paths, origin, hours, geometry)
stops, amenities, windows, calendar, readings, counts, kept, _ = corpus
panel, weather, _ = sr.assemble_panel(stops, amenities, windows, calendar,
                                      readings, counts, kept, origin, hours)

x = panel.matrix()
y = panel.targets().astype(float)
train_idx, test_idx = sr.split(panel, fraction=0.2, seed=0)
n_ph = panel.n_panel_hours
test_stop = np.asarray(panel.stop_ids)[test_idx // n_ph]
test_hour = panel.first_hour + (test_idx % n_ph)

# --- 1. the extreme-hours census ------------------------------------------
mask = sr.extreme_mask(weather)
print(f"\nextreme hours out of {hours} (band = mean +- 1.5 sigma, "
      "rain > 3 mm):")
for var in ("temperature", "humidity", "wind_speed", "apparent_temp",
            "rainfall"):
    n = int(mask.flags[var].sum())
    lo, hi = mask.band.get(var, (float("nan"), float("nan")))
    extra = f"band ({lo:.1f}, {hi:.1f})" if var != "rainfall" else "threshold 3 mm"
    print(f"  {var:<14} {n:4d}   {extra}")

# --- 2. two boosters, same data -------------------------------------------
models = {}
for name, hp in (("squared", dataclasses.replace(sr.xgboost_defaults())),
                 ("tweedie", dataclasses.replace(sr.tweedie_defaults(),
                                                 n_trees=200))):
    print(f"\ntraining {name} booster ({hp.n_trees} rounds)...")
    model = sr.fit_gbdt(x[train_idx], y[train_idx], hp, seed=0,
                        feature_names=panel.schema)
    pred = sr.predict(model, x[test_idx])
    rmse = float(np.sqrt(np.mean((pred - y[test_idx]) ** 2)))
    print(f"  held-out RMSE {rmse:.3f}")
    models[name] = sr.predictions_from_arrays(test_stop, test_hour,
                                              y[test_idx], pred)

# --- 3. error vs rainfall -------------------------------------------------
print("\nmean residual by rainfall bin (tweedie):")
for centre, mean, n in sr.error_vs_weather(models["tweedie"], weather,
                                           "rainfall", n_bins=6):
    bar = "" if n == 0 else "#" * max(1, min(40, n // 50))
    mean_s = "   --" if n == 0 else f"{mean:+5.2f}"
    print(f"  {centre:6.2f} mm  {mean_s}  ({n:5d} rows) {bar}")

# --- 4. residual spread during rain ---------------------------------------
rain_hours = set(np.flatnonzero(mask.flags["rainfall"]).tolist())
print(f"\nresidual spread over {len(rain_hours)} rainy hours:")
for name, records in models.items():
    res = [r.residual for r in records if r.hour_index in rain_hours]
    if not res:
        print(f"  {name:<8} no held-out rows in rainy hours")
        continue
    print(f"  {name:<8} range {max(res) - min(res):7.2f}   "
          f"[{min(res):+.2f}, {max(res):+.2f}] over {len(res)} rows")
print("\nA tighter rainy-hour range for the Tweedie booster is the expected"
      "\noutcome: its deviance keeps gradients finite as counts pile up in"
      "\nthe zero-heavy, burst-prone hours that rain produces.")
