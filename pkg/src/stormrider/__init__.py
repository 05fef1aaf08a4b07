"""Stop-hour transit ridership forecasting from smart-card and weather data.

The package covers the full workflow: ingest raw tap-on and weather
files (or generate a statistically similar synthetic corpus), assemble
the 43-feature stop-hour panel, fit random-forest and gradient-boosted
models with squared or Tweedie objectives, and evaluate errors over
time, space and extreme-weather episodes.
"""

from .evaluation import (ErrorSurfaceGrid, ExtremeWeatherMask, MetricsReport,
                         PredictionRecord, error_vs_weather, extreme_mask,
                         extreme_stop_error, extreme_vs_normal_diff,
                         hourly_mean_error, idw_surface, metrics,
                         predictions_from_arrays, stop_mean_error)
from .features import (AMENITY_CATEGORIES, PANEL_SCHEMA, JenksBreaks, Panel,
                       StopRecord, amenity_density, apparent_temperature,
                       assign_rings, build_panel, haversine, jenks_breaks,
                       journey_time_shares)
from .ingest import (CalendarConfig, DropReport, HourlyWeather, ServiceWindow,
                     StopHourCounts, TripRecord, WeatherReading,
                     aggregate_ridership, clean_trips, hourly_weather,
                     parse_amenities, parse_calendar, parse_service_windows,
                     parse_stops, parse_trips, parse_weather)
from .learn import (Hyperparameters, Tree, TreeEnsemble, fit_gbdt,
                    fit_random_forest, kfold_cv, load_model, predict,
                    random_forest_defaults, random_grid_search, raw_score,
                    save_model, tweedie_defaults, variable_importance,
                    xgboost_defaults)
from .pipeline import (PipelineError, RunConfig, assemble_panel, load_config,
                       load_corpus, read_counts_csv, read_errors_csv,
                       read_panel_csv, run, split, write_counts_csv,
                       write_errors_csv, write_panel_csv, write_surface_csv)
from .synth import (DEFAULT_ORIGIN, CitySpec, ClimateSpec, DemandSpec,
                    expected_mean_matrix, gen_calendar, gen_city,
                    gen_ridership, gen_weather, synth_corpus)

__version__ = "0.1.0"

__all__ = [
    "AMENITY_CATEGORIES", "DEFAULT_ORIGIN", "CalendarConfig", "CitySpec",
    "ClimateSpec",
    "DemandSpec", "DropReport", "ErrorSurfaceGrid", "ExtremeWeatherMask",
    "HourlyWeather", "Hyperparameters", "JenksBreaks", "MetricsReport",
    "PANEL_SCHEMA", "Panel", "PipelineError", "PredictionRecord", "RunConfig",
    "ServiceWindow", "StopHourCounts", "StopRecord", "Tree", "TreeEnsemble",
    "TripRecord", "WeatherReading", "aggregate_ridership", "amenity_density",
    "apparent_temperature", "assemble_panel", "assign_rings", "build_panel",
    "clean_trips", "error_vs_weather", "expected_mean_matrix", "extreme_mask",
    "extreme_stop_error", "extreme_vs_normal_diff", "fit_gbdt",
    "fit_random_forest", "gen_calendar", "gen_city", "gen_ridership",
    "gen_weather", "haversine", "hourly_mean_error", "hourly_weather",
    "idw_surface", "jenks_breaks", "journey_time_shares", "kfold_cv",
    "load_config", "load_corpus", "load_model", "metrics", "parse_amenities",
    "parse_calendar", "parse_service_windows", "parse_stops", "parse_trips",
    "parse_weather", "predict", "predictions_from_arrays",
    "random_forest_defaults",
    "random_grid_search", "raw_score", "read_counts_csv", "read_errors_csv",
    "read_panel_csv", "run", "save_model", "split", "stop_mean_error",
    "synth_corpus", "tweedie_defaults", "variable_importance",
    "write_counts_csv", "write_errors_csv", "write_panel_csv",
    "write_surface_csv", "xgboost_defaults",
]
