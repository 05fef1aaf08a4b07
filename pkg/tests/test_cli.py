"""Smoke tests for every CLI subcommand on a small generated corpus."""

import json
import subprocess
import sys

import pytest

from stormrider.cli import build_parser, main

ORIGIN = "2019-03-04T00:00:00"  # synth corpus origin, a Monday


@pytest.fixture(scope="module")
def art(tmp_path_factory):
    """Chain the subcommands once; later tests assert on the artifacts."""
    root = tmp_path_factory.mktemp("cli")
    corpus = root / "corpus"
    assert main(["synth", "--out", str(corpus), "--days", "9",
                 "--stops", "8"]) == 0

    base = ["--trips", str(corpus / "trips.csv"),
            "--weather", str(corpus / "weather.csv"),
            "--stops", str(corpus / "stops.csv"),
            "--amenities", str(corpus / "amenities.csv"),
            "--windows", str(corpus / "service_windows.csv"),
            "--calendar", str(corpus / "calendar.toml"),
            "--origin", ORIGIN, "--hours", "216"]

    ingested = root / "ingested"
    assert main(["ingest", *base, "--out", str(ingested)]) == 0

    panel = root / "panel.csv"
    assert main(["features", *base, "--out", str(panel)]) == 0

    params = root / "params.json"
    params.write_text(json.dumps({"n_trees": 10}))
    model = root / "model.srm"
    assert main(["train", "--panel", str(panel), "--algorithm", "xgboost",
                 "--params", str(params), "--out", str(model)]) == 0

    metrics = root / "metrics.json"
    errors = root / "errors.csv"
    assert main(["evaluate", "--model", str(model), "--panel", str(panel),
                 "--out", str(metrics), "--errors", str(errors)]) == 0

    return {"root": root, "corpus": corpus, "base": base, "panel": panel,
            "model": model, "metrics": metrics, "errors": errors,
            "ingested": ingested}


class TestCorpusCommands:
    def test_synth_files(self, art):
        names = {p.name for p in art["corpus"].iterdir()}
        assert {"trips.csv", "weather.csv", "stops.csv", "amenities.csv",
                "service_windows.csv", "calendar.toml"} <= names

    def test_ingest_outputs(self, art):
        out = art["ingested"]
        assert (out / "counts.csv").exists()
        assert (out / "hourly_weather.csv").exists()
        report = json.loads((out / "drop_report.json").read_text())
        assert report["kept"] > 0

    def test_features_output(self, art):
        header = art["panel"].read_text().split("\n", 1)[0]
        cols = header.split(",")
        assert cols[0] == "stop_id" and cols[-1] == "target"
        assert len(cols) == 2 + 43 + 1
        schema = json.loads(
            (art["root"] / "panel_schema.json").read_text())
        assert schema["warmup"] == 168


class TestModelCommands:
    def test_train_evaluate(self, art):
        assert art["model"].exists()
        rep = json.loads(art["metrics"].read_text())
        assert rep["rmse"] >= 0 and rep["n_rows"] == 8 * 48
        first = art["errors"].read_text().splitlines()[0]
        assert first == "stop_id,hour_index,observed,predicted,residual"

    def test_importance(self, art, capsys):
        out = art["root"] / "importance.csv"
        assert main(["importance", "--model", str(art["model"]),
                     "--out", str(out)]) == 0
        assert out.read_text().startswith("feature,score\n")
        assert "top features:" in capsys.readouterr().out

    def test_tune(self, art):
        space = art["root"] / "space.json"
        space.write_text(json.dumps({"max_depth": [2, 3]}))
        out = art["root"] / "tuning.json"
        assert main(["tune", "--panel", str(art["panel"]),
                     "--algorithm", "xgboost", "--space", str(space),
                     "--budget", "2", "--folds", "3",
                     "--out", str(out)]) == 0
        best = json.loads(out.read_text())["best"]
        assert best["max_depth"] in (2, 3)

    def test_surface(self, art):
        out = art["root"] / "surface.csv"
        assert main(["surface", "--errors", str(art["errors"]),
                     "--stops", str(art["corpus"] / "stops.csv"),
                     "--grid", "6x5", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert "cols 6 rows 5" in lines[0]
        assert len(lines) == 2 + 30

    def test_extremes(self, art, capsys):
        out = art["root"] / "extremes"
        assert main(["extremes",
                     "--weather", str(art["corpus"] / "weather.csv"),
                     "--origin", ORIGIN, "--hours", "216",
                     "--errors", str(art["errors"]),
                     "--variable", "temperature",
                     "--counts", str(art["ingested"] / "counts.csv"),
                     "--out", str(out)]) == 0
        assert (out / "extreme_error_temperature.csv").exists()
        assert (out / "observed_diff_temperature.csv").exists()
        assert "extreme hours" in capsys.readouterr().out


class TestRunCommand:
    def test_full_run(self, tmp_path, capsys):
        out = tmp_path / "run"
        cfg = {"out_dir": str(out),
               "synth": {"days": 8, "stops": 12, "seed": 2},
               "algorithms": ["xgboost"],
               "params": {"xgboost": {"n_trees": 10}},
               "surfaces": {"grid": [8, 8], "filters": ["all"]}}
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        assert main(["--config", str(cfg_path), "--seed", "4", "run"]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["status"] == "ok"
        assert manifest["config"]["seed"] == 4
        assert "run ok" in capsys.readouterr().out

    def test_run_needs_config(self):
        with pytest.raises(SystemExit):
            main(["run"])


class TestErrorHandling:
    def test_missing_file_is_exit_1(self, tmp_path, capsys):
        assert main(["importance", "--model", str(tmp_path / "nope.srm"),
                     "--out", str(tmp_path / "imp.csv")]) == 1
        assert "error:" in capsys.readouterr().err

    def test_bad_algorithm_rejected(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["train", "--panel", "p",
                                       "--algorithm", "lightgbm",
                                       "--out", "m"])

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "stormrider", "--help"],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert "synth" in proc.stdout and "importance" in proc.stdout

    def test_console_script(self):
        proc = subprocess.run(["stormrider", "--help"],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert "ridership" in proc.stdout
