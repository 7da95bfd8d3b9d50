import json
import subprocess
import sys

import pytest

from hydrodispatch.cli import main


def run_cli(*args):
    return main(list(args))


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """synth -> ingest -> efficiency -> train, shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    db = root / "t.db"
    model = root / "up.json"
    assert run_cli("synth", "--seed", "42", "--hours", "4000", "--lag", "2",
                   "--db", str(db)) == 0
    assert run_cli("efficiency", "--db", str(db), "--unit", "40001-U1",
                   "--out", str(root / "curve.csv"),
                   "--plot", str(root / "curve.svg")) == 0
    assert run_cli("train", "--db", str(db), "--plant", "UP", "--seed", "42",
                   "--epochs", "40", "--out", str(model)) == 0
    return root, db, model


class TestSynthIngestLag:
    def test_synth_csvs_round_trip_through_ingest(self, tmp_path):
        out = tmp_path / "csvs"
        db = tmp_path / "t.db"
        assert run_cli("synth", "--seed", "7", "--hours", "1500", "--lag", "2",
                       "--out-dir", str(out)) == 0
        assert run_cli("ingest", "--db", str(db),
                       "--static-plant-csv", str(out / "static_plants.csv"),
                       "--static-unit-csv", str(out / "static_units.csv"),
                       "--plant-csv", str(out / "plant_data.csv"),
                       "--unit-csv", str(out / "unit_data.csv")) == 0

    def test_lag_reports_constructed_shift(self, pipeline, capsys):
        _, db, _ = pipeline
        assert run_cli("lag", "--db", str(db), "--up", "UP", "--down", "DOWN",
                       "--season", "winter", "--max-lag", "12") == 0
        out = capsys.readouterr().out
        assert "best lag 2 h" in out
        assert "lag_hours,correlation" in out

    def test_lag_json_report(self, pipeline, tmp_path):
        _, db, _ = pipeline
        report = tmp_path / "lag.json"
        assert run_cli("lag", "--db", str(db), "--up", "UP", "--down", "DOWN",
                       "--json", str(report)) == 0
        data = json.loads(report.read_text())
        assert all(entry["best_lag"] == 2 for entry in data)


class TestDispatchExport:
    def test_dispatch_case_layout(self, pipeline, tmp_path):
        _, db, model = pipeline
        case = tmp_path / "case.csv"
        manifest = tmp_path / "run.json"
        assert run_cli("dispatch", "--db", str(db), "--plant", "UP",
                       "--scenario", "hist:2020-02-01T00:00..2020-03-01T00:00",
                       "--model", str(model), "--out", str(case),
                       "--manifest", str(manifest),
                       "--plot", str(tmp_path / "case.svg")) == 0
        lines = case.read_text().splitlines()
        assert lines[0] == ("Project,Unit ID,Pgen (MW),Pmax (MW),Head (ft),"
                            "Pgen calculated (MW),Pmax available (MW)")
        assert len(lines) == 11  # header + 10 upstream units
        assert (tmp_path / "case.svg").exists()

    def test_dispatch_deterministic_bytes(self, pipeline, tmp_path):
        _, db, model = pipeline
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for path in (a, b):
            assert run_cli("dispatch", "--db", str(db), "--plant", "UP",
                           "--scenario", "hist:2020-02-01T00:00..2020-03-01T00:00",
                           "--model", str(model), "--seed", "3",
                           "--out", str(path)) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_models_dir_fallback(self, pipeline, tmp_path):
        _, db, model = pipeline
        models_dir = tmp_path / "models"
        models_dir.mkdir()
        (models_dir / "UP.json").write_bytes(model.read_bytes())
        case = tmp_path / "case.csv"
        assert run_cli("dispatch", "--db", str(db), "--plant", "UP",
                       "--scenario", "hist:2020-02-01T00:00..2020-03-01T00:00",
                       "--models-dir", str(models_dir), "--out", str(case)) == 0
        assert case.exists()

    def test_missing_model_is_parsable_error(self, pipeline, tmp_path, capsys):
        _, db, _ = pipeline
        code = run_cli("dispatch", "--db", str(db), "--plant", "UP",
                       "--scenario", "dry:summer",
                       "--models-dir", str(tmp_path / "nowhere"),
                       "--out", str(tmp_path / "x.csv"))
        assert code == 1
        assert capsys.readouterr().err.startswith("error: not_found:")

    def test_export_from_manifest_matches(self, pipeline, tmp_path):
        _, db, model = pipeline
        case = tmp_path / "case.csv"
        manifest = tmp_path / "run.json"
        assert run_cli("dispatch", "--db", str(db), "--plant", "UP",
                       "--scenario", "hist:2020-02-01T00:00..2020-03-01T00:00",
                       "--model", str(model), "--out", str(case),
                       "--manifest", str(manifest)) == 0
        re_export = tmp_path / "again.csv"
        assert run_cli("export", "--manifest", str(manifest),
                       "--out", str(re_export)) == 0
        assert case.read_bytes() == re_export.read_bytes()


class TestErrors:
    def test_missing_required_flag_exits_2(self):
        proc = subprocess.run(
            [sys.executable, "-m", "hydrodispatch.cli", "train"],
            capture_output=True, text=True)
        assert proc.returncode == 2
        assert "usage" in proc.stderr.lower()

    def test_unknown_flag_exits_2(self):
        proc = subprocess.run(
            [sys.executable, "-m", "hydrodispatch.cli", "synth", "--seed", "1",
             "--bogus"],
            capture_output=True, text=True)
        assert proc.returncode == 2

    def test_domain_error_exits_1_with_parsable_line(self, tmp_path, capsys):
        db = tmp_path / "empty.db"
        code = run_cli("lag", "--db", str(db), "--up", "UP", "--down", "DOWN")
        assert code == 1
        err = capsys.readouterr().err
        assert err.startswith("error: not_found:")

    def test_bad_scenario_exits_1(self, pipeline, tmp_path, capsys):
        _, db, model = pipeline
        code = run_cli("dispatch", "--db", str(db), "--plant", "UP",
                       "--scenario", "sideways", "--model", str(model),
                       "--out", str(tmp_path / "x.csv"))
        assert code == 1
        assert "error: validation:" in capsys.readouterr().err
