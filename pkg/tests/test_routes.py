import json
from pathlib import Path

from app.formats import write_cloud


def test_index_lists_finished_runs(app, client, runner, tmp_path, lattice_line):
    assert client.get("/").get_json() == {"runs": []}
    path = write_cloud(lattice_line, tmp_path / "line.csv")
    runner.invoke(args=["detect", str(path), "--points", "500", "--r-max", "0.5", "--v-min", "50", "--window", "5",
                        "--name", "first"])
    runs = client.get("/").get_json()["runs"]
    assert runs == [{"name": "first", "subcommand": "detect", "exit_code": 0, "singular_points": 0}]


def test_run_report_and_missing_runs(app, client, runner, tmp_path, lattice_line):
    path = write_cloud(lattice_line, tmp_path / "line.csv")
    runner.invoke(args=["detect", str(path), "--points", "500", "--r-max", "0.5", "--v-min", "50", "--window", "5",
                        "--name", "shown"])
    response = client.get("/runs/shown")
    assert response.status_code == 200
    assert response.get_json()["config"]["name"] == "shown"
    assert client.get("/runs/absent").status_code == 404
    assert client.get("/runs/..%2F..%2Fetc").status_code == 404


def test_unreadable_reports_are_skipped(app, client):
    broken = Path(app.config["OUTPUT_DIR"]) / "old"
    broken.mkdir(parents=True)
    (broken / "report.json").write_text(json.dumps({"schema_version": 0}), encoding="utf-8")
    assert client.get("/").get_json() == {"runs": []}
    assert client.get("/runs/old").status_code == 404


def test_app_config_has_no_session_secret(app):
    assert app.config["TESTING"] is True
    assert app.config["LOG_LEVEL"] == "WARNING"
    assert app.config["SECRET_KEY"] is None
