import csv
import json
import math

import numpy as np
import pytest

from vsaradar.cli import (
    EXIT_CONFIG, EXIT_DATA, EXIT_IO, EXIT_OK, SWEEP_COLUMNS, TRAJECTORY_COLUMNS, main,
)
from vsaradar.config import config_from_document
from vsaradar.geometry import RoomBounds
from vsaradar.scenario import default_radars
from vsaradar.tracking import VsaParams, vsa_grid


@pytest.fixture(autouse=True)
def _pinned_clock(monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    monkeypatch.delenv("VSA_RADAR_JOBS", raising=False)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _cfg(tmp_path, doc):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(doc))
    return str(p)


def test_simulate_rhombus(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--preset", "table1-rhombus", "--out", str(out)]) == EXIT_OK
    text = (out / "trajectory.csv").read_text()
    assert text.endswith("\n") and "\r" not in text
    rows = _rows(out / "trajectory.csv")
    assert list(rows[0]) == TRAJECTORY_COLUMNS
    cfg = config_from_document(json.loads((out / "manifest.json").read_text())["config"])
    from vsaradar.montecarlo import simulate_measurements
    times = simulate_measurements(cfg, np.random.default_rng(0))[0]
    assert len(rows) == len(times)
    for r in rows:
        for col in ("err_ekf_m", "err_vsa_m"):
            assert r[col] == "" or float(r[col]) >= 0.0
    man = json.loads((out / "manifest.json").read_text())
    assert man["start_timestamp"] == "2023-11-14T22:13:20Z"
    assert [o["path"] for o in man["outputs"]] == ["trajectory.csv"]


def test_simulate_noiseless_error_within_cell_diagonal(tmp_path):
    doc = {"scenario": {"preset": "rhombus", "radar2_offset": 0.0},
           "noise": {"snr_db": "inf", "outlier_prob": 0.0}}
    out = tmp_path / "sim"
    assert main(["simulate", "--config", _cfg(tmp_path, doc), "--out", str(out)]) == EXIT_OK
    rp = [r.pos for r in default_radars()]
    for r in _rows(out / "trajectory.csv"):
        p = np.array([float(r["truth_x_m"]), float(r["truth_y_m"])])
        diag = vsa_grid([np.hypot(*(p - q)) for q in rp], rp, VsaParams(), RoomBounds()).cell_diagonal
        assert float(r["err_vsa_m"]) <= diag


def test_simulate_is_byte_identical(tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    for d, seed in ((a, "7"), (b, "7"), (c, "8")):
        assert main(["simulate", "--preset", "fig5", "--seed", seed, "--out", str(d)]) == EXIT_OK
    assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()
    assert (a / "manifest.json").read_bytes() == (b / "manifest.json").read_bytes()
    assert (a / "trajectory.csv").read_bytes() != (c / "trajectory.csv").read_bytes()
    assert json.loads((a / "manifest.json").read_text())["base_seed"] == 7


def test_montecarlo_fig6a_row_count(tmp_path):
    out = tmp_path / "mc"
    assert main(["montecarlo", "--preset", "fig6a", "--trials", "1", "--out", str(out)]) == EXIT_OK
    rows = _rows(out / "sweep_snr_db.csv")
    assert list(rows[0]) == SWEEP_COLUMNS
    assert len(rows) == 10
    assert [float(r["axis_value"]) for r in rows[::2]] == [0, 5, 10, 15, 20]
    assert {r["method"] for r in rows} == {"ekf_baseline", "vsa"}


def test_montecarlo_fig5_summary_and_cdf(tmp_path):
    out = tmp_path / "mc"
    assert main(["montecarlo", "--preset", "fig5", "--trials", "2", "--emit-cdf", "--out", str(out)]) == EXIT_OK
    rows = _rows(out / "sweep_none.csv")
    assert [r["method"] for r in rows] == ["trilateration", "vsa"]
    assert all(float(r["mean_rmse_m"]) > 0 for r in rows)
    cdf = _rows(out / "cdf_none.csv")
    assert len(cdf) == 200
    last = [r for r in cdf if r["method"] == "vsa"][-1]
    assert float(last["cdf"]) == 1.0
    man = json.loads((out / "manifest.json").read_text())
    assert [o["path"] for o in man["outputs"]] == ["sweep_none.csv", "cdf_none.csv"]


def test_montecarlo_worker_count_and_env(tmp_path, monkeypatch):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["montecarlo", "--preset", "fig5", "--trials", "3", "--emit-cdf", "--out", str(a)]) == EXIT_OK
    monkeypatch.setenv("VSA_RADAR_JOBS", "2")
    assert main(["montecarlo", "--preset", "fig5", "--trials", "3", "--emit-cdf", "--out", str(b)]) == EXIT_OK
    ra, rb = _rows(a / "sweep_none.csv"), _rows(b / "sweep_none.csv")
    for x, y in zip(ra, rb):
        x.pop("mean_wall_time_s"), y.pop("mean_wall_time_s")
    assert ra == rb
    assert (a / "cdf_none.csv").read_bytes() == (b / "cdf_none.csv").read_bytes()
    monkeypatch.setenv("VSA_RADAR_JOBS", "many")
    assert main(["montecarlo", "--preset", "fig5", "--trials", "1", "--out", str(b)]) == EXIT_CONFIG


def test_report_table_layout(tmp_path, capsys):
    dirs = []
    for shape in ("rhombus", "circle", "star"):
        d = tmp_path / shape
        assert main(["montecarlo", "--preset", f"table1-{shape}", "--trials", "1", "--out", str(d)]) == EXIT_OK
        dirs.append(str(d))
    capsys.readouterr()
    assert main(["report", *dirs]) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].split()[-3:] == ["rhombus", "circle", "star"]
    assert [ln.split()[0] for ln in lines[1:]] == ["EKF", "Proposed"]
    assert all(len(ln.split()) == 4 for ln in lines[1:])


def test_report_missing_or_tampered_manifest(tmp_path):
    assert main(["report", str(tmp_path)]) == EXIT_DATA
    d = tmp_path / "run"
    assert main(["montecarlo", "--preset", "fig5", "--trials", "1", "--out", str(d)]) == EXIT_OK
    assert main(["report", str(d)]) == EXIT_OK
    f = d / "sweep_none.csv"
    f.write_text(f.read_text().replace("vsa", "VSA"))
    assert main(["report", str(d)]) == EXIT_DATA


def test_exit_codes_for_bad_config_and_io(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"scenario": "fig5", "noise": {"outlier_prob": 1.5}}')
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    bad.write_text("{not json")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    empty = _cfg(tmp_path, {"scenario": "fig5", "sweep": {"axis": "snr_db", "values": []}})
    assert main(["montecarlo", "--config", empty, "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert main(["simulate", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == EXIT_IO
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["simulate", "--preset", "fig5", "--out", str(blocker)]) == EXIT_IO


def test_data_error_for_too_short_scenario(tmp_path):
    doc = {"scenario": {"preset": "fig5", "duration": 0.01}}
    assert main(["simulate", "--config", _cfg(tmp_path, doc), "--out", str(tmp_path / "o")]) == EXIT_DATA


def test_csv_reparses_as_numbers(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--preset", "fig5", "--out", str(out)]) == EXIT_OK
    for r in _rows(out / "trajectory.csv"):
        for v in r.values():
            assert v == "" or math.isfinite(float(v))
