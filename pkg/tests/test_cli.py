import csv
import io
import json
import math
from pathlib import Path

import pytest

from qzeno import cli
from qzeno.experiments import Table, _csv_cell

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

ITANO_SMALL = """
[params]
omega2 = pi/256
omega3 = 50
a3 = 20
[schedule]
tau_p = 2.4
pi_pulse_total = 256
[run]
trajectories = 200
master_seed = 5
n_values = 1, 2, 16, 64
"""


@pytest.fixture
def itano_cfg(tmp_path):
    path = tmp_path / "itano.ini"
    path.write_text(ITANO_SMALL)
    return path


def read_csv(path):
    return list(csv.DictReader(io.StringIO(Path(path).read_text(encoding="utf-8"))))


def test_itano_columns_and_values(itano_cfg, tmp_path):
    out = tmp_path / "t.csv"
    assert cli.main(["itano", "--config", str(itano_cfg), "--out", str(out)]) == 0
    raw = out.read_bytes()
    assert b"\r" not in raw
    rows = {int(r["n"]): r for r in read_csv(out)}
    assert list(rows[1]) == ["n", "proj_dt", "proj_dt_minus_taup", "quantum_jump_mc", "quantum_jump_stderr",
                             "bloch", "note", "config_hash"]
    assert rows[2]["proj_dt"].startswith("0.50000")
    assert float(rows[2]["proj_dt"]) == pytest.approx(0.5, abs=5e-6)
    assert rows[16]["proj_dt_minus_taup"].startswith("0.10029")
    assert "0.00371" in rows[64]["note"]
    assert float(rows[64]["proj_dt"]) == pytest.approx(0.0371186, abs=1e-6)
    assert len({r["config_hash"] for r in rows.values()}) == 1


def test_itano_json_and_threads_are_identical(itano_cfg, tmp_path, monkeypatch):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert cli.main(["itano", "--config", str(itano_cfg), "--format", "json", "--out", str(a), "--threads", "1"]) == 0
    monkeypatch.setenv("QZENO_THREADS", "3")
    monkeypatch.setenv("QZENO_OUT", str(b))
    assert cli.main(["itano", "--config", str(itano_cfg), "--format", "json"]) == 0
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    assert set(doc) == {"config_hash", "rows"}
    assert all(r["config_hash"] == doc["config_hash"] for r in doc["rows"])


def test_seed_override_changes_hash_and_draws(itano_cfg, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    cli.main(["itano", "--config", str(itano_cfg), "--out", str(a)])
    cli.main(["itano", "--config", str(itano_cfg), "--out", str(b), "--seed", "6"])
    ra, rb = read_csv(a), read_csv(b)
    assert ra[0]["config_hash"] != rb[0]["config_hash"]
    assert [r["proj_dt"] for r in ra] == [r["proj_dt"] for r in rb]


def test_periods_ideal_column_equals_gap_at_pi(tmp_path):
    out = tmp_path / "p.json"
    assert cli.main(["periods", "--config", str(CONFIGS / "valid" / "ideal_pi_gap.ini"), "--out", str(out)]) == 0
    rows = json.loads(out.read_text())["rows"]
    summary = [r for r in rows if r["record"] == "summary"]
    assert {r["kind"] for r in summary} == {"light", "dark"}
    for r in summary:
        assert r["ideal"] == 4.0
        assert r["limit"] > 0
    periods = [r for r in rows if r["record"] == "period"]
    assert all(r["duration"] == pytest.approx(r["pulse_count"] * 6.0) for r in periods)


def test_paths_and_eigen_and_bloch_run(tmp_path):
    for sub in ("paths", "eigen", "bloch"):
        out = tmp_path / f"{sub}.csv"
        assert cli.main([sub, "--out", str(out)]) == 0
        assert len(read_csv(out)) > 0
    eig = {r["quantity"]: r for r in read_csv(tmp_path / "eigen.csv")}
    assert float(eig["decay_rate"]["perturbative"]) == pytest.approx(0.004)
    paths = read_csv(tmp_path / "paths.csv")
    assert {r["model"] for r in paths} == {"ideal", "jump"}
    assert {r["level"] for r in paths} <= {"1", "2"}
    bloch = read_csv(tmp_path / "bloch.csv")
    assert max(abs(float(r["trace"]) - 1) for r in bloch) < 1e-9


def test_exit_code_validation(tmp_path, capsys):
    assert cli.main(["eigen", "--config", str(CONFIGS / "invalid" / "zero_pulses.ini")]) == 1
    assert cli.main(["eigen", "--config", str(CONFIGS / "invalid" / "duplicate_key.ini")]) == 1
    assert "line 4" in capsys.readouterr().err


def test_exit_code_io_and_internal(tmp_path, monkeypatch):
    assert cli.main(["eigen", "--config", str(tmp_path / "missing.ini")]) == 2
    assert cli.main(["eigen", "--out", str(tmp_path / "no" / "such" / "dir.csv")]) == 2

    def boom(cfg, threads):
        raise RuntimeError("boom")

    monkeypatch.setattr(cli, "run_experiment", boom)
    assert cli.main(["eigen"]) == 2


def test_unknown_subcommand_exits():
    with pytest.raises(SystemExit):
        cli.main(["spectrum"])


def test_csv_cells():
    assert _csv_cell(0.5) == "0.500000"
    assert _csv_cell(0.10029357) == "0.100294"
    assert _csv_cell(3) == "3"
    assert _csv_cell(None) == ""
    assert _csv_cell('a,"b"') == '"a,""b"""'
    t = Table(["x", "config_hash"], [{"x": math.pi, "config_hash": "h"}], "h")
    assert t.to_csv() == "x,config_hash\n3.14159,h\n"
    assert json.loads(t.to_json())["rows"][0]["x"] == math.pi
