import csv
import json

import pytest

from wdsmpc.cli import main


@pytest.fixture(scope="module")
def scen(tmp_path_factory):
    d = tmp_path_factory.mktemp("scen")
    assert main(["gen-scenario", "default-2tank", "--out", str(d)]) == 0
    return d / "scenario.json"


def read_rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def without_timing(path):
    rows = read_rows(path)
    col = rows[0].index("solve_time")
    return [r[:col] + r[col + 1:] for r in rows]


def test_gen_scenario_is_deterministic(scen, tmp_path):
    assert main(["gen-scenario", "default-2tank", "--out", str(tmp_path)]) == 0
    for name in ("scenario.json", "scenario_demand.csv", "scenario_tariff.csv"):
        assert (tmp_path / name).read_bytes() == (scen.parent / name).read_bytes()


def test_gen_scenario_unknown_template(tmp_path, capsys):
    assert main(["gen-scenario", "ring-main", "--out", str(tmp_path)]) == 1
    assert "default-2tank" in capsys.readouterr().err


def test_validate_ok(scen, capsys):
    assert main(["validate", "--scenario", str(scen)]) == 0
    assert "ok" in capsys.readouterr().out


def test_validate_negative_area(scen, tmp_path, capsys):
    cfg = json.loads(scen.read_text())
    cfg["tanks"][0]["area"] = -1.0
    cfg["series"] = {k: str(scen.parent / v) for k, v in cfg["series"].items()}
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(cfg))
    assert main(["validate", "--scenario", str(bad)]) == 1
    assert "area" in capsys.readouterr().out


def test_validate_malformed_json(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"tanks": [1, 2,, 3]}')
    assert main(["validate", "--scenario", str(bad)]) == 1
    assert "line 1 column" in capsys.readouterr().err


def test_missing_scenario(tmp_path):
    assert main(["simulate", "--scenario", str(tmp_path / "nope.json"), "--out",
                 str(tmp_path)]) == 1


def test_bad_lengths(scen, tmp_path, capsys):
    assert main(["simulate", "--scenario", str(scen), "--lengths", "1,2", "--out",
                 str(tmp_path)]) == 1
    assert "lengths sum 3 ≠ Np 24" in capsys.readouterr().err


def test_unknown_flag():
    assert main(["simulate", "--bogus"]) == 1


def test_simulate_full_72_steps(scen, tmp_path):
    out = tmp_path / "run"
    assert main(["simulate", "--scenario", str(scen), "--mode", "full", "--T", "72",
                 "--out", str(out)]) == 0
    rows = read_rows(out / "log.csv")
    assert len(rows) == 73
    assert all(r[-1] == "converged" for r in rows[1:])
    echo = json.loads((out / "config.json").read_text())
    assert echo["run"]["mode"] == "full" and echo["scenario"]["controller"]["Np"] == 24
    assert (out / "summary.txt").exists()


def test_simulate_idib_is_reproducible(scen, tmp_path):
    for d in ("a", "b"):
        assert main(["simulate", "--scenario", str(scen), "--T", "24",
                     "--out", str(tmp_path / d)]) == 0
    assert without_timing(tmp_path / "a" / "log.csv") == without_timing(tmp_path / "b" / "log.csv")


def test_overrides(scen, tmp_path):
    out = tmp_path / "o"
    assert main(["simulate", "--scenario", str(scen), "--Np", "12", "--lengths", "1,2,3,6",
                 "--T", "4", "--out", str(out)]) == 0
    echo = json.loads((out / "config.json").read_text())
    assert echo["scenario"]["controller"] == {"Np": 12, "lengths": [1, 2, 3, 6]}


def test_compare_outputs(scen, tmp_path):
    assert main(["compare", "--scenario", str(scen), "--T", "24", "--out", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "comparison.csv")
    mape_rows = [r for r in rows if r[0] == "mape_percent"]
    assert [r[1] for r in mape_rows] == ["x1", "x2", "qv1", "qv2", "qp1", "qp2"]
    for name in ("log_full.csv", "log_idib.csv", "solve_times.csv", "comparison.txt"):
        assert (tmp_path / name).exists()


def test_compare_self(scen, tmp_path):
    assert main(["compare", "--scenario", str(scen), "--mode", "full", "--T", "6",
                 "--out", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "comparison.csv")
    assert all(float(r[2]) == 0.0 for r in rows if r[0] == "mape_percent")


def test_module_entry_point(scen):
    import subprocess
    import sys
    res = subprocess.run([sys.executable, "-m", "wdsmpc", "validate", "--scenario", str(scen)],
                         capture_output=True, text=True)
    assert res.returncode == 0
