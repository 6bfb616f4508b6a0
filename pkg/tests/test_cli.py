import csv
import io
import json
import math

import pytest
from click.testing import CliRunner

from orbita.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_levi_civita_scan(runner):
    res = runner.invoke(main, ["scan", "--family", "levi_civita", "--lambda", "0.1",
                               "--L-min", "0.5", "--L-max", "2", "--nL", "10", "--nH", "10"])
    assert res.exit_code == 0, res.output
    rows = _rows(res.stdout)
    assert len(rows) == 100
    assert list(rows[0]) == ["H", "L", "T", "Theta", "dT_dH", "dT_dL", "dTheta_dH", "dTheta_dL", "D",
                             "admissible"]
    assert all(float(r["D"]) < 0 for r in rows)
    assert all(r["admissible"] == "true" for r in rows)
    # Sorted by L index, then H index.
    keys = [(float(r["L"]), float(r["H"])) for r in rows]
    assert keys == sorted(keys)


def test_scan_uses_17_digits(runner):
    res = runner.invoke(main, ["scan", "--family", "kepler", "--L", "1", "--nH", "1"])
    assert res.exit_code == 0, res.output
    row = _rows(res.stdout)[0]
    assert float(row["T"]) == pytest.approx(2 * math.pi / (-2 * float(row["H"])) ** 1.5, rel=1e-10)
    assert len(row["T"].replace(".", "").lstrip("0")) >= 15


def test_homogeneous_scan_sign(runner):
    res = runner.invoke(main, ["scan", "--alpha", "1.5", "--L-min", "0.5", "--L-max", "1.5",
                               "--nL", "3", "--nH", "4"])
    assert res.exit_code == 0, res.output
    rows = _rows(res.stdout)
    assert len(rows) == 12
    assert all(float(r["D"]) < 0 for r in rows)


def test_threads_give_identical_output(runner, monkeypatch):
    args = ["scan", "--family", "levi_civita", "--lambda", "0.1", "--L-min", "1", "--L-max", "2",
            "--nL", "2", "--nH", "3"]
    serial = runner.invoke(main, args).stdout
    parallel = runner.invoke(main, ["--threads", "3", *args]).stdout
    monkeypatch.setenv("ORBITA_THREADS", "2")
    env = runner.invoke(main, ["--threads", "1", *args]).stdout
    assert serial == parallel == env


def test_bad_thread_env(runner, monkeypatch):
    monkeypatch.setenv("ORBITA_THREADS", "many")
    res = runner.invoke(main, ["scan", "--family", "kepler", "--L", "1", "--nH", "1"])
    assert res.exit_code == 2


def test_lennard_jones_empty_window(runner):
    res = runner.invoke(main, ["scan", "--family", "lennard_jones", "--varsigma", "1", "--sigma", "1",
                               "--L", "3", "--nH", "5"])
    assert res.exit_code == 3


def test_scan_partial_window_flags_cells(runner):
    res = runner.invoke(main, ["scan", "--family", "kepler", "--L", "1", "--H-min", "-0.45",
                               "--H-max", "0.5", "--nH", "4"])
    assert res.exit_code == 0
    assert len(_rows(res.stdout)) == 2
    assert "inadmissible" in res.stderr


@pytest.mark.parametrize("args", [
    ["scan", "--family", "kepler", "--L", "1", "--nH", "0"],
    ["scan", "--family", "kepler"],
    ["scan", "--family", "kepler", "--L-min", "2", "--L-max", "1"],
    ["scan", "--L", "1"],
    ["find-torus", "--alpha", "0.5", "--n", "0", "--k", "3", "--tau", "1"],
])
def test_config_errors(runner, args):
    assert runner.invoke(main, args).exit_code == 2


def test_scan_from_config(runner, tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text('[potential]\nfamily = "harmonic"\nkappa = 1.0\n\n[grid]\nL_min = 1.0\nL_max = 1.0\nnL = 1\n'
                   'H_min = 1.5\nH_max = 3.0\nnH = 3\n')
    res = runner.invoke(main, ["scan", "--config", str(cfg)])
    assert res.exit_code == 0, res.output
    rows = _rows(res.stdout)
    assert [float(r["T"]) for r in rows] == pytest.approx([math.pi] * 3, rel=1e-9)


@pytest.fixture(scope="module")
def torus_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("tori") / "torus.json"
    res = CliRunner().invoke(main, ["find-torus", "--alpha", "0.5", "--n", "4", "--k", "3",
                                    "--tau", "6.283185307", "--out", str(path)])
    assert res.exit_code == 0, res.output
    return path


def test_find_torus_json(torus_file):
    data = json.loads(torus_file.read_text())
    assert (data["n"], data["k"]) == (4, 3)
    assert max(data["residuals"].values()) < 1e-10
    assert data["T"] == pytest.approx(6.283185307 / 4, rel=1e-12)


def test_find_torus_inadmissible_ratio(runner):
    res = runner.invoke(main, ["find-torus", "--alpha", "0.5", "--n", "2", "--k", "1", "--tau", "6.28"])
    assert res.exit_code == 3


def test_verify_round_trip(runner, torus_file, tmp_path):
    out = tmp_path / "trajectory.csv"
    res = runner.invoke(main, ["verify", "--torus", str(torus_file), "--csv", str(out)])
    assert res.exit_code == 0, res.output
    report = json.loads(res.stdout)
    assert report["passed"] is True
    assert out.read_text().startswith("t,")


def test_verify_wrong_energy(runner, torus_file, tmp_path):
    data = json.loads(torus_file.read_text())
    data["H"] *= 1.01
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(data))
    assert runner.invoke(main, ["verify", "--torus", str(bad)]).exit_code == 4


def test_verify_rejects_other_json(runner, tmp_path):
    bad = tmp_path / "x.json"
    bad.write_text('{"hello": 1}')
    assert runner.invoke(main, ["verify", "--torus", str(bad)]).exit_code == 2


def test_limits_lennard_jones(runner, tmp_path):
    pot = tmp_path / "lj.toml"
    pot.write_text('family = "lennard_jones"\nvarsigma = 1.0\nsigma = 1.0\n')
    res = runner.invoke(main, ["limits", "--potential", str(pot), "--L", "0.5"])
    assert res.exit_code == 0, res.output
    data = json.loads(res.stdout)
    s = data["limit_signs"]
    assert s[:3] == [1, -1, 1] and s[3] >= 0


def test_potential_info(runner):
    res = runner.invoke(main, ["potential-info", "--family", "kepler", "--L", "1"])
    assert res.exit_code == 0, res.output
    info = json.loads(res.stdout)
    assert info["r0"] == pytest.approx(1.0)
    assert info["H_min"] == pytest.approx(-0.5)
    assert info["H_max"] == 0.0
    assert info["monotonicity"]["schaaf_i"] is True


def test_continue_command(runner, tmp_path):
    path = tmp_path / "lc.json"
    res = runner.invoke(main, ["find-torus", "--family", "levi_civita", "--lambda", "0.1", "--n", "2", "--k", "3",
                               "--tau", "1", "--seed-H", str(-(2 * math.pi / math.sqrt(2)) ** (2 / 3)),
                               "--seed-L", "0.6", "--out", str(path)])
    assert res.exit_code == 0, res.output
    res = runner.invoke(main, ["continue", "--torus", str(path), "--epsilon", "1e-3"])
    assert res.exit_code == 0, res.output
    records = json.loads(res.stdout)
    assert records and all(r["residual"] < 1e-9 and r["winding_k"] == 3 for r in records)
