import csv
import json

import numpy as np
import pytest

from mscrowd import cli
from mscrowd.diagnostics import average_outflow_time
from mscrowd.scenario import preset, serialize
from mscrowd.stepper import CFLViolation


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_run_preset(tmp_path, capsys):
    out = tmp_path / "out"
    code = cli.main(["run", "--preset", "test1", "--override", "populations.0.theta=0.3",
                     "--out", str(out), "--snapshot-every", "20"])
    assert code == 0
    assert (out / "diagnostics.csv").exists()
    assert sorted(out.glob("density_t*.dat")) and sorted(out.glob("agents_t*.dat"))
    man = json.loads((out / "manifest.json").read_text())
    assert man["steps"] == man["dt_count"] == len(rows(out / "diagnostics.csv")) - 2
    assert "theta = 0.3" in man["scenario"]
    assert man["versions"]["mscrowd"] and man["versions"]["numpy"]


def test_rerun_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["run", "--preset", "test4", "--override", "controls.t_final=0.5", "--out", str(a)]) == 0
    assert cli.main(["run", "--preset", "test4", "--override", "controls.t_final=0.5", "--out", str(b),
                     "--threads", "3"]) == 0
    assert (a / "diagnostics.csv").read_bytes() == (b / "diagnostics.csv").read_bytes()


def test_scenario_file(tmp_path):
    path = tmp_path / "s.ini"
    path.write_text(serialize(preset("test1")).replace("t_final = 1.0", "t_final = 0.2"))
    assert cli.main(["run", "--scenario", str(path), "--out", str(tmp_path / "o")]) == 0


@pytest.mark.parametrize("argv", [
    ["run", "--preset", "nope", "--out", "x"],
    ["run", "--preset", "test1", "--override", "populations.0.theta=1.2", "--out", "x"],
    ["run", "--preset", "test1", "--override", "populations.0.colour=red", "--out", "x"],
    ["run", "--out", "x"],
    ["run", "--preset", "test1", "--scenario", "s.ini", "--out", "x"],
    ["run", "--scenario", "does-not-exist.ini", "--out", "x"],
    ["sweep", "--preset", "test1", "--key", "populations.0.theta", "--values", "0,abc", "--out", "x"],
    ["sweep", "--preset", "test1", "--values", "0,1", "--out", "x"],
    ["convergence", "--case", "spiral", "--out", "x"],
    ["convergence", "--h", "0.1,-0.2", "--out", "x"],
    ["run", "--preset", "test1", "--threads", "0", "--out", "x"],
])
def test_invalid_input_exit_2(tmp_path, monkeypatch, capsys, argv):
    monkeypatch.chdir(tmp_path)
    assert cli.main(argv) == 2
    assert "mscrowd:" in capsys.readouterr().err


def test_violations_listed(tmp_path, capsys):
    cli.main(["run", "--preset", "test1", "--override", "populations.0.theta=1.2", "--out", str(tmp_path)])
    assert "theta out of range" in capsys.readouterr().err


def test_runtime_failure_exit_1(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise CFLViolation("synthetic")

    monkeypatch.setattr(cli, "run", boom)
    assert cli.main(["run", "--preset", "test1", "--out", str(tmp_path)]) == 1


def test_sweep_matches_single_runs(tmp_path):
    out = tmp_path / "sw"
    code = cli.main(["sweep", "--preset", "test2_small", "--key", "populations.0.theta",
                     "--values", "0,1", "--out", str(out)])
    assert code == 0
    summary = rows(out / "summary.csv")
    assert summary[0][:4] == ["key", "value", "steps", "t_end"] and len(summary) == 3
    single = tmp_path / "one"
    cli.main(["run", "--preset", "test2_small", "--override", "populations.0.theta=1", "--out", str(single)])
    assert (single / "diagnostics.csv").read_bytes() == (out / "run_001" / "diagnostics.csv").read_bytes()
    data = rows(single / "diagnostics.csv")
    cols = data[0]
    t = np.array([float(r[cols.index("t")]) for r in data[1:]])
    mu = np.array([float(r[cols.index("p1_probe_mu")]) for r in data[1:]])
    got = float(summary[2][summary[0].index("p1_T_ave_mu")])
    assert got == pytest.approx(average_outflow_time(t, mu), rel=1e-8)


def test_convergence_translation(tmp_path):
    assert cli.main(["convergence", "--case", "translation", "--h", "0.1,0.05", "--out", str(tmp_path)]) == 0
    r = rows(tmp_path / "convergence.csv")
    assert r[0] == ["h", "l1_cell_error"] and [float(x[1]) for x in r[1:]] == [0.0, 0.0]


def test_convergence_empty_list(tmp_path):
    assert cli.main(["convergence", "--h", "", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "convergence.csv").read_text() == ""
