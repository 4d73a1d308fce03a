import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from interlace_lab import cli


def _run(args, tmp_path, name="out.csv"):
    out = tmp_path / name
    code = cli.run(list(args) + ["--out", str(out)])
    return code, out


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_sample_hp_csv(tmp_path):
    code, out = _run(["sample", "hp", "--n", "3", "--samples", "50", "--seed", "1"], tmp_path)
    assert code == 0
    rows = _rows(out)
    assert rows[0] == ["idx", "x1", "x2", "x3"] and len(rows) == 51
    vals = np.array(rows[1:], dtype=float)[:, 1:]
    assert np.all(np.diff(vals, axis=1) > 0)


def test_seed_reproducible(tmp_path):
    _, a = _run(["sample", "gue", "--n", "2", "--samples", "5", "--seed", "9"], tmp_path, "a.csv")
    _, b = _run(["sample", "gue", "--n", "2", "--samples", "5", "--seed", "9"], tmp_path, "b.csv")
    assert a.read_text() == b.read_text()


def test_env_seed(tmp_path, monkeypatch):
    monkeypatch.setenv("INTERLACE_LAB_SEED", "9")
    _, a = _run(["sample", "gue", "--n", "2", "--samples", "5"], tmp_path, "a.csv")
    monkeypatch.delenv("INTERLACE_LAB_SEED")
    _, b = _run(["sample", "gue", "--n", "2", "--samples", "5", "--seed", "9"], tmp_path, "b.csv")
    assert a.read_text() == b.read_text()


def test_config_file_and_flag_precedence(tmp_path):
    conf = tmp_path / "run.cfg"
    conf.write_text("# comment\nN = 4\nsamples = 3\nseed = 2\n")
    cfg = cli.resolve(["sample", "hp", "--config", str(conf), "--n", "2"])
    assert cfg.N == 2 and cfg.samples == 3 and cfg.seed == 2
    conf.write_text("bogus_key = 1\n")
    with pytest.raises(cli.UsageError):
        cli.resolve(["sample", "hp", "--config", str(conf)])


def test_negative_x_values(tmp_path):
    code, out = _run(["sample", "link", "--x", "-1,0.5,2", "--samples", "20"], tmp_path)
    assert code == 0
    vals = np.array(_rows(out)[1:], dtype=float)[:, 1:]
    assert np.all((vals[:, 0] >= -1) & (vals[:, 0] <= 0.5) & (vals[:, 1] >= 0.5) & (vals[:, 1] <= 2))


def test_sample_gt_and_omega(tmp_path):
    code, out = _run(["sample", "gt", "--n", "3", "--samples", "2"], tmp_path)
    assert code == 0 and len(_rows(out)) == 1 + 2 * 6
    code, out = _run(["sample", "omega", "--n", "3", "--samples", "4", "--alpha-plus", "1"], tmp_path, "o.csv")
    assert code == 0 and len(_rows(out)) == 5


@pytest.mark.parametrize("target,extra", [
    ("hp", ["--n", "2"]),
    ("dbm", ["--n", "3"]),  # tied start at the origin
    ("ou", ["--n", "2", "--x", "-1,1"]),
    ("circle", ["--n", "2"]),
    ("matrix", ["--n", "2"]),
    ("multilevel", ["--n", "2"]),
    ("pushblock", ["--n", "2", "--T", "0.001"]),
])
def test_evolve_targets(tmp_path, target, extra):
    args = ["evolve", target, "--T", "0.02", "--record-dt", "0.01", "--seed", "3"] + extra
    code, out = _run(args, tmp_path)
    assert code == 0
    rows = _rows(out)
    assert rows[0][0] == "t" and len(rows) > 2


def test_pde_density_and_check(tmp_path):
    code, out = _run(["pde", "density", "--n", "2", "--h", "0.05", "--T", "0.2"], tmp_path)
    assert code == 0 and _rows(out)[0] == ["x", "y", "value"]
    code, out = _run(["pde", "siegmund", "--h", "0.04", "--T", "0.2"], tmp_path, "s.json")
    rep = json.loads(out.read_text())[0]
    assert code == 0 and rep["pass"] and rep["name"] == "pde-siegmund"


def test_verify_writes_reports(tmp_path):
    code, out = _run(["verify", "eigenfunction", "--set", "points=10"], tmp_path, "v.json")
    reps = json.loads(out.read_text())
    assert code == 0 and all(r["pass"] for r in reps)


def test_verify_inconclusive_exit_code(tmp_path):
    code, _ = _run(["verify", "coherency", "--set", "draws=100", "--set", "controls=0"], tmp_path, "v.json")
    assert code == 2


@pytest.mark.parametrize("args", [
    ["sample", "nothing"],
    ["bogus", "hp"],
    ["sample", "hp", "--unknown-flag", "1"],
    ["sample", "hp", "--n", "0"],
    ["verify", "coherency", "--set", "nokey=1"],
    ["verify", "eigenfunction", "--format", "csv"],
    ["sample", "link"],
])
def test_usage_errors(tmp_path, args):
    code, _ = _run(args, tmp_path)
    assert code == 1


def test_numeric_failure_exit_code(tmp_path):
    code, _ = _run(["pde", "density", "--A", "1.5", "--h", "0.05", "--T", "2"], tmp_path)
    assert code == 3


def test_console_script_module():
    out = subprocess.run([sys.executable, "-m", "interlace_lab.cli", "sample", "cue", "--n", "2",
                          "--samples", "3", "--format", "json"], capture_output=True, text=True)
    assert out.returncode == 0
    data = json.loads(out.stdout)
    assert len(data) == 3
