import csv
import json

import numpy as np
import pytest

from constrained_svgd import cli

FAST = """
[solver]
max_inner = 60
max_outer = 3
"""


def write_config(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def run(argv):
    try:
        return cli.main(argv)
    except SystemExit as exc:
        return exc.code


def test_toy2d_writes_three_files_and_is_byte_identical(tmp_path):
    cfg = write_config(tmp_path, FAST)
    outs = []
    for k in range(2):
        out = tmp_path / f"out{k}"
        assert run(["toy2d", "--config", cfg, "--particles", "12", "--out", str(out)]) == 0
        trial = out / "toy2d-q-auglag-n12-s0"
        assert sorted(p.name for p in trial.iterdir()) == ["metrics.json", "particles.csv", "scatter.svg"]
        outs.append({p.name: p.read_bytes() for p in trial.iterdir()})
    assert outs[0] == outs[1]

    metrics = json.loads(outs[0]["metrics.json"])
    assert set(metrics) == set(cli.METRIC_KEYS)
    assert metrics["wall_time_s"] is None and metrics["emd"] is not None
    rows = list(csv.reader(outs[0]["particles.csv"].decode().splitlines()))
    assert rows[0] == ["particle_id", "dim_0", "dim_1"]
    assert len(rows) == 13
    assert outs[0]["scatter.svg"].startswith(b"<svg")


def test_particles_csv_round_trips_exactly(tmp_path):
    cfg = cli.cell_config({"run": {"problem": "toy2d", "out": str(tmp_path)}}, "q", "auglag", 0)
    P = cli.build_problem(cfg)
    X = np.random.default_rng(0).normal(size=(5, 2)) / 3.0
    from constrained_svgd.evaluation import MetricsRecord

    rec = MetricsRecord("toy2d", "q", "auglag", 0, 5, None, 1, 1, 0.0, 0.0, False, 1.5)
    metrics = cli.write_trial(tmp_path / "t", "toy2d", P, X, rec, timing=True)
    assert metrics["wall_time_s"] == 1.5
    back = np.loadtxt(tmp_path / "t" / "particles.csv", delimiter=",", skiprows=1)[:, 1:]
    assert np.array_equal(back, X)


def test_matrix_writes_one_row_per_cell(tmp_path):
    cfg = write_config(tmp_path, FAST + """
[run]
problem = toy2d
particles = 6

[matrix]
methods = ["q", "p"]
formulations = ["auglag", "quadpenalty"]
seeds = 3
""")
    out = tmp_path / "m"
    assert run(["matrix", "--config", cfg, "--out", str(out)]) == 0
    with open(out / "metrics.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 12
    assert len([p for p in out.iterdir() if p.is_dir()]) == 12


@pytest.mark.parametrize("text", [
    "[solver]\nbogus = 1\n",
    "[nonsense]\nx = 1\n",
    "[problem]\nT = 5\n",  # trajectory-only key on toy2d
    "[run]\nmethod = r\n",
    "[run]\nparticles = 0\n",
    "[step]\neps0 = -1\n",
    "[matrix]\nseeds = 2\n",  # matrix block outside the matrix subcommand
])
def test_invalid_configs_exit_1(tmp_path, text):
    assert run(["toy2d", "--config", write_config(tmp_path, text), "--out", str(tmp_path)]) == 1


def test_usage_errors_exit_1(tmp_path):
    assert run(["toy2d", "--bogus"]) == 1
    assert run(["nosuch"]) == 1
    assert run(["toy2d", "--config", str(tmp_path / "missing.ini")]) == 1
    assert run(["ik", "--formulation", "logbarrier", "--out", str(tmp_path)]) == 1


def test_solver_failure_exits_2(tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise FloatingPointError("diverged")

    monkeypatch.setattr(cli, "run_trial", boom)
    assert run(["toy2d", "--particles", "4", "--out", str(tmp_path)]) == 2


def test_nonconvergence_still_exits_0(tmp_path):
    cfg = write_config(tmp_path, "[solver]\nmax_inner = 2\nmax_outer = 1\n")
    out = tmp_path / "o"
    assert run(["toy2d", "--config", cfg, "--particles", "5", "--out", str(out)]) == 0
    metrics = json.loads((out / "toy2d-q-auglag-n5-s0" / "metrics.json").read_text())
    assert metrics["converged"] is False


def test_gradcheck_passes(capsys):
    assert run(["gradcheck"]) == 0
    assert "max relative error" in capsys.readouterr().out
