import csv
import io

import numpy as np
import pytest

from blockrefit.cli import METRIC_COLUMNS, main
from blockrefit.imageio import read_pnm, read_raw
from blockrefit.solvers import TRACE_COLUMNS

QUICK = ["run", "--scenario", "shapes128", "--iters", "15", "--trace-every", "5"]


def run(argv, env=None):
    out = io.StringIO()
    code = main(argv, stdout=out, env=env or {})
    return code, out.getvalue()


def read_metrics(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_run_writes_all_outputs(tmp_path):
    code, text = run(QUICK + ["--penalty", "HD", "--out", str(tmp_path)])
    assert code == 0
    assert "HD: psnr noisy" in text
    for name in ("y.pgm", "y.raw", "x_hat.pgm", "x_hat.raw", "x_tilde_HD.pgm",
                 "x_tilde_HD.raw", "trace_HD.csv", "metrics.csv"):
        assert (tmp_path / name).is_file(), name
    assert read_pnm(tmp_path / "y.pgm").shape == (128, 128)
    x = read_raw(tmp_path / "x_tilde_HD.raw")
    assert np.array_equal(read_pnm(tmp_path / "x_tilde_HD.pgm"), np.clip(np.rint(x), 0, 255))
    with open(tmp_path / "trace_HD.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == TRACE_COLUMNS
    assert [r[0] for r in rows[1:]] == ["0", "5", "10", "14"]
    (row,) = read_metrics(tmp_path / "metrics.csv")
    assert tuple(row) == METRIC_COLUMNS
    assert row["scenario"] == "shapes128" and row["penalty"] == "HD"


def test_all_penalties_share_biased_columns(tmp_path):
    assert run(QUICK + ["--penalty", "all", "--out", str(tmp_path)])[0] == 0
    rows = read_metrics(tmp_path / "metrics.csv")
    assert [r["penalty"] for r in rows] == ["HO", "HD", "QO", "QD", "SO", "SD"]
    for col in ("psnr_noisy", "psnr_biased", "fidelity_biased"):
        assert len({r[col] for r in rows}) == 1


def test_rerun_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run(QUICK + ["--out", str(a), "--seed", "4"])
    run(QUICK + ["--out", str(b), "--seed", "4"])
    for name in ("metrics.csv", "trace_SD.csv", "x_tilde_SD.raw"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_posterior_mode_trace_offsets(tmp_path):
    argv = QUICK + ["--mode", "posterior", "--solver", "dr", "--out", str(tmp_path)]
    assert run(argv)[0] == 0
    iters = [int(r["iter"]) for r in csv.DictReader(open(tmp_path / "trace_SD.csv"))]
    assert iters == [0, 5, 10, 14, 15, 20, 25, 29]


def test_refit_out_environment(tmp_path):
    target = tmp_path / "env_out"
    assert run(QUICK, env={"REFIT_OUT": str(target)})[0] == 0
    assert (target / "metrics.csv").is_file()
    flag = tmp_path / "flag_out"
    run(QUICK + ["--out", str(flag)], env={"REFIT_OUT": str(target / "unused")})
    assert (flag / "metrics.csv").is_file()
    assert not (target / "unused").exists()


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# quick run\npenalty = QO\niters=12\nlambda=500  # weaker\ntrace-every=0\n")
    assert run(["run", "--config", str(cfg), "--iters", "4", "--out", str(tmp_path)])[0] == 0
    (row,) = read_metrics(tmp_path / "metrics.csv")
    assert row["penalty"] == "QO"
    assert open(tmp_path / "trace_QO.csv").read().strip() == ",".join(TRACE_COLUMNS)


@pytest.mark.parametrize("text", ["bogus=1\n", "iters=many\n", "solver=admm\n", "no equals\n"])
def test_bad_config_is_usage_error(tmp_path, text):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(text)
    assert run(["run", "--config", str(cfg), "--out", str(tmp_path)])[0] == 2


@pytest.mark.parametrize(
    "extra",
    [
        ["--penalty", "XX"],
        ["--lambda", "-1"],
        ["--iters", "0"],
        ["--alpha", "2.0", "--solver", "dr"],
        ["--tau", "1", "--kappa", "1"],
        ["--scenario", "nowhere"],
        ["--sigma", "nan"],
    ],
)
def test_usage_errors_exit_2(tmp_path, extra):
    assert run(QUICK + extra + ["--out", str(tmp_path)])[0] == 2


def test_no_command_is_usage_error():
    assert run([])[0] == 2


def test_landscape_values(tmp_path):
    code, text = run(["landscape", "--penalty", "all", "--lambda", "1"])
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(text)))
    assert len(rows) == 6 * 181 * 61
    table = {(r["penalty"], float(r["theta"]), float(r["amplitude"])): r["value"] for r in rows}
    pi = float(rows[0]["theta"]) * -1
    assert float(table[("SD", 0.0, 1.0)]) == 0.0
    assert float(table[("SD", pi, 1.0)]) == pytest.approx(2.0)
    assert table[("HD", pi, 1.0)] == "inf"
    assert table[("HO", pi, 1.0)] == "0.0"
    out = tmp_path / "land.csv"
    assert run(["landscape", "--penalty", "QO", "--out", str(out)])[0] == 0
    assert out.read_text().startswith("penalty,theta,amplitude,value")


def test_verify_suite_passes():
    code, text = run(["verify", "equivalence"])
    assert code == 0
    lines = text.strip().splitlines()
    assert lines[-1].endswith("0 failed")
    assert all(line.startswith("PASS") for line in lines[:-1])


def test_divergence_maps_to_exit_1(tmp_path, monkeypatch):
    from blockrefit import cli
    from blockrefit.solvers import DivergenceError

    def boom(*args, **kwargs):
        raise DivergenceError(3, "x")

    monkeypatch.setattr(cli, "pd_joint_solve", boom)
    assert run(QUICK + ["--out", str(tmp_path)])[0] == 1
