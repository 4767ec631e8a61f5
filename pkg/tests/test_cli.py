import json
import os
import subprocess
import sys

import pytest

from percolab.cli import main
from percolab.formats import read_csv


def run_cli(*args, env=None):
    full_env = {**os.environ, **(env or {})}
    return subprocess.run([sys.executable, "-m", "percolab", *args], capture_output=True,
                          text=True, env=full_env)


def test_enumerate_survival(capsys):
    assert main(["enumerate", "--p", "0.5", "--n", "1"]) == 0
    assert capsys.readouterr().out.strip() == "0.75"


def test_enumerate_exact_fraction(capsys):
    assert main(["enumerate", "--p", "2/5", "--n", "1", "--event", "size"]) == 0
    out = capsys.readouterr().out
    assert "9/25" in out and "12/25" in out and "4/25" in out


def test_enumerate_infeasible():
    assert main(["enumerate", "--p", "0.5", "--n", "5"]) == 3


def test_enumerate_bad_initial():
    assert main(["enumerate", "--p", "0.5", "--initial", "1"]) == 2


@pytest.mark.parametrize("argv", [
    ["simulate", "--p", "1.5", "--n", "5", "--trials", "10"],
    ["simulate", "--p", "0.5", "--n", "0", "--trials", "10"],
    ["simulate", "--p", "0.5", "--n", "5", "--trials", "10", "--seed", "-1"],
    ["enumerate", "--p", "3/2"],
])
def test_config_errors(argv, tmp_path):
    assert main(argv + (["--out", str(tmp_path)] if argv[0] != "enumerate" else [])) == 2


def test_regime_error(tmp_path):
    argv = ["estimate", "--p", "0", "--n", "10", "--trials", "50", "--out", str(tmp_path)]
    assert main(argv) == 4


def test_simulate_outputs(tmp_path):
    argv = ["simulate", "--p", "0.8", "--n", "60", "--trials", "400", "--seed", "3",
            "--out", str(tmp_path)]
    assert main(argv) == 0
    meta, header, rows = read_csv(tmp_path / "trials.csv")
    assert meta[0].startswith("# percolab ")
    assert '# p = 0.8' in meta
    assert header == ["trial", "level", "size", "rminus", "lplus", "diameter", "survived", "tau"]
    assert len(rows) == 400 * 61
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert next(iter(summary)) == "#config"
    assert summary["#config"]["seed"] == 3
    assert summary["coupling_violations"] == 0
    assert summary["edge_violations"] == 0


def test_estimate_outputs(tmp_path):
    argv = ["estimate", "--p", "0.8", "--n", "80", "--trials", "2000", "--nu-samples", "200",
            "--nu-level", "100", "--nu-half", "60", "--truncation", "20", "--out", str(tmp_path)]
    assert main(argv) == 0
    doc = json.loads((tmp_path / "estimates.json").read_text())
    for key in ("rho_hat", "alpha_hat", "sigma2_hat", "alpha_edge", "meta.nu_level"):
        assert key in doc


def test_assoc_outputs(tmp_path):
    argv = ["assoc", "--t", "100,400", "--paths", "300", "--eps", "0.25,0.5",
            "--out", str(tmp_path)]
    assert main(argv) == 0
    _, header, rows = read_csv(tmp_path / "assoc_levels.csv")
    assert header == ["level", "kind", "count", "mean", "variance", "ks_distance"]
    assert len(rows) == 4
    _, header, rows = read_csv(tmp_path / "assoc_maximal.csv")
    assert all(r[-1] == "1" for r in rows)


def test_clt_small(tmp_path):
    argv = ["clt", "--p", "0.8", "--levels", "20,40,60", "--survivors", "300",
            "--est-trials", "1000", "--nu-samples", "200", "--rho-trials", "2000",
            "--truncation", "20", "--plot-points", "20", "--out", str(tmp_path)]
    assert main(argv) == 0
    _, header, rows = read_csv(tmp_path / "clt_levels.csv")
    assert len(rows) == 9
    assert {r[1] for r in rows} == {"A", "A_prime", "A_hat"}
    _, header, rows = read_csv(tmp_path / "clt_plot.csv")
    assert header == ["kind", "level", "x", "ecdf", "phi"]
    assert (tmp_path / "clt_scalings.csv").exists()


def test_outputs_independent_of_workers(tmp_path):
    args = ["simulate", "--p", "0.8", "--n", "40", "--trials", "300", "--seed", "5"]
    a, b = tmp_path / "a", tmp_path / "b"
    # a larger thread pool than the machine has cores still exercises the parallel path
    pool = {"NUMBA_NUM_THREADS": "8"}
    r1 = run_cli(*args, "--out", str(a), "--workers", "1", env=pool)
    r2 = run_cli(*args, "--out", str(b), env={**pool, "PERC_WORKERS": "8"})
    assert r1.returncode == 0 and r2.returncode == 0, r1.stderr + r2.stderr
    for name in ("trials.csv", "summary.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_version_flag():
    r = run_cli("--version")
    assert r.returncode == 0
    assert r.stdout.startswith("percolab ")
