"""CLI wiring: config parsing, pinned file schemas, exit codes, determinism."""

import json
import os
import subprocess
import sys

import pytest

from selfex.cli import main

LINEAR_MODEL = """
drift.kind = linear
drift.alpha = 0.1233
drift.lambda0 = 0.05
beta = 0.0399
jumps.kind = inverse_gaussian
jumps.mean = 1.9389
jumps.shape = 5.4943
lambda_init = 0.05
"""

NONLINEAR_MODEL = """
drift.kind = nonlinear
drift.alpha = 0.1233
drift.delta = 0.5
drift.gamma = 100.0
drift.lambda0 = 0.05
beta = 0.0399
jumps.kind = inverse_gaussian
jumps.mean = 1.9389
jumps.shape = 5.4943
lambda_init = 0.05
"""


def write_cfg(tmp_path, body, name="run.cfg"):
    path = tmp_path / name
    path.write_text(body)
    return str(path)


def read_header(path):
    with open(path) as fh:
        return fh.readline().strip()


class TestConfigParsing:
    def test_unknown_key_is_a_hard_error_with_line_number(self, tmp_path,
                                                          capsys):
        cfg = write_cfg(tmp_path, "drift.kind = linear\nbogus = 1\n")
        code = main(["simulate", "--config", cfg, "--out", str(tmp_path)])
        assert code == 2
        err = capsys.readouterr().err
        assert "line 2" in err and "bogus" in err

    def test_duplicate_key_rejected(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "beta = 1\nbeta = 2\n")
        assert main(["simulate", "--config", cfg]) == 2
        assert "duplicate" in capsys.readouterr().err

    def test_missing_required_key(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "drift.kind = linear\n")
        assert main(["simulate", "--config", cfg]) == 2

    def test_comments_and_blanks_ignored(self, tmp_path):
        body = LINEAR_MODEL + "\n# a comment\n\nhorizon = 2.0\ngrid_dt = 1.0\n"
        cfg = write_cfg(tmp_path, body)
        out = tmp_path / "out"
        assert main(["simulate", "--config", cfg, "--out", str(out),
                     "--paths", "3", "--seed", "1"]) == 0


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("sim")
    body = LINEAR_MODEL + ("horizon = 20.0\ngrid_dt = 0.5\npaths = 50\n"
                           "seed = 9\nemit_paths = true\nemit_svg = true\n")
    cfg = write_cfg(tmp, body)
    out = tmp / "out"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    return out


class TestSimulateOutputs:
    def test_pinned_csv_schemas(self, run_dir):
        assert read_header(run_dir / "jumps.csv") == \
            "path_id,k,T_k,X_k,lambda_pre,lambda_post"
        assert read_header(run_dir / "grid.csv") == \
            "path_id,t,lambda,N,U,Lambda"

    def test_summary_schema(self, run_dir):
        summary = json.loads((run_dir / "summary.json").read_text())
        assert summary["command"] == "simulate"
        assert summary["regime"]["class"] == "subcritical"
        ens = summary["ensemble"]
        assert set(ens) == {"t", "mean_lambda", "se_lambda", "mean_N", "se_N",
                            "mean_U", "se_U", "mean_Lambda", "se_Lambda"}

    def test_figure_emitted(self, run_dir):
        assert (run_dir / "paths.svg").exists()

    def test_jump_free_intervals_are_plateaus_of_u(self, run_dir):
        # structural check on the files: U is constant exactly between
        # consecutive jump times
        jumps = {}
        with open(run_dir / "jumps.csv") as fh:
            next(fh)
            for line in fh:
                pid, _, t_k, *_ = line.split(",")
                jumps.setdefault(int(pid), []).append(float(t_k))
        with open(run_dir / "grid.csv") as fh:
            next(fh)
            rows = [line.split(",") for line in fh]
        by_path = {}
        for pid, t, _lam, _n, u, _comp in rows:
            by_path.setdefault(int(pid), []).append((float(t), float(u)))
        checked = 0
        for pid, grid in by_path.items():
            times = jumps.get(pid, [])
            for (t0, u0), (t1, u1) in zip(grid, grid[1:]):
                if not any(t0 < tj <= t1 for tj in times):
                    assert u1 == u0
                    checked += 1
        assert checked > 0

    def test_poisson_reduction_through_the_files(self, tmp_path):
        body = ("drift.kind = linear\ndrift.alpha = 1.0\ndrift.lambda0 = 2.0\n"
                "beta = 0.0\njumps.kind = constant\njumps.c = 1.0\n"
                "lambda_init = 2.0\nhorizon = 3.0\ngrid_dt = 3.0\n"
                "paths = 5000\nseed = 13\n")
        cfg = write_cfg(tmp_path, body)
        out = tmp_path / "out"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        summary = json.loads((out / "summary.json").read_text())
        mean_n = summary["ensemble"]["mean_N"][-1]
        se_n = summary["ensemble"]["se_N"][-1]
        assert abs(mean_n - 6.0) <= 3.0 * se_n

    def test_intensity_shifted_jump_config(self, tmp_path):
        body = ("drift.kind = linear\ndrift.alpha = 0.8\ndrift.lambda0 = 1.0\n"
                "beta = 0.2\njumps.kind = intensity_shifted\n"
                "jumps.base_kind = gamma\njumps.u = 2.0\njumps.v = 3.0\n"
                "jumps.coupling = 0.1\nlambda_init = 1.0\nhorizon = 2.0\n"
                "grid_dt = 1.0\npaths = 5\n")
        cfg = write_cfg(tmp_path, body)
        out = tmp_path / "out"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["regime"] is None  # no fixed mean jump size

    def test_explosion_exit_code(self, tmp_path, capsys):
        body = ("drift.kind = linear\ndrift.alpha = 0.1\ndrift.lambda0 = 1.0\n"
                "beta = 2.0\njumps.kind = constant\njumps.c = 2.0\n"
                "lambda_init = 1.0\nhorizon = 50.0\ngrid_dt = 1.0\n"
                "paths = 4\nmax_jumps = 200\n")
        cfg = write_cfg(tmp_path, body)
        assert main(["simulate", "--config", cfg,
                     "--out", str(tmp_path / "x")]) == 3
        assert "path" in capsys.readouterr().err


class TestMomentsOutputs:
    def test_schema_and_discrepancy_section(self, tmp_path):
        body = LINEAR_MODEL + "horizon = 5.0\ngrid_dt = 1.0\nemit_svg = true\n"
        cfg = write_cfg(tmp_path, body)
        out = tmp_path / "out"
        assert main(["moments", "--config", cfg, "--out", str(out)]) == 0
        assert read_header(out / "moments.csv") == \
            ("t,m1,v,var,E_Lambda,E_Lambda2_quadrature,E_Lambda2_closedform")
        summary = json.loads((out / "summary.json").read_text())
        disc = summary["discrepancy"]
        assert disc["threshold"] == 1e-6
        assert disc["flagged"] is True
        assert disc["max_rel"] > 1e-6
        assert (out / "moments.svg").exists()
        # first row is the deterministic start
        with open(out / "moments.csv") as fh:
            next(fh)
            first = fh.readline().split(",")
        assert float(first[0]) == 0.0
        assert float(first[3]) == 0.0   # var
        assert float(first[4]) == 0.0   # E_Lambda
        assert float(first[5]) == 0.0   # E_Lambda2_quadrature

    def test_critical_config_drops_closedform_column(self, tmp_path):
        body = ("drift.kind = linear\ndrift.alpha = 0.2\ndrift.lambda0 = 1.0\n"
                "beta = 0.1\njumps.kind = constant\njumps.c = 2.0\n"
                "lambda_init = 1.0\nhorizon = 4.0\ngrid_dt = 1.0\n")
        cfg = write_cfg(tmp_path, body)
        out = tmp_path / "out"
        assert main(["moments", "--config", cfg, "--out", str(out)]) == 0
        assert read_header(out / "moments.csv") == \
            "t,m1,v,var,E_Lambda,E_Lambda2_quadrature"
        # linear growth of the mean at perfect balance
        with open(out / "moments.csv") as fh:
            next(fh)
            rows = [line.split(",") for line in fh]
        for t_str, m_str, *_ in rows:
            assert float(m_str) == pytest.approx(1.0 + 0.2 * float(t_str))

    def test_nonlinear_drift_exits_2(self, tmp_path):
        body = NONLINEAR_MODEL + "horizon = 5.0\ngrid_dt = 1.0\n"
        cfg = write_cfg(tmp_path, body)
        assert main(["moments", "--config", cfg,
                     "--out", str(tmp_path / "x")]) == 2


class TestLimitOutputs:
    def test_schema_and_criteria(self, tmp_path):
        body = ("v_list = 0.5, 0.1\nc0 = 1.0\nc1 = 1.0\nu = 1.0\nt = 1.0\n"
                "paths = 400\nseed = 2\nemit_svg = true\n")
        cfg = write_cfg(tmp_path, body)
        out = tmp_path / "out"
        code = main(["limit", "--config", cfg, "--out", str(out)])
        assert code in (0, 4)
        assert read_header(out / "convergence.csv") == \
            "v_k,a_k,stat_name,empirical,reference,se,abs_error"
        summary = json.loads((out / "summary.json").read_text())
        assert set(summary["policies"]) == {"small", "equilibrium"}
        assert all(v in ("PASS", "FAIL") for v in summary["criteria"].values())
        assert (out / "convergence.svg").exists()

    def test_single_level_is_vacuously_monotone(self, tmp_path):
        body = ("v_list = 0.5\nc0 = 1.0\nc1 = 1.0\nu = 1.0\nt = 1.0\n"
                "paths = 300\nseed = 3\n")
        cfg = write_cfg(tmp_path, body)
        out = tmp_path / "out"
        assert main(["limit", "--config", cfg, "--out", str(out)]) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["criteria"]["small/intensity/monotone"] == "PASS"


class TestDetlimitOutputs:
    BODY = ("drift.kind = linear\ndrift.alpha = 0.5\ndrift.lambda0 = 0.1\n"
            "beta = 0.5\njumps.kind = constant\njumps.c = 1.0\n"
            "lambda_init = 2.0\nhorizon = 3.0\neps_list = 1.0, 0.1\n"
            "paths = 2000\nseed = 8\nemit_svg = true\n")

    def test_schema(self, tmp_path):
        cfg = write_cfg(tmp_path, self.BODY)
        out = tmp_path / "out"
        assert main(["detlimit", "--config", cfg, "--out", str(out)]) == 0
        assert read_header(out / "detlimit.csv") == \
            "eps,rho_eps,chi2,dof,pvalue,mean_N,mean_ref"
        summary = json.loads((out / "summary.json").read_text())
        assert summary["mode"] == "eps"
        assert (out / "detlimit.svg").exists()

    def test_infeasible_fixed_rho_exits_2(self, tmp_path, capsys):
        body = self.BODY.replace("jumps.kind = constant\njumps.c = 1.0",
                                 "jumps.kind = gamma\njumps.u = 1.0\n"
                                 "jumps.v = 1.0")
        cfg = write_cfg(tmp_path, body)
        code = main(["detlimit", "--config", cfg, "--out",
                     str(tmp_path / "x"), "--fixed-rho", "-0.4"])
        assert code == 2


class TestDeterminism:
    CFG = LINEAR_MODEL + ("horizon = 10.0\ngrid_dt = 1.0\npaths = 2000\n"
                          "seed = 77\nemit_paths = true\n")

    def _run(self, tmp_path, name, env_threads=None, monkeypatch=None):
        out = tmp_path / name
        cfg = write_cfg(tmp_path, self.CFG, name=f"{name}.cfg")
        if env_threads is not None:
            monkeypatch.setenv("SELFEX_THREADS", str(env_threads))
        try:
            assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        finally:
            if env_threads is not None:
                monkeypatch.delenv("SELFEX_THREADS")
        return out

    def test_same_seed_byte_identical(self, tmp_path, monkeypatch):
        a = self._run(tmp_path, "a")
        b = self._run(tmp_path, "b")
        for name in ("jumps.csv", "grid.csv", "summary.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_worker_count_byte_identical(self, tmp_path, monkeypatch):
        a = self._run(tmp_path, "w1", env_threads=1, monkeypatch=monkeypatch)
        b = self._run(tmp_path, "w3", env_threads=3, monkeypatch=monkeypatch)
        for name in ("jumps.csv", "grid.csv", "summary.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()


class TestConsoleScript:
    def test_entry_point_runs(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(LINEAR_MODEL + "horizon = 2.0\ngrid_dt = 1.0\n")
        proc = subprocess.run(
            [sys.executable, "-m", "selfex.cli", "simulate",
             "--config", str(cfg), "--out", str(tmp_path / "out"),
             "--paths", "2"],
            capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
