"""Orchestration, reports, emitted files and the command line."""

import json
import math

import numpy as np
import pytest

from nrmhd import cli
from nrmhd.config import parse_config
from nrmhd.harness import (
    COMPLETED,
    NON_FINITE,
    STEP_REJECTED,
    RunReport,
    emit_report,
    observed_orders,
    run,
)
from nrmhd.snapshot import read_snapshot

SMALL = """
grid.n = 16
init.epsilon = {eps}
init.s = 2
energy.s = 2
dynamics.dt = 0.01
run.t_end = {t_end}
energy.sample_stride = {stride}
"""


def small_config(eps=0.05, t_end=0.5, stride=3, extra=""):
    return parse_config(SMALL.format(eps=eps, t_end=t_end, stride=stride) + extra)


@pytest.fixture(scope="module")
def small_report():
    return run(small_config(extra="run.snapshot_times = 0, 0.25\n"))


class TestRun:
    def test_zero_epsilon(self):
        r = run(small_config(eps=0.0))
        assert r.status == COMPLETED
        assert all(v == 0.0 for v in r.residuals.values())
        assert all(v == 0.0 for v in r.final_energies.values())

    def test_completed_report(self, small_report):
        r = small_report
        assert r.status == COMPLETED and r.steps == 50
        assert r.final_time == pytest.approx(0.5)
        assert r.residuals["balance_relative"] < 1e-6
        assert r.residuals["parity_u"] < 1e-8 and r.residuals["mean_b"] == 0.0
        assert r.verdicts is None and "decades" in r.verdict_note
        assert r.final_energies["E_total"] > 0

    def test_linearized_mode(self):
        cfg = parse_config(
            "grid.n = 16\ninit.epsilon = 1\nrun.mode = linearized\ndynamics.dt = 0.001\n"
            "dynamics.quadratic = false\nrun.t_end = 2\n"
        )
        lin = run(cfg).extras["linearized"]
        assert lin["error"] < 1e-6
        assert lin["expected_envelope"] == pytest.approx([math.exp(-1.0)] * 2, abs=1e-15)
        assert max(abs(e - math.exp(-1.0)) for e in lin["envelope"]) < 1e-6

    def test_observed_orders(self):
        assert observed_orders([0.4, 0.2, 0.1], [16.0, 1.0, 1 / 16]) == [4.0, 4.0]

    def test_convergence_mode(self):
        cfg = small_config(t_end=0.1, extra="run.mode = convergence\nrun.dts = 0.02, 0.01\n")
        r = run(cfg)
        assert r.status == COMPLETED
        assert len(r.extras["convergence"]["errors"]) == 2

    def test_step_rejected(self):
        r = run(small_config(eps=1e5))
        assert r.status == STEP_REJECTED
        assert r.failure_time == 0.0 and "CFL" in r.failure_message

    def test_sweep_ordering_and_isolation(self):
        text = SMALL.format(eps=0.01, t_end=0.3, stride=5) + "run.mode = sweep\nrun.epsilons = 0.04, 0.01, 0.02\n"
        serial = run(parse_config(text))
        parallel = run(parse_config(text), jobs=2)
        assert serial.extras["E_total_increasing_in_epsilon"]
        table = serial.extras["comparison"]
        assert [row["epsilon"] for row in table] == [0.04, 0.01, 0.02]
        assert [m.final_energies for m in serial.members] == [m.final_energies for m in parallel.members]


class TestEmit:
    def test_files(self, small_report, tmp_path):
        emit_report(small_report, tmp_path)
        names = sorted(p.name for p in tmp_path.iterdir())
        assert names == [
            "ledger.csv",
            "report.json",
            "snapshot_t0.0.bin",
            "snapshot_t0.0.json",
            "snapshot_t0.25.bin",
            "snapshot_t0.25.json",
        ]

    def test_report_roundtrip(self, small_report, tmp_path):
        emit_report(small_report, tmp_path)
        back = RunReport.from_json((tmp_path / "report.json").read_text())
        assert back == small_report

    def test_row_count(self, small_report, tmp_path):
        emit_report(small_report, tmp_path)
        rows = (tmp_path / "ledger.csv").read_text().splitlines()
        assert len(rows) == 1 + small_report.steps // 3 + 1

    def test_snapshot_contents(self, small_report, tmp_path):
        emit_report(small_report, tmp_path)
        grid, fields, t = read_snapshot(tmp_path / "snapshot_t0.25")
        state = small_report.artifacts["snapshots"][0.25]
        assert t == pytest.approx(0.25) and grid.n == 16
        assert np.array_equal(fields["b2"], state.b.coeffs[1])

    def test_idempotent_and_deterministic(self, small_report, tmp_path):
        emit_report(small_report, tmp_path / "a")
        emit_report(small_report, tmp_path / "a")
        emit_report(run(small_config(extra="run.snapshot_times = 0, 0.25\n")), tmp_path / "b")
        for name in ("ledger.csv", "snapshot_t0.25.bin"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_sweep_members(self, tmp_path):
        text = SMALL.format(eps=0.01, t_end=0.05, stride=1) + "run.mode = sweep\nrun.epsilons = 0.01, 0.02\n"
        emit_report(run(parse_config(text)), tmp_path)
        assert (tmp_path / "eps_0.01" / "ledger.csv").exists()
        assert (tmp_path / "eps_0.02" / "report.json").exists()


class TestCli:
    def write(self, tmp_path, text):
        p = tmp_path / "run.cfg"
        p.write_text(text)
        return str(p)

    def test_run(self, tmp_path, capsys):
        cfg = self.write(tmp_path, SMALL.format(eps=0.05, t_end=0.1, stride=1))
        assert cli.main(["run", cfg, "--output-dir", str(tmp_path / "out")]) == 0
        assert json.loads(capsys.readouterr().out)["status"] == COMPLETED
        assert (tmp_path / "out" / "ledger.csv").exists()

    def test_env_output_dir(self, tmp_path, monkeypatch):
        cfg = self.write(tmp_path, SMALL.format(eps=0.05, t_end=0.05, stride=1))
        monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "env"))
        assert cli.main(["run", cfg]) == 0
        assert (tmp_path / "env" / "report.json").exists()

    def test_validation_exit(self, tmp_path, capsys):
        cfg = self.write(tmp_path, "init.epsilon = 0.1\ndynamics.dt = -0.1\n")
        assert cli.main(["run", cfg]) == cli.EXIT_VALIDATION == 2
        assert "dynamics.dt" in capsys.readouterr().err

    def test_parse_error_exit(self, tmp_path, capsys):
        cfg = self.write(tmp_path, "init.epsilon = 0.1\nwhat\n")
        assert cli.main(["run", cfg]) == 2
        assert "line 2" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert cli.main(["run", str(tmp_path / "nope.cfg")]) == 2

    def test_numerical_exit(self, tmp_path):
        cfg = self.write(tmp_path, SMALL.format(eps=1e5, t_end=0.1, stride=1))
        assert cli.main(["run", cfg, "--output-dir", str(tmp_path / "out")]) == cli.EXIT_NUMERICAL == 3
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert report["status"] in (STEP_REJECTED, NON_FINITE)

    def test_sweep(self, tmp_path, capsys):
        cfg = self.write(tmp_path, SMALL.format(eps=0.01, t_end=0.05, stride=1) + "run.epsilons = 0.01, 0.02\n")
        assert cli.main(["sweep", cfg, "--output-dir", str(tmp_path / "out")]) == 0
        assert json.loads(capsys.readouterr().out)["E_total_increasing_in_epsilon"] is True

    def test_sweep_without_epsilons(self, tmp_path):
        cfg = self.write(tmp_path, SMALL.format(eps=0.01, t_end=0.05, stride=1))
        assert cli.main(["sweep", cfg]) == 2

    def test_fit(self, tmp_path, capsys):
        t = np.linspace(0.0, 50.0, 60)
        lines = ["t,u_l2"] + [f"{float(ti)!r},{float(2.0 * (1 + ti) ** -1.5)!r}" for ti in t]
        csv = tmp_path / "ledger.csv"
        csv.write_text("\n".join(lines) + "\n")
        assert cli.main(["fit", str(csv), "--quantity", "u_l2", "--window", "1,50"]) == 0
        fit = json.loads(capsys.readouterr().out)
        assert fit["slope"] == pytest.approx(-1.5, abs=1e-9)
        assert cli.main(["fit", str(csv), "--quantity", "nope", "--window", "1,50"]) == 2
        assert cli.main(["fit", str(csv), "--quantity", "u_l2", "--window", "1"]) == 2
        assert cli.main(["fit", str(csv), "--quantity", "u_l2", "--window", "49,50"]) == 2

    def test_check(self, capsys):
        assert cli.main(["check"]) == 0
        out = capsys.readouterr().out
        assert out.count("[PASS]") == 8 and "[FAIL]" not in out

    def test_check_failure_exit(self, monkeypatch):
        from nrmhd import checks

        monkeypatch.setattr(checks, "CHECKS", checks.CHECKS + (("broken", lambda: (False, "nope")),))
        assert cli.main(["check"]) == 1

    def test_fit_bad_csv(self, tmp_path):
        csv = tmp_path / "ledger.csv"
        csv.write_text("t,u_l2\n0.0,oops\n")
        assert cli.main(["fit", str(csv), "--quantity", "u_l2", "--window", "0,1"]) == 2
