"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line; the lines are printed in the pytest
terminal summary and by ``python3 tests/test_acceptance.py``. The long runs
are shared through module-scoped fixtures, so the whole file takes on the
order of fifteen minutes on one core.
"""

from __future__ import annotations

import math
import time

import pytest

from nrmhd.checks import poincare_battery
from nrmhd.config import parse_config
from nrmhd.harness import COMPLETED, emit_report, linearized_run, observed_orders, run
from nrmhd.spectral import Grid

RESULTS: dict[int, str] = {}

# tolerances exactly as stated in the criteria
POINCARE_SLACK = 1e-12
POINCARE_RUNTIME = 1.0
BALANCE_REL = 1e-6
BALANCE_SHRINK = 4.0
PARITY_TOL = 1e-8
MEAN_TOL = 1e-13
LINEAR_TOL = 1e-6
ORDER, ORDER_TOL = 4.0, 0.2
B_SUP_RATIO = 2.0
TAIL_RATIO = 1.5

BALANCE_RUN = """
grid.n = 32
init.seed = 0
init.epsilon = 0.05
init.s = 5
energy.s = 5
energy.sigma = 0.5
dynamics.nu = 1.0
dynamics.dt = {dt}
run.t_end = 10
energy.sample_stride = 1
"""

BOUNDED_RUN = """
grid.n = 32
init.seed = 0
init.epsilon = 0.01
dynamics.dt = 0.02
run.t_end = 100
energy.sample_stride = 10
"""

SWEEP_RUN = """
grid.n = 32
init.seed = 0
run.mode = sweep
run.epsilons = 0.005, 0.01, 0.02, 0.04
dynamics.dt = 0.02
run.t_end = 20
energy.sample_stride = 10
"""


def record(number: int, title: str, passed: bool, detail: str) -> None:
    RESULTS[number] = f"[{'PASS' if passed else 'FAIL'}] criterion {number} {title}: {detail}"
    print(RESULTS[number])


@pytest.fixture(scope="module")
def balance_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("balance")
    report = run(parse_config(BALANCE_RUN.format(dt=0.002)))
    emit_report(report, out)
    return report, out


@pytest.fixture(scope="module")
def balance_run_half():
    return run(parse_config(BALANCE_RUN.format(dt=0.001)))


def max_abs_balance(report) -> float:
    return max(abs(r) for r in report.ledger.balance_history)


class TestAcceptance:
    def test_1_poincare_battery(self):
        start = time.perf_counter()
        worst, sat = poincare_battery(n_fields=100, n=16, orders=range(5))
        elapsed = time.perf_counter() - start
        ok = worst <= 1 + POINCARE_SLACK and sat <= POINCARE_SLACK and elapsed < POINCARE_RUNTIME
        record(1, "Poincare battery", ok, f"max ratio {worst:.15f}, saturation deviation {sat:.1e}, {elapsed:.2f}s")
        assert ok

    def test_2_energy_balance(self, balance_run, balance_run_half):
        report, _ = balance_run
        e0 = report.initial_energy
        coarse, fine = max_abs_balance(report), max_abs_balance(balance_run_half)
        shrink = coarse / fine if fine > 0 else math.inf
        ok = (
            report.status == COMPLETED
            and balance_run_half.status == COMPLETED
            and coarse <= BALANCE_REL * e0
            and shrink >= BALANCE_SHRINK
        )
        record(
            2,
            "energy balance",
            ok,
            f"max |residual| / E(0) = {coarse / e0:.2e} at dt=2e-3, {fine / e0:.2e} at dt=1e-3, shrink {shrink:.1f}x",
        )
        assert ok

    def test_3_parity_persistence(self, balance_run):
        report, _ = balance_run
        worst = max(report.residuals["parity_u"], report.residuals["parity_b"])
        ok = report.status == COMPLETED and not report.config["dynamics.enforce_parity"] and worst <= PARITY_TOL
        record(3, "parity persistence", ok, f"max parity residual {worst:.2e} over {report.steps} steps")
        assert ok

    def test_4_mean_conservation(self, balance_run):
        report, _ = balance_run
        worst = max(report.residuals["mean_u"], report.residuals["mean_b"])
        ok = report.status == COMPLETED and worst <= MEAN_TOL
        record(4, "mean conservation", ok, f"max |k=0 amplitude| {worst:.2e} over {len(report.ledger.samples)} samples")
        assert ok

    def test_5_linearized_solution(self):
        grid = Grid(16)
        main = linearized_run(grid, 1.0, 1e-3, 2.0)
        dts = [4e-3, 2e-3, 1e-3]
        errors = [linearized_run(grid, 1.0, dt, 2.0)["error"] for dt in dts]
        orders = observed_orders(dts, errors)
        lam_ok = all(
            abs(complex(*v) - complex(-0.5, s * math.sqrt(3) / 2)) < 1e-12
            for v, s in zip(sorted(main["eigenvalues"], key=lambda v: v[1]), (-1, 1))
        )
        ok = (
            main["error"] <= LINEAR_TOL
            and main["envelope_error"] <= LINEAR_TOL
            and lam_ok
            and all(abs(p - ORDER) <= ORDER_TOL for p in orders)
        )
        record(
            5,
            "linearized mode",
            ok,
            f"error {main['error']:.1e}, envelope error {main['envelope_error']:.1e}, "
            f"orders {', '.join(f'{p:.3f}' for p in orders)}",
        )
        assert ok

    def test_6_small_data_boundedness(self):
        report = run(parse_config(BOUNDED_RUN))
        verdicts = report.verdicts or {}
        all_bounded = len(verdicts) == 6 and all(v["bounded"] for v in verdicts.values())
        b_ratio = report.extras["b_2s_sup_over_initial"]
        tail = report.extras["g1_weighted_tail_ratio"]
        ok = (
            report.status == COMPLETED
            and all_bounded
            and b_ratio is not None
            and b_ratio <= B_SUP_RATIO
            and tail is not None
            and tail <= TAIL_RATIO
        )
        ratios = ", ".join(f"{k} {v['ratio']:.3f}" for k, v in verdicts.items())
        slopes = ", ".join(f"{f['quantity']} {f['slope']:.2f}" for f in report.fits)
        record(
            6,
            "small-data boundedness",
            ok,
            f"tail ratios [{ratios}]; sup b_2s / initial {b_ratio}; weighted G1 tail {tail:.2e}; slopes [{slopes}]",
        )
        assert ok

    def test_7_epsilon_monotonicity(self):
        report = run(parse_config(SWEEP_RUN))
        table = report.extras["comparison"]
        ok = (
            report.status == COMPLETED
            and all(row["status"] == COMPLETED for row in table)
            and report.extras["E_total_increasing_in_epsilon"]
        )
        totals = ", ".join(f"{row['epsilon']}: {row['final_E_total']:.4e}" for row in table)
        record(7, "epsilon monotonicity", ok, f"final E_total {totals}")
        assert ok

    def test_8_determinism(self, balance_run, tmp_path):
        _, first = balance_run
        again = run(parse_config(BALANCE_RUN.format(dt=0.002)))
        emit_report(again, tmp_path)
        a = (first / "ledger.csv").read_bytes()
        b = (tmp_path / "ledger.csv").read_bytes()
        ok = a == b
        record(8, "determinism", ok, f"ledger.csv {len(a)} bytes, identical={ok}")
        assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s"]))
