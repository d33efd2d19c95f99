"""Orchestration: generate, evolve, sample, report."""

from __future__ import annotations

import dataclasses
import json
import math
import time as _time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import scipy.linalg

from nrmhd import diagnostics as diag
from nrmhd.config import RunConfig, RunMode
from nrmhd.dynamics import DynamicsConfig, MhdState, step
from nrmhd.errors import InsufficientData, NonFinite, NonPositiveValues, RunTooShort, StepRejected
from nrmhd.initial import generate, single_mode_state
from nrmhd.snapshot import write_snapshot
from nrmhd.spectral import Grid

COMPLETED = "completed"
NON_FINITE = "non_finite"
STEP_REJECTED = "step_rejected"

FIT_QUANTITIES = ("u_l2", "u_2sm2", "d3u_2sm2", "d3b_2sm2", "b_2s")


@dataclass
class RunReport:
    config: dict
    status: str = COMPLETED
    steps: int = 0
    final_time: float = 0.0
    wall_clock: float = 0.0
    failure_time: float | None = None
    failure_message: str | None = None
    initial_energy: float = 0.0
    residuals: dict = field(default_factory=dict)
    final_energies: dict = field(default_factory=dict)
    fits: list = field(default_factory=list)
    verdicts: dict | None = None
    verdict_note: str | None = None
    extras: dict = field(default_factory=dict)
    members: list = field(default_factory=list)
    # ledger and snapshot states; not serialized
    artifacts: dict = field(default_factory=dict, compare=False, repr=False)

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name != "artifacts"}
        out["members"] = [m.to_dict() for m in self.members]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> RunReport:
        data = dict(data)
        data["members"] = [cls.from_dict(m) for m in data.get("members", [])]
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> RunReport:
        return cls.from_dict(json.loads(text))

    @property
    def ledger(self) -> diag.EnergyLedger | None:
        return self.artifacts.get("ledger")


def _finite_or_none(x: float) -> float | None:
    return float(x) if math.isfinite(x) else None


class _Monitor:
    """Running maxima of the invariant residuals."""

    def __init__(self):
        self.max = dict.fromkeys(
            ("divergence_u", "divergence_b", "parity_u", "parity_b", "mean_u", "mean_b", "balance"), 0.0
        )

    def observe(self, state: MhdState, ledger: diag.EnergyLedger) -> None:
        r = diag.invariant_residuals(state)
        for k, v in dataclasses.asdict(r).items():
            self.max[k] = max(self.max[k], v)
        self.max["balance"] = max(self.max["balance"], abs(ledger.balance_history[-1]))


def evolve(
    state: MhdState,
    dynamics: DynamicsConfig,
    energy: diag.EnergyConfig,
    n_steps: int,
    snapshot_steps: dict[int, float] | None = None,
) -> tuple[MhdState, diag.EnergyLedger, dict, dict]:
    """Step ``n_steps`` times, sampling every ``energy.sample_stride`` steps.

    Returns (last state, ledger, outcome, snapshots); numerical failures are
    caught and described in ``outcome`` rather than raised.
    """
    snapshot_steps = snapshot_steps or {}
    ledger = diag.EnergyLedger(energy, nu=dynamics.nu)
    monitor = _Monitor()
    snapshots: dict[float, MhdState] = {}
    outcome: dict[str, Any] = {"status": COMPLETED, "steps": 0, "time": None, "message": None}

    diag.update_ledger(ledger, diag.sample_norms(state, energy))
    monitor.observe(state, ledger)
    if 0 in snapshot_steps:
        snapshots[snapshot_steps[0]] = state
    try:
        for i in range(1, n_steps + 1):
            state = step(state, dynamics)
            outcome["steps"] = i
            if i % energy.sample_stride == 0:
                diag.update_ledger(ledger, diag.sample_norms(state, energy))
                monitor.observe(state, ledger)
            if i in snapshot_steps:
                snapshots[snapshot_steps[i]] = state
    except StepRejected as exc:
        outcome.update(status=STEP_REJECTED, time=exc.time, message=str(exc))
    except NonFinite as exc:
        outcome.update(status=NON_FINITE, time=exc.time, message=str(exc))
    outcome["residuals"] = dict(monitor.max)
    return state, ledger, outcome, snapshots


def _report_from(config: RunConfig, state, ledger, outcome, snapshots, wall) -> RunReport:
    initial_energy = 0.5 * (ledger.samples[0].u_l2 + ledger.samples[0].b_l2)
    residuals = dict(outcome["residuals"])
    residuals["balance_relative"] = residuals["balance"] / initial_energy if initial_energy > 0 else 0.0
    report = RunReport(
        config=config.to_dict(),
        status=outcome["status"],
        steps=outcome["steps"],
        final_time=float(state.time),
        wall_clock=wall,
        failure_time=outcome["time"],
        failure_message=outcome["message"],
        initial_energy=initial_energy,
        residuals=residuals,
        final_energies=dict(ledger.history[-1]),
    )
    t_final = ledger.samples[-1].t
    for name in FIT_QUANTITIES:
        try:
            fit = diag.fit_decay(ledger, name, (0.1 * t_final, t_final))
        except (InsufficientData, NonPositiveValues):
            continue
        report.fits.append(dataclasses.asdict(fit))
    try:
        verdicts = diag.boundedness_verdict(ledger)
        report.verdicts = {k: dataclasses.asdict(v) for k, v in verdicts.items()}
    except RunTooShort as exc:
        report.verdict_note = str(exc)
    report.extras.update(_tail_checks(ledger, config.energy.sigma))
    report.artifacts = {"ledger": ledger, "snapshots": snapshots, "state": state}
    return report


def _tail_checks(ledger: diag.EnergyLedger, sigma: float) -> dict:
    """Quantities behind the small-data boundedness checks."""
    t, d3u = ledger.series("d3u_2sm2")
    _, d3b = ledger.series("d3b_2sm2")
    _, b2s = ledger.series("b_2s")
    out: dict[str, Any] = {}
    out["b_2s_sup_over_initial"] = float(np.max(b2s) / b2s[0]) if b2s[0] > 0 else None
    weighted = (1.0 + t) ** (3.0 - sigma) * (d3u + d3b)
    try:
        out["g1_weighted_tail_ratio"] = _finite_or_none(diag.tail_growth_ratio(weighted))
    except RunTooShort:
        out["g1_weighted_tail_ratio"] = None
    return out


def _snapshot_steps(config: RunConfig) -> dict[int, float]:
    return {int(round(t / config.dynamics.dt)): t for t in config.snapshot_times}


def run_single(config: RunConfig) -> RunReport:
    start = _time.perf_counter()
    state = generate(config.init, config.grid)
    state, ledger, outcome, snaps = evolve(
        state, config.dynamics, config.energy, config.n_steps, _snapshot_steps(config)
    )
    return _report_from(config, state, ledger, outcome, snaps, _time.perf_counter() - start)


def _sweep_member(config: RunConfig, eps: float) -> RunReport:
    member = dataclasses.replace(
        config,
        mode=RunMode.SINGLE,
        epsilons=(),
        init=dataclasses.replace(config.init, epsilon=eps),
        output_dir=str(Path(config.output_dir) / f"eps_{eps!r}"),
    )
    return run_single(member)


def run_sweep(config: RunConfig, jobs: int = 1) -> RunReport:
    start = _time.perf_counter()
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            members = list(pool.map(_sweep_member, [config] * len(config.epsilons), config.epsilons))
    else:
        members = [_sweep_member(config, eps) for eps in config.epsilons]
    table = []
    for eps, m in zip(config.epsilons, members):
        bounded = None if m.verdicts is None else all(v["bounded"] for v in m.verdicts.values())
        table.append(
            {
                "epsilon": eps,
                "status": m.status,
                "final_E_total": m.final_energies.get("E_total"),
                "all_bounded": bounded,
            }
        )
    e_tot = [row["final_E_total"] for row in table]
    report = RunReport(
        config=config.to_dict(),
        status=COMPLETED if all(m.status == COMPLETED for m in members) else members[0].status,
        steps=sum(m.steps for m in members),
        wall_clock=_time.perf_counter() - start,
        members=members,
    )
    failed = [m for m in members if m.status != COMPLETED]
    if failed:
        report.status = failed[0].status
        report.failure_time = failed[0].failure_time
        report.failure_message = failed[0].failure_message
    order = np.argsort(config.epsilons, kind="stable")
    ordered = [e_tot[i] for i in order]
    report.extras["comparison"] = table
    report.extras["E_total_increasing_in_epsilon"] = bool(
        all(a < b for a, b in zip(ordered, ordered[1:]))
    )
    return report


# ---- linearized single-mode test ------------------------------------------


def linear_mode_matrix(nu: float) -> np.ndarray:
    """Generator of (u_hat, b_hat) on k = (0, 0, 1) with the quadratic terms removed."""
    return np.array([[-nu, 1j], [1j, 0.0]])


def linearized_solution(nu: float, t: float, u_amp: complex, b_amp: complex) -> np.ndarray:
    return scipy.linalg.expm(t * linear_mode_matrix(nu)) @ np.array([u_amp, b_amp])


def _mode_amplitudes(state: MhdState) -> np.ndarray:
    return np.array([state.u.coeffs[0, 0, 0, 1], state.b.coeffs[0, 0, 0, 1]])


def linearized_run(grid: Grid, nu: float, dt: float, t_end: float, amplitude: float = 1.0) -> dict:
    """Evolve the mode (0, 0, 1) with quadratic terms off and compare to expm."""
    u_amp, b_amp = amplitude, -0.5j * amplitude
    cfg = DynamicsConfig(dt=dt, nu=nu, quadratic=False)
    state = single_mode_state(grid, u_amp, b_amp)
    n = int(round(t_end / dt))
    for _ in range(n):
        state = step(state, cfg)
    t = n * dt
    exact = linearized_solution(nu, t, u_amp, b_amp)
    got = _mode_amplitudes(state)
    z0 = np.array([u_amp, b_amp])
    scale = float(np.linalg.norm(z0))
    error = float(np.linalg.norm(got - exact) / scale)

    eigvals, eigvecs = np.linalg.eig(linear_mode_matrix(nu))
    c0 = np.linalg.solve(eigvecs, z0)
    ct = np.linalg.solve(eigvecs, got)
    envelope = np.abs(ct) / np.abs(c0)
    expected_envelope = np.exp(eigvals.real * t)
    return {
        "t": t,
        "dt": dt,
        "steps": n,
        "error": error,
        "eigenvalues": [[float(v.real), float(v.imag)] for v in eigvals],
        "envelope": [float(v) for v in envelope],
        "expected_envelope": [float(v) for v in expected_envelope],
        "envelope_error": float(np.max(np.abs(envelope - expected_envelope))),
    }


def observed_orders(dts, errors) -> list[float]:
    return [
        float(math.log(errors[i] / errors[i + 1]) / math.log(dts[i] / dts[i + 1]))
        for i in range(len(dts) - 1)
    ]


def run_linearized(config: RunConfig) -> RunReport:
    start = _time.perf_counter()
    nu = config.dynamics.nu
    amp = config.init.epsilon if config.init.epsilon > 0 else 1.0
    main = linearized_run(config.grid, nu, config.dynamics.dt, config.t_end, amp)
    report = RunReport(config=config.to_dict(), steps=main["steps"], final_time=main["t"])
    report.extras["linearized"] = main
    if config.dts:
        dts = sorted(config.dts, reverse=True)
        errs = [linearized_run(config.grid, nu, d, config.t_end, amp)["error"] for d in dts]
        report.extras["convergence"] = {"dts": dts, "errors": errs, "orders": observed_orders(dts, errs)}
    report.wall_clock = _time.perf_counter() - start
    return report


# ---- convergence against a fine reference ---------------------------------


def state_distance(a: MhdState, b: MhdState) -> float:
    grid = a.grid
    du = a.u.coeffs - b.u.coeffs
    db = a.b.coeffs - b.b.coeffs
    return math.sqrt(2.0 * diag.energy_l2(MhdState(type(a.u)(grid, du), type(a.b)(grid, db))))


def convergence_study(
    state: MhdState, dynamics: DynamicsConfig, t_end: float, dts, refine: int = 16
) -> dict:
    """Errors at t_end against a run with dt = min(dts) / refine."""
    dts = sorted(dts, reverse=True)

    def final(dt):
        cfg = dataclasses.replace(dynamics, dt=dt)
        s = state
        for _ in range(int(round(t_end / dt))):
            s = step(s, cfg)
        return s

    ref = final(dts[-1] / refine)
    scale = math.sqrt(2.0 * diag.energy_l2(ref)) or 1.0
    errors = [state_distance(final(dt), ref) / scale for dt in dts]
    return {"dts": dts, "errors": errors, "orders": observed_orders(dts, errors), "reference_dt": dts[-1] / refine}


def run_convergence(config: RunConfig) -> RunReport:
    start = _time.perf_counter()
    state = generate(config.init, config.grid)
    try:
        result = convergence_study(state, config.dynamics, config.t_end, config.dts)
        status, msg, t_fail = COMPLETED, None, None
    except (StepRejected, NonFinite) as exc:
        result = {}
        status = STEP_REJECTED if isinstance(exc, StepRejected) else NON_FINITE
        msg, t_fail = str(exc), exc.time
    report = RunReport(config=config.to_dict(), status=status, failure_message=msg, failure_time=t_fail)
    report.extras["convergence"] = result
    report.wall_clock = _time.perf_counter() - start
    return report


def run(config: RunConfig, jobs: int = 1) -> RunReport:
    if config.mode is RunMode.SWEEP:
        return run_sweep(config, jobs=jobs)
    if config.mode is RunMode.LINEARIZED:
        return run_linearized(config)
    if config.mode is RunMode.CONVERGENCE:
        return run_convergence(config)
    return run_single(config)


def emit_report(report: RunReport, directory: str | Path) -> list[Path]:
    """Write report.json, ledger.csv and snapshots into ``directory`` (overwriting)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    path = directory / "report.json"
    path.write_text(report.to_json())
    written.append(path)
    ledger = report.ledger
    if ledger is not None:
        path = directory / "ledger.csv"
        path.write_text(diag.ledger_csv(ledger))
        written.append(path)
    for t, state in sorted(report.artifacts.get("snapshots", {}).items()):
        fields = {f"u{i + 1}": state.u.coeffs[i] for i in range(3)}
        fields.update({f"b{i + 1}": state.b.coeffs[i] for i in range(3)})
        written.extend(write_snapshot(directory / f"snapshot_t{t!r}", state.grid, fields, state.time))
    for member in report.members:
        eps = member.config["init.epsilon"]
        written.extend(emit_report(member, directory / f"eps_{eps!r}"))
    return written
