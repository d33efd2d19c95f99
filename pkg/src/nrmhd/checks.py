"""Built-in invariant battery behind ``nrmhd check``."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from nrmhd import diagnostics as diag
from nrmhd.dynamics import DynamicsConfig, step
from nrmhd.harness import linearized_run
from nrmhd.initial import InitSpec, generate, theorem_norm
from nrmhd.spectral import (
    VOLUME,
    Grid,
    ParityClass,
    SpectralField,
    VectorField,
    divergence,
    forward,
    leray_project,
    parity_decompose,
    parity_residual,
    poincare_check,
    sobolev_norm,
    transform_forward,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.name}: {self.detail} ({self.seconds:.2f}s)"


def random_real_field(rng: np.random.Generator, grid: Grid) -> SpectralField:
    f = transform_forward(rng.standard_normal(grid.shape), grid)
    c = f.coeffs.copy()
    c[grid.nyquist] = 0.0
    return SpectralField(grid, c)


def random_vector(rng: np.random.Generator, grid: Grid) -> VectorField:
    c = forward(rng.standard_normal((3,) + grid.shape), grid)
    c[:, grid.nyquist] = 0.0
    return VectorField(grid, c)


def poincare_battery(
    n_fields: int = 100, n: int = 16, orders=range(5), seed: int = 2016
) -> tuple[float, float]:
    """Max ratio ||f||_{H^k} / ||d3 f||_{H^k} over random fields with zero k3 = 0
    plane, and the max deviation from 1 over single |k3| = 1 modes."""
    grid = Grid(n)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_fields):
        f = random_real_field(rng, grid)
        c = f.coeffs.copy()
        c[:, :, 0] = 0.0
        f = SpectralField(grid, c)
        for k in orders:
            worst = max(worst, poincare_check(f, k).ratio)
    sat = 0.0
    x1, x2, x3 = grid.mesh()
    for values in (np.sin(x3), np.cos(x3), np.cos(x1 + 2 * x2) * np.sin(x3), np.cos(3 * x1) * np.cos(x3)):
        f = transform_forward(values, grid)
        for k in orders:
            sat = max(sat, abs(poincare_check(f, k).ratio - 1.0))
    return worst, sat


def _roundtrip() -> tuple[bool, str]:
    grid = Grid(32)
    x = np.random.default_rng(1).standard_normal(grid.shape)
    err = np.max(np.abs(transform_forward(x, grid).values() - x)) / np.max(np.abs(x))
    return err < 1e-12, f"max roundtrip error {err:.2e} of field max"


def _parseval() -> tuple[bool, str]:
    grid = Grid(32)
    rng = np.random.default_rng(2)
    f, g = rng.standard_normal(grid.shape), rng.standard_normal(grid.shape)
    physical = np.sum(f * g) * (2 * np.pi / grid.n) ** 3
    fc, gc = forward(f, grid), forward(g, grid)
    spectral = VOLUME * np.sum(grid.multiplicity * (fc * np.conj(gc)).real)
    rel = abs(physical - spectral) / abs(physical)
    return rel < 1e-12, f"relative mismatch {rel:.2e}"


def _leray() -> tuple[bool, str]:
    grid = Grid(32)
    w = random_vector(np.random.default_rng(3), grid)
    p = leray_project(w)
    div = sobolev_norm(divergence(p), 0) / sobolev_norm(w, 1)
    idem = np.max(np.abs(leray_project(p).coeffs - p.coeffs))
    return div <= 1e-12 and idem < 1e-13, f"divergence {div:.2e}, idempotency {idem:.2e}"


def _parity_algebra() -> tuple[bool, str]:
    grid = Grid(16)
    f = random_real_field(np.random.default_rng(4), grid)
    even, odd = parity_decompose(f)
    recomb = np.max(np.abs((even + odd).coeffs - f.coeffs))
    fixed = max(
        np.max(np.abs(parity_decompose(even)[0].coeffs - even.coeffs)),
        np.max(np.abs(parity_decompose(odd)[1].coeffs - odd.coeffs)),
    )
    cross = max(np.max(np.abs(parity_decompose(even)[1].coeffs)), np.max(np.abs(parity_decompose(odd)[0].coeffs)))
    ok = recomb < 1e-14 and fixed == 0.0 and cross == 0.0
    return ok, f"recombination {recomb:.1e}, fixed-point {fixed:.1e}, cross {cross:.1e}"


def _poincare() -> tuple[bool, str]:
    worst, sat = poincare_battery()
    return worst <= 1 + 1e-12 and sat <= 1e-12, f"max ratio {worst:.15f}, saturation deviation {sat:.1e}"


def _initial_data() -> tuple[bool, str]:
    grid = Grid(16)
    state = generate(InitSpec(seed=7, epsilon=0.05, k_max=3), grid)
    r = diag.invariant_residuals(state)
    norm = theorem_norm(state.u.coeffs, state.b.coeffs, grid, 5)
    ok = (
        r.parity_u == 0.0
        and r.parity_b == 0.0
        and r.mean_u == 0.0
        and r.mean_b == 0.0
        and max(r.divergence_u, r.divergence_b) < 1e-13
        and abs(norm - 0.05) <= 1e-12
    )
    return ok, f"parity ({r.parity_u:.0e}, {r.parity_b:.0e}), calibration error {abs(norm - 0.05):.1e}"


def _short_run() -> tuple[bool, str]:
    grid = Grid(16)
    state = generate(InitSpec(seed=11, epsilon=0.05, s=2, k_max=2), grid)
    state = type(state)(state.u * 1e4, state.b * 1e4)  # visible nonlinearity
    cfg = DynamicsConfig(dt=1e-3)
    e0 = diag.energy_l2(state)
    worst_parity = 0.0
    for _ in range(200):
        state = step(state, cfg)
        worst_parity = max(
            worst_parity,
            parity_residual(state.u, ParityClass.U_SYMMETRY),
            parity_residual(state.b, ParityClass.B_SYMMETRY),
        )
    balance = abs(diag.energy_l2(state) - e0 + state.dissipated) / e0
    ok = balance < 1e-8 and worst_parity < 1e-8
    return ok, f"energy balance {balance:.1e} of initial energy, max parity residual {worst_parity:.1e}"


def _linearized() -> tuple[bool, str]:
    r = linearized_run(Grid(16), 1.0, 1e-3, 2.0)
    ok = r["error"] < 1e-6 and r["envelope_error"] < 1e-6
    return ok, f"error vs matrix exponential {r['error']:.1e}, envelope error {r['envelope_error']:.1e}"


CHECKS: tuple[tuple[str, Callable[[], tuple[bool, str]]], ...] = (
    ("transform roundtrip", _roundtrip),
    ("Parseval", _parseval),
    ("Leray projection", _leray),
    ("parity algebra", _parity_algebra),
    ("anisotropic Poincare battery", _poincare),
    ("initial data hypotheses", _initial_data),
    ("short nonlinear run", _short_run),
    ("linearized mode (0,0,1)", _linearized),
)


def run_checks() -> list[CheckResult]:
    results = []
    for name, fn in CHECKS:
        start = time.perf_counter()
        try:
            passed, detail = fn()
        except Exception as exc:  # a crash is a failed check, not a crashed battery
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(passed), detail, time.perf_counter() - start))
    return results
