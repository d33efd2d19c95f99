"""Random small initial data inside the x3-reflection symmetry class."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from nrmhd.dynamics import MhdState
from nrmhd.errors import DegenerateDraft, PreconditionViolated
from nrmhd.spectral import (
    VOLUME,
    Grid,
    ParityClass,
    VectorField,
    leray_coeffs,
    mode_power,
    parity_residual,
    symmetrize,
    weighted_norm_sq,
)

ALPHA = VOLUME  # integral of B3 over the box

_MAX_DRAFTS = 16


class SpectrumShape(str, enum.Enum):
    LOW_MODES = "low_modes"
    POWER_LAW = "power_law"


@dataclass(frozen=True)
class InitSpec:
    seed: int
    epsilon: float
    s: int = 5
    spectrum: SpectrumShape = SpectrumShape.LOW_MODES
    k_max: int = 2
    exponent: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "spectrum", SpectrumShape(self.spectrum))
        if not (self.epsilon >= 0 and math.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.s < 1:
            raise ValueError(f"s must be >= 1, got {self.s}")
        if self.k_max < 1:
            raise ValueError(f"k_max must be >= 1, got {self.k_max}")

    def check_grid(self, grid: Grid) -> None:
        if 3 * self.k_max >= grid.n:
            raise PreconditionViolated(
                f"k_max={self.k_max} lies outside the dealiased shell of N={grid.n}"
            )


def theorem_norm(u: np.ndarray, b: np.ndarray, grid: Grid, s: int) -> float:
    """||u||_{H^{2s+1}} + ||grad b||_{H^{2s}} (full gradient, all three partials)."""
    pu = mode_power(u, grid)
    pb = mode_power(b, grid)
    u_norm = math.sqrt(weighted_norm_sq(pu, grid.sobolev_weight(2 * s + 1)))
    grad_b = math.sqrt(weighted_norm_sq(pb, grid.ksq * grid.sobolev_weight(2 * s)))
    return u_norm + grad_b


def _envelope(spec: InitSpec, grid: Grid) -> np.ndarray:
    kinf = np.maximum(np.maximum(np.abs(grid.k1), np.abs(grid.k2)), np.abs(grid.k3))
    inside = (kinf <= spec.k_max) & (grid.ksq > 0)
    if spec.spectrum is SpectrumShape.LOW_MODES:
        env = np.ones(grid.spectral_shape)
    else:
        kmag = np.sqrt(np.where(grid.ksq > 0, grid.ksq, 1.0))
        env = np.broadcast_to(kmag ** (-spec.exponent), grid.spectral_shape).copy()
    return np.where(inside, env, 0.0)


def _hermitian_plane(c: np.ndarray, n: int) -> np.ndarray:
    """Make the k1 = 0 plane satisfy c(0, -k2, -k3) = conj c(0, k2, k3)."""
    plane = c[..., 0, :, :]
    idx = (-np.arange(n)) % n
    mirrored = np.conj(plane[..., idx, :][..., :, idx])
    c = c.copy()
    c[..., 0, :, :] = 0.5 * (plane + mirrored)
    return c


def _draft(rng: np.random.Generator, spec: InitSpec, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    shape = (6,) + grid.spectral_shape
    raw = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    raw *= _envelope(spec, grid)
    signs = ParityClass.U_SYMMETRY.component_signs + ParityClass.B_SYMMETRY.component_signs
    raw = np.stack([symmetrize(c, s) for c, s in zip(raw, signs)])
    raw = _hermitian_plane(raw, grid.n)
    raw[:, grid.nyquist] = 0.0
    raw[:, 0, 0, 0] = 0.0
    return leray_coeffs(raw[:3], grid), leray_coeffs(raw[3:], grid)


def generate(spec: InitSpec, grid: Grid) -> MhdState:
    """Divergence-free, mean-free (u0, b0) in the symmetry class with
    ||u0||_{H^{2s+1}} + ||grad b0||_{H^{2s}} = epsilon.

    Deterministic in (seed, spec, grid). A zero-norm draft is redrawn from
    the next substream of the seed.
    """
    spec.check_grid(grid)
    if spec.epsilon == 0:
        return MhdState.zeros(grid)
    for attempt in range(_MAX_DRAFTS):
        rng = np.random.default_rng([spec.seed, attempt])
        u, b = _draft(rng, spec, grid)
        norm = theorem_norm(u, b, grid, spec.s)
        if norm > 0 and math.isfinite(norm):
            break
    else:
        raise DegenerateDraft(f"{_MAX_DRAFTS} drafts with zero norm (seed={spec.seed})")
    scale = spec.epsilon / norm
    state = MhdState(VectorField(grid, u * scale), VectorField(grid, b * scale))
    if parity_residual(state.u, ParityClass.U_SYMMETRY) or parity_residual(state.b, ParityClass.B_SYMMETRY):
        raise AssertionError("Leray projection broke the symmetry class")
    return state


def single_mode_state(grid: Grid, u_amp: complex, b_amp: complex) -> MhdState:
    """u = (2 Re(u_amp e^{i x3}), 0, 0), b likewise: the mode k = (0, 0, 1).

    u_amp and b_amp are the k = (0, 0, +1) coefficients of u1 and b1. The
    symmetry class needs u1 even and b1 odd in x3, i.e. u_amp real and b_amp
    purely imaginary; other values are accepted but leave the class.
    """
    u = np.zeros((3,) + grid.spectral_shape, dtype=complex)
    b = np.zeros_like(u)
    u[0, 0, 0, 1] = u_amp
    u[0, 0, 0, -1] = np.conj(u_amp)
    b[0, 0, 0, 1] = b_amp
    b[0, 0, 0, -1] = np.conj(b_amp)
    return MhdState(VectorField(grid, u), VectorField(grid, b))


def full_field(state: MhdState) -> VectorField:
    """B = b + e3."""
    c = state.b.coeffs.copy()
    c[2, 0, 0, 0] += 1.0
    return VectorField(state.grid, c)
