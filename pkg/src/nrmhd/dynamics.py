"""
Time evolution of the perturbation system around the background field e3:

    u_t + u.grad u - nu lap u + grad p = b.grad b + d3 b
    b_t + u.grad b = b.grad u + d3 u
    div u = div b = 0

Quadratic terms are formed in conservative form on the physical grid,
dealiased, and Leray-projected. Viscosity is absorbed exactly by an
integrating factor exp(-nu |k|^2 t) on u; b gets no dissipation at all.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft

from nrmhd.errors import NonFinite, StepRejected
from nrmhd.spectral import (
    DealiasRule,
    Grid,
    ParityClass,
    VOLUME,
    SpectralField,
    VectorField,
    symmetrize,
)

# (i, j) pairs of the symmetric stress b_i b_j - u_i u_j
_SYM_PAIRS = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))
# (i, j), i < j, of the antisymmetric flux u_i b_j - b_i u_j
_ANTI_PAIRS = ((0, 1), (0, 2), (1, 2))


class Integrator(str, enum.Enum):
    IFRK4 = "ifrk4"


@dataclass(frozen=True)
class DynamicsConfig:
    dt: float
    nu: float = 1.0
    dealias: DealiasRule = DealiasRule.TWO_THIRDS
    spectral_filter: bool = False
    enforce_parity: bool = False
    # False drops every quadratic term, leaving viscosity and the d3 coupling
    quadratic: bool = True
    cfl_limit: float = 0.5
    integrator: Integrator = Integrator.IFRK4

    def __post_init__(self):
        object.__setattr__(self, "dealias", DealiasRule(self.dealias))
        object.__setattr__(self, "integrator", Integrator(self.integrator))
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not (self.nu > 0 and math.isfinite(self.nu)):
            raise ValueError(f"nu must be positive, got {self.nu}")
        if not self.cfl_limit > 0:
            raise ValueError(f"cfl_limit must be positive, got {self.cfl_limit}")


@dataclass(frozen=True, eq=False)
class MhdState:
    """Velocity u and magnetic perturbation b (B = b + e3) at one time.

    ``dissipated`` carries nu * int_0^t ||grad u||^2 accumulated with the
    integrator's own stage weights, so the energy balance can be checked
    at the scheme's order instead of the sampling quadrature's.
    """

    u: VectorField
    b: VectorField
    time: float = 0.0
    dissipated: float = 0.0

    def __post_init__(self):
        if self.u.grid != self.b.grid:
            raise ValueError("u and b live on different grids")

    @property
    def grid(self) -> Grid:
        return self.u.grid

    @classmethod
    def zeros(cls, grid: Grid) -> MhdState:
        return cls(VectorField.zeros(grid), VectorField.zeros(grid))


@dataclass(frozen=True, eq=False)
class PressureDiagnostic:
    p: SpectralField
    forcing: VectorField = field(repr=False)


@dataclass(frozen=True, eq=False)
class _Operators:
    """Per-(grid, config) constants on the compact set of retained modes.

    The stepper never touches dealiased modes, so all spectral algebra runs
    on arrays holding only the retained wavenumbers of each axis and is
    scattered into the full half-spectrum just for the transforms.
    """

    index: tuple  # open-mesh indices of retained modes inside the half-spectrum
    ik: np.ndarray  # (3, ...) i k_j
    k: tuple  # k1, k2, k3, broadcastable
    inv_ksq: np.ndarray
    ksq: np.ndarray
    multiplicity: np.ndarray
    decay_half: np.ndarray
    decay_full: np.ndarray
    filt: np.ndarray | None
    kmax: int


@lru_cache(maxsize=32)
def _operators(grid: Grid, cfg: DynamicsConfig) -> _Operators:
    n = grid.n
    k1 = np.arange(n // 2 + 1)
    kf = np.fft.fftfreq(n, 1.0 / n).astype(int)
    if cfg.dealias is DealiasRule.TWO_THIRDS:
        i1 = np.flatnonzero(3 * k1 < n)
        i23 = np.flatnonzero(3 * np.abs(kf) < n)
    else:
        i1 = np.flatnonzero(k1 < n // 2)
        i23 = np.flatnonzero(np.abs(kf) < n // 2)
    index = np.ix_(i1, i23, i23)
    c1 = k1[i1].astype(float)[:, None, None]
    c2 = kf[i23].astype(float)[None, :, None]
    c3 = kf[i23].astype(float)[None, None, :]
    ksq = c1**2 + c2**2 + c3**2
    mult = np.where(c1 == 0, 1.0, 2.0)
    filt = None
    if cfg.spectral_filter:
        kinf = np.maximum(np.maximum(np.abs(c1), np.abs(c2)), np.abs(c3))
        filt = np.exp(-36.0 * (kinf / grid.kmax(cfg.dealias)) ** 36)
    return _Operators(
        index=index,
        ik=np.stack(np.broadcast_arrays(1j * c1, 1j * c2, 1j * c3)),
        k=(c1, c2, c3),
        inv_ksq=np.divide(1.0, ksq, out=np.zeros_like(ksq), where=ksq > 0),
        ksq=ksq,
        multiplicity=mult,
        decay_half=np.exp(-cfg.nu * ksq * cfg.dt / 2),
        decay_full=np.exp(-cfg.nu * ksq * cfg.dt),
        filt=filt,
        kmax=grid.kmax(cfg.dealias),
    )


def _compress(full: np.ndarray, ops: _Operators) -> np.ndarray:
    return full[(...,) + ops.index]


def _expand(c: np.ndarray, grid: Grid, ops: _Operators) -> np.ndarray:
    full = np.zeros(c.shape[:-3] + grid.spectral_shape, dtype=complex)
    full[(...,) + ops.index] = c
    return full


def _leray(c: np.ndarray, ops: _Operators) -> np.ndarray:
    k1, k2, k3 = ops.k
    kdotw = (k1 * c[0] + k2 * c[1] + k3 * c[2]) * ops.inv_ksq
    return np.stack([c[0] - k1 * kdotw, c[1] - k2 * kdotw, c[2] - k3 * kdotw])


def _divergence_sym(ik: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Row divergence d_j T_ij of a symmetric tensor stored as 6 entries."""
    t00, t01, t02, t11, t12, t22 = s
    return np.stack(
        [
            ik[0] * t00 + ik[1] * t01 + ik[2] * t02,
            ik[0] * t01 + ik[1] * t11 + ik[2] * t12,
            ik[0] * t02 + ik[1] * t12 + ik[2] * t22,
        ]
    )


def _divergence_anti(ik: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Row divergence d_j M_ij of an antisymmetric tensor stored as (01, 02, 12)."""
    m01, m02, m12 = a
    return np.stack(
        [
            ik[1] * m01 + ik[2] * m02,
            -ik[0] * m01 + ik[2] * m12,
            -ik[0] * m02 - ik[1] * m12,
        ]
    )


# Products are formed on the grid translated by pi in every direction, which
# skips the origin phase factor; translation commutes with pointwise products.
_AXES = (-2, -1, -3)


def _to_grid(c: np.ndarray, grid: Grid, ops: _Operators) -> np.ndarray:
    return scipy.fft.irfftn(_expand(c, grid, ops), s=grid.shape, axes=_AXES, norm="forward")


def _from_grid(x: np.ndarray, ops: _Operators) -> np.ndarray:
    return _compress(scipy.fft.rfftn(x, axes=_AXES, norm="forward"), ops)


def _forcing(uc, bc, grid: Grid, cfg: DynamicsConfig, ops: _Operators, speeds: bool = False):
    """Unprojected compact tendencies (momentum without pressure, induction).

    With ``speeds`` also returns the grid maxima of |u| and |b|.
    """
    phys = _to_grid(np.concatenate([uc, bc]), grid, ops)
    u, b = phys[:3], phys[3:]
    ik3 = ops.ik[2]
    mom = ik3 * bc
    ind = ik3 * uc
    if cfg.quadratic:
        prods = np.empty((9,) + grid.shape)
        tmp = np.empty(grid.shape)
        for n, (i, j) in enumerate(_SYM_PAIRS):
            np.multiply(b[i], b[j], out=prods[n])
            np.multiply(u[i], u[j], out=tmp)
            prods[n] -= tmp
        for n, (i, j) in enumerate(_ANTI_PAIRS):
            np.multiply(u[i], b[j], out=prods[6 + n])
            np.multiply(b[i], u[j], out=tmp)
            prods[6 + n] -= tmp
        spec = _from_grid(prods, ops)
        mom += _divergence_sym(ops.ik, spec[:6])
        ind += _divergence_anti(ops.ik, spec[6:])
    if not speeds:
        return mom, ind
    umax = float(np.sqrt(np.max(np.einsum("i...,i...->...", u, u))))
    bmax = float(np.sqrt(np.max(np.einsum("i...,i...->...", b, b))))
    return mom, ind, umax, bmax


def _tendencies(uc, bc, grid, cfg, ops, check_cfl=False, time=None):
    if not check_cfl:
        mom, ind = _forcing(uc, bc, grid, cfg, ops)
    else:
        mom, ind, umax, bmax = _forcing(uc, bc, grid, cfg, ops, speeds=True)
        cfl = cfg.dt * ops.kmax * (umax + bmax + 1.0)
        if not math.isfinite(cfl):
            raise NonFinite("non-finite velocity or magnetic field", time=time)
        if cfl > cfg.cfl_limit:
            raise StepRejected(
                f"CFL number {cfl:.3g} exceeds {cfg.cfl_limit} (dt={cfg.dt}, kmax={ops.kmax}, "
                f"max|u|={umax:.3g}, max|b|={bmax:.3g})",
                time=time,
                cfl=cfl,
            )
    return _leray(mom, ops), _leray(ind, ops)


def nonlinear_rhs(
    state: MhdState, cfg: DynamicsConfig, include_viscous: bool = False
) -> tuple[VectorField, VectorField]:
    """Right-hand side of the (u, b) system.

    By default du_dt is the non-stiff part only (the integrating factor
    owns -nu |k|^2 u); pass ``include_viscous=True`` for the full tendency.
    """
    grid = state.grid
    ops = _operators(grid, cfg)
    uc, bc = _compress(state.u.coeffs, ops), _compress(state.b.coeffs, ops)
    du, db = _tendencies(uc, bc, grid, cfg, ops, check_cfl=True, time=state.time)
    if include_viscous:
        du = du - cfg.nu * ops.ksq * uc
    return VectorField(grid, _expand(du, grid, ops)), VectorField(grid, _expand(db, grid, ops))


def _dissipation_rate(uc: np.ndarray, ops: _Operators, nu: float) -> float:
    power = ((uc.real**2 + uc.imag**2).sum(axis=0)) * ops.multiplicity
    return nu * VOLUME * float(np.sum(power * ops.ksq))


def _clean(c: np.ndarray, ops: _Operators) -> np.ndarray:
    c = _leray(c, ops)
    c[:, 0, 0, 0] = 0.0
    if ops.filt is not None:
        c *= ops.filt
    return c


def step(state: MhdState, cfg: DynamicsConfig) -> MhdState:
    """Advance by one integrating-factor RK4 (Lawson) step of size cfg.dt.

    u carries the exact factor exp(-nu |k|^2 dt); b has none. The
    output is re-projected and its k = 0 modes are zeroed.
    """
    grid = state.grid
    ops = _operators(grid, cfg)
    h = cfg.dt
    e_half, e_full = ops.decay_half, ops.decay_full
    u0, b0 = _compress(state.u.coeffs, ops), _compress(state.b.coeffs, ops)

    k1u, k1b = _tendencies(u0, b0, grid, cfg, ops, check_cfl=True, time=state.time)
    u2 = e_half * (u0 + 0.5 * h * k1u)
    b2 = b0 + 0.5 * h * k1b
    k2u, k2b = _tendencies(u2, b2, grid, cfg, ops)
    u3 = e_half * u0 + 0.5 * h * k2u
    b3 = b0 + 0.5 * h * k2b
    k3u, k3b = _tendencies(u3, b3, grid, cfg, ops)
    u4 = e_full * u0 + h * e_half * k3u
    b4 = b0 + h * k3b
    k4u, k4b = _tendencies(u4, b4, grid, cfg, ops)

    u1 = e_full * u0 + (h / 6.0) * (e_full * k1u + 2.0 * e_half * (k2u + k3u) + k4u)
    b1 = b0 + (h / 6.0) * (k1b + 2.0 * (k2b + k3b) + k4b)

    # the dissipation integral rides along as an extra RK4 component
    q = [_dissipation_rate(x, ops, cfg.nu) for x in (u0, u2, u3, u4)]
    dissipated = state.dissipated + (h / 6.0) * (q[0] + 2.0 * (q[1] + q[2]) + q[3])

    u1 = _expand(_clean(u1, ops), grid, ops)
    b1 = _expand(_clean(b1, ops), grid, ops)
    if cfg.enforce_parity:
        u1 = enforce_parity(u1, ParityClass.U_SYMMETRY)
        b1 = enforce_parity(b1, ParityClass.B_SYMMETRY)

    t1 = state.time + h
    if not (np.isfinite(u1).all() and np.isfinite(b1).all() and math.isfinite(dissipated)):
        raise NonFinite("NaN/Inf in state after step", time=t1)
    return MhdState(VectorField(grid, u1), VectorField(grid, b1), t1, dissipated)


def enforce_parity(coeffs: np.ndarray, cls: ParityClass) -> np.ndarray:
    return np.stack([symmetrize(c, s) for c, s in zip(coeffs, cls.component_signs)])


def advance(state: MhdState, cfg: DynamicsConfig, n_steps: int) -> MhdState:
    for _ in range(n_steps):
        state = step(state, cfg)
    return state


def recover_pressure(state: MhdState, cfg: DynamicsConfig | None = None) -> PressureDiagnostic:
    """Pressure from the divergence of the unprojected momentum forcing; zero mean.

    ``forcing`` holds that unprojected forcing, so forcing - grad p is the
    projected momentum tendency.
    """
    grid = state.grid
    cfg = cfg or DynamicsConfig(dt=1.0)
    ops = _operators(grid, cfg)
    uc, bc = _compress(state.u.coeffs, ops), _compress(state.b.coeffs, ops)
    mom, _ = _forcing(uc, bc, grid, cfg, ops)
    p = -(ops.ik[0] * mom[0] + ops.ik[1] * mom[1] + ops.ik[2] * mom[2]) * ops.inv_ksq
    p[0, 0, 0] = 0.0
    return PressureDiagnostic(SpectralField(grid, _expand(p, grid, ops)), VectorField(grid, _expand(mom, grid, ops)))
