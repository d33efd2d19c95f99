"""
Fourier function space on the periodic box T^3 = [-pi, pi]^3.

Real fields are stored as half-spectra: the k1 axis holds only
k1 = 0..N/2 (the real-transform axis), k2 and k3 use full FFT ordering
0, 1, ..., N/2-1, -N/2, ..., -1. Keeping k3 full makes the x3-reflection a
plain index flip, which the parity algebra relies on.

Coefficient convention: f(x) = sum_k c(k) exp(i k.x) with the grid
x_j = -pi + 2 pi j / N, so cos(x1) has c(+-1, 0, 0) = 1/2.

Sobolev norms use the unit-weight multi-index sum

    ||f||^2_{H^m} = sum_{|alpha| <= m} ||d^alpha f||^2_{L^2}
                  = (2 pi)^3 sum_k |c(k)|^2 sum_{|alpha| <= m} k^(2 alpha)

including the (2 pi)^3 volume factor.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import NamedTuple, Union

import numpy as np
import scipy.fft

from nrmhd.errors import GridMismatch, PreconditionViolated

VOLUME = (2.0 * np.pi) ** 3

# last entry is the real-transform (halved) axis
_FFT_AXES = (-2, -1, -3)


class DealiasRule(str, enum.Enum):
    TWO_THIRDS = "two_thirds"
    NONE = "none"


@dataclass(frozen=True)
class Grid:
    """Uniform N^3 grid on [-pi, pi]^3 with its wavenumber lattice."""

    n: int

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or isinstance(self.n, bool):
            raise GridMismatch(f"grid size must be an integer, got {self.n!r}")
        if self.n < 8 or self.n % 2:
            raise GridMismatch(f"grid size must be even and >= 8, got {self.n}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def spectral_shape(self) -> tuple[int, int, int]:
        return (self.n // 2 + 1, self.n, self.n)

    @cached_property
    def k1(self) -> np.ndarray:
        k = np.arange(self.n // 2 + 1, dtype=float)
        return _readonly(k[:, None, None])

    @cached_property
    def k2(self) -> np.ndarray:
        k = np.fft.fftfreq(self.n, 1.0 / self.n)
        return _readonly(k[None, :, None])

    @cached_property
    def k3(self) -> np.ndarray:
        k = np.fft.fftfreq(self.n, 1.0 / self.n)
        return _readonly(k[None, None, :])

    def wavenumber(self, axis: int) -> np.ndarray:
        """Broadcastable wavenumber array for axis 1, 2 or 3."""
        if axis == 1:
            return self.k1
        if axis == 2:
            return self.k2
        if axis == 3:
            return self.k3
        raise ValueError(f"axis must be 1, 2 or 3, got {axis}")

    @cached_property
    def ksq(self) -> np.ndarray:
        return _readonly(self.k1**2 + self.k2**2 + self.k3**2)

    @cached_property
    def multiplicity(self) -> np.ndarray:
        """Number of full-lattice modes each half-spectrum entry stands for."""
        m = np.full(self.n // 2 + 1, 2.0)
        m[0] = 1.0
        m[-1] = 1.0
        return _readonly(m[:, None, None])

    @cached_property
    def nyquist(self) -> np.ndarray:
        """True on every mode with some |k_i| = N/2."""
        half = self.n // 2
        mask = (np.abs(self.k1) == half) | (np.abs(self.k2) == half) | (np.abs(self.k3) == half)
        return _readonly(mask)

    @cached_property
    def shift(self) -> np.ndarray:
        """Phase (-1)^(k1+k2+k3) from placing the grid origin at -pi."""
        parity = (self.k1 + self.k2 + self.k3).astype(np.int64) % 2
        return _readonly(1.0 - 2.0 * parity)

    def dealias_mask(self, rule: DealiasRule | str = DealiasRule.TWO_THIRDS) -> np.ndarray:
        return _dealias_mask(self.n, DealiasRule(rule))

    def kmax(self, rule: DealiasRule | str = DealiasRule.TWO_THIRDS) -> int:
        """Largest per-axis wavenumber that survives dealiasing."""
        if DealiasRule(rule) is DealiasRule.TWO_THIRDS:
            return (self.n - 1) // 3
        return self.n // 2 - 1

    def sobolev_weight(self, order: int) -> np.ndarray:
        return _sobolev_weight(self.n, int(order))

    def points(self) -> np.ndarray:
        return -np.pi + 2.0 * np.pi * np.arange(self.n) / self.n

    def mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        x = self.points()
        return tuple(np.meshgrid(x, x, x, indexing="ij"))


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@lru_cache(maxsize=None)
def _dealias_mask(n: int, rule: DealiasRule) -> np.ndarray:
    grid = Grid(n)
    if rule is DealiasRule.NONE:
        return _readonly(~grid.nyquist)
    # 3|k| < N on every axis keeps quadratic products alias-free
    keep = (3 * np.abs(grid.k1) < n) & (3 * np.abs(grid.k2) < n) & (3 * np.abs(grid.k3) < n)
    return _readonly(keep)


@lru_cache(maxsize=None)
def _sobolev_weight(n: int, order: int) -> np.ndarray:
    """sum over multi-indices |alpha| <= order of k1^2a1 k2^2a2 k3^2a3."""
    grid = Grid(n)
    shape = grid.spectral_shape
    if order < 0:
        return _readonly(np.zeros(shape))
    x = np.broadcast_to(grid.k1**2, shape)
    y = np.broadcast_to(grid.k2**2, shape)
    z = np.broadcast_to(grid.k3**2, shape)
    # partial geometric sums in z: zsum[j] = sum_{c <= j} z^c
    zsum = [np.ones(shape)]
    for _ in range(order):
        zsum.append(zsum[-1] * z + 1.0)
    total = np.zeros(shape)
    xa = np.ones(shape)
    for a in range(order + 1):
        yb = np.ones(shape)
        inner = np.zeros(shape)
        for b in range(order - a + 1):
            inner += yb * zsum[order - a - b]
            yb = yb * y
        total += xa * inner
        xa = xa * x
    return _readonly(total)


def forward(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Real grid samples (..., N, N, N) to half-spectrum coefficients."""
    if values.shape[-3:] != grid.shape:
        raise GridMismatch(f"expected trailing shape {grid.shape}, got {values.shape}")
    return scipy.fft.rfftn(values, axes=_FFT_AXES, norm="forward") * grid.shift


def inverse(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    """Half-spectrum coefficients to real grid samples."""
    if coeffs.shape[-3:] != grid.spectral_shape:
        raise GridMismatch(f"expected trailing shape {grid.spectral_shape}, got {coeffs.shape}")
    return scipy.fft.irfftn(coeffs * grid.shift, s=grid.shape, axes=_FFT_AXES, norm="forward")


def mode_power(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    """|c|^2 per half-spectrum entry, weighted by multiplicity, summed over leading axes."""
    p = (coeffs.real**2 + coeffs.imag**2) * grid.multiplicity
    while p.ndim > 3:
        p = p.sum(axis=0)
    return p


def weighted_norm_sq(power: np.ndarray, weight: np.ndarray) -> float:
    return float(VOLUME * np.sum(power * weight))


def flip_k3(coeffs: np.ndarray) -> np.ndarray:
    """Coefficients of f(x_h, -x3): index k3 -> -k3 along the last axis."""
    return np.roll(coeffs[..., ::-1], 1, axis=-1)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """One real scalar field on T^3 held as Fourier coefficients."""

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        if self.coeffs.shape != self.grid.spectral_shape:
            raise GridMismatch(
                f"coefficient shape {self.coeffs.shape} does not match {self.grid.spectral_shape}"
            )

    @classmethod
    def zeros(cls, grid: Grid) -> SpectralField:
        return cls(grid, np.zeros(grid.spectral_shape, dtype=complex))

    @classmethod
    def from_values(cls, values: np.ndarray, grid: Grid) -> SpectralField:
        return transform_forward(values, grid)

    def values(self) -> np.ndarray:
        return inverse(self.coeffs, self.grid)

    def coeff(self, k: tuple[int, int, int]) -> complex:
        """Coefficient of the full-lattice mode k (negative k1 via conjugation)."""
        n = self.grid.n
        k1, k2, k3 = (int(v) for v in k)
        for v in (k1, k2, k3):
            if not -n // 2 <= v < n // 2:
                raise IndexError(f"wavenumber {k} outside the {n}^3 lattice")
        if k1 < 0:
            return complex(np.conj(self.coeffs[-k1, -k2 % n, -k3 % n]))
        return complex(self.coeffs[k1, k2 % n, k3 % n])

    def __add__(self, other: SpectralField) -> SpectralField:
        _same_grid(self, other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: SpectralField) -> SpectralField:
        _same_grid(self, other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> SpectralField:
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> SpectralField:
        return SpectralField(self.grid, -self.coeffs)


@dataclass(frozen=True, eq=False)
class VectorField:
    """Three scalar fields on one grid; components 1, 2 horizontal, 3 vertical."""

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        if self.coeffs.shape != (3,) + self.grid.spectral_shape:
            raise GridMismatch(
                f"coefficient shape {self.coeffs.shape} does not match (3,) + {self.grid.spectral_shape}"
            )

    @classmethod
    def zeros(cls, grid: Grid) -> VectorField:
        return cls(grid, np.zeros((3,) + grid.spectral_shape, dtype=complex))

    @classmethod
    def from_components(cls, c1: SpectralField, c2: SpectralField, c3: SpectralField) -> VectorField:
        _same_grid(c1, c2)
        _same_grid(c1, c3)
        return cls(c1.grid, np.stack([c1.coeffs, c2.coeffs, c3.coeffs]))

    @classmethod
    def from_values(cls, values: np.ndarray, grid: Grid) -> VectorField:
        if values.shape != (3,) + grid.shape:
            raise GridMismatch(f"expected shape (3,) + {grid.shape}, got {values.shape}")
        return cls(grid, forward(values, grid))

    def component(self, axis: int) -> SpectralField:
        if axis not in (1, 2, 3):
            raise ValueError(f"component index must be 1, 2 or 3, got {axis}")
        return SpectralField(self.grid, self.coeffs[axis - 1])

    def values(self) -> np.ndarray:
        return inverse(self.coeffs, self.grid)

    def __add__(self, other: VectorField) -> VectorField:
        _same_grid(self, other)
        return VectorField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: VectorField) -> VectorField:
        _same_grid(self, other)
        return VectorField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> VectorField:
        return VectorField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__


Field = Union[SpectralField, VectorField]


def _same_grid(a, b) -> None:
    if a.grid != b.grid:
        raise GridMismatch(f"grid mismatch: N={a.grid.n} vs N={b.grid.n}")


def _rewrap(f: Field, coeffs: np.ndarray) -> Field:
    return type(f)(f.grid, coeffs)


def transform_forward(values: np.ndarray, grid: Grid) -> SpectralField:
    values = np.asarray(values)
    if np.iscomplexobj(values):
        raise GridMismatch("transform_forward expects real samples")
    return SpectralField(grid, forward(values.astype(float, copy=False), grid))


def transform_inverse(f: Field) -> np.ndarray:
    return f.values()


def derivative(f: Field, axis: int) -> Field:
    """Spectral partial derivative along axis 1, 2 or 3; Nyquist modes zeroed."""
    k = f.grid.wavenumber(axis)
    out = f.coeffs * (1j * k)
    out[..., f.grid.nyquist] = 0.0
    return _rewrap(f, out)


def divergence(w: VectorField) -> SpectralField:
    g = w.grid
    div = 1j * (g.k1 * w.coeffs[0] + g.k2 * w.coeffs[1] + g.k3 * w.coeffs[2])
    div[g.nyquist] = 0.0
    return SpectralField(g, div)


def sobolev_norm(f: Field, order: int) -> float:
    """||f||_{H^order} under the unit-weight multi-index convention."""
    if order < 0:
        raise ValueError(f"Sobolev order must be >= 0, got {order}")
    power = mode_power(f.coeffs, f.grid)
    return float(np.sqrt(weighted_norm_sq(power, f.grid.sobolev_weight(order))))


def anisotropic_norm(f: Field, order: int) -> float:
    """||d3 f||_{H^order}."""
    return sobolev_norm(derivative(f, 3), order)


def leray_project(w: VectorField) -> VectorField:
    """Remove the gradient part mode by mode; the k = 0 mode passes through."""
    return VectorField(w.grid, leray_coeffs(w.coeffs, w.grid))


def leray_coeffs(c: np.ndarray, grid: Grid) -> np.ndarray:
    ksq = grid.ksq
    inv = np.divide(1.0, ksq, out=np.zeros_like(ksq), where=ksq > 0)
    kdotw = (grid.k1 * c[0] + grid.k2 * c[1] + grid.k3 * c[2]) * inv
    return np.stack([c[0] - grid.k1 * kdotw, c[1] - grid.k2 * kdotw, c[2] - grid.k3 * kdotw])


class ParityClass(str, enum.Enum):
    """Expected x3-reflection behaviour of a field."""

    U_SYMMETRY = "u"  # (even, even, odd)
    B_SYMMETRY = "b"  # (odd, odd, even)
    EVEN_SCALAR = "even"
    ODD_SCALAR = "odd"
    NONE = "none"

    @property
    def component_signs(self) -> tuple[int, ...]:
        """+1 for even, -1 for odd, per component."""
        return {
            ParityClass.U_SYMMETRY: (1, 1, -1),
            ParityClass.B_SYMMETRY: (-1, -1, 1),
            ParityClass.EVEN_SCALAR: (1,),
            ParityClass.ODD_SCALAR: (-1,),
        }[self]


def parity_decompose(f: SpectralField) -> tuple[SpectralField, SpectralField]:
    flipped = flip_k3(f.coeffs)
    even = 0.5 * (f.coeffs + flipped)
    odd = 0.5 * (f.coeffs - flipped)
    return SpectralField(f.grid, even), SpectralField(f.grid, odd)


def symmetrize(coeffs: np.ndarray, sign: int) -> np.ndarray:
    """Project onto even (sign=+1) or odd (sign=-1) functions of x3."""
    return 0.5 * (coeffs + sign * flip_k3(coeffs))


def parity_residual(f: Field, expected: ParityClass | str) -> float:
    """Relative L2 size of the wrong-parity part; 0 for the zero field."""
    expected = ParityClass(expected)
    if expected is ParityClass.NONE:
        return 0.0
    signs = expected.component_signs
    coeffs = f.coeffs if isinstance(f, VectorField) else f.coeffs[None]
    if len(signs) != coeffs.shape[0]:
        raise PreconditionViolated(
            f"parity class {expected.value!r} does not apply to a {type(f).__name__}"
        )
    wrong = np.stack([symmetrize(c, -s) for c, s in zip(coeffs, signs)])
    total = float(np.sum(mode_power(coeffs, f.grid)))
    if total == 0.0:
        return 0.0
    return float(np.sqrt(np.sum(mode_power(wrong, f.grid)) / total))


@dataclass(frozen=True, eq=False)
class PlaneField:
    """A field on T^2 (x1, x2), half-spectrum along k1."""

    grid: Grid
    coeffs: np.ndarray

    def values(self) -> np.ndarray:
        shift = self.grid.shift[:, :, 0]
        return scipy.fft.irfftn(
            self.coeffs * shift, s=(self.grid.n, self.grid.n), axes=(-1, -2), norm="forward"
        )

    def l2_norm(self) -> float:
        """L2 norm over T^2."""
        m = self.grid.multiplicity[:, :, 0]
        return float(np.sqrt((2 * np.pi) ** 2 * np.sum(m * np.abs(self.coeffs) ** 2)))


def slice_mean(f: SpectralField) -> PlaneField:
    """Average over x3: the k3 = 0 plane of coefficients."""
    return PlaneField(f.grid, f.coeffs[:, :, 0].copy())


class PoincareResult(NamedTuple):
    lhs: float
    rhs: float
    ratio: float


def poincare_check(f: SpectralField, order: int, rtol: float = 1e-12) -> PoincareResult:
    """Compare ||f||_{H^k} with ||d3 f||_{H^k} for a field with zero x3-averages.

    On the 2 pi-periodic torus every surviving mode has |k3| >= 1, so the
    constant is exactly 1 and ratio <= 1 up to round-off.
    """
    lhs = sobolev_norm(f, order)
    mean = slice_mean(f).l2_norm() * np.sqrt(2 * np.pi)
    if mean > rtol * max(sobolev_norm(f, 0), np.finfo(float).tiny):
        raise PreconditionViolated(f"x3-average is nonzero (L2 size {mean:.3e})")
    rhs = anisotropic_norm(f, order)
    ratio = lhs / rhs if rhs > 0 else 0.0
    return PoincareResult(lhs, rhs, ratio)
