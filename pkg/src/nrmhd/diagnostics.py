"""
Time-weighted energies, invariant monitors and decay fits.

With w = 1 + t, |f|_m the H^m norm and 0 < sig < 1, the ledger tracks

    E0 = sup w^-sig (|u|^2_{2s+1} + |b|^2_{2s+1})
         + int w^{-1-sig} (|u|^2_{2s+1} + |b|^2_{2s+1})
         + int w^-sig (|u|^2_{2s+2} + |d3 b|^2_{2s})
    G0 = sup w^{1-sig} (|d3 u|^2_{2s} + |d3 b|^2_{2s}) + int w^{1-sig} |d3 u|^2_{2s+1}
    G1 = sup w^{3-sig} (|d3 u|^2_{2s-2} + |d3 b|^2_{2s-2}) + int w^{3-sig} |d3 u|^2_{2s-1}
    E1 = sup w^{3-sig} |u|^2_{2s-2} + int w^{3-sig} (|u|^2_{2s-1} + |d3 b|^2_{2s-3})
    e0 = sup |b|^2_{2s}

Suprema run over samples; integrals use the trapezoid rule between
consecutive samples.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from nrmhd.dynamics import MhdState
from nrmhd.errors import (
    InsufficientData,
    NonFinite,
    NonMonotoneTime,
    NonPositiveValues,
    RunTooShort,
)
from nrmhd.spectral import (
    VOLUME,
    Grid,
    ParityClass,
    divergence,
    mode_power,
    parity_residual,
    sobolev_norm,
    weighted_norm_sq,
)

ENERGY_NAMES = ("E0", "G0", "G1", "E1", "e0")
BOUNDED_RATIO = 1.5


@dataclass(frozen=True)
class EnergyConfig:
    sigma: float = 0.5
    s: int = 5
    sample_stride: int = 1

    def __post_init__(self):
        if not 0 < self.sigma < 1:
            raise ValueError(f"sigma must lie in (0, 1), got {self.sigma}")
        if self.s < 1:
            raise ValueError(f"s must be >= 1, got {self.s}")
        if self.sample_stride < 1:
            raise ValueError(f"sample_stride must be >= 1, got {self.sample_stride}")


@dataclass(frozen=True)
class NormSample:
    """Squared norms at one time. Names read: field, optional d3, Sobolev order.

    Orders are written relative to 2s (``2s1`` = 2s+1, ``2sm2`` = 2s-2).
    A negative order is an empty multi-index sum and evaluates to 0.
    """

    t: float
    u_2s1: float
    b_2s1: float
    u_2s2: float
    d3b_2s: float
    d3u_2s: float
    d3u_2s1: float
    d3u_2sm2: float
    d3b_2sm2: float
    d3u_2sm1: float
    u_2sm2: float
    u_2sm1: float
    d3b_2sm3: float
    b_2s: float
    u_l2: float
    b_l2: float
    grad_u_l2: float
    # nu * int_0^t ||grad u||^2 from the integrator; nan when unknown
    dissipated: float = math.nan

    @classmethod
    def constant(cls, t: float, value: float, dissipated: float = math.nan) -> NormSample:
        """Every norm equal to ``value`` (synthetic ledgers)."""
        names = [f.name for f in fields(cls) if f.name not in ("t", "dissipated")]
        return cls(t=t, dissipated=dissipated, **{n: value for n in names})


NORM_FIELDS = tuple(f.name for f in fields(NormSample) if f.name not in ("t", "dissipated"))


def sample_norms(state: MhdState, cfg: EnergyConfig) -> NormSample:
    """Every squared norm the energies need, as weighted mode sums."""
    grid = state.grid
    s = cfg.s
    pu = mode_power(state.u.coeffs, grid)
    pb = mode_power(state.b.coeffs, grid)
    k3sq = grid.k3**2

    def norm(p, order, d3=False):
        w = grid.sobolev_weight(order)
        return weighted_norm_sq(p, w * k3sq if d3 else w)

    sample = NormSample(
        t=float(state.time),
        u_2s1=norm(pu, 2 * s + 1),
        b_2s1=norm(pb, 2 * s + 1),
        u_2s2=norm(pu, 2 * s + 2),
        d3b_2s=norm(pb, 2 * s, True),
        d3u_2s=norm(pu, 2 * s, True),
        d3u_2s1=norm(pu, 2 * s + 1, True),
        d3u_2sm2=norm(pu, 2 * s - 2, True),
        d3b_2sm2=norm(pb, 2 * s - 2, True),
        d3u_2sm1=norm(pu, 2 * s - 1, True),
        u_2sm2=norm(pu, 2 * s - 2),
        u_2sm1=norm(pu, 2 * s - 1),
        d3b_2sm3=norm(pb, 2 * s - 3, True),
        b_2s=norm(pb, 2 * s),
        u_l2=norm(pu, 0),
        b_l2=norm(pb, 0),
        grad_u_l2=weighted_norm_sq(pu, grid.ksq),
        dissipated=float(state.dissipated),
    )
    bad = [n for n in NORM_FIELDS if not math.isfinite(getattr(sample, n))]
    if bad:
        raise NonFinite(f"non-finite norms: {', '.join(bad)}", time=state.time)
    return sample


def _instant(x: NormSample, sigma: float) -> tuple[dict, dict]:
    """(sup terms, integrand terms) of every energy at one sample."""
    w = 1.0 + x.t
    sup = {
        "E0": w**-sigma * (x.u_2s1 + x.b_2s1),
        "G0": w ** (1 - sigma) * (x.d3u_2s + x.d3b_2s),
        "G1": w ** (3 - sigma) * (x.d3u_2sm2 + x.d3b_2sm2),
        "E1": w ** (3 - sigma) * x.u_2sm2,
        "e0": x.b_2s,
    }
    integrand = {
        "E0": w ** (-1 - sigma) * (x.u_2s1 + x.b_2s1) + w**-sigma * (x.u_2s2 + x.d3b_2s),
        "G0": w ** (1 - sigma) * x.d3u_2s1,
        "G1": w ** (3 - sigma) * x.d3u_2sm1,
        "E1": w ** (3 - sigma) * (x.u_2sm1 + x.d3b_2sm3),
        "e0": 0.0,
    }
    return sup, integrand


@dataclass
class EnergyLedger:
    """Running suprema and trapezoid integrals of the five energies.

    Appending is the only mutation; :func:`update_ledger` returns the same
    object for chaining.
    """

    cfg: EnergyConfig
    nu: float = 1.0
    samples: list[NormSample] = field(default_factory=list)
    sup: dict[str, float] = field(default_factory=lambda: dict.fromkeys(ENERGY_NAMES, 0.0))
    integral: dict[str, float] = field(default_factory=lambda: dict.fromkeys(ENERGY_NAMES, 0.0))
    dissipation_trapezoid: float = 0.0
    history: list[dict[str, float]] = field(default_factory=list)
    balance_history: list[float] = field(default_factory=list)
    _last_integrand: dict | None = field(default=None, repr=False)

    @property
    def time(self) -> float:
        return self.samples[-1].t if self.samples else -math.inf

    def energies(self) -> dict[str, float]:
        e = {k: self.sup[k] + self.integral[k] for k in ENERGY_NAMES}
        e["E_total"] = sum(e[k] for k in ENERGY_NAMES)
        return e

    def series(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        """(t, values) for a NormSample field or an energy name."""
        t = np.array([x.t for x in self.samples])
        if name in NORM_FIELDS or name == "dissipated":
            return t, np.array([getattr(x, name) for x in self.samples])
        if name in ENERGY_NAMES or name == "E_total":
            return t, np.array([h[name] for h in self.history])
        if name == "balance_residual":
            return t, np.array(self.balance_history)
        raise KeyError(f"unknown quantity {name!r}")


def update_ledger(ledger: EnergyLedger, sample: NormSample, cfg: EnergyConfig | None = None) -> EnergyLedger:
    cfg = cfg or ledger.cfg
    if sample.t < ledger.time:
        raise NonMonotoneTime(f"sample at t={sample.t} precedes ledger time {ledger.time}")
    sup, integrand = _instant(sample, cfg.sigma)
    for k in ENERGY_NAMES:
        ledger.sup[k] = max(ledger.sup[k], sup[k])
    if ledger.samples:
        prev = ledger.samples[-1]
        dt = sample.t - prev.t
        for k in ENERGY_NAMES:
            ledger.integral[k] += 0.5 * dt * (ledger._last_integrand[k] + integrand[k])
        ledger.dissipation_trapezoid += 0.5 * dt * ledger.nu * (prev.grad_u_l2 + sample.grad_u_l2)
    ledger._last_integrand = integrand
    ledger.samples.append(sample)
    ledger.history.append(ledger.energies())
    ledger.balance_history.append(balance_residual(ledger) if len(ledger.samples) > 1 else 0.0)
    return ledger


def balance_residual(ledger: EnergyLedger) -> float:
    """1/2(|u|^2+|b|^2)(t) - 1/2(|u|^2+|b|^2)(0) + nu int_0^t |grad u|^2.

    Uses the integrator-accumulated dissipation when every sample carries
    it, else the trapezoid rule over samples.
    """
    if len(ledger.samples) < 2:
        raise InsufficientData("balance residual needs at least two samples")
    first, last = ledger.samples[0], ledger.samples[-1]
    if math.isfinite(first.dissipated) and math.isfinite(last.dissipated):
        dissipated = last.dissipated - first.dissipated
    else:
        dissipated = ledger.dissipation_trapezoid
    return 0.5 * (last.u_l2 + last.b_l2) - 0.5 * (first.u_l2 + first.b_l2) + dissipated


@dataclass(frozen=True)
class DecayFit:
    quantity: str
    slope: float
    amplitude: float
    t_lo: float
    t_hi: float
    residual_rms: float
    n_samples: int


def fit_power_law(t: np.ndarray, y: np.ndarray, quantity: str, window: tuple[float, float]) -> DecayFit:
    """Least-squares slope of log y against log(1 + t) inside the window."""
    t_lo, t_hi = window
    if not t_lo < t_hi:
        raise InsufficientData(f"empty window [{t_lo}, {t_hi}]")
    sel = (t >= t_lo) & (t <= t_hi)
    if sel.sum() < 8:
        raise InsufficientData(f"{int(sel.sum())} samples in [{t_lo}, {t_hi}], need >= 8")
    ys = y[sel]
    if np.any(ys <= 0) or not np.all(np.isfinite(ys)):
        raise NonPositiveValues(f"{quantity} has non-positive values in the window")
    x = np.log1p(t[sel])
    ly = np.log(ys)
    slope, intercept = np.polyfit(x, ly, 1)
    resid = ly - (slope * x + intercept)
    return DecayFit(
        quantity=quantity,
        slope=float(slope),
        amplitude=float(np.exp(intercept)),
        t_lo=float(t_lo),
        t_hi=float(t_hi),
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        n_samples=int(sel.sum()),
    )


def fit_decay(ledger: EnergyLedger, quantity: str, window: tuple[float, float]) -> DecayFit:
    t, y = ledger.series(quantity)
    return fit_power_law(t, y, quantity, window)


@dataclass(frozen=True)
class Verdict:
    final: float
    ratio: float
    bounded: bool


def tail_growth_ratio(values: np.ndarray) -> float:
    """max over the last quarter of samples / max over the second quarter."""
    n = len(values)
    if n < 4:
        raise RunTooShort(f"{n} samples, need at least 4")
    q = n // 4
    second = np.max(values[q : 2 * q])
    last = np.max(values[n - q :])
    if second == 0.0:
        return 1.0 if last == 0.0 else math.inf
    return float(last / second)


def boundedness_verdict(ledger: EnergyLedger, min_decades: float = 2.0) -> dict[str, Verdict]:
    if len(ledger.samples) < 4:
        raise RunTooShort(f"{len(ledger.samples)} samples, need at least 4")
    t0, t1 = ledger.samples[0].t, ledger.samples[-1].t
    decades = math.log10((1 + t1) / (1 + t0))
    if decades < min_decades - 1e-12:
        raise RunTooShort(f"run covers {decades:.2f} decades of (1+t), need {min_decades}")
    out = {}
    for name in ENERGY_NAMES + ("E_total",):
        _, v = ledger.series(name)
        r = tail_growth_ratio(v)
        out[name] = Verdict(final=float(v[-1]), ratio=r, bounded=r <= BOUNDED_RATIO)
    return out


@dataclass(frozen=True)
class InvariantResiduals:
    divergence_u: float
    divergence_b: float
    parity_u: float
    parity_b: float
    mean_u: float
    mean_b: float


def invariant_residuals(state: MhdState) -> InvariantResiduals:
    """Relative divergence, parity residuals and absolute k = 0 amplitudes."""

    def rel_div(v):
        ref = sobolev_norm(v, 1)
        d = sobolev_norm(divergence(v), 0)
        return d / ref if ref > 0 else d

    return InvariantResiduals(
        divergence_u=rel_div(state.u),
        divergence_b=rel_div(state.b),
        parity_u=parity_residual(state.u, ParityClass.U_SYMMETRY),
        parity_b=parity_residual(state.b, ParityClass.B_SYMMETRY),
        mean_u=float(np.max(np.abs(state.u.coeffs[:, 0, 0, 0]))),
        mean_b=float(np.max(np.abs(state.b.coeffs[:, 0, 0, 0]))),
    )


def energy_l2(state: MhdState) -> float:
    """1/2 (||u||^2 + ||b||^2) in L2."""
    grid: Grid = state.grid
    p = mode_power(state.u.coeffs, grid) + mode_power(state.b.coeffs, grid)
    return 0.5 * VOLUME * float(np.sum(p))


# ---- CSV ---------------------------------------------------------------

CSV_COLUMNS = ("t",) + NORM_FIELDS + ("dissipated",) + ENERGY_NAMES + ("E_total", "balance_residual")


def ledger_csv(ledger: EnergyLedger) -> str:
    """One row per sample; floats written with repr so output is byte-stable."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for x, e, r in zip(ledger.samples, ledger.history, ledger.balance_history):
        row = asdict(x)
        row.update(e)
        row["balance_residual"] = r
        w.writerow([repr(float(row[c])) for c in CSV_COLUMNS])
    return buf.getvalue()


def read_ledger_csv(text: str) -> dict[str, np.ndarray]:
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        return {c: np.array([]) for c in CSV_COLUMNS}
    return {c: np.array([float(r[c]) for r in rows]) for c in rows[0]}
