"""
Run configuration: a flat ``section.key = value`` text format.

Blank lines and ``#`` comments are ignored. Lists are comma separated.
Recognised keys and defaults::

    grid.n                  = 32
    dynamics.nu             = 1.0
    dynamics.dt             = 0.002
    dynamics.dealias        = two_thirds     # or none
    dynamics.filter         = false
    dynamics.enforce_parity = false
    dynamics.quadratic      = true
    dynamics.cfl            = 0.5
    init.seed               = 0
    init.epsilon            = (required unless run.mode = sweep)
    init.s                  = 5
    init.spectrum           = low_modes      # or power_law
    init.k_max              = 2
    init.exponent           = 2.0
    energy.sigma            = 0.5
    energy.s                = init.s
    energy.sample_stride    = 1
    run.mode                = single         # sweep | convergence | linearized
    run.t_end               = 10.0
    run.epsilons            = (sweep only)
    run.dts                 = (convergence only)
    run.snapshot_times      = (none)
    run.output_dir          = out
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

from nrmhd.diagnostics import EnergyConfig
from nrmhd.dynamics import DynamicsConfig
from nrmhd.errors import GridMismatch, ParseError, PreconditionViolated, ValidationError
from nrmhd.initial import InitSpec, SpectrumShape
from nrmhd.spectral import DealiasRule, Grid


class RunMode(str, enum.Enum):
    SINGLE = "single"
    SWEEP = "sweep"
    CONVERGENCE = "convergence"
    LINEARIZED = "linearized"


_KEYS = {
    "grid.n": "int",
    "dynamics.nu": "float",
    "dynamics.dt": "float",
    "dynamics.dealias": "str",
    "dynamics.filter": "bool",
    "dynamics.enforce_parity": "bool",
    "dynamics.quadratic": "bool",
    "dynamics.cfl": "float",
    "init.seed": "int",
    "init.epsilon": "float",
    "init.s": "int",
    "init.spectrum": "str",
    "init.k_max": "int",
    "init.exponent": "float",
    "energy.sigma": "float",
    "energy.s": "int",
    "energy.sample_stride": "int",
    "run.mode": "str",
    "run.t_end": "float",
    "run.epsilons": "floats",
    "run.dts": "floats",
    "run.snapshot_times": "floats",
    "run.output_dir": "str",
}

_BOOLS = {"true": True, "yes": True, "on": True, "1": True, "false": False, "no": False, "off": False, "0": False}


@dataclass(frozen=True)
class RunConfig:
    grid: Grid
    dynamics: DynamicsConfig
    init: InitSpec
    energy: EnergyConfig
    t_end: float = 10.0
    mode: RunMode = RunMode.SINGLE
    epsilons: tuple[float, ...] = ()
    dts: tuple[float, ...] = ()
    snapshot_times: tuple[float, ...] = ()
    output_dir: str = "out"
    source: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dynamics.dt))

    def to_dict(self) -> dict:
        return {
            "grid.n": self.grid.n,
            "dynamics.nu": self.dynamics.nu,
            "dynamics.dt": self.dynamics.dt,
            "dynamics.dealias": self.dynamics.dealias.value,
            "dynamics.filter": self.dynamics.spectral_filter,
            "dynamics.enforce_parity": self.dynamics.enforce_parity,
            "dynamics.quadratic": self.dynamics.quadratic,
            "dynamics.cfl": self.dynamics.cfl_limit,
            "init.seed": self.init.seed,
            "init.epsilon": self.init.epsilon,
            "init.s": self.init.s,
            "init.spectrum": self.init.spectrum.value,
            "init.k_max": self.init.k_max,
            "init.exponent": self.init.exponent,
            "energy.sigma": self.energy.sigma,
            "energy.s": self.energy.s,
            "energy.sample_stride": self.energy.sample_stride,
            "run.mode": self.mode.value,
            "run.t_end": self.t_end,
            "run.epsilons": list(self.epsilons),
            "run.dts": list(self.dts),
            "run.snapshot_times": list(self.snapshot_times),
            "run.output_dir": self.output_dir,
        }

    def to_text(self) -> str:
        lines = []
        for key, value in self.to_dict().items():
            if isinstance(value, list):
                if not value:
                    continue
                value = ", ".join(repr(v) for v in value)
            elif isinstance(value, bool):
                value = str(value).lower()
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"


def _convert(kind: str, raw: str, key: str, line: int):
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            return _BOOLS[raw.lower()]
        if kind == "floats":
            return tuple(float(v) for v in raw.split(",") if v.strip())
        return raw
    except (ValueError, KeyError):
        raise ParseError(f"bad {kind} value {raw!r} for {key}", line=line) from None


def parse_entries(text: str) -> dict:
    entries: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ParseError(f"expected 'section.key = value', got {stripped!r}", line=lineno)
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _KEYS:
            raise ParseError(f"unknown key {key!r}", line=lineno)
        if key in entries:
            raise ParseError(f"duplicate key {key!r}", line=lineno)
        entries[key] = _convert(_KEYS[key], raw, key, lineno)
    return entries


def _enum(cls, value, key):
    try:
        return cls(value)
    except ValueError:
        allowed = ", ".join(m.value for m in cls)
        raise ValidationError(key, f"{value!r} is not one of {allowed}") from None


def build_config(entries: dict) -> RunConfig:
    get = entries.get

    n = get("grid.n", 32)
    try:
        grid = Grid(n)
    except GridMismatch as exc:
        raise ValidationError("grid.n", str(exc)) from None

    dt = get("dynamics.dt", 0.002)
    if not (dt > 0 and math.isfinite(dt)):
        raise ValidationError("dynamics.dt", f"must be positive, got {dt}")
    nu = get("dynamics.nu", 1.0)
    if not (nu > 0 and math.isfinite(nu)):
        raise ValidationError("dynamics.nu", f"must be positive, got {nu}")
    cfl = get("dynamics.cfl", 0.5)
    if not cfl > 0:
        raise ValidationError("dynamics.cfl", f"must be positive, got {cfl}")
    dynamics = DynamicsConfig(
        dt=dt,
        nu=nu,
        dealias=_enum(DealiasRule, get("dynamics.dealias", "two_thirds"), "dynamics.dealias"),
        spectral_filter=get("dynamics.filter", False),
        enforce_parity=get("dynamics.enforce_parity", False),
        quadratic=get("dynamics.quadratic", True),
        cfl_limit=cfl,
    )

    mode = _enum(RunMode, get("run.mode", "single"), "run.mode")
    epsilons = get("run.epsilons", ())
    if mode is RunMode.SWEEP and not epsilons:
        raise ValidationError("run.epsilons", "sweep mode needs a nonempty list")
    if any(not (e >= 0 and math.isfinite(e)) for e in epsilons):
        raise ValidationError("run.epsilons", "every epsilon must be >= 0")
    if "init.epsilon" in entries:
        epsilon = entries["init.epsilon"]
    elif mode is RunMode.SWEEP:
        epsilon = epsilons[0]
    else:
        raise ValidationError("init.epsilon", "missing")
    if not (epsilon >= 0 and math.isfinite(epsilon)):
        raise ValidationError("init.epsilon", f"must be >= 0, got {epsilon}")

    s = get("init.s", 5)
    if s < 1:
        raise ValidationError("init.s", f"must be >= 1, got {s}")
    k_max = get("init.k_max", 2)
    if k_max < 1:
        raise ValidationError("init.k_max", f"must be >= 1, got {k_max}")
    init = InitSpec(
        seed=get("init.seed", 0),
        epsilon=epsilon,
        s=s,
        spectrum=_enum(SpectrumShape, get("init.spectrum", "low_modes"), "init.spectrum"),
        k_max=k_max,
        exponent=get("init.exponent", 2.0),
    )
    try:
        init.check_grid(grid)
    except PreconditionViolated as exc:
        raise ValidationError("init.k_max", str(exc)) from None

    sigma = get("energy.sigma", 0.5)
    if not 0 < sigma < 1:
        raise ValidationError("energy.sigma", f"must satisfy 0 < sigma < 1, got {sigma}")
    energy_s = get("energy.s", s)
    if energy_s < 1:
        raise ValidationError("energy.s", f"must be >= 1, got {energy_s}")
    stride = get("energy.sample_stride", 1)
    if stride < 1:
        raise ValidationError("energy.sample_stride", f"must be >= 1, got {stride}")
    energy = EnergyConfig(sigma=sigma, s=energy_s, sample_stride=stride)

    t_end = get("run.t_end", 10.0)
    if not (t_end > 0 and math.isfinite(t_end)):
        raise ValidationError("run.t_end", f"must be positive, got {t_end}")
    if int(round(t_end / dt)) < 1:
        raise ValidationError("run.t_end", "shorter than one time step")
    dts = get("run.dts", ())
    if mode is RunMode.CONVERGENCE and len(dts) < 2:
        raise ValidationError("run.dts", "convergence mode needs at least two time steps")
    if any(not d > 0 for d in dts):
        raise ValidationError("run.dts", "every dt must be positive")
    snaps = get("run.snapshot_times", ())
    if any(not 0 <= t <= t_end for t in snaps):
        raise ValidationError("run.snapshot_times", "times must lie in [0, t_end]")

    return RunConfig(
        grid=grid,
        dynamics=dynamics,
        init=init,
        energy=energy,
        t_end=t_end,
        mode=mode,
        epsilons=tuple(epsilons),
        dts=tuple(dts),
        snapshot_times=tuple(sorted(snaps)),
        output_dir=get("run.output_dir", "out"),
        source=dict(entries),
    )


def parse_config(text: str) -> RunConfig:
    """Parse and validate a config document; raises ParseError or ValidationError."""
    return build_config(parse_entries(text))


def load_config(path: str | Path) -> RunConfig:
    return parse_config(Path(path).read_text())
