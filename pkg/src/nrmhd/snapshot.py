"""Binary field snapshots.

Layout of ``<name>.bin``: for each named field in sidecar order, the full
N x N x N complex coefficient array as little-endian float64 pairs
(real, imag), row-major with k1 slowest and k3 fastest. Each axis uses FFT
ordering 0, 1, ..., N/2-1, -N/2, ..., -1. Nothing precedes the data, so the
blob is exactly ``len(fields) * N**3 * 16`` bytes.

``<name>.json`` is the sidecar::

    {"n": N, "layout": "full-complex", "fields": ["u1", ...], "time": t}
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from nrmhd.errors import GridMismatch
from nrmhd.spectral import Grid

LAYOUT = "full-complex"
_DTYPE = np.dtype("<c16")


def half_to_full(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    """Expand a half-spectrum (k1 >= 0) to the full lattice via c(-k) = conj c(k)."""
    n = grid.n
    full = np.zeros((n, n, n), dtype=complex)
    full[: n // 2 + 1] = coeffs
    neg = np.arange(n // 2 + 1, n)  # k1 = idx - n < 0
    mirror = (-np.arange(n)) % n
    full[neg] = np.conj(coeffs[(n - neg)][:, mirror][:, :, mirror])
    return full


def full_to_half(full: np.ndarray, grid: Grid) -> np.ndarray:
    return full[: grid.n // 2 + 1].copy()


def _paths(path: str | Path) -> tuple[Path, Path]:
    # append rather than replace, so names such as snapshot_t1.5 survive
    path = Path(path)
    if path.suffix in (".bin", ".json"):
        path = path.with_suffix("")
    return path.parent / (path.name + ".bin"), path.parent / (path.name + ".json")


def write_snapshot(path: str | Path, grid: Grid, fields: dict[str, np.ndarray], time: float) -> tuple[Path, Path]:
    """Write half-spectrum ``fields`` to ``path.bin`` plus ``path.json``."""
    blob, sidecar = _paths(path)
    with open(blob, "wb") as fh:
        for name, coeffs in fields.items():
            if coeffs.shape != grid.spectral_shape:
                raise GridMismatch(f"field {name!r} has shape {coeffs.shape}")
            fh.write(half_to_full(coeffs, grid).astype(_DTYPE).tobytes(order="C"))
    meta = {"n": grid.n, "layout": LAYOUT, "fields": list(fields), "time": float(time)}
    sidecar.write_text(json.dumps(meta, indent=2) + "\n")
    return blob, sidecar


def read_snapshot(path: str | Path) -> tuple[Grid, dict[str, np.ndarray], float]:
    """Inverse of :func:`write_snapshot`; returns half-spectra."""
    blob, sidecar = _paths(path)
    meta = json.loads(sidecar.read_text())
    if meta.get("layout") != LAYOUT:
        raise GridMismatch(f"unsupported snapshot layout {meta.get('layout')!r}")
    grid = Grid(int(meta["n"]))
    names = meta["fields"]
    data = blob.read_bytes()
    expected = len(names) * grid.n**3 * _DTYPE.itemsize
    if len(data) != expected:
        raise GridMismatch(f"blob holds {len(data)} bytes, expected {expected}")
    raw = np.frombuffer(data, dtype=_DTYPE)
    arrays = raw.reshape(len(names), grid.n, grid.n, grid.n)
    fields = {name: full_to_half(arrays[i].astype(complex), grid) for i, name in enumerate(names)}
    return grid, fields, float(meta["time"])
