import json

import numpy as np
import pytest

from nrmhd.errors import GridMismatch
from nrmhd.snapshot import full_to_half, half_to_full, read_snapshot, write_snapshot
from nrmhd.spectral import Grid, transform_forward


class TestLayout:
    def test_full_spectrum_matches_numpy(self, grid16, rng):
        x = rng.standard_normal(grid16.shape)
        f = transform_forward(x, grid16)
        full = half_to_full(f.coeffs, grid16)
        # full-lattice coefficient at k equals the half-spectrum lookup
        for k in [(-3, 2, -1), (-1, 0, 0), (5, -7, 4), (-8, 0, 3)]:
            expected = f.coeff(k) if k[0] > -8 else np.conj(f.coeffs[8, (-k[1]) % 16, (-k[2]) % 16])
            assert full[k[0] % 16, k[1] % 16, k[2] % 16] == pytest.approx(expected, abs=1e-15)

    def test_half_roundtrip(self, grid16, rng):
        c = transform_forward(rng.standard_normal(grid16.shape), grid16).coeffs
        assert np.array_equal(full_to_half(half_to_full(c, grid16), grid16), c)


class TestFiles:
    def test_roundtrip(self, tmp_path, grid16, rng):
        fields = {f"u{i}": transform_forward(rng.standard_normal(grid16.shape), grid16).coeffs for i in (1, 2)}
        blob, side = write_snapshot(tmp_path / "snap_t1.5", grid16, fields, 1.5)
        assert blob.name == "snap_t1.5.bin" and side.name == "snap_t1.5.json"
        assert blob.stat().st_size == 2 * 16**3 * 16
        meta = json.loads(side.read_text())
        assert meta == {"n": 16, "layout": "full-complex", "fields": ["u1", "u2"], "time": 1.5}
        grid, back, t = read_snapshot(tmp_path / "snap_t1.5")
        assert grid == grid16 and t == 1.5
        for name in fields:
            assert np.array_equal(back[name], fields[name])

    def test_byte_layout(self, tmp_path):
        g = Grid(8)
        c = np.zeros(g.spectral_shape, complex)
        c[0, 0, 1] = 2.0 + 3.0j
        c[0, 0, 7] = 2.0 - 3.0j
        blob, _ = write_snapshot(tmp_path / "one", g, {"f": c}, 0.0)
        raw = np.frombuffer(blob.read_bytes(), dtype="<f8")
        # k = (0, 0, 1) is element 1: k3 runs fastest
        assert raw[2:4].tolist() == [2.0, 3.0]
        assert raw[14:16].tolist() == [2.0, -3.0]

    def test_shape_mismatch(self, tmp_path, grid16):
        with pytest.raises(GridMismatch):
            write_snapshot(tmp_path / "bad", grid16, {"f": np.zeros((5, 16, 16), complex)}, 0.0)

    def test_truncated_blob(self, tmp_path, grid16):
        blob, _ = write_snapshot(tmp_path / "s", grid16, {"f": np.zeros(grid16.spectral_shape, complex)}, 0.0)
        blob.write_bytes(blob.read_bytes()[:100])
        with pytest.raises(GridMismatch):
            read_snapshot(tmp_path / "s")
