import json

import numpy as np
import pytest

from tailwise.errors import ByteRangeError, ParseError
from tailwise.manifest import load_manifest, save_manifest
from tailwise.model import ModelConfig, build_model
from tailwise.spectral import LayerRole, WeightMatrix


def tiny_matrices(seed=0):
    rng = np.random.default_rng(seed)
    return [
        WeightMatrix("embed", LayerRole.EMBEDDING, rng.standard_normal((6, 4))),
        WeightMatrix("blocks.0.att.q", LayerRole.ATT_Q, rng.standard_normal((4, 4))),
        WeightMatrix("blocks.0.ffn.up", LayerRole.FFN_UP, rng.standard_normal((4, 8))),
    ]


class TestRoundTrip:
    def test_f64_round_trip_bit_identical(self, tmp_path):
        model = build_model(ModelConfig(vocab=16, d_model=16, n_layers=1, n_heads=2,
                                        context=8, seed=4, dtype="f64"))
        original = model.weight_matrices()
        path = save_manifest(tmp_path, original, dtype="f64")
        loaded = load_manifest(path)
        assert [w.name for w in loaded] == [w.name for w in original]
        assert [w.role for w in loaded] == [w.role for w in original]
        for a, b in zip(original, loaded):
            np.testing.assert_array_equal(a.values, b.values)

    def test_f32_widening_exact(self, tmp_path):
        original = tiny_matrices()
        path = save_manifest(tmp_path, original, dtype="f32")
        loaded = load_manifest(path)
        for a, b in zip(original, loaded):
            np.testing.assert_array_equal(a.values.astype(np.float32).astype(np.float64),
                                          b.values)
            assert b.values.dtype == np.float64


class TestValidation:
    def write_manifest(self, tmp_path, layers, payload_f64=64):
        (tmp_path / "weights.bin").write_bytes(b"\x00" * payload_f64 * 8)
        doc = {"version": 1, "layers": layers}
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps(doc))
        return path

    def layer(self, name="a", rows=2, cols=2, offset=0, dtype="f64", file="weights.bin"):
        return {"name": name, "role": "att.q", "rows": rows, "cols": cols,
                "dtype": dtype, "file": file, "byte_offset": offset}

    def test_overlapping_ranges_rejected(self, tmp_path):
        path = self.write_manifest(
            tmp_path, [self.layer("a", offset=0), self.layer("b", offset=16)]
        )
        with pytest.raises(ByteRangeError):
            load_manifest(path)

    def test_range_beyond_file_rejected(self, tmp_path):
        path = self.write_manifest(tmp_path, [self.layer("a", rows=100, cols=100)])
        with pytest.raises(ByteRangeError):
            load_manifest(path)

    def test_adjacent_ranges_ok(self, tmp_path):
        path = self.write_manifest(
            tmp_path, [self.layer("a", offset=0), self.layer("b", offset=32)]
        )
        assert len(load_manifest(path)) == 2

    def test_duplicate_names_rejected(self, tmp_path):
        path = self.write_manifest(tmp_path, [self.layer("a"), self.layer("a", offset=32)])
        with pytest.raises(ParseError):
            load_manifest(path)

    def test_bad_json_rejected(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text("{not json")
        with pytest.raises(ParseError):
            load_manifest(path)

    def test_wrong_version_rejected(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps({"version": 2, "layers": []}))
        with pytest.raises(ParseError):
            load_manifest(path)

    def test_unknown_dtype_rejected(self, tmp_path):
        path = self.write_manifest(tmp_path, [self.layer(dtype="f16")])
        with pytest.raises(ParseError):
            load_manifest(path)

    def test_missing_file_rejected(self, tmp_path):
        path = self.write_manifest(tmp_path, [self.layer(file="nope.bin")])
        with pytest.raises(ParseError):
            load_manifest(path)

    def test_unknown_role_maps_to_other_with_warning(self, tmp_path, caplog):
        path = self.write_manifest(tmp_path, [self.layer() | {"role": "mystery"}])
        with caplog.at_level("WARNING"):
            loaded = load_manifest(path)
        assert loaded[0].role is LayerRole.OTHER_2D
        assert any("mystery" in rec.message for rec in caplog.records)

    def test_row_major_little_endian_layout(self, tmp_path):
        values = np.arange(6, dtype="<f8").reshape(2, 3)
        (tmp_path / "weights.bin").write_bytes(values.tobytes())
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps({
            "version": 1,
            "layers": [{"name": "w", "role": "other", "rows": 2, "cols": 3,
                        "dtype": "f64", "file": "weights.bin", "byte_offset": 0}],
        }))
        loaded = load_manifest(path)
        np.testing.assert_array_equal(loaded[0].values, [[0, 1, 2], [3, 4, 5]])
