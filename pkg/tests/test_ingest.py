import json
import struct

import numpy as np
import pytest

from blm import (
    EmptyInputError,
    IngestError,
    ManifestError,
    NpyFormatError,
    digit_histogram,
    layerwise_report,
    load_manifest,
    mlh,
    model_mlh,
    parse_npy,
    write_npy,
)
from blm.ingest import model_histogram, tensor_histogram


def npy_bytes(array):
    import io
    buf = io.BytesIO()
    np.save(buf, array)  # independent writer for round-trip checks
    return buf.getvalue()


class TestParseNpy:
    def test_header_arithmetic(self):
        arr = np.arange(6, dtype=np.float32).reshape(2, 3)
        parsed = parse_npy(npy_bytes(arr))
        assert parsed.shape == (2, 3)
        np.testing.assert_array_equal(parsed, arr)

    def test_f8_round_trip_bit_exact(self):
        rng = np.random.default_rng(0)
        arr = rng.standard_normal((7, 11))
        parsed = parse_npy(npy_bytes(arr))
        assert parsed.tobytes() == arr.tobytes()

    def test_own_writer_read_by_numpy(self, tmp_path):
        rng = np.random.default_rng(1)
        for dtype in (np.float32, np.float64):
            arr = rng.standard_normal((3, 5)).astype(dtype)
            path = tmp_path / f"t_{dtype.__name__}.npy"
            write_npy(path, arr)
            np.testing.assert_array_equal(np.load(path), arr)
            np.testing.assert_array_equal(parse_npy(path.read_bytes()), arr)

    def test_scalar_and_1d_shapes(self):
        assert parse_npy(npy_bytes(np.float64(3.5))).shape == ()
        assert parse_npy(npy_bytes(np.array([1.0, 2.0]))).shape == (2,)

    def test_bad_magic(self):
        with pytest.raises(NpyFormatError, match="magic"):
            parse_npy(b"NOTNPY\x01\x00" + b"\x00" * 64)

    def test_unsupported_version(self):
        data = bytearray(npy_bytes(np.zeros(3)))
        data[6] = 2
        with pytest.raises(NpyFormatError, match="version"):
            parse_npy(bytes(data))

    def test_unsupported_dtype(self):
        with pytest.raises(NpyFormatError, match="dtype"):
            parse_npy(npy_bytes(np.zeros(3, dtype=np.int64)))

    def test_fortran_order_rejected(self):
        arr = np.asfortranarray(np.arange(6, dtype=np.float64).reshape(2, 3))
        with pytest.raises(NpyFormatError, match="fortran"):
            parse_npy(npy_bytes(arr))

    def test_payload_length_mismatch(self):
        data = npy_bytes(np.zeros(4))
        with pytest.raises(NpyFormatError, match="payload"):
            parse_npy(data[:-8])

    def test_garbage_header(self):
        header = b"not a dict" + b" " * 53 + b"\n"
        data = b"\x93NUMPY\x01\x00" + struct.pack("<H", len(header)) + header
        with pytest.raises(NpyFormatError):
            parse_npy(data)


def make_manifest(entries, **kwargs):
    doc = {"model_name": "m", "tensors": entries}
    doc.update(kwargs)
    return load_manifest(json.dumps(doc))


class TestManifest:
    def test_minimal(self):
        m = make_manifest([{"name": "w", "path": "w.npy", "format": "npy"}])
        assert m.model_name == "m"
        assert len(m.tensors) == 1

    def test_duplicate_names(self):
        with pytest.raises(ManifestError, match="duplicate"):
            make_manifest([
                {"name": "w", "path": "a.npy", "format": "npy"},
                {"name": "w", "path": "b.npy", "format": "npy"},
            ])

    def test_default_exclusion_patterns(self):
        m = make_manifest([
            {"name": "layer1.weight", "path": "a.npy", "format": "npy"},
            {"name": "layer1.bias", "path": "b.npy", "format": "npy"},
            {"name": "bn1.running_mean", "path": "c.npy", "format": "npy"},
            {"name": "LayerNorm.weight", "path": "d.npy", "format": "npy"},
        ])
        assert [t.name for t in m.included()] == ["layer1.weight"]

    def test_explicit_exclude_flag(self):
        m = make_manifest([
            {"name": "w", "path": "a.npy", "format": "npy", "exclude": True},
            {"name": "v", "path": "b.npy", "format": "npy"},
        ])
        assert [t.name for t in m.included()] == ["v"]

    def test_raw_requires_shape(self):
        with pytest.raises(ManifestError, match="shape"):
            make_manifest([{"name": "w", "path": "w.bin", "format": "raw-f32"}])

    def test_unknown_format(self):
        with pytest.raises(ManifestError, match="format"):
            make_manifest([{"name": "w", "path": "w.pt", "format": "pickle"}])

    def test_bad_json(self):
        with pytest.raises(ManifestError):
            load_manifest("{not json")

    def test_unknown_keys(self):
        with pytest.raises(ManifestError, match="unknown"):
            make_manifest([{"name": "w", "path": "a.npy", "format": "npy",
                            "dtype": "f32"}])


@pytest.fixture
def toy_model(tmp_path):
    rng = np.random.default_rng(42)
    tensors = {
        "conv.weight": rng.standard_normal((8, 3, 3, 3)) * 0.1,
        "fc.weight": rng.standard_normal((10, 72)).astype(np.float32),
        "fc.bias": np.zeros(10),
    }
    for name, arr in tensors.items():
        write_npy(tmp_path / f"{name}.npy", arr)
    doc = {
        "model_name": "toy",
        "tensors": [
            {"name": name, "path": f"{name}.npy", "format": "npy"}
            for name in tensors
        ],
    }
    (tmp_path / "manifest.json").write_text(json.dumps(doc))
    return tmp_path, tensors


class TestModelMlh:
    def test_single_tensor_equals_direct_mlh(self, toy_model):
        tmp_path, tensors = toy_model
        m = make_manifest([
            {"name": "conv.weight", "path": "conv.weight.npy", "format": "npy"}
        ])
        score, hist = model_mlh(m, tmp_path)
        direct = mlh(tensors["conv.weight"].ravel())
        assert score.value == direct.value
        assert hist.total == tensors["conv.weight"].size

    def test_histogram_is_merge_of_tensors(self, toy_model):
        tmp_path, tensors = toy_model
        m = load_manifest((tmp_path / "manifest.json").read_text())
        _, hist = model_mlh(m, tmp_path)
        expected = digit_histogram(tensors["conv.weight"].ravel()).merge(
            digit_histogram(tensors["fc.weight"].astype(np.float64).ravel())
        )
        np.testing.assert_array_equal(hist.counts, expected.counts)

    def test_order_independence(self, toy_model):
        tmp_path, _ = toy_model
        entries = [
            {"name": "conv.weight", "path": "conv.weight.npy", "format": "npy"},
            {"name": "fc.weight", "path": "fc.weight.npy", "format": "npy"},
        ]
        s1, _ = model_mlh(make_manifest(entries), tmp_path)
        s2, _ = model_mlh(make_manifest(entries[::-1]), tmp_path)
        assert s1 == s2

    def test_all_excluded(self, toy_model):
        tmp_path, _ = toy_model
        m = make_manifest([
            {"name": "fc.bias", "path": "fc.bias.npy", "format": "npy"}
        ])
        with pytest.raises(EmptyInputError):
            model_mlh(m, tmp_path)

    def test_missing_file_reports_tensor_name(self, tmp_path):
        m = make_manifest([{"name": "ghost", "path": "nope.npy", "format": "npy"}])
        with pytest.raises(IngestError, match="ghost"):
            model_mlh(m, tmp_path)


class TestOtherFormats:
    def test_raw_streaming_matches_whole_file(self, tmp_path):
        rng = np.random.default_rng(7)
        arr = rng.standard_normal(3_000_000).astype(np.float32)  # > 2 chunks
        arr.tofile(tmp_path / "w.bin")
        m = make_manifest([{
            "name": "w", "path": "w.bin", "format": "raw-f32",
            "shape": [3_000_000],
        }])
        hist = model_histogram(m, tmp_path)
        whole = digit_histogram(arr.astype(np.float64))
        np.testing.assert_array_equal(hist.counts, whole.counts)

    def test_raw_f64(self, tmp_path):
        arr = np.array([1.5, 250.0, 0.0])
        arr.tofile(tmp_path / "w.bin")
        m = make_manifest([{
            "name": "w", "path": "w.bin", "format": "raw-f64", "shape": [3],
        }])
        hist = model_histogram(m, tmp_path)
        assert hist.counts[1] == 1 and hist.counts[2] == 1
        assert hist.excluded == 1

    def test_raw_size_mismatch(self, tmp_path):
        np.zeros(5).tofile(tmp_path / "w.bin")
        m = make_manifest([{
            "name": "w", "path": "w.bin", "format": "raw-f64", "shape": [6],
        }])
        with pytest.raises(IngestError, match="size"):
            model_histogram(m, tmp_path)

    def test_csv(self, tmp_path):
        (tmp_path / "vals.csv").write_text("1.0,2.0\n30.5,0.4\n")
        m = make_manifest([{"name": "v", "path": "vals.csv", "format": "csv"}])
        hist = model_histogram(m, tmp_path)
        assert hist.total == 4
        assert hist.counts[1] == 1


class TestLayerwise:
    def test_report_count_and_consistency(self, toy_model):
        tmp_path, tensors = toy_model
        m = load_manifest((tmp_path / "manifest.json").read_text())
        reports = layerwise_report(m, tmp_path)
        assert [r.name for r in reports] == ["conv.weight", "fc.weight"]
        for report in reports:
            arr = tensors[report.name].astype(np.float64).ravel()
            assert report.mlh == mlh(arr).value
            assert report.n_values == arr.size

    def test_single_layer_equals_model_mlh(self, toy_model):
        tmp_path, _ = toy_model
        m = make_manifest([
            {"name": "conv.weight", "path": "conv.weight.npy", "format": "npy"}
        ])
        score, _ = model_mlh(m, tmp_path)
        (report,) = layerwise_report(m, tmp_path)
        assert report.mlh == score.value
