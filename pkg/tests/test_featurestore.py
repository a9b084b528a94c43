import struct

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from protoalign import featurestore as fs


def make_store(sentences, n_dim, language="en"):
    mats = [np.asarray(s, dtype=np.float32).reshape(-1, n_dim)
            for s in sentences]
    manifest = fs.Manifest(language=language, model_name="test-model", layer=7,
                           treebank_file="x.conllu", n_sentences=len(mats),
                           n_dim=n_dim, content_checksum=0, pooling="mean")
    return fs.FeatureStore(n_dim, mats, manifest)


class TestFnv1a:
    def test_known_vectors(self):
        # standard FNV-1a 64-bit reference values
        assert fs.fnv1a64(b"") == 0xCBF29CE484222325
        assert fs.fnv1a64(b"a") == 0xAF63DC4C8601EC8C
        assert fs.fnv1a64(b"foobar") == 0x85944171F73967E8


class TestRoundTrip:
    def test_write_read_identity(self, tmp_path):
        rng = np.random.default_rng(0)
        store = make_store([rng.normal(size=(4, 3)), rng.normal(size=(1, 3))], 3)
        path = tmp_path / "s.pcfs"
        fs.write_store(store, path)
        loaded = fs.read_store(path)
        assert loaded.n_dim == 3
        assert loaded.n_sentences == 2
        for a, b in zip(loaded.sentences, store.sentences):
            assert_array_equal(a, b)
        assert loaded.manifest == store.manifest

    def test_round_trip_extreme_floats(self, tmp_path):
        vals = np.array([[0.0, -0.0, 1e-38], [3.4e38, -3.4e38, 1e-45]],
                        dtype=np.float32)
        store = make_store([vals], 3)
        path = tmp_path / "s.pcfs"
        fs.write_store(store, path)
        assert_array_equal(fs.read_store(path).sentences[0], vals)

    def test_identical_content_identical_bytes(self, tmp_path):
        rng = np.random.default_rng(1)
        mats = [rng.normal(size=(3, 2)).astype(np.float32)]
        p1, p2 = tmp_path / "a.pcfs", tmp_path / "b.pcfs"
        fs.write_store(make_store([m.copy() for m in mats], 2), p1)
        fs.write_store(make_store([m.copy() for m in mats], 2), p2)
        assert p1.read_bytes() == p2.read_bytes()
        assert fs.manifest_path(p1).read_text() == fs.manifest_path(p2).read_text()

    def test_layout_arithmetic(self, tmp_path):
        # 1 sentence, 2 tokens, n_dim 3; oracle sums the declared layout:
        # magic + version + n_dim + n_sentences + (n_tokens + payload) + checksum
        store = make_store([np.zeros((2, 3), dtype=np.float32)], 3)
        path = tmp_path / "s.pcfs"
        fs.write_store(store, path)
        expected = 4 + 4 + 4 + 4 + (4 + 2 * 3 * 4) + 8
        assert path.stat().st_size == expected == 52


class TestErrors:
    def write_valid(self, tmp_path):
        store = make_store([np.ones((2, 3), dtype=np.float32)], 3)
        path = tmp_path / "s.pcfs"
        fs.write_store(store, path)
        return path

    def test_flipped_byte_is_checksum_error(self, tmp_path):
        path = self.write_valid(tmp_path)
        data = bytearray(path.read_bytes())
        data[20] ^= 0xFF
        path.write_bytes(bytes(data))
        with pytest.raises(fs.ChecksumError):
            fs.read_store(path)

    def test_bad_magic(self, tmp_path):
        path = self.write_valid(tmp_path)
        data = bytearray(path.read_bytes())
        data[:4] = b"XXXX"
        path.write_bytes(bytes(data))
        with pytest.raises(fs.BadMagicError):
            fs.read_store(path)

    def test_version_mismatch(self, tmp_path):
        path = self.write_valid(tmp_path)
        data = bytearray(path.read_bytes())
        body = bytearray(data[:-8])
        struct.pack_into("<I", body, 4, 99)
        body_checksum = fs.fnv1a64(bytes(body))
        path.write_bytes(bytes(body) + struct.pack("<Q", body_checksum))
        with pytest.raises(fs.VersionError):
            fs.read_store(path)

    def test_truncated(self, tmp_path):
        path = self.write_valid(tmp_path)
        data = path.read_bytes()
        # keep the header, cut into the payload, re-checksum so truncation
        # is what trips rather than the checksum
        cut = data[:30]
        path.write_bytes(cut + struct.pack("<Q", fs.fnv1a64(cut)))
        with pytest.raises(fs.TruncatedError):
            fs.read_store(path)

    def test_missing_manifest(self, tmp_path):
        path = self.write_valid(tmp_path)
        fs.manifest_path(path).unlink()
        with pytest.raises(fs.ManifestError):
            fs.read_store(path)

    def test_get_sentence_bounds(self, tmp_path):
        path = self.write_valid(tmp_path)
        store = fs.read_store(path)
        assert fs.get_sentence(store, 0).shape == (2, 3)
        with pytest.raises(IndexError):
            fs.get_sentence(store, 1)

    def test_ragged_dimensions_rejected(self):
        with pytest.raises(ValueError):
            make_store([np.zeros((2, 3), dtype=np.float32),
                        np.zeros((2, 4), dtype=np.float32)], 3)


class TestManifest:
    def test_checksum_survives_json(self, tmp_path):
        # u64 checksums above 2**53 must round-trip exactly via JSON
        store = make_store([np.ones((1, 2), dtype=np.float32)], 2)
        path = tmp_path / "s.pcfs"
        fs.write_store(store, path)
        manifest = fs.Manifest.from_json(
            fs.manifest_path(path).read_text(encoding="utf-8"))
        assert manifest.content_checksum == store.manifest.content_checksum

    def test_manifest_fields(self, tmp_path):
        import json
        store = make_store([np.ones((1, 2), dtype=np.float32)], 2, language="fi")
        path = tmp_path / "s.pcfs"
        fs.write_store(store, path)
        doc = json.loads(fs.manifest_path(path).read_text(encoding="utf-8"))
        assert sorted(doc) == ["content_checksum", "language", "layer",
                               "model_name", "n_dim", "n_sentences",
                               "pooling", "treebank_file"]
        assert doc["language"] == "fi"
        assert doc["layer"] == 7
