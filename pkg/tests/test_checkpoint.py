import numpy as np
import pytest

from crisisclass.checkpoint import IntegrityError, load_checkpoint, save_checkpoint
from crisisclass.models import forward
from crisisclass.selfcheck import tiny_model


@pytest.fixture(params=["cnn", "bilstm"])
def model(request):
    return tiny_model(request.param, seed=17)


class TestRoundtrip:
    def test_params_identical(self, model, tmp_path):
        path = str(tmp_path / "m.ckpt")
        save_checkpoint(path, model, vocab_hash="vh", stopwords_hash="sh")
        loaded, header = load_checkpoint(path)
        assert sorted(loaded.params) == sorted(model.params)
        for name in model.params:
            assert np.array_equal(loaded.params[name], model.params[name])
        assert header["vocab_hash"] == "vh"
        assert header["stopwords_hash"] == "sh"
        assert header["arch"] == model.config.arch

    def test_config_roundtrip(self, model, tmp_path):
        path = str(tmp_path / "m.ckpt")
        save_checkpoint(path, model)
        loaded, _ = load_checkpoint(path)
        assert loaded.config == model.config

    def test_predictions_identical(self, model, tmp_path):
        path = str(tmp_path / "m.ckpt")
        save_checkpoint(path, model)
        loaded, _ = load_checkpoint(path)
        indices = np.array([[1, 2, 3, 4, 0, 0]])
        lengths = np.array([4])
        a, _ = forward(model, indices, lengths, mode="infer")
        b, _ = forward(loaded, indices, lengths, mode="infer")
        assert np.array_equal(a, b)

    def test_embedding_shares_params_entry(self, model, tmp_path):
        path = str(tmp_path / "m.ckpt")
        save_checkpoint(path, model)
        loaded, _ = load_checkpoint(path)
        assert loaded.params["embedding"] is loaded.embedding.matrix
        assert loaded.embedding.trainable == model.embedding.trainable


class TestDeterminism:
    def test_resave_is_byte_identical(self, model, tmp_path):
        p1, p2 = str(tmp_path / "a.ckpt"), str(tmp_path / "b.ckpt")
        save_checkpoint(p1, model, vocab_hash="v")
        save_checkpoint(p2, model, vocab_hash="v")
        assert open(p1, "rb").read() == open(p2, "rb").read()

    def test_roundtrip_resave_is_byte_identical(self, model, tmp_path):
        p1, p2 = str(tmp_path / "a.ckpt"), str(tmp_path / "b.ckpt")
        save_checkpoint(p1, model, vocab_hash="v")
        loaded, header = load_checkpoint(p1)
        save_checkpoint(p2, loaded, vocab_hash=header["vocab_hash"],
                        stopwords_hash=header["stopwords_hash"])
        assert open(p1, "rb").read() == open(p2, "rb").read()


class TestIntegrity:
    def save(self, model, tmp_path):
        path = str(tmp_path / "m.ckpt")
        save_checkpoint(path, model)
        return path

    def test_bad_magic(self, model, tmp_path):
        path = self.save(model, tmp_path)
        blob = bytearray(open(path, "rb").read())
        blob[0] ^= 0xFF
        open(path, "wb").write(bytes(blob))
        with pytest.raises(IntegrityError, match="not a"):
            load_checkpoint(path)

    @pytest.mark.parametrize("offset_frac", [0.3, 0.6, 0.9])
    def test_flipped_payload_byte(self, model, tmp_path, offset_frac):
        path = self.save(model, tmp_path)
        blob = bytearray(open(path, "rb").read())
        blob[int(len(blob) * offset_frac)] ^= 0x01
        open(path, "wb").write(bytes(blob))
        with pytest.raises(IntegrityError, match="checksum"):
            load_checkpoint(path)

    def test_truncated_file(self, model, tmp_path):
        path = self.save(model, tmp_path)
        blob = open(path, "rb").read()
        open(path, "wb").write(blob[:len(blob) // 2])
        with pytest.raises(IntegrityError):
            load_checkpoint(path)

    def test_empty_file(self, tmp_path):
        path = str(tmp_path / "empty.ckpt")
        open(path, "wb").close()
        with pytest.raises(IntegrityError):
            load_checkpoint(path)

    def test_unsupported_version(self, model, tmp_path):
        # a checkpoint from a future format must be refused even when its
        # checksum is intact
        import hashlib
        import json
        import struct

        path = self.save(model, tmp_path)
        blob = open(path, "rb").read()
        payload = blob[8:-8]
        header_len, = struct.unpack("<I", payload[:4])
        header = json.loads(payload[4:4 + header_len])
        header["format_version"] = 99
        new_header = json.dumps(header, sort_keys=True).encode("utf-8")
        new_payload = struct.pack("<I", len(new_header)) + new_header + payload[4 + header_len:]
        checksum = int.from_bytes(hashlib.sha256(new_payload).digest()[:8], "little")
        open(path, "wb").write(b"CRISCKPT" + new_payload + struct.pack("<Q", checksum))
        with pytest.raises(IntegrityError, match="version"):
            load_checkpoint(path)
