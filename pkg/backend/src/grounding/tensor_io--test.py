import struct

import numpy as np
import pytest

from ..errors import ConfigError, DimensionError, FormatError, InputError
from .model import (
    MODEL_PRESETS,
    GroundingModel,
    analytic_model,
    get_preset,
    load_model,
    random_model,
    save_model,
)
from .tensor_io import read_checkpoint, read_tensor, write_checkpoint, write_tensor


def desk_tensors(seed):
    return random_model(MODEL_PRESETS["desk"], np.random.default_rng(seed)).to_tensors()


class TestTensorFile:
    """Test the TLG1 tensor format."""

    def test_layout(self, tmp_path):
        """Test magic, rank, dims and payload are laid out little-endian."""
        path = tmp_path / "t.tlg"
        write_tensor(path, np.array([[1.0, 2.0, 3.0]]))

        raw = path.read_bytes()

        assert raw[:4] == b"TLG1"
        assert struct.unpack("<III", raw[4:16]) == (2, 1, 3)
        assert struct.unpack("<3f", raw[16:]) == (1.0, 2.0, 3.0)

    def test_rewrite_is_byte_identical(self, tmp_path):
        """Test write -> read -> write reproduces the bytes."""
        first, second = tmp_path / "a.tlg", tmp_path / "b.tlg"
        write_tensor(first, np.random.default_rng(0).standard_normal((3, 4, 5)))

        write_tensor(second, read_tensor(first))

        assert first.read_bytes() == second.read_bytes()

    def test_scalar_tensor(self, tmp_path):
        """Test rank 0 tensors hold one value."""
        path = tmp_path / "s.tlg"
        write_tensor(path, np.float32(2.5))

        expected = b"TLG1" + struct.pack("<I", 0) + struct.pack("<f", 2.5)
        assert path.read_bytes() == expected
        assert read_tensor(path).shape == ()
        assert float(read_tensor(path)) == 2.5

    def test_bad_magic(self, tmp_path):
        """Test other files are rejected."""
        path = tmp_path / "x.tlg"
        path.write_bytes(b"NOPE" + b"\0" * 8)

        with pytest.raises(FormatError):
            read_tensor(path)

    def test_missing_file(self, tmp_path):
        """Test an absent tensor or checkpoint is an input error, not an OSError."""
        with pytest.raises(InputError, match="nope.tlg"):
            read_tensor(tmp_path / "nope.tlg")
        with pytest.raises(InputError):
            read_checkpoint(tmp_path / "nope.tlgw")

    def test_truncated_payload(self, tmp_path):
        """Test a short payload is a format error."""
        path = tmp_path / "t.tlg"
        write_tensor(path, np.ones((4, 4)))
        path.write_bytes(path.read_bytes()[:-3])

        with pytest.raises(FormatError):
            read_tensor(path)

    def test_trailing_bytes(self, tmp_path):
        """Test extra bytes after the payload are rejected."""
        path = tmp_path / "t.tlg"
        write_tensor(path, np.ones(2))
        path.write_bytes(path.read_bytes() + b"\0")

        with pytest.raises(FormatError):
            read_tensor(path)


class TestCheckpoint:
    """Test TLGW checkpoints and model conversion."""

    def test_round_trip_random_model(self, tmp_path):
        """Test a saved model reloads and rewrites byte-identically."""
        model = random_model(MODEL_PRESETS["desk"], np.random.default_rng(1))
        first, second = tmp_path / "a.tlgw", tmp_path / "b.tlgw"
        save_model(model, first)

        loaded = load_model(first, num_heads=2)
        save_model(loaded, second)

        assert first.read_bytes() == second.read_bytes()
        np.testing.assert_array_equal(loaded.layers[1].ffn_w1, model.layers[1].ffn_w1)

    def test_canonical_names(self, tmp_path):
        """Test tensor names follow the layer/embed/head convention."""
        path = tmp_path / "m.tlgw"
        save_model(analytic_model(5, num_layers=2), path)

        names = list(read_checkpoint(path))

        assert names[:4] == ["layer0.wq", "layer0.wk", "layer0.wv", "layer0.wo"]
        assert "layer1.ffn.b2" in names
        assert names[-6:] == [
            "embed.visual",
            "embed.linguistic",
            "head.w1",
            "head.b1",
            "head.w2",
            "head.b2",
        ]

    def test_missing_tensor(self, tmp_path):
        """Test a checkpoint without the head is rejected."""
        tensors = desk_tensors(2)
        del tensors["head.w2"]
        path = tmp_path / "m.tlgw"
        write_checkpoint(path, tensors)

        with pytest.raises(FormatError):
            load_model(path, num_heads=2)

    def test_duplicate_names(self, tmp_path):
        """Test a tensor name may appear only once."""
        path = tmp_path / "m.tlgw"
        block = (
            struct.pack("<H", 1)
            + b"a"
            + struct.pack("<II", 1, 1)
            + struct.pack("<f", 1.0)
        )
        path.write_bytes(b"TLGW" + struct.pack("<I", 2) + block + block)

        with pytest.raises(FormatError):
            read_checkpoint(path)

    def test_heads_must_divide_width(self):
        """Test D must be divisible by the head count."""
        tensors = desk_tensors(3)

        with pytest.raises(ConfigError):
            GroundingModel.from_tensors(tensors, num_heads=3)

    def test_shape_mismatch(self):
        """Test inconsistent layer shapes are rejected."""
        tensors = desk_tensors(4)
        tensors["layer1.wk"] = np.zeros((16, 8))

        with pytest.raises(DimensionError):
            GroundingModel.from_tensors(tensors, num_heads=2)

    def test_unknown_preset(self):
        """Test preset names are validated."""
        with pytest.raises(ConfigError):
            get_preset("huge")
