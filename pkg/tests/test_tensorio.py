import numpy as np
import pytest

from sefusion.errors import TensorFormatError
from sefusion.rng import Rng
from sefusion.tensorio import load_tensors, save_tensors


def test_roundtrip_exact(tmp_path):
    rng = Rng(1)
    tensors = {
        "layer.w": rng.uniform((4, 7), -1, 1),
        "layer.b": rng.uniform(7, -1, 1),
        "scalarish": np.array([3.5]),
    }
    path = tmp_path / "model.tensors"
    save_tensors(path, tensors)
    loaded = load_tensors(path)
    assert set(loaded) == set(tensors)
    for name in tensors:
        np.testing.assert_array_equal(loaded[name], tensors[name])


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "model.tensors"
    save_tensors(path, {"a": np.zeros(3)})
    raw = bytearray(path.read_bytes())
    raw[0:2] = b"XX"
    path.write_bytes(bytes(raw))
    with pytest.raises(TensorFormatError, match="magic"):
        load_tensors(path)


def test_truncated_payload_rejected(tmp_path):
    path = tmp_path / "model.tensors"
    save_tensors(path, {"a": np.arange(10.0)})
    raw = path.read_bytes()
    path.write_bytes(raw[:-16])
    with pytest.raises(TensorFormatError):
        load_tensors(path)


def test_trailing_bytes_rejected(tmp_path):
    path = tmp_path / "model.tensors"
    save_tensors(path, {"a": np.arange(4.0)})
    path.write_bytes(path.read_bytes() + b"junk")
    with pytest.raises(TensorFormatError, match="trailing"):
        load_tensors(path)


def test_unknown_version_rejected(tmp_path):
    path = tmp_path / "model.tensors"
    save_tensors(path, {"a": np.zeros(2)})
    raw = bytearray(path.read_bytes())
    raw[8] = 9  # version field
    path.write_bytes(bytes(raw))
    with pytest.raises(TensorFormatError, match="version"):
        load_tensors(path)


def test_model_tensors_roundtrip(tmp_path):
    from sefusion.gridnet import GridNetConfig, GridNetModel

    model = GridNetModel.init(GridNetConfig(), Rng(4))
    path = tmp_path / "grid.tensors"
    save_tensors(path, model.tensors())
    loaded = load_tensors(path)
    np.testing.assert_array_equal(loaded["embed.w"], model.embed.w)
    np.testing.assert_array_equal(
        loaded["block1.inter.w_h"], model.blocks[1].inter.w_h
    )
