import numpy as np
import pytest

from cpmn.errors import CheckpointError
from cpmn.nnkernel import load_tensors, save_tensors


def test_roundtrip_bit_identical(tmp_path, rng):
    tensors = {
        "stageA.conv1.kernels": rng.normal(size=(4, 3, 3)),
        "stageA.conv1.bias": rng.normal(size=4),
        "scalarish": rng.normal(size=(1,)),
    }
    path = tmp_path / "model.cpmn"
    save_tensors(path, tensors)
    loaded = load_tensors(path)
    assert set(loaded) == set(tensors)
    for name in tensors:
        np.testing.assert_array_equal(loaded[name], tensors[name])


def test_save_is_deterministic(tmp_path, rng):
    tensors = {"b": rng.normal(size=3), "a": rng.normal(size=(2, 2))}
    save_tensors(tmp_path / "one.cpmn", tensors)
    save_tensors(tmp_path / "two.cpmn", dict(reversed(tensors.items())))
    assert (tmp_path / "one.cpmn").read_bytes() == (tmp_path / "two.cpmn").read_bytes()


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad.cpmn"
    path.write_bytes(b"NOPE" + bytes(10))
    with pytest.raises(CheckpointError):
        load_tensors(path)


def test_truncated_file_rejected(tmp_path, rng):
    path = tmp_path / "model.cpmn"
    save_tensors(path, {"w": rng.normal(size=(8, 8))})
    blob = path.read_bytes()
    path.write_bytes(blob[:len(blob) - 16])
    with pytest.raises(CheckpointError):
        load_tensors(path)


def test_unsupported_version_rejected(tmp_path, rng):
    path = tmp_path / "model.cpmn"
    save_tensors(path, {"w": rng.normal(size=2)})
    blob = bytearray(path.read_bytes())
    blob[4] = 99
    path.write_bytes(bytes(blob))
    with pytest.raises(CheckpointError):
        load_tensors(path)
