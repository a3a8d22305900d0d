"""Tests for decomposition container files."""

import struct
import zlib

import numpy as np
import pytest

from src.tucker_ooc.models import ContainerError, TuckerModel
from src.tucker_ooc.storage import load_model, save_model
from src.tucker_ooc.storage.container import model_from_bytes, model_to_bytes
from src.tucker_ooc.tensor import random_orthonormal


@pytest.fixture
def model():
    rng = np.random.default_rng(9)
    dims, core_dims = (7, 6, 5, 4), (3, 2, 4, 1)
    return TuckerModel(
        core=rng.standard_normal(core_dims),
        factors=[random_orthonormal(i, j, rng) for i, j in zip(dims, core_dims)],
    )


def test_save_load_is_bit_exact(model, tmp_path):
    size = save_model(model, tmp_path / "out" / "m.tkrd")
    loaded = load_model(tmp_path / "out" / "m.tkrd")
    assert size == (tmp_path / "out" / "m.tkrd").stat().st_size
    assert loaded.core.tobytes() == model.core.tobytes()
    for a, b in zip(loaded.factors, model.factors):
        assert a.shape == b.shape
        assert np.array_equal(a, b)


def test_layout(model):
    raw = model_to_bytes(model)
    assert raw[:4] == b"TKRD"
    header = 4 + 4 + 8 + 2 * 8 * 4
    floats = model.core.size + sum(f.size for f in model.factors)
    assert len(raw) == header + 8 * floats + 4
    # core follows the header, mode 1 fastest
    first = np.frombuffer(raw, "<f8", 2, header)
    assert np.array_equal(first, model.core.ravel(order="F")[:2])


def test_checksum_mismatch(model):
    raw = bytearray(model_to_bytes(model))
    raw[40] ^= 0x01
    with pytest.raises(ContainerError, match="checksum"):
        model_from_bytes(bytes(raw))


def test_truncated():
    with pytest.raises(ContainerError, match="truncated"):
        model_from_bytes(b"TKRD")


def test_wrong_magic(model):
    body = b"XXXX" + model_to_bytes(model)[4:-4]
    with pytest.raises(ContainerError, match="magic"):
        model_from_bytes(body + struct.pack("<I", zlib.crc32(body)))


def test_missing_file(tmp_path):
    with pytest.raises(ContainerError, match="cannot read"):
        load_model(tmp_path / "absent.tkrd")
