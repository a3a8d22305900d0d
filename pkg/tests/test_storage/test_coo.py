"""Tests for coordinate-format parsing and loading."""

import numpy as np
import pytest

from src.tucker_ooc.models import CooFormatError
from src.tucker_ooc.storage import load_coo, parse_coo, write_coo
from src.tucker_ooc.tensor import SparseTensor


@pytest.fixture
def write(tmp_path):
    def _write(text: str, name: str = "x.txt"):
        path = tmp_path / name
        path.write_bytes(text.encode("utf-8"))
        return path

    return _write


def test_parse_counts_nonzeros(write):
    coo = parse_coo(write("1 1 1 0.5\n2 2 2 1.0"), (2, 2, 2))
    assert coo.nnz == 2
    assert coo.dims == (2, 2, 2)
    assert coo.order == 3


def test_out_of_range_names_line(write):
    with pytest.raises(CooFormatError) as e:
        parse_coo(write("3 1 1 0.5\n"), (2, 2, 2))
    assert e.value.line_number == 1
    assert "line 1" in str(e.value)


def test_non_numeric_token(write):
    with pytest.raises(CooFormatError) as e:
        parse_coo(write("1 1 1 0.5\n1 two 1 0.5\n"), (2, 2, 2))
    assert e.value.line_number == 2


def test_wrong_field_count(write):
    with pytest.raises(CooFormatError, match="expected 4 fields"):
        parse_coo(write("1 1 0.5\n"), (2, 2, 2))


def test_non_finite_value(write):
    with pytest.raises(CooFormatError, match="not finite"):
        parse_coo(write("1 1 1 nan\n"), (2, 2, 2))


def test_duplicate_coordinates(write):
    with pytest.raises(CooFormatError) as e:
        parse_coo(write("1 1 1 0.5\n2 1 1 0.1\n1 1 1 0.7\n"), (2, 2, 2))
    assert e.value.line_number == 3
    assert "line 1" in str(e.value)


def test_crlf_and_blank_lines(write):
    coo = parse_coo(write("1 1 1 0.5\r\n\r\n2 2 2 1.0\r\n"), (2, 2, 2))
    assert coo.nnz == 2
    x = load_coo(coo).to_dense()
    assert x[0, 0, 0] == 0.5
    assert x[1, 1, 1] == 1.0


def test_missing_file(tmp_path):
    with pytest.raises(CooFormatError, match="does not exist"):
        parse_coo(tmp_path / "absent.txt", (2, 2, 2))


def test_load_drops_explicit_zeros(write):
    coo = parse_coo(write("1 1 1 0.0\n2 1 2 3.5\n"), (2, 2, 2))
    tensor = load_coo(coo)
    assert coo.nnz == 2
    assert tensor.nnz == 1
    assert tensor.indices.tolist() == [[1, 0, 1]]


def test_fourth_order(write):
    coo = parse_coo(write("1 2 3 4 0.25\n"), (1, 2, 3, 4))
    assert load_coo(coo).to_dense()[0, 1, 2, 3] == 0.25


def test_write_then_load_is_exact(tmp_path):
    rng = np.random.default_rng(5)
    x = np.where(rng.random((4, 5, 6)) < 0.3, rng.random((4, 5, 6)), 0.0)
    coo = write_coo(SparseTensor.from_dense(x), tmp_path / "x.txt")
    assert np.array_equal(load_coo(parse_coo(coo.path, coo.dims)).to_dense(), x)
