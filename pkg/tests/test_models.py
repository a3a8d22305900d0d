"""Tests for the error hierarchy."""

import pickle

import pytest

from src.tucker_ooc.models import (
    BenchSpecError,
    CooFormatError,
    DimensionError,
    SliceStoreError,
    TuckerError,
)


@pytest.mark.parametrize(
    "error",
    [
        TuckerError("boom"),
        TuckerError("boom", "more detail"),
        DimensionError("core dims exceed tensor dims", "core 9 > dim 8"),
        SliceStoreError("sorted file has 0 records, input has 12"),
    ],
)
def test_errors_survive_pickling(error):
    copy = pickle.loads(pickle.dumps(error))
    assert type(copy) is type(error)
    assert str(copy) == str(error)
    assert copy.message == error.message
    assert copy.detailed_message == error.detailed_message


def test_coo_format_error_survives_pickling():
    error = CooFormatError("index 9 out of range", 12, "mode 2 has size 8")
    copy = pickle.loads(pickle.dumps(error))
    assert isinstance(copy, CooFormatError)
    assert copy.line_number == 12
    assert str(copy) == "line 12: index 9 out of range - mode 2 has size 8"


@pytest.mark.parametrize("line_number", [0, 7])
def test_bench_spec_error_survives_pickling(line_number):
    error = BenchSpecError("unknown key 'colour'", line_number)
    copy = pickle.loads(pickle.dumps(error))
    assert isinstance(copy, BenchSpecError)
    assert copy.line_number == line_number
    assert str(copy) == str(error)


def test_detail_is_joined_to_message():
    assert str(TuckerError("a", "b")) == "a - b"
    assert str(BenchSpecError("bad", 3)) == "line 3: bad"
    assert str(BenchSpecError("bad")) == "bad"
