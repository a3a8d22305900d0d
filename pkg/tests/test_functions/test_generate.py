"""Tests for the tensor generation tool."""

import pytest
from unittest.mock import patch

from src.tucker_ooc.functions.generate import generate_tensor_impl
from src.tucker_ooc.models import TuckerError
from src.tucker_ooc.storage import CooFile


def test_generate_tensor(tmp_path):
    """Test writing a small tensor file."""
    out = tmp_path / "x.txt"
    result = generate_tensor_impl([2, 2, 2], 1.0, 1, str(out))

    assert result["path"] == str(out)
    assert result["dims"] == [2, 2, 2]
    assert result["nnz"] == 8
    assert "message" in result
    assert len(out.read_text().splitlines()) == 8


@patch("src.tucker_ooc.functions.generate.gen_random_tensor")
def test_generate_tensor_arguments(mock_gen, tmp_path):
    """Test that arguments are passed through unchanged."""
    out = tmp_path / "y.txt"
    mock_gen.return_value = CooFile(path=out, dims=(10, 20, 30), nnz=42)

    result = generate_tensor_impl([10, 20, 30], 0.01, 7, str(out))

    mock_gen.assert_called_once_with([10, 20, 30], 0.01, 7, str(out))
    assert result["nnz"] == 42
    assert result["message"] == "Wrote 42 nonzeros of a 10x20x30 tensor"


def test_generate_tensor_invalid_density(tmp_path):
    """Test that invalid densities surface as errors."""
    with pytest.raises(TuckerError):
        generate_tensor_impl([3, 3, 3], 2.0, 1, str(tmp_path / "x.txt"))


@patch("src.tucker_ooc.functions.generate.logger")
@patch("src.tucker_ooc.functions.generate.gen_random_tensor")
def test_generate_tensor_error_is_logged(mock_gen, mock_logger, tmp_path):
    """Test that generation errors are logged and re-raised."""
    mock_gen.side_effect = TuckerError("disk full")

    with pytest.raises(TuckerError, match="disk full"):
        generate_tensor_impl([3, 3, 3], 0.5, 1, str(tmp_path / "x.txt"))

    mock_logger.error.assert_called_once()
    assert "disk full" in mock_logger.error.call_args.args[0]
