"""Tests for the random sparse tensor generator."""

import math

import pytest

from src.tucker_ooc.harness import gen_random_tensor
from src.tucker_ooc.models import DimensionError, TuckerError
from src.tucker_ooc.storage import load_coo, parse_coo


def test_full_density_writes_every_cell(tmp_path):
    coo = gen_random_tensor((2, 2, 2), 1.0, 3, tmp_path / "full.txt")
    lines = coo.path.read_text().splitlines()
    assert coo.nnz == 8
    assert len(lines) == 8
    coords = [tuple(int(p) for p in line.split()[:3]) for line in lines]
    assert coords == sorted(coords)
    assert set(coords) == {(i, j, k) for i in (1, 2) for j in (1, 2) for k in (1, 2)}
    for line in lines:
        assert 0.0 <= float(line.split()[3]) < 1.0


def test_nnz_within_three_sigma(tmp_path):
    dims = (100, 110, 120)
    coo = gen_random_tensor(dims, 0.1, 1, tmp_path / "x.txt")
    cells = math.prod(dims)
    sigma = math.sqrt(cells * 0.1 * 0.9)
    assert abs(coo.nnz - 0.1 * cells) <= 3 * sigma


def test_same_seed_same_bytes(tmp_path):
    a = gen_random_tensor((7, 8, 9), 0.2, 5, tmp_path / "a.txt")
    b = gen_random_tensor((7, 8, 9), 0.2, 5, tmp_path / "b.txt")
    c = gen_random_tensor((7, 8, 9), 0.2, 6, tmp_path / "c.txt")
    assert a.path.read_bytes() == b.path.read_bytes()
    assert a.path.read_bytes() != c.path.read_bytes()


def test_output_parses_back(tmp_path):
    coo = gen_random_tensor((4, 5, 3, 6), 0.3, 2, tmp_path / "x4.txt")
    parsed = parse_coo(coo.path, (4, 5, 3, 6))
    assert parsed.nnz == coo.nnz
    assert load_coo(parsed).nnz == coo.nnz


@pytest.mark.parametrize("density", [0.0, -0.1, 1.5])
def test_invalid_density(tmp_path, density):
    with pytest.raises(TuckerError, match="density"):
        gen_random_tensor((3, 3, 3), density, 0, tmp_path / "x.txt")


def test_unsupported_order(tmp_path):
    with pytest.raises(DimensionError):
        gen_random_tensor((2, 2, 2, 2, 2), 0.5, 0, tmp_path / "x.txt")


def test_nonpositive_dims(tmp_path):
    with pytest.raises(TuckerError, match="positive"):
        gen_random_tensor((3, 0, 3), 0.5, 0, tmp_path / "x.txt")
