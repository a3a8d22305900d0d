"""Tests for the stopping rules."""

import pytest

from src.tucker_ooc.decomp import check_core_dims, delta_core_growth, delta_fit
from src.tucker_ooc.models import DimensionError, ZeroNormError


class TestCoreGrowth:
    def test_equal_norms(self):
        assert delta_core_growth(2.5, 2.5) == 0.0

    def test_from_zero(self):
        assert delta_core_growth(0.0, 5.0) == 1.0

    def test_arithmetic(self):
        assert delta_core_growth(3.0, 4.0) == pytest.approx(0.25)

    def test_zero_current_norm(self):
        with pytest.raises(ZeroNormError):
            delta_core_growth(1.0, 0.0)


def test_delta_fit_can_be_negative():
    assert delta_fit(0.5, 0.75) == 0.25
    assert delta_fit(0.75, 0.5) < 0


class TestCoreDims:
    def test_valid(self):
        assert check_core_dims((4, 5, 6), [4, 1, 3]) == (4, 1, 3)

    @pytest.mark.parametrize("core_dims", [(5, 5, 5), (0, 1, 1), (1, 1)])
    def test_invalid(self, core_dims):
        with pytest.raises(DimensionError):
            check_core_dims((4, 5, 6), core_dims)
