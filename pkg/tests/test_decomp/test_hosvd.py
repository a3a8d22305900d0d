"""Tests for HO-SVD and the sparse fit helpers."""

import numpy as np
import pytest

from src.tucker_ooc.decomp import ho_svd, run_ho_svd
from src.tucker_ooc.decomp.hosvd import fit_from_core, model_fit
from src.tucker_ooc.models import DimensionError, TuckerModel, ZeroNormError
from src.tucker_ooc.tensor import SparseTensor, fit, random_orthonormal, tucker_apply
from tests.factories import exact_rank, random_sparse


def reconstruction_fit(x, model):
    return fit(x, tucker_apply(model.core, model.factors))


class TestHoSvd:
    @pytest.mark.parametrize(
        "dims, core_dims", [((8, 9, 10), (2, 3, 4)), ((5, 6, 4, 7), (2, 2, 3, 3))]
    )
    def test_exact_recovery(self, dims, core_dims):
        x = exact_rank(dims, core_dims, seed=1)
        model = ho_svd(x, core_dims)
        assert model.core_dims == core_dims
        assert reconstruction_fit(x, model) == pytest.approx(1.0, abs=1e-8)
        assert model.orthonormality_error() <= 1e-10

    def test_second_order_is_truncated_svd(self):
        x = np.random.default_rng(2).random((9, 7))
        model = ho_svd(x, (3, 3))
        u, s, vt = np.linalg.svd(x)
        truncated = u[:, :3] @ np.diag(s[:3]) @ vt[:3]
        assert reconstruction_fit(x, model) == pytest.approx(fit(x, truncated), abs=1e-8)

    def test_sparse_and_dense_agree(self):
        x = random_sparse((10, 11, 12), 0.2, seed=3)
        dense = ho_svd(x, (3, 3, 3))
        sparse = ho_svd(SparseTensor.from_dense(x), (3, 3, 3))
        for a, b in zip(dense.factors, sparse.factors):
            assert np.allclose(a, b, atol=1e-10)
        assert np.allclose(dense.core, sparse.core, atol=1e-10)

    def test_run_is_single_pass(self):
        x = random_sparse((10, 11, 12), 0.2, seed=4)
        result = run_ho_svd(SparseTensor.from_dense(x), (2, 3, 4))
        assert result.iterations == 1
        assert result.terminated_by == "single_pass"
        assert len(result.fit_history) == 1
        assert result.final_fit == pytest.approx(reconstruction_fit(x, result.model), abs=1e-10)
        assert result.flags["rank_deficient_modes"] == []

    def test_rank_deficient_mode_is_flagged(self):
        rng = np.random.default_rng(5)
        x = np.einsum("i,jk->ijk", rng.random(6), rng.random((7, 8)))
        result = run_ho_svd(x, (3, 3, 3))
        assert result.flags["rank_deficient_modes"] == [0]
        assert result.model.orthonormality_error() <= 1e-10

    def test_core_too_large(self):
        with pytest.raises(DimensionError):
            ho_svd(np.ones((3, 4, 5)), (4, 4, 4))

    def test_zero_tensor(self):
        with pytest.raises(ZeroNormError):
            ho_svd(np.zeros((3, 4, 5)), (1, 1, 1))


class TestFitHelpers:
    @pytest.fixture
    def model_and_tensor(self):
        rng = np.random.default_rng(6)
        x = random_sparse((9, 10, 11), 0.3, seed=6)
        factors = [random_orthonormal(d, 3, rng) for d in x.shape]
        return x, TuckerModel(core=rng.standard_normal((3, 3, 3)), factors=factors)

    def test_model_fit_matches_dense(self, model_and_tensor):
        x, model = model_and_tensor
        expected = reconstruction_fit(x, model)
        assert model_fit(x, model) == pytest.approx(expected, abs=1e-10)
        assert model_fit(SparseTensor.from_dense(x), model) == pytest.approx(expected, abs=1e-10)

    def test_fit_from_core_for_projected_core(self, model_and_tensor):
        x, model = model_and_tensor
        core = tucker_apply(x, [f.T for f in model.factors])
        projected = TuckerModel(core=core, factors=model.factors)
        expected = reconstruction_fit(x, projected)
        assert fit_from_core(np.linalg.norm(x), core) == pytest.approx(expected, abs=1e-10)

    def test_sign_flip_invariance(self, model_and_tensor):
        x, model = model_and_tensor
        flipped_factors = [f.copy() for f in model.factors]
        flipped_core = model.core.copy()
        flipped_factors[1][:, 2] *= -1
        flipped_core[:, 2, :] *= -1
        before = tucker_apply(model.core, model.factors)
        after = tucker_apply(flipped_core, flipped_factors)
        assert np.allclose(before, after, rtol=0, atol=1e-12)
        flipped = TuckerModel(core=flipped_core, factors=flipped_factors)
        assert model_fit(x, flipped) == pytest.approx(model_fit(x, model), abs=1e-12)

    def test_model_dims_mismatch(self, model_and_tensor):
        _, model = model_and_tensor
        with pytest.raises(DimensionError):
            model_fit(np.ones((3, 3, 3)), model)
