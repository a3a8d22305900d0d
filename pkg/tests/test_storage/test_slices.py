"""Tests for slice stores."""

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from src.tucker_ooc.config import MIB
from src.tucker_ooc.decomp.slicewise import norm_from_slices
from src.tucker_ooc.memory import track_peak_bytes
from src.tucker_ooc.models import SliceStoreError
from src.tucker_ooc.storage import (
    SliceMatrix,
    build_slice_store,
    load_coo,
    open_slice_store,
    parse_coo,
)
from src.tucker_ooc.tensor import frobenius_norm
from tests.factories import random_sparse, write_dense


def reassemble(store) -> np.ndarray:
    x = np.zeros(store.dims)
    for i, s in store:
        index = [slice(None)] * len(store.dims)
        for mode, k in zip(store.fixed_modes, store.fixed_index(i)):
            index[mode] = k
        x[tuple(index)] = s.to_dense()
    return x


@pytest.fixture
def tiny(tmp_path):
    path = tmp_path / "tiny.txt"
    path.write_text("1 1 1 0.5\n2 1 1 1.5\n")
    return parse_coo(path, (2, 2, 2))


@pytest.fixture
def medium(tmp_path):
    x = random_sparse((20, 30, 40), 0.05, seed=2)
    return x, write_dense(x, tmp_path / "medium.txt")


class TestBuild:
    def test_two_records(self, tiny, tmp_path):
        store = build_slice_store(tiny, (0,), tmp_path / "mode_1", buffer_bytes=MIB)
        assert len(store) == 2
        first, second = store.load_slice(0), store.load_slice(1)
        assert (first.rows, first.cols) == (2, 2)
        assert first.to_dense()[0, 0] == 0.5 and first.nnz == 1
        assert second.to_dense()[0, 0] == 1.5 and second.nnz == 1

    def test_empty_slices(self, tiny, tmp_path):
        store = build_slice_store(tiny, (1,), tmp_path / "mode_2", buffer_bytes=MIB)
        empty = store.load_slice(1)
        assert (empty.rows, empty.cols, empty.nnz) == (2, 2, 0)
        assert store.empty_slices == 1
        assert store.load_slice(0).nnz == 2

    @pytest.mark.parametrize("mode", [0, 1, 2])
    def test_reassembly_every_mode(self, medium, tmp_path, mode):
        x, coo = medium
        store = build_slice_store(coo, (mode,), tmp_path / "store", buffer_bytes=MIB)
        assert store.row_mode < store.col_mode
        assert len(store) == x.shape[mode]
        assert np.array_equal(reassemble(store), load_coo(coo).to_dense())

    def test_conservation(self, medium, tmp_path):
        x, coo = medium
        store = build_slice_store(coo, (2,), tmp_path / "store", buffer_bytes=MIB)
        assert store.nnz == coo.nnz
        assert math.isclose(norm_from_slices(store), frobenius_norm(x), rel_tol=1e-12)

    @pytest.mark.parametrize("fixed", [(0, 1), (1, 3), (3, 0)])
    def test_fourth_order_pairs(self, tmp_path, fixed):
        x = random_sparse((4, 5, 6, 3), 0.2, seed=4)
        coo = write_dense(x, tmp_path / "x4.txt")
        store = build_slice_store(coo, fixed, tmp_path / "store", buffer_bytes=MIB)
        p, q = fixed
        assert len(store) == x.shape[p] * x.shape[q]
        # row-major in the ordered pair
        assert store.fixed_index(x.shape[q] + 1) == (1, 1)
        assert np.array_equal(reassemble(store), x)

    def test_slab_grouping(self, medium, tmp_path):
        _, coo = medium
        store = build_slice_store(coo, (0,), tmp_path / "store", slab_size=3, buffer_bytes=MIB)
        assert store.slab_size == 3
        assert len(store.manifest.slabs) == math.ceil(20 / 3)
        assert [e.slab for e in store.manifest.entries][:7] == [0, 0, 0, 1, 1, 1, 2]

    def test_wrong_number_of_fixed_modes(self, medium, tmp_path):
        _, coo = medium
        with pytest.raises(SliceStoreError, match="needs 1 distinct fixed modes"):
            build_slice_store(coo, (0, 1), tmp_path / "store", buffer_bytes=MIB)

    def test_sorted_intermediate_is_removed(self, medium, tmp_path):
        _, coo = medium
        build_slice_store(coo, (1,), tmp_path / "store", buffer_bytes=MIB)
        assert not (tmp_path / "store" / "sorted.txt").exists()


class TestRead:
    def test_reopen(self, medium, tmp_path):
        _, coo = medium
        built = build_slice_store(coo, (1,), tmp_path / "store", slab_size=4, buffer_bytes=MIB)
        reopened = open_slice_store(tmp_path / "store")
        assert reopened.manifest == built.manifest
        for (i, a), (j, b) in zip(built, reopened):
            assert i == j
            assert np.array_equal(a.data, b.data)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(SliceStoreError, match="no slice store manifest"):
            open_slice_store(tmp_path)

    def test_corrupt_slab(self, medium, tmp_path):
        _, coo = medium
        store = build_slice_store(coo, (0,), tmp_path / "store", buffer_bytes=MIB)
        entry = store.manifest.entries[5]
        path = store.slab_path(entry.slab)
        raw = bytearray(path.read_bytes())
        raw[entry.offset + entry.length - 10] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(SliceStoreError, match="checksum"):
            store.load_slice(5)
        store.load_slice(4)

    def test_out_of_range(self, tiny, tmp_path):
        store = build_slice_store(tiny, (0,), tmp_path / "store", buffer_bytes=MIB)
        with pytest.raises(SliceStoreError):
            store.load_slice(2)

    def test_concurrent_readers(self, medium, tmp_path):
        _, coo = medium
        store = build_slice_store(coo, (2,), tmp_path / "store", slab_size=7, buffer_bytes=MIB)
        with ThreadPoolExecutor(max_workers=4) as pool:
            parts = list(pool.map(lambda b: list(store.iter_range(*b)), [(0, 20), (20, 40)]))
        loaded = [s for part in parts for _, s in part]
        for (_, expected), got in zip(store, loaded):
            assert np.array_equal(expected.to_dense(), got.to_dense())


class TestSliceMatrix:
    def test_records_round_trip(self):
        rng = np.random.default_rng(8)
        for _ in range(1000):
            rows, cols = rng.integers(1, 9, size=2)
            dense = np.where(rng.random((rows, cols)) < 0.3, rng.standard_normal((rows, cols)), 0)
            r, c = np.nonzero(dense)
            s = SliceMatrix.from_triplets(int(rows), int(cols), r, c, dense[r, c])
            back = SliceMatrix.from_bytes(s.to_bytes())
            assert (back.rows, back.cols) == (rows, cols)
            assert np.array_equal(back.indptr, s.indptr)
            assert np.array_equal(back.indices, s.indices)
            assert back.data.tobytes() == s.data.tobytes()

    def test_invariants(self):
        s = SliceMatrix.from_triplets(
            3, 4, np.array([2, 0, 0, 1]), np.array([1, 3, 0, 2]), np.array([1.0, 2.0, 0.0, 3.0])
        )
        assert s.indptr.tolist() == [0, 1, 2, 3]
        assert s.indices.tolist() == [3, 2, 1]
        assert s.data.tolist() == [2.0, 3.0, 1.0]

    def test_duplicates_rejected(self):
        with pytest.raises(SliceStoreError, match="duplicate"):
            SliceMatrix.from_triplets(
                2, 2, np.array([0, 0]), np.array([1, 1]), np.array([1.0, 2.0])
            )

    def test_truncated_record(self):
        raw = SliceMatrix.empty(2, 3).to_bytes()
        with pytest.raises(SliceStoreError):
            SliceMatrix.from_bytes(raw[:-1])
        assert raw[:4] == b"TSLC"
        assert len(raw) == 4 + 4 * 8 + 3 * 8 + 4


class TestPublish:
    def test_concurrent_builders_share_one_store(self, medium, tmp_path):
        _, coo = medium
        target = tmp_path / "stores" / "mode_2"

        def build(_):
            return build_slice_store(coo, (1,), target, buffer_bytes=MIB)

        with ThreadPoolExecutor(max_workers=4) as pool:
            stores = list(pool.map(build, range(4)))
        expected = load_coo(coo).to_dense()
        for store in stores:
            assert store.root == target
            assert np.array_equal(reassemble(store), expected)
        assert [p.name for p in (tmp_path / "stores").iterdir()] == ["mode_2"]
        assert np.array_equal(reassemble(open_slice_store(target)), expected)

    def test_matching_store_is_kept(self, medium, tmp_path):
        _, coo = medium
        target = tmp_path / "stores" / "mode_1"
        first = build_slice_store(coo, (0,), target, buffer_bytes=MIB)
        inode = first.slab_path(0).stat().st_ino
        second = build_slice_store(coo, (0,), target, buffer_bytes=MIB)
        assert second.manifest == first.manifest
        assert second.slab_path(0).stat().st_ino == inode
        assert [p.name for p in (tmp_path / "stores").iterdir()] == ["mode_1"]

    def test_other_layout_is_replaced(self, medium, tmp_path):
        _, coo = medium
        target = tmp_path / "stores" / "mode_1"
        build_slice_store(coo, (0,), target, slab_size=2, buffer_bytes=MIB)
        store = build_slice_store(coo, (0,), target, slab_size=3, buffer_bytes=MIB)
        assert open_slice_store(target).slab_size == 3
        assert np.array_equal(reassemble(store), load_coo(coo).to_dense())
        assert [p.name for p in (tmp_path / "stores").iterdir()] == ["mode_1"]

    def test_incomplete_directory_is_replaced(self, tiny, tmp_path):
        target = tmp_path / "stores" / "mode_1"
        target.mkdir(parents=True)
        (target / "slab_000000.tslc").write_bytes(b"junk")
        store = build_slice_store(tiny, (0,), target, buffer_bytes=MIB)
        assert store.load_slice(1).to_dense()[0, 0] == 1.5
        assert (target / "manifest.json").is_file()
        assert store.slab_path(0).read_bytes()[:4] == b"TSLC"

    def test_failed_build_leaves_nothing(self, tiny, tmp_path):
        short = tmp_path / "short.txt"
        short.write_text("1 1 1 0.5\n")
        stores = tmp_path / "stores"
        with pytest.raises(SliceStoreError, match="sorted file has 1 records, input has 2"):
            build_slice_store(tiny, (0,), stores / "mode_1", buffer_bytes=MIB, sorted_path=short)
        assert list(stores.iterdir()) == []


class TestAssemblyBuffers:
    def test_peak_follows_buffer_size(self, tmp_path):
        path = tmp_path / "one.txt"
        path.write_text("1 1 1 2.0\n")
        coo = parse_coo(path, (600, 600, 2))
        peaks = {}
        for buffer in (MIB, 4 * MIB):
            with track_peak_bytes() as tracker:
                build_slice_store(
                    coo, (2,), tmp_path / f"store{buffer}", buffer_bytes=buffer, sorted_path=path
                )
            peaks[buffer] = tracker.peak
        assert peaks[MIB] >= (MIB // 24) * 24
        assert peaks[MIB] < 2 * MIB
        assert peaks[4 * MIB] >= (4 * MIB // 24) * 24

    def test_buffer_capped_at_one_dense_slice(self, tiny, tmp_path):
        with track_peak_bytes() as tracker:
            build_slice_store(tiny, (0,), tmp_path / "store", buffer_bytes=MIB)
        # sort buffer plus a handful of small arrays
        assert tracker.peak < 2 * MIB

    def test_slice_larger_than_buffer(self, tmp_path):
        x = np.random.default_rng(3).uniform(1.0, 2.0, size=(300, 300, 1))
        coo = write_dense(x, tmp_path / "dense.txt")
        store = build_slice_store(coo, (2,), tmp_path / "store", buffer_bytes=MIB)
        assert store.load_slice(0).nnz == 90000
        assert np.array_equal(reassemble(store), load_coo(coo).to_dense())
