"""Vector-file round trips, synthetic data, recall, and PCA alignment."""

import struct

import numpy as np
import pytest

from pqtable import (
    build_table,
    encode,
    fill_rate,
    pca_align,
    read_vecs,
    recall_at_r,
    synthesize,
    train_codebook,
    write_vecs,
)


class TestReadWriteVecs:
    def test_single_float_record(self, tmp_path):
        path = tmp_path / "one.fvecs"
        path.write_bytes(struct.pack("<i4f", 4, 1.0, 2.0, 3.0, 4.0))
        data = read_vecs(path, "fvecs")
        assert data.shape == (1, 4)
        assert data.dtype == np.float32
        assert data[0].tolist() == [1.0, 2.0, 3.0, 4.0]

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.fvecs"
        path.write_bytes(b"")
        assert read_vecs(path, "fvecs").shape == (0, 0)

    @pytest.mark.parametrize("kind,maker", [
        ("fvecs", lambda rng: rng.normal(size=(1000, 16)).astype(np.float32)),
        ("bvecs", lambda rng: rng.integers(0, 256, size=(1000, 16)).astype(np.float32)),
        ("ivecs", lambda rng: rng.integers(-5000, 5000, size=(1000, 16)).astype(np.int32)),
    ])
    def test_round_trip_bit_exact(self, tmp_path, kind, maker):
        data = maker(np.random.default_rng(0))
        path = tmp_path / f"rt.{kind}"
        write_vecs(path, data, kind)
        back = read_vecs(path, kind)
        assert back.dtype == data.dtype
        assert np.array_equal(back, data)
        # writing what was read reproduces the file byte for byte
        path2 = tmp_path / f"rt2.{kind}"
        write_vecs(path2, back, kind)
        assert path.read_bytes() == path2.read_bytes()

    def test_limit_reads_prefix(self, tmp_path):
        rng = np.random.default_rng(1)
        data = rng.normal(size=(50, 8)).astype(np.float32)
        path = tmp_path / "lim.fvecs"
        write_vecs(path, data, "fvecs")
        assert np.array_equal(read_vecs(path, "fvecs", limit=7), data[:7])

    def test_inconsistent_dimension_header(self, tmp_path):
        path = tmp_path / "bad.fvecs"
        good = struct.pack("<i2f", 2, 1.0, 2.0)
        bad = struct.pack("<i2f", 3, 1.0, 2.0)  # wrong header, same size
        path.write_bytes(good + bad)
        with pytest.raises(ValueError, match="declares dimension"):
            read_vecs(path, "fvecs")

    def test_truncated_file(self, tmp_path):
        path = tmp_path / "trunc.fvecs"
        path.write_bytes(struct.pack("<i2f", 2, 1.0, 2.0)[:-3])
        with pytest.raises(ValueError, match="truncated"):
            read_vecs(path, "fvecs")

    def test_bvecs_reject_out_of_range(self, tmp_path):
        with pytest.raises(ValueError, match="0, 255"):
            write_vecs(tmp_path / "x.bvecs", np.array([[300.0]]), "bvecs")

    def test_unknown_kind(self, tmp_path):
        with pytest.raises(ValueError, match="kind"):
            read_vecs(tmp_path / "x.dvecs", "dvecs")


class TestRecall:
    def test_perfect_retrieval(self):
        gt = [[0, 5], [1, 6], [2, 7]]
        results = [[0, 5], [1, 6], [2, 7]]
        for r in (1, 2):
            assert recall_at_r(results, gt, r) == 1.0

    def test_total_miss(self):
        assert recall_at_r([[9, 8], [9, 8]], [[0], [1]], 2) == 0.0

    def test_hand_computed_fraction(self):
        gt = [[3], [4], [5], [6]]
        results = [[3, 0], [0, 4], [0, 1], [6, 5]]
        assert recall_at_r(results, gt, 1) == 0.5  # queries 0 and 3 hit at rank 1
        assert recall_at_r(results, gt, 2) == 0.75

    def test_monotone_in_r(self):
        rng = np.random.default_rng(2)
        gt = [[int(rng.integers(0, 20))] for _ in range(30)]
        results = [rng.permutation(20)[:10] for _ in range(30)]
        values = [recall_at_r(results, gt, r) for r in (1, 2, 5, 10)]
        assert all(b >= a for a, b in zip(values, values[1:]))

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="lists"):
            recall_at_r([[1]], [[1], [2]], 1)

    def test_r_exceeds_result_length(self):
        with pytest.raises(ValueError, match="exceeds"):
            recall_at_r([[1, 2]], [[1]], 3)


class TestSynthesize:
    def test_deterministic(self):
        a = synthesize("clustered", 500, 8, seed=7)
        b = synthesize("clustered", 500, 8, seed=7)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, synthesize("clustered", 500, 8, seed=8))

    def test_gaussian_moments(self):
        X = synthesize("gaussian", 1000, 16, seed=3)
        bound = 5.0 / np.sqrt(1000)
        assert np.all(np.abs(X.mean(axis=0)) < bound)

    def test_clustered_hit_rate_beats_uniform_bound(self):
        # biased codes concentrate on few slots, so first hashings succeed
        # far more often than the uniform-hashing rate predicts
        from pqtable import pack_codes

        data = synthesize("clustered", 5000, 8, seed=4, clusters=20, cluster_std=0.05)
        cb = train_codebook(data, M=2, K=256, iterations=4, seed=4)
        table = build_table(cb, encode(cb, data), 1)
        rng = np.random.default_rng(5)
        queries = data[rng.choice(len(data), 200)] + rng.normal(0, 0.01, (200, 8)).astype(np.float32)
        hits = 0
        for q in queries:
            key = int(pack_codes(encode(cb, q)[None, :], cb.element_bits)[0])
            hits += table.store.lookup(key).size > 0
        assert hits / len(queries) > fill_rate(16, 5000)

    def test_invalid_distribution(self):
        with pytest.raises(ValueError, match="distribution"):
            synthesize("lognormal", 10, 4)


class TestPcaAlign:
    def test_isotropic_variances_roughly_equal(self):
        X = np.random.default_rng(6).normal(size=(4000, 8))
        aligned = pca_align(X)
        variances = aligned.var(axis=0)
        assert variances.max() / variances.min() < 1.5

    def test_dominant_direction_comes_first(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(2000, 6))
        X[:, 3] *= 10.0
        variances = pca_align(X).var(axis=0)
        assert np.argmax(variances) == 0
        assert np.all(np.diff(variances) <= 1e-6)

    def test_decorrelated_output(self):
        rng = np.random.default_rng(8)
        X = rng.normal(size=(3000, 6)) @ rng.normal(size=(6, 6))
        aligned = pca_align(X).astype(np.float64)
        cov = np.cov(aligned.T)
        off = cov - np.diag(np.diag(cov))
        assert np.abs(off).max() < 1e-6 * np.trace(cov)

    def test_pairwise_distances_preserved(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(300, 5))
        aligned = pca_align(X).astype(np.float64)
        for i, j in rng.integers(0, 300, size=(40, 2)):
            orig = np.sum((X[i] - X[j]) ** 2)
            new = np.sum((aligned[i] - aligned[j]) ** 2)
            assert new == pytest.approx(orig, rel=1e-5, abs=1e-9)

    def test_degenerate_covariance(self):
        with pytest.raises(ValueError, match="N > D"):
            pca_align(np.zeros((4, 8)))
