"""Binary round trips for codebooks, indexes, and rotations."""

import numpy as np
import pytest

from pqtable import (
    Codebook,
    MultiPQTable,
    OPQTable,
    SinglePQTable,
    build_table,
    encode,
    identity_rotation,
    load_codebook,
    load_index,
    random_rotation,
    save_codebook,
    save_index,
    synthesize,
    train_codebook,
)


@pytest.fixture(scope="module")
def trained():
    data = synthesize("clustered", 3000, 16, seed=50, clusters=25, cluster_std=0.05)
    cb = train_codebook(data, M=4, K=64, iterations=4, seed=50)
    return data, cb, encode(cb, data)


class TestCodebookFile:
    def test_round_trip_bit_exact(self, tmp_path, trained):
        _, cb, _ = trained
        path = tmp_path / "cb.pqcb"
        save_codebook(path, cb)
        loaded, rotation = load_codebook(path)
        assert rotation is None
        assert np.array_equal(loaded.codewords, cb.codewords)

    def test_file_starts_with_magic_and_header(self, tmp_path, trained):
        _, cb, _ = trained
        path = tmp_path / "cb.pqcb"
        save_codebook(path, cb)
        raw = path.read_bytes()
        assert raw[:4] == b"PQCB"
        header = np.frombuffer(raw[4:20], dtype="<u4")
        assert header.tolist() == [1, cb.D, cb.M, cb.K]

    def test_save_is_deterministic(self, tmp_path, trained):
        _, cb, _ = trained
        a, b = tmp_path / "a.pqcb", tmp_path / "b.pqcb"
        save_codebook(a, cb)
        save_codebook(b, cb)
        assert a.read_bytes() == b.read_bytes()

    def test_rotation_block_round_trip(self, tmp_path, trained):
        _, cb, _ = trained
        rotation = random_rotation(cb.D, seed=3)
        path = tmp_path / "cb_rot.pqcb"
        save_codebook(path, cb, rotation)
        _, loaded = load_codebook(path)
        assert loaded is not None
        np.testing.assert_allclose(loaded.matrix, rotation.matrix, atol=1e-6)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.pqcb"
        path.write_bytes(b"NOPE" + b"\x00" * 32)
        with pytest.raises(ValueError, match="magic"):
            load_codebook(path)

    def test_truncated(self, tmp_path, trained):
        _, cb, _ = trained
        path = tmp_path / "cb.pqcb"
        save_codebook(path, cb)
        (tmp_path / "cut.pqcb").write_bytes(path.read_bytes()[:30])
        with pytest.raises(ValueError, match="truncated"):
            load_codebook(tmp_path / "cut.pqcb")


class TestIndexFile:
    @pytest.mark.parametrize("T", [1, 2, 4])
    def test_round_trip_preserves_queries(self, tmp_path, trained, T):
        data, cb, codes = trained
        table = build_table(cb, codes, T)
        path = tmp_path / f"idx{T}.pqtb"
        save_index(path, table)
        loaded = load_index(path)
        assert type(loaded) is (SinglePQTable if T == 1 else MultiPQTable)
        assert len(loaded) == len(table)
        rng = np.random.default_rng(7)
        for q in data[rng.choice(len(data), 5)].astype(np.float64):
            ids_a, d_a = table.query(q, L=5)
            ids_b, d_b = loaded.query(q, L=5)
            assert np.array_equal(ids_a, ids_b)
            assert np.array_equal(d_a, d_b)

    def test_build_twice_identical_bytes(self, tmp_path, trained):
        _, cb, codes = trained
        a, b = tmp_path / "a.pqtb", tmp_path / "b.pqtb"
        save_index(a, build_table(cb, codes, 2))
        save_index(b, build_table(cb, codes, 2))
        assert a.read_bytes() == b.read_bytes()

    def test_save_load_save_stable(self, tmp_path, trained):
        _, cb, codes = trained
        a, b = tmp_path / "a.pqtb", tmp_path / "b.pqtb"
        save_index(a, build_table(cb, codes, 4))
        save_index(b, load_index(a))
        assert a.read_bytes() == b.read_bytes()

    def test_opq_round_trip(self, tmp_path, trained):
        data, cb, _ = trained
        rotation = random_rotation(cb.D, seed=9)
        codes = encode(cb, rotation.apply(data))
        opq = OPQTable(rotation, build_table(cb, codes, 2))
        path = tmp_path / "opq.pqtb"
        save_index(path, opq)
        loaded = load_index(path)
        assert isinstance(loaded, OPQTable)
        q = np.asarray(data[3], dtype=np.float64)
        ids_a, d_a = opq.query(q, L=4)
        ids_b, d_b = loaded.query(q, L=4)
        assert np.array_equal(ids_a, ids_b)
        np.testing.assert_allclose(d_a, d_b, rtol=1e-5)  # rotation stored as float32

    def test_header_layout(self, tmp_path, trained):
        _, cb, codes = trained
        path = tmp_path / "idx.pqtb"
        save_index(path, build_table(cb, codes, 2))
        raw = path.read_bytes()
        assert raw[:4] == b"PQTB"
        version, T, n = np.frombuffer(raw[4:16], dtype="<u4")
        assert (version, T, n) == (1, 2, len(codes))
        assert raw[16:20] == b"PQCB"

    def test_wide_keys_rejected(self, tmp_path):
        rng = np.random.default_rng(11)
        cb = Codebook(rng.normal(size=(16, 4, 1)).astype(np.float32))
        table = build_table(cb, rng.integers(0, 4, size=(10, 16)), 1)  # 128-bit keys
        with pytest.raises(ValueError, match="64 bits"):
            save_index(tmp_path / "wide.pqtb", table)

    def test_identifier_order_within_slots_preserved(self, tmp_path, trained):
        _, cb, _ = trained
        codes = np.zeros((6, cb.M), dtype=np.uint8)
        codes[3:] = 1
        table = build_table(cb, codes, 1)
        path = tmp_path / "dup.pqtb"
        save_index(path, table)
        loaded = load_index(path)
        key = int(np.uint64(0))
        assert loaded.store.lookup(key).tolist() == [0, 1, 2]


class TestIdentityRotationBlock:
    def test_identity_round_trip(self, tmp_path, trained):
        _, cb, _ = trained
        path = tmp_path / "cb.pqcb"
        save_codebook(path, cb, identity_rotation(cb.D))
        _, rotation = load_codebook(path)
        assert np.array_equal(rotation.matrix, np.eye(cb.D))
