"""Key-generator enumeration against exhaustive full-sort oracles."""

import itertools

import numpy as np
import pytest

from pqtable import Codebook, KeyGenerator, KeysExhausted, NonDuplicateQueue, encode
from pqtable.quantizer import build_distance_matrix


def all_code_distances(dm, M, K):
    """(code, distance) for every code, summed the same way the generator sums."""
    out = []
    for code in itertools.product(range(K), repeat=M):
        d = 0.0
        for m in range(M):
            d += float(dm.dists[m, code[m]])
        out.append((code, d))
    return out


@pytest.fixture()
def fig8_scale():
    """M=3, K=10 over 2-dim subspaces: 1000 codes, small enough to enumerate."""
    rng = np.random.default_rng(42)
    cb = Codebook(rng.normal(size=(3, 10, 2)).astype(np.float32))
    q = rng.normal(size=6)
    return cb, q


class TestNonDuplicateQueue:
    def test_duplicate_identity_rejected(self):
        q = NonDuplicateQueue()
        assert q.push(1.0, (0, 1), None)
        assert not q.push(2.0, (0, 1), None)
        assert len(q) == 1

    def test_distinct_identities_equal_priority(self):
        q = NonDuplicateQueue()
        q.push(1.0, (0, 1), None)
        q.push(1.0, (0, 2), None)
        assert len(q) == 2

    def test_duplicate_count_oracle(self):
        # 100 pushes carrying 40 duplicate identities leave 60 queued
        rng = np.random.default_rng(0)
        identities = [(i, i + 1, 2 * i) for i in range(60)]
        pushes = identities + [identities[int(rng.integers(0, 60))] for _ in range(40)]
        rng.shuffle(pushes)
        q = NonDuplicateQueue()
        for ident in pushes:
            q.push(float(rng.random()), ident, None)
        assert len(pushes) == 100
        assert len(q) == 60

    def test_pop_returns_minimum(self):
        q = NonDuplicateQueue()
        for pri, ident in [(3.0, (3,)), (1.0, (1,)), (2.0, (2,))]:
            q.push(pri, ident, None)
        assert q.pop()[0] == 1.0

    def test_pop_sequence_matches_sort_oracle(self):
        rng = np.random.default_rng(1)
        entries = [(float(rng.random()), (int(i),)) for i in range(1000)]
        q = NonDuplicateQueue()
        for pri, ident in entries:
            q.push(pri, ident, None)
        popped = [q.pop()[0] for _ in range(len(entries))]
        assert popped == sorted(pri for pri, _ in entries)

    def test_pop_tie_breaks_lexicographically(self):
        q = NonDuplicateQueue()
        q.push(1.0, (2, 0), None)
        q.push(1.0, (1, 9), None)
        q.push(1.0, (1, 3), None)
        assert q.pop()[1] == (1, 3)

    def test_pop_on_empty(self):
        with pytest.raises(IndexError):
            NonDuplicateQueue().pop()

    def test_popped_identity_cannot_reenter(self):
        q = NonDuplicateQueue()
        q.push(1.0, (5,), None)
        q.pop()
        assert not q.push(0.5, (5,), None)
        assert len(q) == 0


class TestKeyGeneratorInit:
    def test_queue_seeded_with_single_entry(self, fig8_scale):
        cb, q = fig8_scale
        gen = KeyGenerator(cb, q)
        assert len(gen.queue) == 1

    def test_zero_priority_seed_on_codeword_query(self, fig8_scale):
        cb, _ = fig8_scale
        q = np.concatenate([cb.codewords[m, 4] for m in range(3)])
        code, dist = KeyGenerator(cb, q).next_key()
        assert dist == 0.0
        assert np.array_equal(code, [4, 4, 4])

    def test_single_subspace_seed_is_nearest_codeword(self):
        rng = np.random.default_rng(3)
        cb = Codebook(rng.normal(size=(1, 4, 2)).astype(np.float32))
        q = rng.normal(size=2)
        code, _ = KeyGenerator(cb, q).next_key()
        assert code[0] == encode(cb, q)[0]

    def test_seed_priority_is_global_minimum(self, fig8_scale):
        cb, q = fig8_scale
        dm = build_distance_matrix(cb, q)
        best = min(d for _, d in all_code_distances(dm, 3, 10))
        _, dist = KeyGenerator(cb, q).next_key()
        assert dist == best


class TestNextKey:
    def test_first_key_is_the_encoding(self, fig8_scale):
        cb, q = fig8_scale
        code, dist = KeyGenerator(cb, q).next_key()
        assert np.array_equal(code, encode(cb, q))
        loop = 0.0
        dm = build_distance_matrix(cb, q)
        for m in range(3):
            loop += float(dm.dists[m, code[m]])
        assert dist == loop

    def test_single_row_enumerates_in_ascending_distance(self):
        rng = np.random.default_rng(5)
        cb = Codebook(rng.normal(size=(1, 4, 3)).astype(np.float32))
        q = rng.normal(size=3)
        gen = KeyGenerator(cb, q)
        emitted = [gen.next_key() for _ in range(4)]
        dm = build_distance_matrix(cb, q)
        want = sorted((float(dm.dists[0, k]), k) for k in range(4))
        assert [d for _, d in emitted] == [d for d, _ in want]
        assert [int(c[0]) for c, _ in emitted] == [k for _, k in want]

    def test_full_enumeration_matches_sort_oracle(self, fig8_scale):
        cb, q = fig8_scale
        dm = build_distance_matrix(cb, q)
        oracle = sorted(d for _, d in all_code_distances(dm, 3, 10))
        gen = KeyGenerator(cb, q)
        seen = set()
        dists = []
        for _ in range(1000):
            code, d = gen.next_key()
            seen.add(tuple(int(c) for c in code))
            dists.append(d)
        assert len(seen) == 1000  # every code exactly once
        assert dists == oracle  # identical accumulation order makes this exact
        assert all(b >= a for a, b in zip(dists, dists[1:]))

    def test_queue_bound(self, fig8_scale):
        cb, q = fig8_scale
        gen = KeyGenerator(cb, q)
        for r in range(1, 500):
            gen.next_key()
            assert len(gen.queue) <= 1 + r * 3

    def test_exhaustion_raises(self):
        rng = np.random.default_rng(6)
        cb = Codebook(rng.normal(size=(2, 3, 1)).astype(np.float32))
        gen = KeyGenerator(cb, rng.normal(size=2))
        for _ in range(9):
            gen.next_key()
        with pytest.raises(KeysExhausted):
            gen.next_key()

    def test_monotone_even_with_tied_rows(self):
        # duplicated codewords create exact distance ties
        cw = np.array([[[0.0], [1.0], [0.0]], [[2.0], [2.0], [3.0]]], dtype=np.float32)
        gen = KeyGenerator(Codebook(cw), np.array([0.0, 2.0]))
        dists = [gen.next_key()[1] for _ in range(9)]
        assert all(b >= a for a, b in zip(dists, dists[1:]))
