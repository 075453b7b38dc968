"""Hash-table indexes over PQ codes, the table-count planner, and analysis.

A single table keys identifiers by their whole code and answers queries by
walking candidate codes in ascending asymmetric distance. For long codes the
table is divided into T smaller tables over code slices whose results merge
by counting: an identifier surfacing from any table is "marked" with its full
asymmetric distance, and the first identifier seen in all T tables bounds the
search, since anything closer than that bound is provably marked already.

Queries return parallel (identifiers, distances) arrays whose distance
multiset equals the top-L of a linear ADC scan exactly.
"""

from __future__ import annotations

import math
from typing import Callable, NamedTuple

import numpy as np

from .keygen import KeyGenerator, KeysExhausted
from .quantizer import (
    Codebook,
    adc_distances,
    build_distance_matrix,
    subspace_codebook,
    top_scores,
)

__all__ = [
    "MemoryEstimate",
    "MultiPQTable",
    "SimulatedHashing",
    "SinglePQTable",
    "SlotStore",
    "build_table",
    "estimate_memory",
    "table_codes",
    "expected_hashings",
    "fill_rate",
    "pack_codes",
    "plan_tables",
    "simulate_uniform_hashing",
    "slot_occupancy",
    "unpack_key",
]

_EMPTY_IDS = np.empty(0, dtype=np.uint32)


def pack_codes(codes: np.ndarray, element_bits: int) -> np.ndarray:
    """Pack (n, M) code rows into integer keys, first subspace most significant.

    Keys up to 64 bits pack into uint64; wider keys fall back to Python ints
    in an object array so arbitrarily long codes still work.
    """
    C = np.asarray(codes)
    if C.ndim != 2:
        raise ValueError("pack_codes expects an (n, M) array")
    n, m = C.shape
    if element_bits * m <= 64:
        out = np.zeros(n, dtype=np.uint64)
        shift = np.uint64(element_bits)
        for j in range(m):
            out = (out << shift) | C[:, j].astype(np.uint64)
        return out
    out = np.empty(n, dtype=object)
    rows = C.tolist()
    for i, row in enumerate(rows):
        key = 0
        for v in row:
            key = (key << element_bits) | int(v)
        out[i] = key
    return out


def unpack_key(key: int, m: int, element_bits: int) -> list[int]:
    """Invert pack_codes for one key."""
    mask = (1 << element_bits) - 1
    k = int(key)
    out = [0] * m
    for j in range(m - 1, -1, -1):
        out[j] = k & mask
        k >>= element_bits
    return out


class SlotStore:
    """Append-only mapping from packed sub-code keys to record identifiers.

    Stored as a sorted unique-key array plus CSR-style packed identifier
    array; lookups binary-search the keys. Identifiers keep insertion order
    within each slot, and an absent key yields an empty array rather than an
    error. The number of occupied slots never exceeds 2**key_bits.
    """

    def __init__(self, key_bits: int):
        self.key_bits = key_bits
        self._chunks: list[tuple[np.ndarray, np.ndarray]] = []
        self._keys: np.ndarray | None = None
        self._offsets: np.ndarray | None = None
        self._ids: np.ndarray | None = None

    def extend(self, keys: np.ndarray, ids: np.ndarray) -> None:
        """Append identifiers under the given keys (parallel arrays)."""
        if len(keys) != len(ids):
            raise ValueError("keys and ids must have equal length")
        if len(keys):
            self._chunks.append((keys, np.asarray(ids, dtype=np.uint32)))
            self._keys = None

    def _build(self) -> None:
        keys = np.concatenate([k for k, _ in self._chunks])
        ids = np.concatenate([i for _, i in self._chunks])
        order = np.argsort(keys, kind="stable")
        sorted_keys = keys[order]
        uniq, starts = np.unique(sorted_keys, return_index=True)
        self._keys = uniq
        self._offsets = np.append(starts, len(sorted_keys))
        self._ids = ids[order]

    def _ensure_built(self) -> bool:
        if self._keys is None:
            if not self._chunks:
                return False
            self._build()
        return True

    def freeze(self) -> None:
        """Group pending appends now, so later lookups never mutate."""
        self._ensure_built()

    def lookup(self, key) -> np.ndarray:
        """Identifiers stored under ``key``; empty array when absent."""
        if not self._ensure_built():
            return _EMPTY_IDS
        keys = self._keys
        probe = key if keys.dtype == object else keys.dtype.type(key)
        i = int(np.searchsorted(keys, probe))
        if i == keys.size or keys[i] != probe:
            return _EMPTY_IDS
        return self._ids[self._offsets[i] : self._offsets[i + 1]]

    def items(self):
        """(key, identifiers) pairs in ascending key order."""
        if not self._ensure_built():
            return
        for i in range(self._keys.size):
            yield int(self._keys[i]), self._ids[self._offsets[i] : self._offsets[i + 1]]

    @property
    def slot_count(self) -> int:
        if not self._ensure_built():
            return 0
        return int(self._keys.size)

    def __len__(self) -> int:
        if not self._ensure_built():
            return 0
        return int(self._ids.size)


class MarkBuffer:
    """Per-query scratch for the merge step: occurrence counts plus the
    marked (identifier, distance) scores in marking order."""

    __slots__ = ("counts", "dist_by_id", "_ids", "_dists", "_np_ids", "_np_dists", "best_dist", "best_id")

    def __init__(self):
        self.counts: dict[int, int] = {}
        self.dist_by_id: dict[int, float] = {}
        self._ids: list[int] = []
        self._dists: list[float] = []
        self._np_ids: np.ndarray | None = None
        self._np_dists: np.ndarray | None = None
        self.best_dist = math.inf
        self.best_id = -1

    def mark(self, ids: np.ndarray, dists: np.ndarray) -> None:
        id_list = ids.tolist()
        dist_list = dists.tolist()
        self._ids.extend(id_list)
        self._dists.extend(dist_list)
        self.dist_by_id.update(zip(id_list, dist_list))
        self._np_ids = None
        i = int(np.argmin(dists))
        d = dist_list[i]
        if d < self.best_dist or (d == self.best_dist and id_list[i] < self.best_id):
            self.best_dist = d
            self.best_id = id_list[i]

    def as_arrays(self):
        if self._np_ids is None:
            self._np_ids = np.array(self._ids, dtype=np.int64)
            self._np_dists = np.array(self._dists, dtype=np.float64)
        return self._np_ids, self._np_dists


class SinglePQTable:
    """Hash table keyed by whole PQ codes.

    Querying draws candidate codes in ascending asymmetric distance and
    collects the identifiers of each non-empty slot until L are found, so the
    result matches the top-L of a linear ADC scan. The index is immutable
    during queries; each query owns its generator.
    """

    def __init__(self, codebook: Codebook):
        self.codebook = codebook
        self.store = SlotStore(codebook.element_bits * codebook.M)
        self._n = 0

    def __len__(self) -> int:
        return self._n

    def insert(self, codes) -> None:
        """Append codes; identifier of each row is its insertion position."""
        C = np.asarray(codes)
        if C.ndim != 2 or C.shape[1] != self.codebook.M:
            raise ValueError(f"expected (n, {self.codebook.M}) codes, got {C.shape}")
        if C.size and (int(C.min()) < 0 or int(C.max()) >= self.codebook.K):
            raise IndexError(f"code elements must lie in [0, {self.codebook.K})")
        keys = pack_codes(C, self.codebook.element_bits)
        ids = np.arange(self._n, self._n + len(C), dtype=np.uint32)
        self.store.extend(keys, ids)
        self._n += len(C)

    def freeze(self) -> None:
        """Finish slot grouping; queries then never mutate the table."""
        self.store.freeze()

    def query(self, q, L: int = 1):
        """Top-L (identifiers, distances), ascending by (distance, id)."""
        if self._n == 0:
            raise ValueError("query on an empty table")
        if L < 1:
            raise ValueError("L must be >= 1")
        if L > self._n:
            raise ValueError(f"L={L} exceeds the {self._n} stored items")
        eb = self.codebook.element_bits
        gen = KeyGenerator(self.codebook, q)
        found_ids: list[np.ndarray] = []
        found_dists: list[np.ndarray] = []
        total = 0
        while total < L:
            try:
                code, dist = gen.next_key()
            except KeysExhausted:  # unreachable for L <= N; defensive
                raise ValueError(f"keys exhausted before collecting L={L} items") from None
            ids = self.store.lookup(int(pack_codes(code[None, :], eb)[0]))
            if ids.size:
                found_ids.append(ids.astype(np.int64))
                found_dists.append(np.full(ids.size, dist))
                total += int(ids.size)
        return top_scores(np.concatenate(found_dists), L, ids=np.concatenate(found_ids))


class MultiPQTable:
    """T hash tables over code slices, merged by counting and marking.

    Table t keys on code elements [t*M/T, (t+1)*M/T). During a query each
    table emits sub-keys in ascending sub-distance (round-robin); the first
    time an identifier surfaces anywhere its full asymmetric distance is
    computed from the retained codes and buffered ("marked"). When some
    identifier has surfaced from all T tables, its distance bounds the search:
    every identifier with a smaller distance is already marked, so the top-L
    can be read from the buffer once enough marked items fall under the bound.
    """

    def __init__(self, codebook: Codebook, T: int):
        M = codebook.M
        if T < 1 or M % T:
            raise ValueError(f"T={T} must divide M={M}")
        if T & (T - 1):
            raise ValueError(f"T={T} must be a power of two")
        self.codebook = codebook
        self.T = T
        self.span = M // T
        self.sub_codebooks = [
            subspace_codebook(codebook, t * self.span, (t + 1) * self.span) for t in range(T)
        ]
        self.stores = [SlotStore(codebook.element_bits * self.span) for _ in range(T)]
        self._code_chunks: list[np.ndarray] = []
        self._codes: np.ndarray | None = None
        self._n = 0

    def __len__(self) -> int:
        return self._n

    @property
    def codes(self) -> np.ndarray:
        """All inserted codes, row n holding identifier n's code."""
        if self._codes is None:
            if not self._code_chunks:
                return np.empty((0, self.codebook.M), dtype=self.codebook.code_dtype)
            self._codes = np.concatenate(self._code_chunks, axis=0)
        return self._codes

    def insert(self, codes) -> None:
        """Append codes: sub-keys go to every store, full codes are retained."""
        C = np.asarray(codes)
        if C.ndim != 2 or C.shape[1] != self.codebook.M:
            raise ValueError(f"expected (n, {self.codebook.M}) codes, got {C.shape}")
        if C.size and (int(C.min()) < 0 or int(C.max()) >= self.codebook.K):
            raise IndexError(f"code elements must lie in [0, {self.codebook.K})")
        eb = self.codebook.element_bits
        ids = np.arange(self._n, self._n + len(C), dtype=np.uint32)
        for t in range(self.T):
            keys = pack_codes(C[:, t * self.span : (t + 1) * self.span], eb)
            self.stores[t].extend(keys, ids)
        self._code_chunks.append(C.astype(self.codebook.code_dtype, copy=True))
        self._codes = None
        self._n += len(C)

    def freeze(self) -> None:
        """Finish slot grouping; queries then never mutate the table."""
        for store in self.stores:
            store.freeze()
        if self._codes is None and self._code_chunks:
            self._codes = np.concatenate(self._code_chunks, axis=0)

    def query(self, q, L: int = 1, on_bound: Callable[[float, dict], None] | None = None):
        """Top-L (identifiers, distances), ascending by (distance, id).

        ``on_bound`` is an instrumentation hook invoked as
        ``on_bound(d_min, marked)`` each time a bound distance is fixed,
        where ``marked`` maps already-marked identifiers to their distances.
        """
        if self._n == 0:
            raise ValueError("query on an empty table")
        if L < 1:
            raise ValueError("L must be >= 1")
        if L > self._n:
            raise ValueError(f"L={L} exceeds the {self._n} stored items")
        qv = np.asarray(q, dtype=np.float64)
        if qv.shape != (self.codebook.D,):
            raise ValueError(f"expected a query of dimension {self.codebook.D}, got {qv.shape}")
        full_dm = build_distance_matrix(self.codebook, qv)
        width = self.span * self.codebook.subdim
        gens = [
            KeyGenerator(self.sub_codebooks[t], qv[t * width : (t + 1) * width])
            for t in range(self.T)
        ]
        eb = self.codebook.element_bits
        codes = self.codes
        buf = MarkBuffer()
        counts = buf.counts
        alive = [True] * self.T
        n_alive = self.T
        while n_alive:
            for t in range(self.T):
                if not alive[t]:
                    continue
                try:
                    subcode, _ = gens[t].next_key()
                except KeysExhausted:
                    alive[t] = False
                    n_alive -= 1
                    continue
                ids = self.stores[t].lookup(int(pack_codes(subcode[None, :], eb)[0]))
                if not ids.size:
                    continue
                newly_seen: list[int] = []
                bounding: list[int] = []
                for n in ids.tolist():
                    c = counts.get(n, 0) + 1
                    counts[n] = c
                    if c == 1:
                        newly_seen.append(n)
                    if c == self.T:
                        bounding.append(n)
                if newly_seen:
                    new_ids = np.array(newly_seen, dtype=np.int64)
                    buf.mark(new_ids, adc_distances(full_dm, codes[new_ids]))
                for n in bounding:
                    d_min = buf.dist_by_id[n]
                    if on_bound is not None:
                        on_bound(d_min, buf.dist_by_id)
                    result = self._collect(buf, d_min, L)
                    if result is not None:
                        return result
        # every generator drained, so every identifier is marked
        marked_ids, marked_dists = buf.as_arrays()
        return top_scores(marked_dists, L, ids=marked_ids)

    def _collect(self, buf: MarkBuffer, d_min: float, L: int):
        if L == 1:
            # the bounding item itself is marked, so the running best qualifies
            return np.array([buf.best_id], dtype=np.int64), np.array([buf.best_dist])
        marked_ids, marked_dists = buf.as_arrays()
        under = marked_dists <= d_min
        if int(under.sum()) < L:
            return None
        return top_scores(marked_dists[under], L, ids=marked_ids[under])


def build_table(codebook: Codebook, codes, T: int):
    """A SinglePQTable for T=1, else a MultiPQTable, with codes inserted
    and frozen, so concurrent queries share an immutable index."""
    table = SinglePQTable(codebook) if T == 1 else MultiPQTable(codebook, T)
    table.insert(codes)
    table.freeze()
    return table


def table_codes(table) -> np.ndarray:
    """The (N, M) code array behind a table.

    A MultiPQTable retains codes directly; a SinglePQTable's are
    reconstructed from its slot keys (each key unpacks to the full code).
    """
    if isinstance(table, MultiPQTable):
        return table.codes
    cb = table.codebook
    codes = np.zeros((len(table), cb.M), dtype=cb.code_dtype)
    for key, ids in table.store.items():
        codes[np.asarray(ids, dtype=np.int64)] = unpack_key(key, cb.M, cb.element_bits)
    return codes


def plan_tables(B: int, N: int, M: int | None = None) -> int:
    """Indicative power-of-two table count for B-bit codes over N items.

    Quantizes B / log2(N) to the nearest power of two (exponent rounded half
    up) and clamps the result to [1, M] so sub-codes stay non-empty; M
    defaults to B / 8, the subspace count for one-byte code elements.
    """
    if B < 8 or B & (B - 1):
        raise ValueError("B must be a power of two >= 8")
    if N < 2:
        raise ValueError("table planning needs N >= 2")
    if M is None:
        M = B // 8
    exponent = math.floor(math.log2(B / math.log2(N)) + 0.5)
    t = 2 ** max(0, exponent)
    t = max(1, min(t, M))
    while M % t:
        t //= 2
    return int(t)


def fill_rate(B: int, N: int) -> float:
    """Probability that a slot of a 2**B-slot table is non-empty after N
    uniform insertions: 1 - (1 - 2**-B)**N. Doubles as the hit rate of a
    uniformly distributed query."""
    if N < 0:
        raise ValueError("N must be >= 0")
    return -math.expm1(N * math.log1p(-(2.0**-B)))


def expected_hashings(B: int, N: int) -> float:
    """Expected number of hashings until the first non-empty slot, 1/p."""
    if N < 1:
        raise ValueError("expected hashings are undefined for an empty table")
    return 1.0 / fill_rate(B, N)


def slot_occupancy(B: int, N: int) -> float:
    """Expected identifiers per non-empty slot under uniform hashing."""
    if N < 1:
        raise ValueError("slot occupancy is undefined for an empty table")
    return N / (2.0**B * fill_rate(B, N))


class MemoryEstimate(NamedTuple):
    table_bytes: float
    linear_scan_bytes: float


def estimate_memory(B: int, N: int, D: int, K: int, T: int) -> MemoryEstimate:
    """Theoretical lower-bound memory for the index and for a linear scan.

    A single table holds 4-byte identifiers plus the codebook (4N + 4DK
    bytes); divided tables additionally retain the codes themselves
    ((4T + B/8)N + 4DK bytes). The linear-scan figure BN/8 + 4KD is returned
    for comparison.
    """
    if N < 0 or T < 1:
        raise ValueError("need N >= 0 and T >= 1")
    codebook = 4.0 * D * K
    table = 4.0 * N + codebook if T == 1 else (4.0 * T + B / 8.0) * N + codebook
    return MemoryEstimate(table, B * N / 8.0 + codebook)


class SimulatedHashing(NamedTuple):
    fill_rate: float
    slot_occupancy: float


def simulate_uniform_hashing(B: int, N: int, trials: int = 1_000_000, seed: int = 0) -> SimulatedHashing:
    """Monte-Carlo fill rate and non-empty-slot occupancy under uniform hashing.

    Repeatedly throws N uniform keys into 2**B slots until roughly ``trials``
    total insertions are spent, then averages the observed statistics.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    slots = 1 << B
    rounds = max(1, trials // N)
    rng = np.random.default_rng(seed)
    filled_total = 0
    for _ in range(rounds):
        filled_total += np.unique(rng.integers(0, slots, size=N)).size
    mean_filled = filled_total / rounds
    return SimulatedHashing(mean_filled / slots, N / mean_filled)
