"""Best-first enumeration of PQ codes in non-decreasing asymmetric distance.

Candidate codes live on a min-priority queue seeded with the combination of
every subspace's nearest sub-codeword. Popping a candidate pushes its M
single-rank advances (one per subspace, skipping a subspace whose row is
already at its last rank), so the r-th pop yields the r-th smallest
asymmetric distance over all K^M codes. A seen-set keyed on the code itself
suppresses duplicates; it keeps popped codes, so each code is emitted exactly
once and K^M pops drain the queue.
"""

from __future__ import annotations

import heapq

import numpy as np

from .quantizer import Codebook, build_distance_matrix

__all__ = ["KeyGenerator", "KeysExhausted", "NonDuplicateQueue"]


class KeysExhausted(Exception):
    """Raised once all K^M codes have been emitted."""


class NonDuplicateQueue:
    """Min-priority queue that accepts each identity at most once.

    Entries order by (priority, identity), so equal priorities pop in
    lexicographically smallest identity order. Identities stay recorded after
    popping; re-pushing a popped identity is a no-op.
    """

    __slots__ = ("_heap", "_seen")

    def __init__(self):
        self._heap: list[tuple] = []
        self._seen: set = set()

    def __len__(self) -> int:
        return len(self._heap)

    def push(self, priority: float, identity: tuple, payload) -> bool:
        """Insert unless the identity was seen before; True when inserted."""
        if identity in self._seen:
            return False
        self._seen.add(identity)
        heapq.heappush(self._heap, (priority, identity, payload))
        return True

    def pop(self) -> tuple:
        """Remove and return the minimal (priority, identity, payload)."""
        if not self._heap:
            raise IndexError("pop from an empty queue")
        return heapq.heappop(self._heap)


class KeyGenerator:
    """Emits codes for one query in non-decreasing asymmetric distance.

    One generator serves one (query, table) pair and is not thread-safe;
    independent generators may run concurrently.
    """

    def __init__(self, codebook: Codebook, query_part):
        self.dmat = build_distance_matrix(codebook, query_part, sort=True)
        self.subspaces = self.dmat.M
        self.K = self.dmat.K
        self.queue = NonDuplicateQueue()
        ranks = (0,) * self.subspaces
        self.queue.push(self._priority(ranks), self._identity(ranks), ranks)

    def _identity(self, ranks: tuple) -> tuple:
        keys = self.dmat.sorted_keys
        return tuple(int(keys[m, r]) for m, r in enumerate(ranks))

    def _priority(self, ranks: tuple) -> float:
        # chained adds in subspace order; see quantizer.adc_distances
        dists = self.dmat.sorted_dists
        total = 0.0
        for m, r in enumerate(ranks):
            total += float(dists[m, r])
        return total

    def next_key(self) -> tuple[np.ndarray, float]:
        """The next nearest unseen code and its asymmetric distance."""
        try:
            priority, identity, ranks = self.queue.pop()
        except IndexError:
            raise KeysExhausted(f"all {self.K}**{self.subspaces} codes emitted") from None
        for m in range(self.subspaces):
            r = ranks[m] + 1
            if r < self.K:
                advanced = ranks[:m] + (r,) + ranks[m + 1 :]
                self.queue.push(self._priority(advanced), self._identity(advanced), advanced)
        return np.array(identity, dtype=np.int64), priority
