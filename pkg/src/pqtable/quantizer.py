"""Product quantization: codebook training, encoding, and asymmetric distances.

A product quantizer splits a D-dimensional vector into M subvectors and maps
each to the nearest entry of a per-subspace codebook of K sub-codewords, so a
vector compresses to M small integers. Distances between a raw query and
compressed codes are approximated by summing per-subspace squared distances
looked up from a query-specific table (asymmetric distance computation, ADC).

All distance arithmetic accumulates in float64 regardless of input dtype, and
every ADC path in this package sums the M per-subspace terms in subspace
order. Distances produced by different query paths therefore compare bitwise
equal, which is what lets the hash-table search return results identical to a
linear scan.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Codebook",
    "DistanceMatrix",
    "adc_distance",
    "adc_distances",
    "build_distance_matrix",
    "decode",
    "encode",
    "kmeans",
    "linear_adc_scan",
    "quantization_error",
    "subspace_codebook",
    "top_scores",
    "train_codebook",
]

# elements per (rows, K, subdim) block when chunking distance computations
_ASSIGN_CHUNK = 1 << 22


@dataclass(frozen=True)
class Codebook:
    """Trained product-quantizer codewords, shape (M, K, D // M) float32."""

    codewords: np.ndarray

    def __post_init__(self) -> None:
        cw = np.ascontiguousarray(self.codewords, dtype=np.float32)
        if cw.ndim != 3 or min(cw.shape) < 1:
            raise ValueError("codewords must be a non-empty (M, K, D // M) array")
        object.__setattr__(self, "codewords", cw)

    @property
    def M(self) -> int:
        return self.codewords.shape[0]

    @property
    def K(self) -> int:
        return self.codewords.shape[1]

    @property
    def subdim(self) -> int:
        return self.codewords.shape[2]

    @property
    def D(self) -> int:
        return self.M * self.subdim

    @property
    def element_bits(self) -> int:
        """Storage bits per code element: one byte up to K=256, else two."""
        return 8 if self.K <= 256 else 16

    @property
    def code_dtype(self) -> np.dtype:
        return np.dtype(np.uint8 if self.K <= 256 else np.uint16)

    @property
    def code_bits(self) -> int:
        """Code length B = M * log2(K) in bits; requires power-of-two K."""
        if self.K & (self.K - 1):
            raise ValueError("code_bits is only defined for power-of-two K")
        return self.M * (self.K.bit_length() - 1)


class DistanceMatrix:
    """Squared distances from one query to every sub-codeword, per subspace.

    ``dists[m, k]`` stays addressable by the original sub-codeword index k
    whether or not the rows were sorted. When built with ``sort=True``,
    ``sorted_keys[m, r]`` and ``sorted_dists[m, r]`` hold the sub-codeword
    index and distance at ascending rank r; ties rank the smaller index first.
    """

    __slots__ = ("dists", "sorted_keys", "sorted_dists")

    def __init__(self, dists, sorted_keys=None, sorted_dists=None):
        self.dists = dists
        self.sorted_keys = sorted_keys
        self.sorted_dists = sorted_dists

    @property
    def M(self) -> int:
        return self.dists.shape[0]

    @property
    def K(self) -> int:
        return self.dists.shape[1]

    @property
    def is_sorted(self) -> bool:
        return self.sorted_keys is not None

    def lookup(self, m: int, k: int) -> float:
        """Distance for sub-codeword k of subspace m (original indexing)."""
        if not 0 <= k < self.K:
            raise IndexError(f"sub-codeword index {k} out of range [0, {self.K})")
        return float(self.dists[m, k])

    def entry(self, m: int, rank: int) -> tuple[int, float]:
        """(sub-codeword index, distance) at the given rank of a sorted row."""
        if not self.is_sorted:
            raise ValueError("distance matrix was built without sorting")
        return int(self.sorted_keys[m, rank]), float(self.sorted_dists[m, rank])


def _nearest(points: np.ndarray, centroids: np.ndarray):
    """Index of and squared distance to the nearest centroid per point.

    Ties break toward the smaller centroid index. Computed chunked with the
    direct squared-difference form so an exact hit yields an exact zero.
    """
    n = points.shape[0]
    K, dim = centroids.shape
    rows = max(1, _ASSIGN_CHUNK // max(1, K * dim))
    mind = np.empty(n, dtype=np.float64)
    assign = np.empty(n, dtype=np.int64)
    for lo in range(0, n, rows):
        hi = min(n, lo + rows)
        d2 = ((points[lo:hi, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        assign[lo:hi] = np.argmin(d2, axis=1)
        mind[lo:hi] = d2[np.arange(hi - lo), assign[lo:hi]]
    return mind, assign


def _sample_distinct(points: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    chosen: list[int] = []
    seen: set[bytes] = set()
    for i in rng.permutation(len(points)):
        key = points[i].tobytes()
        if key not in seen:
            seen.add(key)
            chosen.append(int(i))
            if len(chosen) == K:
                return points[np.array(chosen)].copy()
    raise ValueError(f"training data has fewer than K={K} distinct sub-vectors")


def kmeans(points, K: int, iterations: int, rng: np.random.Generator, init=None):
    """Lloyd's k-means with deterministic seeding and reseeded empty clusters.

    Initial centroids are K distinct points sampled through ``rng`` unless
    ``init`` provides them. Assignment ties break toward the smaller centroid
    index; a cluster left empty is reseeded from the point farthest from its
    assigned centroid. The within-cluster squared error is non-increasing
    across iterations.

    Returns:
        (centroids, assignments): float64 (K, d) centroids and the final
        int assignment of each point.
    """
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError("points must be a 2-D array")
    n, dim = pts.shape
    if n < K:
        raise ValueError(f"k-means needs at least K={K} points, got {n}")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if init is not None:
        centroids = np.array(init, dtype=np.float64)
    else:
        centroids = _sample_distinct(pts, K, rng)
    assign = np.zeros(n, dtype=np.int64)
    for _ in range(iterations):
        mind, assign = _nearest(pts, centroids)
        for k in np.flatnonzero(np.bincount(assign, minlength=K) == 0):
            far = int(np.argmax(mind))
            centroids[k] = pts[far]
            assign[far] = k
            mind[far] = 0.0
        counts = np.bincount(assign, minlength=K)
        sums = np.zeros((K, dim), dtype=np.float64)
        np.add.at(sums, assign, pts)
        filled = counts > 0
        centroids[filled] = sums[filled] / counts[filled, None]
    return centroids, assign


def train_codebook(vectors, M: int, K: int = 256, iterations: int = 20, seed: int = 0) -> Codebook:
    """Train per-subspace k-means codebooks.

    Args:
        vectors: Training data of shape (N, D); D must be divisible by M.
        K: Sub-codewords per subspace. Up to 256 a code element fits in one
            byte; larger K uses two bytes per element.
        iterations: Lloyd iterations per subspace.
        seed: Seed for the initial centroid sampling.

    Returns:
        A Codebook with float32 codewords of shape (M, K, D // M).
    """
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("training vectors must be a 2-D array")
    n, D = X.shape
    if D % M:
        raise ValueError(f"dimension D={D} is not divisible by M={M}")
    if n < K:
        raise ValueError(f"need at least K={K} training vectors, got {n}")
    rng = np.random.default_rng(seed)
    s = D // M
    codewords = np.empty((M, K, s), dtype=np.float32)
    for m in range(M):
        centroids, _ = kmeans(X[:, m * s : (m + 1) * s], K, iterations, rng)
        codewords[m] = centroids.astype(np.float32)
    return Codebook(codewords)


def subspace_codebook(cb: Codebook, start: int, stop: int) -> Codebook:
    """Codebook restricted to subspaces [start, stop)."""
    if not 0 <= start < stop <= cb.M:
        raise ValueError(f"invalid subspace range [{start}, {stop}) for M={cb.M}")
    return Codebook(cb.codewords[start:stop])


def encode(cb: Codebook, x) -> np.ndarray:
    """Quantize vectors to per-subspace nearest-codeword indices.

    Accepts a single (D,) vector or an (N, D) batch and returns codes with
    the matching leading shape, one element per subspace. Argmin ties break
    toward the smaller codeword index.
    """
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    X = arr[None, :] if single else arr
    if X.ndim != 2 or X.shape[1] != cb.D:
        raise ValueError(f"expected vectors of dimension {cb.D}, got shape {arr.shape}")
    codes = np.empty((X.shape[0], cb.M), dtype=cb.code_dtype)
    s = cb.subdim
    for m in range(cb.M):
        _, assign = _nearest(X[:, m * s : (m + 1) * s], cb.codewords[m].astype(np.float64))
        codes[:, m] = assign
    return codes[0] if single else codes


def _check_codes(cb: Codebook, codes) -> np.ndarray:
    arr = np.asarray(codes)
    if arr.ndim != 2 or arr.shape[1] != cb.M:
        raise ValueError(f"expected codes of length M={cb.M}, got shape {arr.shape}")
    if arr.size and (int(arr.min()) < 0 or int(arr.max()) >= cb.K):
        raise IndexError(f"code elements must lie in [0, {cb.K})")
    return arr


def decode(cb: Codebook, codes) -> np.ndarray:
    """Reconstruct vectors by concatenating the selected sub-codewords."""
    arr = np.asarray(codes)
    single = arr.ndim == 1
    C = _check_codes(cb, arr[None, :] if single else arr)
    out = cb.codewords[np.arange(cb.M), C.astype(np.intp)].reshape(len(C), cb.D)
    return out[0] if single else out


def build_distance_matrix(cb: Codebook, q, sort: bool = False) -> DistanceMatrix:
    """Per-subspace squared distances from a query to every sub-codeword.

    With ``sort=True`` each row is additionally sorted ascending (stable, so
    equal distances keep the smaller sub-codeword index first), which is the
    form the key generator consumes. Cost O(DK) plus O(MK log K) for sorting.
    """
    qv = np.asarray(q, dtype=np.float64)
    if qv.shape != (cb.D,):
        raise ValueError(f"expected a query of dimension {cb.D}, got shape {qv.shape}")
    M, K, s = cb.M, cb.K, cb.subdim
    dists = np.empty((M, K), dtype=np.float64)
    for m in range(M):
        diff = cb.codewords[m].astype(np.float64) - qv[m * s : (m + 1) * s]
        dists[m] = (diff * diff).sum(axis=1)
    if not sort:
        return DistanceMatrix(dists)
    sorted_keys = np.empty((M, K), dtype=np.int64)
    sorted_dists = np.empty((M, K), dtype=np.float64)
    for m in range(M):
        order = np.argsort(dists[m], kind="stable")
        sorted_keys[m] = order
        sorted_dists[m] = dists[m, order]
    return DistanceMatrix(dists, sorted_keys, sorted_dists)


def adc_distances(dm, codes) -> np.ndarray:
    """Asymmetric distances for a batch of codes.

    Sums float64 per-subspace terms in subspace order (one chained add per
    subspace), which keeps results bitwise identical across every query path
    in the package. ``dm`` may be a DistanceMatrix or a raw (M, K) array.
    """
    dists = dm.dists if isinstance(dm, DistanceMatrix) else np.asarray(dm, dtype=np.float64)
    C = np.asarray(codes)
    if C.ndim != 2 or C.shape[1] != dists.shape[0]:
        raise ValueError(f"expected codes of shape (n, {dists.shape[0]}), got {C.shape}")
    if C.size and (int(C.min()) < 0 or int(C.max()) >= dists.shape[1]):
        raise IndexError(f"code elements must lie in [0, {dists.shape[1]})")
    idx = C.astype(np.intp)
    acc = dists[0, idx[:, 0]].copy()
    for m in range(1, dists.shape[0]):
        acc += dists[m, idx[:, m]]
    return acc


def adc_distance(dm, code) -> float:
    """Asymmetric distance between the query behind ``dm`` and one code."""
    arr = np.asarray(code)
    if arr.ndim != 1:
        raise ValueError("adc_distance expects a single code")
    return float(adc_distances(dm, arr[None, :])[0])


def top_scores(dists: np.ndarray, L: int, ids: np.ndarray | None = None):
    """The min(L, n) smallest scores ordered by (distance, identifier).

    Exact ties at the cut-off distance resolve toward smaller identifiers.
    """
    n = dists.shape[0]
    if ids is None:
        ids = np.arange(n, dtype=np.int64)
    take = min(L, n)
    if take < n:
        part = np.argpartition(dists, take - 1)[:take]
        cand = np.flatnonzero(dists <= dists[part].max())
    else:
        cand = np.arange(n)
    order = np.lexsort((ids[cand], dists[cand]))
    pick = cand[order[:take]]
    return ids[pick].astype(np.int64), dists[pick]


def linear_adc_scan(cb: Codebook, codes, q, L: int = 1):
    """Exhaustive ADC evaluation of the query against every code.

    This is the exactness baseline: the table-based queries in this package
    return the same distance multiset as this scan. Results come back as
    parallel (identifiers, distances) arrays of length min(L, N), ascending
    by distance with ties broken by smaller identifier.
    """
    C = np.asarray(codes)
    if C.ndim != 2 or C.shape[0] == 0:
        raise ValueError("scan requires a non-empty (N, M) code array")
    if L < 1:
        raise ValueError("L must be >= 1")
    dm = build_distance_matrix(cb, q)
    return top_scores(adc_distances(dm, C), L)


def quantization_error(cb: Codebook, vectors) -> float:
    """Mean squared reconstruction error of encode-then-decode."""
    X = np.asarray(vectors, dtype=np.float64)
    diff = X - decode(cb, encode(cb, X)).astype(np.float64)
    return float(np.mean((diff * diff).sum(axis=1)))
