"""Vector-file formats, synthetic datasets, recall, and PCA alignment.

The fvecs/bvecs/ivecs formats store repeated records of a little-endian
int32 dimension header followed by that many elements (float32, uint8, and
int32 respectively). Readers validate that every record declares the same
dimension and that the file is not truncated; byte vectors widen to float32
on load so all downstream distance arithmetic shares one code path.
"""

from __future__ import annotations

import numpy as np

__all__ = ["pca_align", "read_vecs", "recall_at_r", "synthesize", "write_vecs"]

# kind -> (payload dtype on disk, payload bytes per element, dtype returned)
_KINDS = {
    "fvecs": ("<f4", 4, np.float32),
    "bvecs": ("u1", 1, np.float32),
    "ivecs": ("<i4", 4, np.int32),
}


def read_vecs(path, kind: str, limit: int | None = None) -> np.ndarray:
    """Read an fvecs/bvecs/ivecs file into an (N, D) array.

    Args:
        limit: Stop after this many records when given.

    Raises:
        ValueError: On an unknown kind, a record whose dimension header
            disagrees with the first record, or a truncated file.
    """
    if kind not in _KINDS:
        raise ValueError(f"unknown vector kind {kind!r}; expected one of {sorted(_KINDS)}")
    disk_dtype, elem_bytes, out_dtype = _KINDS[kind]
    with open(path, "rb") as f:
        head = f.read(4)
        if not head:
            return np.empty((0, 0), dtype=out_dtype)
        if len(head) < 4:
            raise ValueError(f"{path}: truncated file (short dimension header)")
        dim = int(np.frombuffer(head, dtype="<i4")[0])
        if dim <= 0:
            raise ValueError(f"{path}: invalid dimension header {dim}")
        record_bytes = 4 + dim * elem_bytes
        f.seek(0)
        count = -1 if limit is None else limit * record_bytes
        raw = np.fromfile(f, dtype=np.uint8, count=count)
    if raw.size % record_bytes:
        raise ValueError(f"{path}: truncated file ({raw.size} bytes, record size {record_bytes})")
    records = raw.reshape(-1, record_bytes)
    headers = records[:, :4].copy().view("<i4").ravel()
    if not np.all(headers == dim):
        bad = int(np.flatnonzero(headers != dim)[0])
        raise ValueError(f"{path}: record {bad} declares dimension {int(headers[bad])}, expected {dim}")
    payload = records[:, 4:].copy().view(disk_dtype)
    return payload.astype(out_dtype)


def write_vecs(path, data: np.ndarray, kind: str) -> None:
    """Write an (N, D) array in the given vector format (exact round trip)."""
    if kind not in _KINDS:
        raise ValueError(f"unknown vector kind {kind!r}; expected one of {sorted(_KINDS)}")
    disk_dtype, _, _ = _KINDS[kind]
    arr = np.asarray(data)
    if arr.ndim != 2:
        raise ValueError("expected an (N, D) array")
    n, dim = arr.shape
    if kind == "bvecs":
        if arr.size and (arr.min() < 0 or arr.max() > 255 or np.any(arr != np.trunc(arr))):
            raise ValueError("bvecs payload must hold integers in [0, 255]")
    payload = np.ascontiguousarray(arr.astype(disk_dtype)).view(np.uint8).reshape(n, -1)
    headers = np.full((n, 1), dim, dtype="<i4").view(np.uint8).reshape(n, 4)
    with open(path, "wb") as f:
        np.hstack([headers, payload]).tofile(f)


def recall_at_r(result_ids, gt_ids, r: int) -> float:
    """Fraction of queries whose true nearest neighbor is in the top r results.

    ``gt_ids[q][0]`` is the true nearest identifier of query q (the leading
    column of a ground-truth file); a query scores when it appears among
    ``result_ids[q][:r]``.
    """
    if len(result_ids) != len(gt_ids):
        raise ValueError(f"{len(result_ids)} result lists vs {len(gt_ids)} ground-truth lists")
    if len(result_ids) == 0:
        raise ValueError("recall over zero queries is undefined")
    hits = 0
    for res, gt in zip(result_ids, gt_ids):
        res = np.asarray(res)
        if r > res.shape[0]:
            raise ValueError(f"r={r} exceeds a result list of length {res.shape[0]}")
        hits += int(np.asarray(gt)[0] in res[:r])
    return hits / len(result_ids)


def synthesize(
    distribution: str,
    N: int,
    D: int,
    seed: int = 0,
    clusters: int = 64,
    cluster_std: float = 0.05,
    spread: float = 1.0,
) -> np.ndarray:
    """Deterministic synthetic vectors.

    "gaussian" draws standard-normal vectors. "clustered" mixes Gaussians
    (tight blobs around ``clusters`` centers of scale ``spread``), which
    skews slot occupancy the way real descriptor data does, so hash-table hit
    rates exceed the uniform-hashing bound.
    """
    if N < 1 or D < 1:
        raise ValueError("need N >= 1 and D >= 1")
    rng = np.random.default_rng(seed)
    if distribution == "gaussian":
        return rng.standard_normal((N, D)).astype(np.float32)
    if distribution == "clustered":
        k = max(1, min(clusters, N))
        centers = rng.standard_normal((k, D)) * spread
        pick = rng.integers(0, k, size=N)
        return (centers[pick] + rng.standard_normal((N, D)) * cluster_std).astype(np.float32)
    raise ValueError(f"unknown distribution {distribution!r}")


def pca_align(data) -> np.ndarray:
    """Project data onto its principal axes (same dimensionality).

    Output dimensions are ordered by non-increasing variance. The projection
    is an orthogonal change of basis after centering, so pairwise distances
    are preserved. Requires N > D for a non-degenerate covariance.
    """
    X = np.asarray(data, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("expected an (N, D) array")
    n, d = X.shape
    if n <= d:
        raise ValueError(f"PCA alignment needs N > D (got N={n}, D={d})")
    centered = X - X.mean(axis=0)
    eigvals, eigvecs = np.linalg.eigh(centered.T @ centered / (n - 1))
    basis = eigvecs[:, ::-1]
    # fix signs so the alignment is deterministic
    anchor = np.argmax(np.abs(basis), axis=0)
    signs = np.sign(basis[anchor, np.arange(d)])
    signs[signs == 0] = 1.0
    return (centered @ (basis * signs)).astype(np.float32)
