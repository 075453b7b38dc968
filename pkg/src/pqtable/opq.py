"""Optimized product quantization: an orthogonal rotation learned ahead of PQ.

Rotating the input space before product quantization reduces encoding error
when dimensions are correlated across subspaces. Database vectors are rotated
once at build time; at query time the same rotation is applied to the query
(one D x D multiplication) and the search proceeds unchanged, so the
exactness of the table search carries over.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quantizer import Codebook, decode, encode, kmeans, train_codebook
from .tables import build_table, plan_tables

__all__ = [
    "OPQTable",
    "Rotation",
    "build_opqtable",
    "identity_rotation",
    "random_rotation",
    "train_rotation",
]

_ORTHOGONALITY_TOL = 1e-5


@dataclass(frozen=True)
class Rotation:
    """An orthogonal D x D matrix applied as x -> R @ x."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        R = np.ascontiguousarray(self.matrix, dtype=np.float64)
        if R.ndim != 2 or R.shape[0] != R.shape[1]:
            raise ValueError("rotation matrix must be square")
        gram_error = np.abs(R.T @ R - np.eye(R.shape[0])).max()
        if gram_error > _ORTHOGONALITY_TOL:
            raise ValueError(f"matrix is not orthogonal (max |R'R - I| = {gram_error:.3g})")
        object.__setattr__(self, "matrix", R)

    @property
    def D(self) -> int:
        return self.matrix.shape[0]

    def apply(self, x) -> np.ndarray:
        """Rotate a (D,) vector or an (N, D) batch."""
        arr = np.asarray(x, dtype=np.float64)
        if arr.ndim == 1:
            if arr.shape[0] != self.D:
                raise ValueError(f"expected dimension {self.D}, got {arr.shape[0]}")
            return self.matrix @ arr
        if arr.ndim != 2 or arr.shape[1] != self.D:
            raise ValueError(f"expected (n, {self.D}) vectors, got shape {arr.shape}")
        return arr @ self.matrix.T


def identity_rotation(D: int) -> Rotation:
    return Rotation(np.eye(D))


def random_rotation(D: int, seed: int = 0) -> Rotation:
    """Haar-ish random orthogonal matrix (QR of a Gaussian, sign-fixed)."""
    rng = np.random.default_rng(seed)
    Q, R = np.linalg.qr(rng.standard_normal((D, D)))
    return Rotation(Q * np.sign(np.diag(R)))


def _warm_retrain(Y: np.ndarray, cb: Codebook, iterations: int, rng) -> Codebook:
    """Continue Lloyd iterations per subspace from the current codewords."""
    s = cb.subdim
    codewords = np.empty_like(cb.codewords)
    for m in range(cb.M):
        centroids, _ = kmeans(Y[:, m * s : (m + 1) * s], cb.K, iterations, rng, init=cb.codewords[m])
        codewords[m] = centroids.astype(np.float32)
    return Codebook(codewords)


def train_rotation(
    vectors,
    M: int,
    K: int = 256,
    iterations: int = 20,
    seed: int = 0,
    alternations: int = 10,
    init: str = "identity",
) -> tuple[Rotation, Codebook]:
    """Learn a rotation and codebooks by alternating optimization.

    With the rotation fixed, codebooks train on the rotated data; with the
    codebooks fixed, the rotation is refit so rotated inputs best match their
    reconstructions (an orthogonal-Procrustes step). Codebooks warm-start
    each alternation, so the rotated-space quantization error is
    non-increasing across alternations.

    Args:
        init: "identity" (default, deterministic) or "random" to start from
            a seeded random orthogonal matrix.

    Returns:
        (rotation, codebook) trained together; encode data as
        ``encode(codebook, rotation.apply(x))``.
    """
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("training vectors must be a 2-D array")
    if alternations < 0:
        raise ValueError("alternations must be >= 0")
    if init == "identity":
        rotation = identity_rotation(X.shape[1])
    elif init == "random":
        rotation = random_rotation(X.shape[1], seed)
    else:
        raise ValueError(f"unknown init {init!r}")
    R = rotation.matrix
    Y = X @ R.T
    cb = train_codebook(Y, M, K, iterations=iterations, seed=seed)
    for step in range(alternations):
        reconstructed = decode(cb, encode(cb, Y)).astype(np.float64)
        # orthogonal A minimizing ||X A - reconstructed||_F; R = A'
        U, _, Vt = np.linalg.svd(X.T @ reconstructed)
        A = U @ Vt
        R = A.T
        Y = X @ A
        cb = _warm_retrain(Y, cb, iterations, np.random.default_rng([seed, step]))
    return Rotation(R), cb


class OPQTable:
    """A rotation paired with a PQ-code table built over the rotated data.

    Queries rotate the input and delegate, so results equal a linear ADC scan
    of the rotated query against the rotated-data codes.
    """

    def __init__(self, rotation: Rotation, table):
        if rotation.D != table.codebook.D:
            raise ValueError(
                f"rotation dimension {rotation.D} != table dimension {table.codebook.D}"
            )
        self.rotation = rotation
        self.table = table

    def __len__(self) -> int:
        return len(self.table)

    @property
    def codebook(self) -> Codebook:
        return self.table.codebook

    def query(self, q, L: int = 1, **kwargs):
        return self.table.query(self.rotation.apply(q), L, **kwargs)


def build_opqtable(
    vectors,
    M: int,
    K: int = 256,
    T: int | None = None,
    iterations: int = 20,
    seed: int = 0,
    alternations: int = 10,
    rotation: Rotation | None = None,
) -> OPQTable:
    """Train (or accept) a rotation, encode the rotated vectors, and index them.

    T defaults to the planner's choice for the code length and N.
    """
    X = np.asarray(vectors, dtype=np.float64)
    if rotation is None:
        rotation, cb = train_rotation(
            X, M, K, iterations=iterations, seed=seed, alternations=alternations
        )
    else:
        cb = train_codebook(rotation.apply(X), M, K, iterations=iterations, seed=seed)
    codes = encode(cb, rotation.apply(X))
    if T is None:
        T = plan_tables(cb.code_bits, len(X), M=cb.M)
    return OPQTable(rotation, build_table(cb, codes, T))
