"""Versioned binary files for codebooks, indexes, and rotations.

Codebook block: magic "PQCB", u32 version, u32 D, u32 M, u32 K, then
M*K*(D/M) little-endian float32 codewords in (m, k, d) order.

Index file: magic "PQTB", u32 version, u32 T, u32 N, an embedded codebook
block, the N x M code array (u8 per element for K <= 256, else u16 LE), then
per store: u32 slot count followed by, per slot in ascending key order, a u64
key, a u32 identifier count, and the u32 identifiers in insertion order.

Rotation block (appended to either file when present): magic "OPQR", u32 D,
then D*D little-endian float32 row-major.

All fields are little-endian, so files read back bit-exactly across
platforms. Building the same index twice from the same inputs produces
byte-identical files.
"""

from __future__ import annotations

import struct

import numpy as np

from .opq import OPQTable, Rotation
from .quantizer import Codebook
from .tables import MultiPQTable, SinglePQTable, build_table, table_codes

__all__ = ["load_codebook", "load_index", "save_codebook", "save_index"]

_CODEBOOK_MAGIC = b"PQCB"
_INDEX_MAGIC = b"PQTB"
_ROTATION_MAGIC = b"OPQR"
_VERSION = 1


def _write_codebook_block(f, cb: Codebook) -> None:
    f.write(struct.pack("<4sIIII", _CODEBOOK_MAGIC, _VERSION, cb.D, cb.M, cb.K))
    f.write(cb.codewords.astype("<f4").tobytes())


def _read_exact(f, size: int, what: str) -> bytes:
    data = f.read(size)
    if len(data) != size:
        raise ValueError(f"truncated file while reading {what}")
    return data


def _read_codebook_block(f) -> Codebook:
    magic, version, D, M, K = struct.unpack("<4sIIII", _read_exact(f, 20, "codebook header"))
    if magic != _CODEBOOK_MAGIC:
        raise ValueError(f"bad codebook magic {magic!r}")
    if version != _VERSION:
        raise ValueError(f"unsupported codebook version {version}")
    if M == 0 or K == 0 or D % M:
        raise ValueError(f"inconsistent codebook header (D={D}, M={M}, K={K})")
    count = M * K * (D // M)
    raw = _read_exact(f, 4 * count, "codebook payload")
    codewords = np.frombuffer(raw, dtype="<f4").reshape(M, K, D // M)
    return Codebook(codewords)


def _write_rotation_block(f, rotation: Rotation) -> None:
    f.write(struct.pack("<4sI", _ROTATION_MAGIC, rotation.D))
    f.write(rotation.matrix.astype("<f4").tobytes())


def _read_rotation_block(f) -> Rotation | None:
    head = f.read(8)
    if not head:
        return None
    magic, D = struct.unpack("<4sI", head)
    if magic != _ROTATION_MAGIC:
        raise ValueError(f"bad rotation magic {magic!r}")
    raw = _read_exact(f, 4 * D * D, "rotation payload")
    return Rotation(np.frombuffer(raw, dtype="<f4").reshape(D, D).astype(np.float64))


def save_codebook(path, cb: Codebook, rotation: Rotation | None = None) -> None:
    """Write a codebook file, appending the rotation block when given."""
    with open(path, "wb") as f:
        _write_codebook_block(f, cb)
        if rotation is not None:
            _write_rotation_block(f, rotation)


def load_codebook(path) -> tuple[Codebook, Rotation | None]:
    with open(path, "rb") as f:
        cb = _read_codebook_block(f)
        rotation = _read_rotation_block(f)
    return cb, rotation


def save_index(path, table, rotation: Rotation | None = None) -> None:
    """Write an index file for a single, multi, or OPQ table."""
    if isinstance(table, OPQTable):
        rotation = table.rotation if rotation is None else rotation
        table = table.table
    if isinstance(table, SinglePQTable):
        T, stores = 1, [table.store]
    elif isinstance(table, MultiPQTable):
        T, stores = table.T, table.stores
    else:
        raise TypeError(f"cannot serialize {type(table).__name__}")
    cb = table.codebook
    if any(store.key_bits > 64 for store in stores):
        raise ValueError("serialization supports slot keys up to 64 bits")
    codes = table_codes(table)
    with open(path, "wb") as f:
        f.write(struct.pack("<4sIII", _INDEX_MAGIC, _VERSION, T, len(table)))
        _write_codebook_block(f, cb)
        f.write(codes.astype("<u1" if cb.K <= 256 else "<u2").tobytes())
        for store in stores:
            f.write(struct.pack("<I", store.slot_count))
            for key, ids in store.items():
                f.write(struct.pack("<QI", key, len(ids)))
                f.write(np.asarray(ids, dtype="<u4").tobytes())
        if rotation is not None:
            _write_rotation_block(f, rotation)


def load_index(path):
    """Read an index file back into a table (OPQTable when a rotation follows)."""
    with open(path, "rb") as f:
        magic, version, T, n = struct.unpack("<4sIII", _read_exact(f, 16, "index header"))
        if magic != _INDEX_MAGIC:
            raise ValueError(f"bad index magic {magic!r}")
        if version != _VERSION:
            raise ValueError(f"unsupported index version {version}")
        cb = _read_codebook_block(f)
        elem = "<u1" if cb.K <= 256 else "<u2"
        raw = _read_exact(f, n * cb.M * np.dtype(elem).itemsize, "code array")
        codes = np.frombuffer(raw, dtype=elem).reshape(n, cb.M)
        for _ in range(T):
            (slot_count,) = struct.unpack("<I", _read_exact(f, 4, "slot count"))
            total = 0
            for _ in range(slot_count):
                _, id_count = struct.unpack("<QI", _read_exact(f, 12, "slot header"))
                _read_exact(f, 4 * id_count, "slot identifiers")
                total += id_count
            if total != n:
                raise ValueError(f"store holds {total} identifiers, expected {n}")
        rotation = _read_rotation_block(f)
    # re-inserting the codes reproduces the stores exactly (stable grouping)
    table = build_table(cb, codes, T)
    return table if rotation is None else OPQTable(rotation, table)
