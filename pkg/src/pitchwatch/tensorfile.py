"""On-disk binary formats: tensors and model checkpoints.

Tensor files (extension ``.pgt``)::

    bytes 0..3   magic "PGT1"
    byte  4      dtype code (0x01 = float32; the only code defined)
    byte  5      rank
    next         rank little-endian uint32 dimension sizes
    rest         row-major little-endian float32 payload

Checkpoint files (extension ``.pgc``)::

    bytes 0..3   magic "PGC1"
    bytes 4..35  sha-256 digest of the canonical model-config JSON
    next 4       little-endian uint32 array count
    per array    rank byte + rank little-endian uint32 dims
    rest         concatenated float32 payloads in declaration order

Readers reject bad magic, unknown dtype codes, and truncated payloads.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import InvalidInputError

TENSOR_MAGIC = b"PGT1"
CHECKPOINT_MAGIC = b"PGC1"
DTYPE_F32 = 0x01


def write_tensor(path: str | Path, arr: np.ndarray) -> None:
    a = np.ascontiguousarray(arr, dtype="<f4")
    if a.ndim == 0 or a.ndim > 255:
        raise InvalidInputError(f"tensor rank must be 1..255, got {a.ndim}")
    header = TENSOR_MAGIC + bytes([DTYPE_F32, a.ndim])
    header += struct.pack(f"<{a.ndim}I", *a.shape)
    Path(path).write_bytes(header + a.tobytes())


def read_tensor(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != TENSOR_MAGIC:
        raise InvalidInputError(f"{path}: bad tensor magic {raw[:4]!r}")
    if raw[4] != DTYPE_F32:
        raise InvalidInputError(f"{path}: unknown dtype code {raw[4]}")
    rank = raw[5]
    off = 6 + 4 * rank
    shape = struct.unpack(f"<{rank}I", raw[6:off])
    n = int(np.prod(shape, dtype=np.int64))
    payload = raw[off:]
    if len(payload) != n * 4:
        raise InvalidInputError(
            f"{path}: payload is {len(payload)} bytes, expected {n * 4} for shape {shape}"
        )
    return np.frombuffer(payload, dtype="<f4").reshape(shape).copy()


def roundtrip_ok(path: str | Path, arr: np.ndarray) -> bool:
    """Re-read a freshly written tensor and compare byte-for-byte."""
    return np.array_equal(read_tensor(path), np.asarray(arr, dtype=np.float32))


def config_digest(config: Any) -> bytes:
    """sha-256 of a JSON-serializable config, key-sorted for stability."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).digest()


def write_checkpoint(path: str | Path, config: Any, arrays: Sequence[np.ndarray]) -> None:
    parts = [CHECKPOINT_MAGIC, config_digest(config), struct.pack("<I", len(arrays))]
    payloads = []
    for a in arrays:
        a = np.ascontiguousarray(a, dtype="<f4")
        parts.append(bytes([a.ndim]) + struct.pack(f"<{a.ndim}I", *a.shape))
        payloads.append(a.tobytes())
    Path(path).write_bytes(b"".join(parts) + b"".join(payloads))


def read_checkpoint(path: str | Path, config: Any) -> list[np.ndarray]:
    """Load parameter arrays, verifying the stored config digest matches."""
    raw = Path(path).read_bytes()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise InvalidInputError(f"{path}: bad checkpoint magic {raw[:4]!r}")
    if raw[4:36] != config_digest(config):
        raise InvalidInputError(f"{path}: checkpoint was written for a different model config")
    (count,) = struct.unpack("<I", raw[36:40])
    off = 40
    shapes = []
    for _ in range(count):
        rank = raw[off]
        off += 1
        shapes.append(struct.unpack(f"<{rank}I", raw[off: off + 4 * rank]))
        off += 4 * rank
    arrays = []
    for shape in shapes:
        n = int(np.prod(shape, dtype=np.int64))
        arrays.append(np.frombuffer(raw, dtype="<f4", count=n, offset=off).reshape(shape).copy())
        off += n * 4
    if off != len(raw):
        raise InvalidInputError(f"{path}: {len(raw) - off} trailing bytes")
    return arrays
