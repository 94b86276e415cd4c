"""Binary checkpoint container for named float64 arrays.

Layout (all little-endian): magic "IRLR", uint32 version (1), uint32
array count, then per array: uint16 name length, UTF-8 name, uint8
rank, rank uint32 dims, row-major float64 payload. A CRC32 of every
preceding byte closes the file. Arrays are written sorted by name so
identical contents produce identical bytes.
"""

from __future__ import annotations

import os
import struct
import tempfile
import zlib

import numpy as np

from .errors import CorruptionError, FormatError, ValidationError

MAGIC = b"IRLR"
VERSION = 1
_F8 = np.dtype("<f8")


def save_checkpoint(path, arrays: dict[str, np.ndarray]) -> None:
    """Write named arrays atomically; values are stored as float64."""
    parts = [MAGIC, struct.pack("<II", VERSION, len(arrays))]
    for name in sorted(arrays):
        if not name:
            raise ValidationError("array names must be nonempty")
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ValidationError(f"array name too long: {name!r}")
        arr = np.ascontiguousarray(np.asarray(arrays[name], dtype=np.float64))
        if arr.ndim > 255:
            raise ValidationError("array rank exceeds format limit")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.astype(_F8, copy=False).tobytes())
    blob = b"".join(parts)
    blob += struct.pack("<I", zlib.crc32(blob) & 0xFFFFFFFF)
    _atomic_write(path, blob)


def load_checkpoint(path) -> dict[str, np.ndarray]:
    """Read a container back; verifies magic, version and CRC."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16 or blob[:4] != MAGIC:
        raise FormatError(f"{path}: not a checkpoint container (bad magic)")
    body, crc_bytes = blob[:-4], blob[-4:]
    (stored_crc,) = struct.unpack("<I", crc_bytes)
    if zlib.crc32(body) & 0xFFFFFFFF != stored_crc:
        raise CorruptionError(f"{path}: CRC mismatch")
    version, count = struct.unpack_from("<II", body, 4)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    offset = 12
    arrays: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", body, offset)
        offset += 2
        name = body[offset:offset + name_len].decode("utf-8")
        offset += name_len
        (rank,) = struct.unpack_from("<B", body, offset)
        offset += 1
        dims = struct.unpack_from(f"<{rank}I", body, offset)
        offset += 4 * rank
        n_values = int(np.prod(dims)) if rank else 1
        arr = np.frombuffer(body, dtype=_F8, count=n_values, offset=offset).copy()
        offset += 8 * n_values
        if name in arrays:
            raise ValidationError(f"{path}: duplicate array name {name!r}")
        arrays[name] = arr.reshape(dims)
    if offset != len(body):
        raise FormatError(f"{path}: trailing bytes after last array")
    return arrays


def _atomic_write(path, blob: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def mlp_to_arrays(mlp, prefix: str) -> dict[str, np.ndarray]:
    out = {}
    for k, (W, b) in enumerate(zip(mlp.weights, mlp.biases)):
        out[f"{prefix}.W{k}"] = W
        out[f"{prefix}.b{k}"] = b
    return out


def mlp_from_arrays(arrays: dict[str, np.ndarray], prefix: str, head: str):
    from .numeric import MLPParams
    weights, biases = [], []
    k = 0
    while f"{prefix}.W{k}" in arrays:
        weights.append(np.ascontiguousarray(arrays[f"{prefix}.W{k}"]))
        biases.append(np.ascontiguousarray(arrays[f"{prefix}.b{k}"]))
        k += 1
    if not weights:
        raise FormatError(f"no arrays under prefix {prefix!r}")
    params = MLPParams(weights, biases, head)
    params.validate()
    return params
