"""Binary parameter checkpoints.

Layout, all little-endian:

    magic   4 bytes  b"EVIP"
    version u32      currently 1
    count   u32      number of parameters
    then per parameter, in writer order:
        name_len u16, name UTF-8, rank u8, dims u32 * rank, data f64 * prod(dims)

Writer order is preserved on load (dicts keep insertion order), which is
what makes checkpoint bytes reproducible run to run.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .autodiff import Tensor
from .errors import DataError

MAGIC = b"EVIP"
VERSION = 1


def checkpoint_bytes(params: dict[str, Tensor | np.ndarray]) -> bytes:
    chunks = [MAGIC, struct.pack("<II", VERSION, len(params))]
    for name, value in params.items():
        arr = np.asarray(value.data if isinstance(value, Tensor) else value,
                         dtype="<f8")
        name_b = name.encode("utf-8")
        if len(name_b) > 0xFFFF:
            raise ValueError(f"parameter name too long: {name!r}")
        chunks.append(struct.pack("<H", len(name_b)))
        chunks.append(name_b)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes())
    return b"".join(chunks)


def save_checkpoint(path: str | Path, params: dict[str, Tensor | np.ndarray]) -> None:
    Path(path).write_bytes(checkpoint_bytes(params))


def load_checkpoint(path: str | Path) -> dict[str, np.ndarray]:
    """Read a checkpoint back as float64 arrays, in file order."""
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise DataError(f"cannot read checkpoint {path}: {e}") from e
    if len(raw) < 12 or raw[:4] != MAGIC:
        raise DataError(f"{path}: not a parameter checkpoint (bad magic)")
    version, count = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    off = 12
    out: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", raw, off)
            off += 2
            name = raw[off:off + name_len].decode("utf-8")
            off += name_len
            (rank,) = struct.unpack_from("<B", raw, off)
            off += 1
            dims = struct.unpack_from(f"<{rank}I", raw, off)
            off += 4 * rank
            n = int(np.prod(dims)) if rank else 1
            arr = np.frombuffer(raw, dtype="<f8", count=n, offset=off)
            off += 8 * n
            out[name] = arr.astype(np.float64).reshape(dims)
    except (struct.error, ValueError) as e:
        raise DataError(f"{path}: truncated or corrupt checkpoint") from e
    if off != len(raw):
        raise DataError(f"{path}: {len(raw) - off} trailing bytes after last parameter")
    return out
