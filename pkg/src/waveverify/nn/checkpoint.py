"""Binary parameter checkpoints.

Layout (all integers little-endian):

    magic   b"WVCK"
    u32     format version (currently 1)
    u32     metadata length, then that many bytes of UTF-8 JSON
    u32     parameter count
    per parameter, in sorted name order:
        u16     name length, then the UTF-8 name
        u8      rank
        u32[r]  dims
        f64[n]  values, little-endian, row-major

Values are always written as 64-bit floats, so a float32 store round-trips
exactly (every float32 is representable). Round-trips are bit-exact.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import ContractError
from .params import ParamStore

MAGIC = b"WVCK"
VERSION = 1


def save_checkpoint(path, store: ParamStore, meta: dict | None = None) -> None:
    meta_bytes = json.dumps(meta or {}, sort_keys=True).encode("utf-8")
    chunks = [MAGIC, struct.pack("<I", VERSION), struct.pack("<I", len(meta_bytes)), meta_bytes,
              struct.pack("<I", len(store))]
    for name, p in store.items():
        name_b = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(name_b)))
        chunks.append(name_b)
        chunks.append(struct.pack("<B", p.ndim))
        chunks.append(struct.pack(f"<{p.ndim}I", *p.shape))
        chunks.append(np.ascontiguousarray(p.values, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(chunks))


class _Reader:
    def __init__(self, buf: bytes, path):
        self.buf = buf
        self.pos = 0
        self.path = path

    def read(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise ContractError(
                f"checkpoint {self.path} truncated: wanted {self.pos + n} bytes, file has {len(self.buf)}"
            )
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.read(struct.calcsize(fmt)))


def load_checkpoint(path, dtype=np.float64) -> tuple[ParamStore, dict]:
    """Read a checkpoint; returns the store and the embedded metadata."""
    r = _Reader(Path(path).read_bytes(), path)
    if r.read(4) != MAGIC:
        raise ContractError(f"checkpoint {path} has a bad magic number")
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise ContractError(f"checkpoint {path} has unsupported version {version}")
    (meta_len,) = r.unpack("<I")
    meta = json.loads(r.read(meta_len).decode("utf-8"))
    (count,) = r.unpack("<I")
    store = ParamStore()
    for _ in range(count):
        (name_len,) = r.unpack("<H")
        name = r.read(name_len).decode("utf-8")
        (rank,) = r.unpack("<B")
        dims = r.unpack(f"<{rank}I")
        n = int(np.prod(dims)) if rank else 1
        values = np.frombuffer(r.read(8 * n), dtype="<f8").reshape(dims)
        store.add(name, values.astype(dtype, copy=True))
    if r.pos != len(r.buf):
        raise ContractError(f"checkpoint {path} has {len(r.buf) - r.pos} trailing bytes")
    return store, meta
