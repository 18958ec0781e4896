"""Binary checkpoint format for named float64 tensors.

Layout (all integers little-endian):

    magic   4 bytes  b"HTRD"
    version u16      currently 1
    count   u32      number of tensors
    tensors, repeated count times:
        name_len u16
        name     name_len bytes, UTF-8
        ndim     u8
        dims     ndim x u32
        data     prod(dims) float64, C order
    crc     u32      CRC-32 of every preceding byte

Readers verify magic, version, and checksum before trusting anything else.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from ..errors import CorruptCheckpoint

MAGIC = b"HTRD"
VERSION = 1


def save_tensors(path, tensors: dict[str, np.ndarray]) -> None:
    chunks = [MAGIC, struct.pack("<H", VERSION), struct.pack("<I", len(tensors))]
    for name, arr in tensors.items():
        # asarray, not ascontiguousarray: the latter promotes 0-d to (1,)
        arr = np.asarray(arr, dtype=np.float64)
        name_bytes = name.encode("utf-8")
        if len(name_bytes) > 0xFFFF:
            raise ValueError(f"tensor name too long: {name[:32]!r}...")
        if arr.ndim > 0xFF:
            raise ValueError(f"tensor rank {arr.ndim} too large for {name!r}")
        chunks.append(struct.pack("<H", len(name_bytes)))
        chunks.append(name_bytes)
        chunks.append(struct.pack("<B", arr.ndim))
        for dim in arr.shape:
            chunks.append(struct.pack("<I", dim))
        chunks.append(arr.tobytes(order="C"))
    body = b"".join(chunks)
    blob = body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)
    Path(path).write_bytes(blob)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptCheckpoint(
                f"truncated checkpoint: wanted {n} bytes at offset {self.pos}, "
                f"file has {len(self.data)}"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return struct.unpack("<B", self.take(1))[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def load_tensors(path) -> dict[str, np.ndarray]:
    blob = Path(path).read_bytes()
    if len(blob) < len(MAGIC) + 2 + 4 + 4:
        raise CorruptCheckpoint(f"checkpoint too small ({len(blob)} bytes)")
    body, crc_bytes = blob[:-4], blob[-4:]
    expected = struct.unpack("<I", crc_bytes)[0]
    actual = zlib.crc32(body) & 0xFFFFFFFF
    if actual != expected:
        raise CorruptCheckpoint(
            f"checksum mismatch: stored {expected:#010x}, computed {actual:#010x}"
        )
    r = _Reader(body)
    if r.take(4) != MAGIC:
        raise CorruptCheckpoint("bad magic; not a checkpoint file")
    version = r.u16()
    if version != VERSION:
        raise CorruptCheckpoint(f"unsupported checkpoint version {version}")
    count = r.u32()
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        name_len = r.u16()
        try:
            name = r.take(name_len).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorruptCheckpoint(f"undecodable tensor name: {exc}") from exc
        ndim = r.u8()
        dims = tuple(r.u32() for _ in range(ndim))
        n_items = 1
        for dim in dims:
            n_items *= dim
        payload = r.take(8 * n_items)
        arr = np.frombuffer(payload, dtype="<f8").reshape(dims).copy()
        if name in tensors:
            raise CorruptCheckpoint(f"duplicate tensor name {name!r}")
        tensors[name] = arr
    if r.pos != len(body):
        raise CorruptCheckpoint(
            f"{len(body) - r.pos} trailing bytes after last tensor"
        )
    return tensors
