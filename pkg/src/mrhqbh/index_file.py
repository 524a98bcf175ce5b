"""Binary index file.

Layout, all integers little-endian::

    b"MRHX"                  magic
    u32 version              currently 1
    --- body ---
    u32 P, P bytes           params as canonical JSON (sorted keys, no spaces)
    u32 M                    song count
    M records, ascending id:
        u32 K, K bytes       song id, UTF-8
        u64 N                song length in samples
        u64 counts           levels 0..l, positions 0..2**j-1, bins 0..t-1
    --- end body ---
    u32 crc32(body)

Only raw integer counts are stored; normalized masses are recomputed on load.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
import zlib
from pathlib import Path

import numpy as np

from .mrh import Index, IndexParams, MultiResHistogram

MAGIC = b"MRHX"
VERSION = 1


class IndexFormatError(ValueError):
    """The file is not a readable index."""


class BadMagicError(IndexFormatError):
    pass


class VersionMismatchError(IndexFormatError):
    pass


class ChecksumMismatchError(IndexFormatError):
    pass


def _canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False).encode("utf-8")


def encode_index(index: Index) -> bytes:
    p = index.params
    body = bytearray()
    params = _canonical_json(p.to_dict())
    body += struct.pack("<I", len(params)) + params
    body += struct.pack("<I", index.M)
    for sid in sorted(index.entries):
        mrh = index.entries[sid]
        key = sid.encode("utf-8")
        body += struct.pack("<I", len(key)) + key
        body += struct.pack("<Q", index.song_lengths[sid])
        for c in mrh.counts:
            body += c.astype("<u8").tobytes()
    return MAGIC + struct.pack("<I", VERSION) + bytes(body) + struct.pack("<I", zlib.crc32(body))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.buf):
            raise IndexFormatError("unexpected end of index body")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]


def decode_index(data: bytes) -> Index:
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagicError("bad magic: not an MRHX index file")
    if len(data) < 8:
        raise IndexFormatError("truncated index header")
    version = struct.unpack("<I", data[4:8])[0]
    if version != VERSION:
        raise VersionMismatchError(f"unsupported index version {version} (expected {VERSION})")
    if len(data) < 12:
        raise IndexFormatError("truncated index file")
    body, trailer = data[8:-4], data[-4:]
    if zlib.crc32(body) != struct.unpack("<I", trailer)[0]:
        raise ChecksumMismatchError("checksum mismatch: index file is corrupt or truncated")

    r = _Reader(body)
    try:
        raw = json.loads(r.take(r.u32()).decode("utf-8"))
        params = IndexParams(
            t=int(raw["t"]),
            levels=int(raw["levels"]),
            min_D=float(raw["min_D"]),
            max_D=float(raw["max_D"]),
            amplitude_normalized=bool(raw["amplitude_normalized"]),
        )
        spec = params.spec
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise IndexFormatError(f"bad params block: {exc}") from exc

    entries, lengths = {}, {}
    for _ in range(r.u32()):
        try:
            sid = r.take(r.u32()).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise IndexFormatError("song id is not valid UTF-8") from exc
        n = r.u64()
        counts = []
        for j in range(params.levels + 1):
            k = 2**j * params.t
            arr = np.frombuffer(r.take(8 * k), dtype="<u8").astype(np.int64)
            counts.append(arr.reshape(2**j, params.t))
        if sid in entries:
            raise IndexFormatError(f"duplicate song id {sid!r}")
        entries[sid] = MultiResHistogram(sid, spec, tuple(counts))
        lengths[sid] = n
    if r.pos != len(body):
        raise IndexFormatError(f"{len(body) - r.pos} trailing bytes after last record")
    try:
        return Index(params, entries, lengths)
    except ValueError as exc:
        raise IndexFormatError(str(exc)) from exc


def save_index(index: Index, path: str | os.PathLike) -> None:
    """Write ``index`` to ``path`` atomically."""
    path = Path(path)
    data = encode_index(index)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def load_index(path: str | os.PathLike) -> Index:
    return decode_index(Path(path).read_bytes())
