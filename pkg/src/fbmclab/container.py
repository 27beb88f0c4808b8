"""Binary matrix container for kernel and debug dumps.

Layout (little endian):

    magic    8 bytes  b"FBMCLAB\\0"
    version  uint32
    count    uint32
    per record:
        name_len uint16, name utf-8
        kind     uint8   0 = real, 1 = complex (stored with a trailing axis of 2)
        ndim     uint8
        shape    ndim x uint64 (stored shape, including the trailing 2)
        data     float64, row major
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"FBMCLAB\0"
VERSION = 1


class ContainerError(ValueError):
    pass


def write_container(path, records: dict) -> None:
    parts = [MAGIC, struct.pack("<II", VERSION, len(records))]
    for name, arr in records.items():
        a = np.asarray(arr)
        kind = int(np.iscomplexobj(a))
        if kind:
            a = np.stack([a.real, a.imag], axis=-1)
        a = np.asarray(a, dtype="<f8", order="C")
        raw = name.encode()
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack("<BB", kind, a.ndim) + struct.pack(f"<{a.ndim}Q", *a.shape))
        parts.append(a.tobytes())
    Path(path).write_bytes(b"".join(parts))


def read_container(path) -> dict:
    buf = memoryview(Path(path).read_bytes())
    if bytes(buf[:8]) != MAGIC:
        raise ContainerError(f"{path}: not a matrix container")
    version, count = struct.unpack_from("<II", buf, 8)
    if version != VERSION:
        raise ContainerError(f"{path}: unsupported version {version}")
    pos, out = 16, {}
    try:
        for _ in range(count):
            (n,) = struct.unpack_from("<H", buf, pos)
            name = bytes(buf[pos + 2 : pos + 2 + n]).decode()
            pos += 2 + n
            kind, ndim = struct.unpack_from("<BB", buf, pos)
            shape = struct.unpack_from(f"<{ndim}Q", buf, pos + 2)
            pos += 2 + 8 * ndim
            size = int(np.prod(shape, dtype=np.int64))
            if pos + 8 * size > len(buf):
                raise ContainerError(f"{path}: record {name!r} is truncated")
            a = np.frombuffer(buf, "<f8", size, pos).reshape(shape).astype(float)
            pos += 8 * size
            out[name] = a[..., 0] + 1j * a[..., 1] if kind else a
    except struct.error as exc:
        raise ContainerError(f"{path}: truncated header") from exc
    return out
