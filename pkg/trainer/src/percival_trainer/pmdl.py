"""Weight-container serialization, written against the on-disk layout.

All integers little-endian:

    magic     4 bytes ("PMDL" for models, "PGLD" for golden fixtures)
    version   u32 (currently 1)
    count     u32 record count
    records   count x { name_len u16, name utf-8, ndim u8,
                        dims u32 x ndim, payload f32 x prod(dims) }
    crc32     u32 over every preceding byte

This is an independent implementation: the engine has its own. The two
must stay byte-compatible, which the export parity tests enforce.
"""

import struct
import zlib

import numpy as np

MODEL_MAGIC = b"PMDL"
GOLDEN_MAGIC = b"PGLD"
FORMAT_VERSION = 1


class FormatError(ValueError):
    pass


def write_records(records, magic):
    """(name, array) pairs -> container bytes, deterministically."""
    parts = [magic, struct.pack("<II", FORMAT_VERSION, len(records))]
    for name, arr in records:
        arr = np.asarray(arr, dtype=np.float32)
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.astype("<f4", copy=False).tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def read_records(data, magic):
    """container bytes -> list of (name, array). Validates magic, version,
    CRC, and structure; raises FormatError on anything off."""
    if len(data) < 16:
        raise FormatError("file too short to be a record container")
    if data[:4] != magic:
        raise FormatError(f"bad magic {data[:4]!r}, expected {magic!r}")
    if zlib.crc32(data[:-4]) & 0xFFFFFFFF != struct.unpack("<I", data[-4:])[0]:
        raise FormatError("checksum mismatch")
    version, count = struct.unpack_from("<II", data, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported version {version}")
    pos = 12
    end = len(data) - 4
    records = []
    for _ in range(count):
        if pos + 2 > end:
            raise FormatError("truncated record header")
        (name_len,) = struct.unpack_from("<H", data, pos)
        pos += 2
        name = data[pos:pos + name_len].decode("utf-8")
        pos += name_len
        if pos + 1 > end:
            raise FormatError(f"truncated record {name!r}")
        ndim = data[pos]
        pos += 1
        if pos + 4 * ndim > end:
            raise FormatError(f"truncated dims of {name!r}")
        dims = struct.unpack_from(f"<{ndim}I", data, pos)
        pos += 4 * ndim
        n = int(np.prod(dims, dtype=np.int64)) if ndim else 1
        if pos + 4 * n > end:
            raise FormatError(f"truncated payload of {name!r}")
        arr = np.frombuffer(data, dtype="<f4", count=n, offset=pos).reshape(dims)
        pos += 4 * n
        records.append((name, arr.copy()))
    if pos != end:
        raise FormatError(f"{end - pos} trailing bytes after the last record")
    return records


def write_model(records, path=None):
    data = write_records(records, MODEL_MAGIC)
    if path is not None:
        with open(path, "wb") as fh:
            fh.write(data)
    return data


def read_model(path):
    with open(path, "rb") as fh:
        return read_records(fh.read(), MODEL_MAGIC)


def write_golden(pairs, path=None):
    """(input [4,224,224], output [2]) pairs -> golden fixture bytes."""
    records = []
    for i, (inp, out) in enumerate(pairs):
        records.append((f"input{i}", np.asarray(inp, dtype=np.float32)))
        records.append((f"logits{i}", np.asarray(out, dtype=np.float32)))
    data = write_records(records, GOLDEN_MAGIC)
    if path is not None:
        with open(path, "wb") as fh:
            fh.write(data)
    return data


def read_golden_records(path):
    """Generic golden-container read, returned as an ordered dict."""
    with open(path, "rb") as fh:
        return dict(read_records(fh.read(), GOLDEN_MAGIC))
