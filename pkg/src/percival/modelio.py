"""PMDL weight container and golden-fixture files.

Layout (all integers little-endian):

    magic     4 bytes ("PMDL"; golden fixtures use "PGLD")
    version   u32
    count     u32 record count
    records   count x { name_len u16, name utf-8, ndim u8,
                        dims u32 x ndim, payload f32 x prod(dims) }
    crc32     u32 over every preceding byte

Records bind to network parameters by canonical name ("conv1.w",
"fire3.expand1.b", ...), never by position. Loading validates magic,
version, CRC, record structure, and the name/shape set against the
reference architecture before anything is returned; each failure mode is a
distinct error naming the offending record where one exists.
"""

import struct
import zlib

import numpy as np

from percival.nn.spec import reference_architecture, reference_parameter_shapes

MODEL_MAGIC = b"PMDL"
GOLDEN_MAGIC = b"PGLD"
FORMAT_VERSION = 1

_MAX_NDIM = 8
_MAX_ELEMENTS = 64_000_000  # 256 MB of f32; far past any sane model here


class ModelFormatError(ValueError):
    """Base for every way a PMDL/PGLD byte stream can be rejected."""


class BadMagicError(ModelFormatError):
    pass


class VersionError(ModelFormatError):
    pass


class ChecksumError(ModelFormatError):
    pass


class TruncatedError(ModelFormatError):
    pass


class RecordError(ModelFormatError):
    """A record is structurally malformed (bad name, dims, or length)."""


class TensorMismatchError(ModelFormatError):
    """Record set does not line up with the network's parameters."""


def write_records(records, magic):
    """Serialize (name, array) pairs; returns bytes. Deterministic: the same
    inputs always produce byte-identical output.
    """
    parts = [magic, struct.pack("<II", FORMAT_VERSION, len(records))]
    for name, arr in records:
        arr = np.asarray(arr, dtype=np.float32)
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ValueError(f"record name too long: {name!r}")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.astype("<f4", copy=False).tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


class _Cursor:
    """Bounds-checked reader; never reads past the declared end."""

    def __init__(self, data, end):
        self.data = data
        self.pos = 0
        self.end = end

    def take(self, n, what):
        if self.pos + n > self.end:
            raise TruncatedError(f"file ends inside {what}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk


def read_records(data, magic):
    """Parse and integrity-check a record container; returns (name, array)
    pairs in file order. Rejects, never crashes, on malformed input.
    """
    data = bytes(data)
    if len(data) < 4:
        raise TruncatedError("file shorter than the magic")
    if data[:4] != magic:
        raise BadMagicError(f"bad magic {data[:4]!r}, expected {magic!r}")
    if len(data) < 16:
        raise TruncatedError("file shorter than the fixed header")
    (stored_crc,) = struct.unpack("<I", data[-4:])
    actual_crc = zlib.crc32(data[:-4]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise ChecksumError(
            f"CRC mismatch: stored {stored_crc:#010x}, computed {actual_crc:#010x}"
        )
    cur = _Cursor(data, len(data) - 4)
    cur.pos = 4
    version, count = struct.unpack("<II", cur.take(8, "header"))
    if version != FORMAT_VERSION:
        raise VersionError(f"unsupported format version {version}")
    records = []
    seen = set()
    for i in range(count):
        where = f"record {i}"
        (name_len,) = struct.unpack("<H", cur.take(2, f"{where} name length"))
        try:
            name = cur.take(name_len, f"{where} name").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise RecordError(f"{where}: name is not valid utf-8") from exc
        where = f"record {i} ({name!r})"
        (ndim,) = struct.unpack("<B", cur.take(1, f"{where} ndim"))
        if ndim < 1 or ndim > _MAX_NDIM:
            raise RecordError(f"{where}: ndim {ndim} out of range 1..{_MAX_NDIM}")
        dims = struct.unpack(f"<{ndim}I", cur.take(4 * ndim, f"{where} dims"))
        n_elem = 1
        for d in dims:
            if d < 1:
                raise RecordError(f"{where}: zero dim in {dims}")
            n_elem *= d
            if n_elem > _MAX_ELEMENTS:
                raise RecordError(f"{where}: implausible element count in {dims}")
        payload = cur.take(4 * n_elem, f"{where} payload")
        arr = np.frombuffer(payload, dtype="<f4").reshape(dims).astype(np.float32)
        if name in seen:
            raise RecordError(f"{where}: duplicate record name")
        seen.add(name)
        records.append((name, arr))
    if cur.pos != cur.end:
        raise RecordError(f"{cur.end - cur.pos} unexplained bytes after the last record")
    return records


def save_model(net, path=None):
    data = write_records(net.named_parameters(), MODEL_MAGIC)
    if path is not None:
        with open(path, "wb") as fh:
            fh.write(data)
    return data


def load_model(data):
    """bytes -> NetworkSpec with weights bound, or a distinct error."""
    records = dict(read_records(data, MODEL_MAGIC))
    expected = reference_parameter_shapes()
    missing = sorted(set(expected) - set(records))
    if missing:
        raise TensorMismatchError(f"missing tensor record(s): {missing}")
    extra = sorted(set(records) - set(expected))
    if extra:
        raise TensorMismatchError(f"unexpected tensor record(s): {extra}")
    for name, want in expected.items():
        got = records[name].shape
        if tuple(got) != tuple(want):
            raise TensorMismatchError(f"tensor {name!r}: shape {got}, expected {want}")
    return reference_architecture(records)


def load_model_file(path):
    with open(path, "rb") as fh:
        return load_model(fh.read())


def save_golden(pairs, path=None):
    """pairs: (input [4,224,224], logits [2]) arrays -> .pgold bytes."""
    records = []
    for i, (inp, logits) in enumerate(pairs):
        records.append((f"input{i}", np.asarray(inp, dtype=np.float32)))
        records.append((f"logits{i}", np.asarray(logits, dtype=np.float32)))
    data = write_records(records, GOLDEN_MAGIC)
    if path is not None:
        with open(path, "wb") as fh:
            fh.write(data)
    return data


def load_golden(data):
    """.pgold bytes -> list of (input, logits) pairs, shape-checked."""
    records = dict(read_records(data, GOLDEN_MAGIC))
    pairs = []
    i = 0
    while f"input{i}" in records:
        inp = records.pop(f"input{i}")
        key = f"logits{i}"
        if key not in records:
            raise TensorMismatchError(f"golden fixture missing {key!r}")
        logits = records.pop(key)
        if inp.shape != (4, 224, 224):
            raise TensorMismatchError(f"input{i}: shape {inp.shape}, expected (4, 224, 224)")
        if logits.shape != (2,):
            raise TensorMismatchError(f"logits{i}: shape {logits.shape}, expected (2,)")
        pairs.append((inp, logits))
        i += 1
    if records:
        raise TensorMismatchError(f"unexpected golden record(s): {sorted(records)}")
    if not pairs:
        raise TensorMismatchError("golden fixture holds no input/logits pairs")
    return pairs
