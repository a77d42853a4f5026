"""Weight-container round trips and rejection of damaged files."""

import random
import struct
import zlib

import numpy as np
import pytest

from percival_trainer.pmdl import (
    FORMAT_VERSION,
    GOLDEN_MAGIC,
    MODEL_MAGIC,
    FormatError,
    read_golden_records,
    read_records,
    write_golden,
    write_model,
    write_records,
)


def sample_records():
    rng = np.random.default_rng(77)
    return [
        ("conv1.w", rng.normal(size=(64, 4, 3, 3)).astype(np.float32)),
        ("conv1.b", rng.normal(size=(64,)).astype(np.float32)),
        ("head.w", rng.normal(size=(2, 8, 1, 1)).astype(np.float32)),
    ]


class TestRoundTrip:
    def test_values_names_order(self):
        records = sample_records()
        out = read_records(write_records(records, MODEL_MAGIC), MODEL_MAGIC)
        assert [n for n, _ in out] == [n for n, _ in records]
        for (_, a), (_, b) in zip(records, out):
            assert a.dtype == b.dtype == np.float32
            np.testing.assert_array_equal(a, b)

    def test_rewrite_is_byte_identical(self):
        data = write_records(sample_records(), MODEL_MAGIC)
        again = write_records(read_records(data, MODEL_MAGIC), MODEL_MAGIC)
        assert data == again

    def test_empty_container(self):
        assert read_records(write_records([], MODEL_MAGIC), MODEL_MAGIC) == []

    def test_scalar_and_unicode_name(self):
        records = [("poids/é", np.float32(3.5))]
        out = read_records(write_records(records, MODEL_MAGIC), MODEL_MAGIC)
        assert out[0][0] == "poids/é"
        assert out[0][1].shape == ()
        assert float(out[0][1]) == 3.5

    def test_model_file_round_trip(self, tmp_path):
        path = tmp_path / "m.pmdl"
        data = write_model(sample_records(), path)
        assert path.read_bytes() == data

    def test_golden_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        pairs = [(rng.uniform(size=(4, 8, 8)).astype(np.float32),
                  rng.uniform(size=(2,)).astype(np.float32))
                 for _ in range(2)]
        path = tmp_path / "g.pgold"
        write_golden(pairs, path)
        table = read_golden_records(path)
        assert sorted(table) == ["input0", "input1", "logits0", "logits1"]
        np.testing.assert_array_equal(table["input1"], pairs[1][0])
        np.testing.assert_array_equal(table["logits0"], pairs[0][1])


class TestRejection:
    def test_too_short(self):
        with pytest.raises(FormatError):
            read_records(b"PMDL\x01", MODEL_MAGIC)

    def test_wrong_magic(self):
        data = write_records(sample_records(), MODEL_MAGIC)
        with pytest.raises(FormatError):
            read_records(data, GOLDEN_MAGIC)

    def test_bad_version(self):
        data = bytearray(write_records(sample_records(), MODEL_MAGIC))
        struct.pack_into("<I", data, 4, FORMAT_VERSION + 1)
        body = bytes(data[:-4])
        fixed = body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)
        with pytest.raises(FormatError, match="version"):
            read_records(fixed, MODEL_MAGIC)

    def test_flipped_bit_fails_checksum(self):
        data = bytearray(write_records(sample_records(), MODEL_MAGIC))
        data[30] ^= 0x10
        with pytest.raises(FormatError, match="checksum"):
            read_records(bytes(data), MODEL_MAGIC)

    def test_trailing_bytes_with_fixed_crc(self):
        body = write_records(sample_records(), MODEL_MAGIC)[:-4] + b"\x00" * 8
        data = body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)
        with pytest.raises(FormatError, match="trailing"):
            read_records(data, MODEL_MAGIC)

    def test_mutation_fuzz_never_crashes(self):
        # every mutation must surface as FormatError, nothing else
        base = write_records(sample_records(), MODEL_MAGIC)
        rng = random.Random(421)
        for _ in range(150):
            data = bytearray(base)
            kind = rng.random()
            if kind < 0.4:
                data[rng.randrange(len(data))] ^= 1 << rng.randrange(8)
            elif kind < 0.8:
                data = data[:rng.randrange(len(data))]
            else:
                data[rng.randrange(len(data)):0] = bytes([rng.randrange(256)])
            try:
                read_records(bytes(data), MODEL_MAGIC)
            except FormatError:
                continue
            # a mutation may cancel itself out; anything readable must
            # then round trip to the original bytes
            assert bytes(data) == base
