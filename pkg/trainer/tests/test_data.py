"""Preprocessing parity with the engine, manifest reading, datasets.

The parity fixtures under tests/fixtures/ were produced by the engine's
own preprocessing and convolution; matching them pins this package to
the semantics the exported weights will meet at inference time.
"""

import json

import numpy as np
import pytest
import torch
import torch.nn.functional as F
from PIL import Image

from percival_trainer.data import (
    ManifestDataset,
    bilinear_resize_rgba,
    preprocess,
    read_split_manifest,
)
from percival_trainer.pmdl import read_golden_records


class TestEngineParity:
    def test_preprocess_matches_engine(self, fixtures_dir):
        table = read_golden_records(fixtures_dir / "preprocess_parity.pgold")
        bitmap = table["bitmap"].astype(np.uint8)  # stored as f32 of uint8 values
        expected = table["preprocessed"]
        got = preprocess(bitmap)
        assert got.shape == expected.shape == (4, 224, 224)
        np.testing.assert_allclose(got, expected, rtol=0, atol=1e-6)

    def test_conv_matches_engine(self, fixtures_dir):
        table = read_golden_records(fixtures_dir / "conv_parity.pgold")
        cases = sorted(k for k in table if k.startswith("y"))
        assert cases, "no convolution cases in fixture"
        for key in cases:
            i = key[1]
            _, tail = key.split("_s", 1)
            stride, pad = (int(p) for p in tail.split("_p"))
            y = F.conv2d(torch.from_numpy(table[f"x{i}"]).unsqueeze(0),
                         torch.from_numpy(table[f"w{i}"]),
                         torch.from_numpy(table[f"b{i}"]),
                         stride=stride, padding=pad)[0].numpy()
            np.testing.assert_allclose(y, table[key], rtol=1e-5, atol=1e-5)


class TestPreprocess:
    def test_constant_image(self):
        pixels = np.full((50, 70, 4), 200, dtype=np.uint8)
        planes = preprocess(pixels)
        assert planes.dtype == np.float32
        np.testing.assert_allclose(planes, 200.0 / 255.0, atol=1e-6)

    def test_plane_order_is_rgba(self):
        pixels = np.zeros((30, 30, 4), dtype=np.uint8)
        pixels[..., 1] = 255  # green only
        planes = preprocess(pixels)
        np.testing.assert_allclose(planes[1], 1.0, atol=1e-6)
        np.testing.assert_allclose(planes[[0, 2, 3]], 0.0, atol=1e-6)

    def test_resize_identity_at_224(self):
        rng = np.random.default_rng(8)
        pixels = rng.integers(0, 256, size=(224, 224, 4)).astype(np.uint8)
        out = bilinear_resize_rgba(pixels, 224, 224)
        np.testing.assert_allclose(out, pixels.astype(np.float32), atol=1e-9)


class TestManifest:
    def write(self, path, rows):
        with open(path, "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row) + "\n")

    def test_reads_rows(self, tmp_path):
        path = tmp_path / "m.jsonl"
        self.write(path, [{"sha256": "a", "path": "objects/a", "label": "ad"},
                          {"sha256": "b", "path": "objects/b", "label": "non-ad"}])
        rows = read_split_manifest(path)
        assert [r["label"] for r in rows] == ["ad", "non-ad"]

    def test_bad_label_reports_line(self, tmp_path):
        path = tmp_path / "m.jsonl"
        self.write(path, [{"sha256": "a", "path": "p", "label": "ad"},
                          {"sha256": "b", "path": "p", "label": "spam"}])
        with pytest.raises(ValueError, match=":2"):
            read_split_manifest(path)

    def test_empty_manifest(self, tmp_path):
        path = tmp_path / "m.jsonl"
        path.write_text("\n")
        with pytest.raises(ValueError, match="empty"):
            read_split_manifest(path)


class TestDataset:
    def test_single_class_rejected(self, tmp_path):
        path = tmp_path / "m.jsonl"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps({"sha256": "a", "path": "p", "label": "ad"}) + "\n")
        with pytest.raises(ValueError, match="both classes"):
            ManifestDataset(path, tmp_path)

    def test_items(self, tiny_corpus):
        root, train, _ = tiny_corpus
        ds = ManifestDataset(train, root)
        assert len(ds) == 6
        planes, cls, sha = ds[0]
        assert planes.shape == (4, 224, 224)
        assert planes.dtype == torch.float32
        assert cls in (0, 1)
        assert len(sha) == 64

    def test_absolute_paths_skip_root(self, tmp_path):
        img = tmp_path / "pic.png"
        Image.fromarray(np.full((120, 120, 3), 90, dtype=np.uint8), "RGB").save(img)
        path = tmp_path / "m.jsonl"
        rows = [{"sha256": "x" * 64, "path": str(img), "label": "ad"},
                {"sha256": "y" * 64, "path": str(img), "label": "non-ad"}]
        with open(path, "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row) + "\n")
        ds = ManifestDataset(path, tmp_path / "nowhere")
        planes, _, _ = ds[0]
        np.testing.assert_allclose(planes[:3].numpy(), 90.0 / 255.0, atol=1e-6)
        np.testing.assert_allclose(planes[3].numpy(), 1.0, atol=1e-6)  # opaque
