"""Dataset plumbing and the normative preprocessing.

preprocess() must match the engine bit-for-near-bit (<= 1e-6 per
element, enforced by a shared fixture test): bilinear resample to
224x224 with half-pixel sample centers and edge clamping, float64
accumulation, RGBA planes, then /255.
"""

import json
from pathlib import Path

import numpy as np
import torch
from PIL import Image
from torch.utils.data import Dataset

LABEL_TO_CLASS = {"ad": 0, "non-ad": 1}


def bilinear_resize_rgba(src, out_h, out_w):
    """[H,W,4] values -> float32 [out_h,out_w,4], 0..255 scale preserved."""
    src = np.asarray(src)
    h, w = src.shape[0], src.shape[1]
    fy = (np.arange(out_h, dtype=np.float64) + 0.5) * (h / out_h) - 0.5
    fx = (np.arange(out_w, dtype=np.float64) + 0.5) * (w / out_w) - 0.5
    y0 = np.floor(fy).astype(np.int64)
    x0 = np.floor(fx).astype(np.int64)
    wy = (fy - y0)[:, None, None]
    wx = (fx - x0)[None, :, None]
    y0c = np.clip(y0, 0, h - 1)
    y1c = np.clip(y0 + 1, 0, h - 1)
    x0c = np.clip(x0, 0, w - 1)
    x1c = np.clip(x0 + 1, 0, w - 1)
    s = src.astype(np.float64)
    top = s[y0c[:, None], x0c[None, :]] * (1.0 - wx) + s[y0c[:, None], x1c[None, :]] * wx
    bot = s[y1c[:, None], x0c[None, :]] * (1.0 - wx) + s[y1c[:, None], x1c[None, :]] * wx
    return (top * (1.0 - wy) + bot * wy).astype(np.float32)


def preprocess(pixels):
    """uint8 [H,W,4] -> float32 [4,224,224] in [0,1]."""
    resized = bilinear_resize_rgba(pixels, 224, 224)
    planes = np.ascontiguousarray(resized.transpose(2, 0, 1))
    planes /= np.float32(255.0)
    return planes


def load_rgba(path):
    with Image.open(path) as img:
        img.load()
        rgba = img.convert("RGBA")
        return np.asarray(rgba, dtype=np.uint8)


def read_split_manifest(path):
    """Split-manifest JSONL -> list of {sha256, path, label, ...} dicts."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            if row.get("label") not in LABEL_TO_CLASS:
                raise ValueError(
                    f"{path}:{lineno}: label must be ad/non-ad, "
                    f"got {row.get('label')!r}")
            rows.append(row)
    if not rows:
        raise ValueError(f"{path}: manifest is empty")
    return rows


class ManifestDataset(Dataset):
    """Images listed in a split manifest, preprocessed on access.

    Manifest paths are resolved against corpus_root (they are usually
    "objects/<sha256>" relative to the corpus directory).
    """

    def __init__(self, manifest_path, corpus_root):
        self.corpus_root = Path(corpus_root)
        self.rows = read_split_manifest(manifest_path)
        classes = {row["label"] for row in self.rows}
        if len(classes) < 2:
            raise ValueError(
                f"{manifest_path}: both classes required, found {sorted(classes)}")

    def __len__(self):
        return len(self.rows)

    def resolve(self, row):
        path = Path(row["path"])
        return path if path.is_absolute() else self.corpus_root / path

    def __getitem__(self, index):
        row = self.rows[index]
        planes = preprocess(load_rgba(self.resolve(row)))
        return (torch.from_numpy(planes),
                LABEL_TO_CLASS[row["label"]],
                row["sha256"])
