"""Synthetic separable corpus for smoke tests and demos.

Ad images carry a banner: a bright horizontal strip with dark text-like
dashes over a noise background. Non-ads are the same noise without the
banner. The cue is strong on purpose; these corpora exist to prove the
training loop and export path work, not to model real ads.

The output mirrors the engine's corpus layout (objects/<sha256>,
index.jsonl) plus ready train/test split manifests, so every consumer
reads it through the same file formats as a crawled corpus.
"""

import hashlib
import io
import json
import random
from pathlib import Path

import numpy as np
from PIL import Image


def _encode_png(pixels):
    buf = io.BytesIO()
    Image.fromarray(pixels, "RGB").save(buf, "PNG")
    return buf.getvalue()


def _background(rng, side):
    # Narrow base range: the banner has to dominate between-image
    # variation or gradient descent takes ages to find it.
    base = rng.integers(70, 121, size=3)
    noise = rng.integers(-40, 41, size=(side, side, 3))
    return np.clip(base[None, None, :] + noise, 0, 255).astype(np.uint8)


# banner/text fill per style; "dark" inverts the palette, giving a
# shifted distribution to fine-tune against
_STYLES = {
    "light": ((245, 245, 235), (20, 20, 30)),
    "dark": ((25, 25, 35), (230, 230, 220)),
}


def _render(rng, side, is_ad, style):
    pixels = _background(rng, side)
    if is_ad:
        strip, text = _STYLES[style]
        height = max(side // 4, 16)
        top = int(rng.integers(side // 16, side - height - side // 16))
        banner = pixels[top:top + height]
        banner[:] = strip
        # dashes standing in for copy text
        y = top + height // 3
        x = int(rng.integers(2, side // 8))
        while x < side - 6:
            dash = int(rng.integers(4, 12))
            pixels[y:y + max(3, height // 5), x:x + dash] = text
            x += dash + int(rng.integers(3, 8))
    return pixels


def make_synthetic_corpus(root, n=200, seed=0, side=128, test_fraction=0.25,
                          style="light"):
    """Write a balanced labeled corpus under root; returns the manifest
    paths as (train, test)."""
    if n < 4 or n % 2:
        raise ValueError("n must be an even number >= 4")
    if style not in _STYLES:
        raise ValueError(f"style must be one of {sorted(_STYLES)}")
    root = Path(root)
    objects = root / "objects"
    objects.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    records = []
    for i in range(n):
        is_ad = i % 2 == 0
        data = _encode_png(_render(rng, side, is_ad, style))
        sha = hashlib.sha256(data).hexdigest()
        (objects / sha).write_bytes(data)
        records.append({
            "sha256": sha,
            "path": f"objects/{sha}",
            "width": side,
            "height": side,
            "label": "ad" if is_ad else "non-ad",
            "label_source": "human",
            "origins": [{"ref": f"synthetic://{style}/{seed}/{i}"}],
        })

    with open(root / "index.jsonl", "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")

    shuffler = random.Random(seed)
    ads = [r for r in records if r["label"] == "ad"]
    others = [r for r in records if r["label"] == "non-ad"]
    shuffler.shuffle(ads)
    shuffler.shuffle(others)
    n_test_per_class = round(len(ads) * test_fraction)
    test = ads[:n_test_per_class] + others[:n_test_per_class]
    train = ads[n_test_per_class:] + others[n_test_per_class:]
    shuffler.shuffle(train)
    shuffler.shuffle(test)

    def write_manifest(rows, path):
        with open(path, "w", encoding="utf-8") as fh:
            for rec in rows:
                fh.write(json.dumps({k: rec[k] for k in
                                     ("sha256", "path", "label",
                                      "width", "height")}) + "\n")

    train_path = root / "train.jsonl"
    test_path = root / "test.jsonl"
    write_manifest(train, train_path)
    write_manifest(test, test_path)
    return train_path, test_path
