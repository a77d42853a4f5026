#!/usr/bin/env python3
"""Generate (or verify) the engine-side parity fixtures the trainer
package tests against.

Two files, both in the golden-record container format, written into
trainer/tests/fixtures/:

  preprocess_parity.pgold
      "bitmap"        float32 [H,W,4], values on the 0..255 scale
      "preprocessed"  float32 [4,224,224], the engine's preprocess of it
  conv_parity.pgold
      "x{i}", "w{i}", "b{i}", "y{i}_s{stride}_p{pad}" for two shapes,
      y computed by the engine's convolution

The trainer reimplements preprocessing and uses its own convolution;
matching these files proves both sides compute the same functions
without either importing the other's code.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "tests"))

from percival.classifier import Bitmap, preprocess
from percival.modelio import GOLDEN_MAGIC, write_records
from percival.nn.backend import kernels

FIXTURE_DIR = REPO / "trainer" / "tests" / "fixtures"

CONV_CASES = [
    # (cin, cout, k, stride, pad, h, w) - first mirrors conv1, second a padded fire expand
    (4, 8, 3, 2, 0, 17, 19),
    (6, 5, 3, 1, 1, 9, 9),
]


def build():
    rng = np.random.default_rng(60311)
    pixels = rng.integers(0, 256, size=(150, 130, 4), dtype=np.uint8)
    pre = preprocess(Bitmap(width=130, height=150, pixels=pixels))
    preprocess_records = [
        ("bitmap", pixels.astype(np.float32)),
        ("preprocessed", pre.array),
    ]

    conv_records = []
    for i, (cin, cout, k, stride, pad, h, w) in enumerate(CONV_CASES):
        x = rng.normal(0, 1, size=(cin, h, w)).astype(np.float32)
        wgt = rng.normal(0, 0.3, size=(cout, cin, k, k)).astype(np.float32)
        b = rng.normal(0, 0.3, size=(cout,)).astype(np.float32)
        y = kernels.conv2d(x, wgt, b, stride, pad)
        conv_records += [(f"x{i}", x), (f"w{i}", wgt), (f"b{i}", b),
                         (f"y{i}_s{stride}_p{pad}", y)]

    return (write_records(preprocess_records, GOLDEN_MAGIC),
            write_records(conv_records, GOLDEN_MAGIC))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--check", action="store_true")
    args = parser.parse_args(argv)

    pre_bytes, conv_bytes = build()
    targets = [(FIXTURE_DIR / "preprocess_parity.pgold", pre_bytes),
               (FIXTURE_DIR / "conv_parity.pgold", conv_bytes)]

    if args.check:
        bad = [str(p) for p, want in targets
               if not p.exists() or p.read_bytes() != want]
        if bad:
            print("stale or missing: " + ", ".join(bad), file=sys.stderr)
            return 1
        print("trainer fixtures match regeneration")
        return 0

    FIXTURE_DIR.mkdir(parents=True, exist_ok=True)
    for path, data in targets:
        path.write_bytes(data)
        print(f"wrote {path} ({len(data)} bytes)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
