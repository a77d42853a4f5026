#!/usr/bin/env python3
"""Generate (or verify) the frozen full-network parity fixtures.

Writes tests/fixtures/reference_random.pmdl (seeded He-initialized
weights) and reference_random.pgold (three seeded inputs with outputs
computed by the naive oracle in tests/oracles.py, NOT by the production
kernels). The engine test that consumes these files therefore compares
two independent code paths.

Run with --check to verify the committed files are byte-identical to a
regeneration; any drift means either the seed recipe or the serializer
changed, both of which must be deliberate.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "tests"))

from percival.modelio import save_golden, save_model
from percival.nn.spec import reference_architecture, seeded_random_parameters

import oracles

WEIGHT_SEED = 20240817
INPUT_SEEDS = (101, 102, 103)
FIXTURE_DIR = REPO / "tests" / "fixtures"


def build():
    params = seeded_random_parameters(WEIGHT_SEED)
    model_bytes = save_model(reference_architecture(params))
    pairs = []
    for seed in INPUT_SEEDS:
        rng = np.random.default_rng(seed)
        inp = rng.uniform(0.0, 1.0, size=(4, 224, 224)).astype(np.float32)
        out = oracles.oracle_forward(inp, params)
        pairs.append((inp, np.asarray(out, dtype=np.float32)))
    return model_bytes, save_golden(pairs)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--check", action="store_true",
                        help="verify the committed fixtures instead of writing")
    args = parser.parse_args(argv)

    model_bytes, golden_bytes = build()
    model_path = FIXTURE_DIR / "reference_random.pmdl"
    golden_path = FIXTURE_DIR / "reference_random.pgold"

    if args.check:
        failures = []
        for path, want in ((model_path, model_bytes), (golden_path, golden_bytes)):
            if not path.exists():
                failures.append(f"{path} missing")
            elif path.read_bytes() != want:
                failures.append(f"{path} differs from regeneration")
        if failures:
            print("\n".join(failures), file=sys.stderr)
            return 1
        print("fixtures match regeneration")
        return 0

    FIXTURE_DIR.mkdir(parents=True, exist_ok=True)
    model_path.write_bytes(model_bytes)
    golden_path.write_bytes(golden_bytes)
    print(f"wrote {model_path} ({len(model_bytes)} bytes)")
    print(f"wrote {golden_path} ({len(golden_bytes)} bytes)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
