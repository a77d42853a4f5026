"""Artifact export: weight files the engine loads, golden fixtures it
verifies against."""

import numpy as np
import torch

from .net import export_records
from .pmdl import write_golden, write_model


def export_pmdl(model, path=None):
    """Model -> weight-container bytes (and file when path given)."""
    return write_model(export_records(model), path)


@torch.no_grad()
def emit_golden(model, n_inputs, path=None, seed=7):
    """Seeded random inputs plus this model's outputs, for engine parity.

    Inputs are uniform [0,1] like preprocessed pixels; outputs are the
    post-softmax pair the engine's forward produces.
    """
    if n_inputs < 1:
        raise ValueError("n_inputs must be >= 1")
    model.eval()
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(n_inputs):
        inp = rng.uniform(0.0, 1.0, size=(4, 224, 224)).astype(np.float32)
        out = model.probabilities(torch.from_numpy(inp).unsqueeze(0))[0]
        pairs.append((inp, out.numpy().astype(np.float32)))
    return write_golden(pairs, path)
