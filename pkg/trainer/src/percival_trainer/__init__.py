"""Training companion for the perceptual ad-blocking engine.

Everything the engine consumes crosses a file boundary: weight files,
golden fixtures, corpus manifests. Nothing in here imports engine code;
parity is proven through shared on-disk fixtures instead.
"""

from .net import AdNet, build_model, parameter_count
from .pmdl import read_records, write_golden, write_model
from .train import TrainConfig, train

__all__ = [
    "AdNet",
    "TrainConfig",
    "build_model",
    "parameter_count",
    "read_records",
    "train",
    "write_golden",
    "write_model",
]
