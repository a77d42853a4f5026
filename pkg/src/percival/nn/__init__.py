"""CNN inference primitives: tensors, layer specs, kernels, forward pass."""

from percival.nn.tensor import Tensor
from percival.nn.spec import ConvSpec, FireSpec, NetworkSpec, reference_architecture
from percival.nn import ops

__all__ = [
    "Tensor",
    "ConvSpec",
    "FireSpec",
    "NetworkSpec",
    "reference_architecture",
    "ops",
]
