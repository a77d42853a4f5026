"""Layer operations over Tensors.

Pure functions: no hidden state, no locking, safe to call from any number of
threads sharing one immutable weight set. Shape validation happens here;
the arithmetic lives in the selected kernel backend.
"""

import numpy as np

from percival.nn.backend import kernels
from percival.nn.spec import (
    ConvLayer,
    FireLayer,
    FireSpec,
    GlobalAvgPoolLayer,
    MaxPoolLayer,
    SoftmaxLayer,
    SpecError,
)
from percival.nn.tensor import Tensor


class ShapeError(ValueError):
    """Input tensor does not fit the layer it was given to."""


def conv2d(inp, spec, label="conv"):
    c, h, w = inp.dims
    kh, kw = spec.kernel
    if c != spec.in_channels:
        raise ShapeError(
            f"{label}: expects {spec.in_channels} input channels, got {c} "
            f"(input {c}x{h}x{w})"
        )
    if h + 2 * spec.padding < kh or w + 2 * spec.padding < kw:
        raise ShapeError(
            f"{label}: input {h}x{w} with padding {spec.padding} is smaller "
            f"than the {kh}x{kw} kernel"
        )
    out = kernels.conv2d(inp.array, spec.weights, spec.bias, spec.stride, spec.padding)
    return Tensor(out)


def relu(inp):
    return Tensor(np.maximum(inp.array, np.float32(0.0)))


def maxpool2d(inp, k, stride):
    if k < 1 or stride < 1:
        raise ValueError(f"maxpool k and stride must be >= 1, got k={k} stride={stride}")
    if len(inp.dims) != 3:
        raise ShapeError(f"maxpool: needs [C,H,W], got {inp.dims}")
    c, h, w = inp.dims
    if h < k or w < k:
        raise ShapeError(f"maxpool: input {h}x{w} smaller than window {k}x{k}")
    return Tensor(kernels.maxpool2d(inp.array, k, stride))


def global_avgpool(inp):
    if len(inp.dims) != 3:
        raise ShapeError(f"global_avgpool: needs [C,H,W], got {inp.dims}")
    return Tensor(kernels.global_avgpool(inp.array))


def channel_concat(a, b):
    if len(b.dims) == 0 or b.array.size == 0:
        return Tensor(a.array.copy())
    if a.array.size == 0:
        return Tensor(b.array.copy())
    if a.dims[1:] != b.dims[1:]:
        raise ShapeError(f"channel_concat: spatial dims differ: {a.dims} vs {b.dims}")
    return Tensor(np.concatenate([a.array, b.array], axis=0))


def softmax(inp):
    x = inp.array.astype(np.float64).ravel()
    x = x - x.max()
    e = np.exp(x)
    return Tensor((e / e.sum()).astype(np.float32))


def fire_forward(inp, spec, label="fire"):
    if inp.dims[0] != spec.squeeze.in_channels:
        raise ShapeError(
            f"{label}: expects {spec.squeeze.in_channels} input channels, got {inp.dims[0]}"
        )
    s = relu(conv2d(inp, spec.squeeze, label=f"{label}.squeeze"))
    a = relu(conv2d(s, spec.expand1, label=f"{label}.expand1"))
    b = relu(conv2d(s, spec.expand3, label=f"{label}.expand3"))
    return channel_concat(a, b)


def network_forward(inp, net):
    """Forward pass: [4,224,224] in, two probabilities out.

    The spec is validated (shape chain, weight completeness) before any
    arithmetic runs, so a bad network errors without burning compute.
    """
    if tuple(inp.dims) != tuple(net.input_shape):
        raise ShapeError(
            f"network input must be {tuple(net.input_shape)}, got {tuple(inp.dims)}"
        )
    try:
        net.validate()
    except SpecError:
        raise
    x = inp
    for layer in net.layers:
        if isinstance(layer, ConvLayer):
            x = relu(conv2d(x, layer.spec, label=layer.name))
        elif isinstance(layer, MaxPoolLayer):
            x = maxpool2d(x, layer.k, layer.stride)
        elif isinstance(layer, FireLayer):
            x = fire_forward(x, layer.spec, label=layer.name)
        elif isinstance(layer, GlobalAvgPoolLayer):
            x = global_avgpool(x)
        elif isinstance(layer, SoftmaxLayer):
            x = softmax(x)
        else:
            raise SpecError(f"unknown layer type {type(layer).__name__}")
    return x
