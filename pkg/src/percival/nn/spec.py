"""Layer specifications and the reference network architecture.

This is the one place the SqueezeNet-fork architecture is defined: a 3x3
stride-2 entry convolution, six fire modules with max-pooling after the first
convolution and after every two fire modules, a 1x1 two-channel head, global
average pooling, and softmax. Input is a [4,224,224] RGBA tensor scaled to
[0,1]; output is two class probabilities (index 0 = ad, index 1 = non-ad).
"""

from dataclasses import dataclass, field

import numpy as np


class SpecError(ValueError):
    """A layer or network description is internally inconsistent."""


def _as_f32(name, values, shape):
    arr = np.ascontiguousarray(np.asarray(values, dtype=np.float32))
    if arr.shape != shape:
        raise SpecError(f"{name}: expected shape {shape}, got {arr.shape}")
    return arr


@dataclass
class ConvSpec:
    in_channels: int
    out_channels: int
    kernel: tuple
    stride: int = 1
    padding: int = 0
    weights: np.ndarray = None
    bias: np.ndarray = None

    def __post_init__(self):
        kh, kw = self.kernel
        if min(self.in_channels, self.out_channels, kh, kw, self.stride) < 1:
            raise SpecError(f"conv hyperparameters must be positive: {self}")
        if self.padding < 0:
            raise SpecError("conv padding must be non-negative")
        wshape = (self.out_channels, self.in_channels, kh, kw)
        if self.weights is None:
            self.weights = np.zeros(wshape, dtype=np.float32)
        else:
            self.weights = _as_f32("conv weights", self.weights, wshape)
        if self.bias is None:
            self.bias = np.zeros(self.out_channels, dtype=np.float32)
        else:
            self.bias = _as_f32("conv bias", self.bias, (self.out_channels,))

    def out_shape(self, in_shape, label="conv"):
        c, h, w = in_shape
        kh, kw = self.kernel
        if c != self.in_channels:
            raise SpecError(f"{label}: expects {self.in_channels} input channels, got {c}")
        if h + 2 * self.padding < kh or w + 2 * self.padding < kw:
            raise SpecError(
                f"{label}: input {h}x{w} (pad {self.padding}) smaller than kernel {kh}x{kw}"
            )
        oh = (h + 2 * self.padding - kh) // self.stride + 1
        ow = (w + 2 * self.padding - kw) // self.stride + 1
        return (self.out_channels, oh, ow)


@dataclass
class FireSpec:
    squeeze: ConvSpec
    expand1: ConvSpec
    expand3: ConvSpec

    def __post_init__(self):
        if self.expand1.in_channels != self.squeeze.out_channels:
            raise SpecError("fire: expand1 input channels != squeeze output channels")
        if self.expand3.in_channels != self.squeeze.out_channels:
            raise SpecError("fire: expand3 input channels != squeeze output channels")
        if self.squeeze.kernel != (1, 1) or self.expand1.kernel != (1, 1):
            raise SpecError("fire: squeeze and expand1 must use 1x1 kernels")
        if self.expand3.kernel != (3, 3) or self.expand3.padding != 1:
            raise SpecError("fire: expand3 must be 3x3 with padding 1")

    @property
    def out_channels(self):
        return self.expand1.out_channels + self.expand3.out_channels

    def out_shape(self, in_shape, label="fire"):
        c, h, w = in_shape
        if c != self.squeeze.in_channels:
            raise SpecError(f"{label}: expects {self.squeeze.in_channels} input channels, got {c}")
        return (self.out_channels, h, w)


@dataclass
class ConvLayer:
    """Convolution followed by ReLU."""
    name: str
    spec: ConvSpec


@dataclass
class MaxPoolLayer:
    k: int
    stride: int


@dataclass
class FireLayer:
    name: str
    spec: FireSpec


@dataclass
class GlobalAvgPoolLayer:
    pass


@dataclass
class SoftmaxLayer:
    pass


@dataclass
class NetworkSpec:
    layers: list
    input_shape: tuple = (4, 224, 224)
    n_classes: int = 2

    def validate(self):
        """Chain shapes through every layer; returns the output shape.

        Raises SpecError naming the first inconsistent layer. Weight array
        shapes are enforced at ConvSpec construction, so a spec that chains
        is runnable.
        """
        shape = tuple(self.input_shape)
        for i, layer in enumerate(self.layers):
            label = f"layer {i} ({type(layer).__name__})"
            if isinstance(layer, ConvLayer):
                shape = layer.spec.out_shape(shape, label=f"{label} {layer.name}")
            elif isinstance(layer, FireLayer):
                shape = layer.spec.out_shape(shape, label=f"{label} {layer.name}")
            elif isinstance(layer, MaxPoolLayer):
                if layer.k < 1 or layer.stride < 1:
                    raise SpecError(f"{label}: k and stride must be >= 1")
                c, h, w = shape
                if h < layer.k or w < layer.k:
                    raise SpecError(f"{label}: input {h}x{w} smaller than window {layer.k}")
                shape = (c, (h - layer.k) // layer.stride + 1, (w - layer.k) // layer.stride + 1)
            elif isinstance(layer, GlobalAvgPoolLayer):
                if len(shape) != 3:
                    raise SpecError(f"{label}: needs a [C,H,W] input, got {shape}")
                shape = (shape[0],)
            elif isinstance(layer, SoftmaxLayer):
                if len(shape) != 1:
                    raise SpecError(f"{label}: needs a flat input, got {shape}")
            else:
                raise SpecError(f"{label}: unknown layer type")
        if shape != (self.n_classes,):
            raise SpecError(f"network output shape {shape} != ({self.n_classes},)")
        return shape

    def named_parameters(self):
        """(name, array) pairs in canonical order: conv layers contribute
        <name>.w/<name>.b, fire layers <name>.squeeze.w ... <name>.expand3.b.
        """
        out = []
        for layer in self.layers:
            if isinstance(layer, ConvLayer):
                out.append((f"{layer.name}.w", layer.spec.weights))
                out.append((f"{layer.name}.b", layer.spec.bias))
            elif isinstance(layer, FireLayer):
                for part in ("squeeze", "expand1", "expand3"):
                    sub = getattr(layer.spec, part)
                    out.append((f"{layer.name}.{part}.w", sub.weights))
                    out.append((f"{layer.name}.{part}.b", sub.bias))
        return out

    def parameter_count(self):
        return sum(int(a.size) for _, a in self.named_parameters())

    def payload_bytes(self):
        """Bytes of raw float32 parameter data (excludes container overhead)."""
        return self.parameter_count() * 4


# (name, kind, hyperparameters) table for the reference network. Channel
# counts follow the fork's pattern: pool after the entry conv and after every
# two fire modules, squeeze/expand widths stepping 16/64, 32/128, 48/192.
_REFERENCE_TABLE = [
    ("conv1", "conv", dict(in_c=4, out_c=64, kernel=(3, 3), stride=2, padding=0)),
    (None, "pool", dict(k=3, stride=2)),
    ("fire1", "fire", dict(in_c=64, squeeze=16, expand=64)),
    ("fire2", "fire", dict(in_c=128, squeeze=16, expand=64)),
    (None, "pool", dict(k=3, stride=2)),
    ("fire3", "fire", dict(in_c=128, squeeze=32, expand=128)),
    ("fire4", "fire", dict(in_c=256, squeeze=32, expand=128)),
    (None, "pool", dict(k=3, stride=2)),
    ("fire5", "fire", dict(in_c=256, squeeze=48, expand=192)),
    ("fire6", "fire", dict(in_c=384, squeeze=48, expand=192)),
    (None, "pool", dict(k=3, stride=2)),
    ("conv2", "conv", dict(in_c=384, out_c=2, kernel=(1, 1), stride=1, padding=0)),
    (None, "gap", {}),
    (None, "softmax", {}),
]


def reference_parameter_shapes():
    """Canonical name -> shape for every parameter of the reference network."""
    shapes = {}
    for name, kind, hp in _REFERENCE_TABLE:
        if kind == "conv":
            kh, kw = hp["kernel"]
            shapes[f"{name}.w"] = (hp["out_c"], hp["in_c"], kh, kw)
            shapes[f"{name}.b"] = (hp["out_c"],)
        elif kind == "fire":
            sq, ex, in_c = hp["squeeze"], hp["expand"], hp["in_c"]
            shapes[f"{name}.squeeze.w"] = (sq, in_c, 1, 1)
            shapes[f"{name}.squeeze.b"] = (sq,)
            shapes[f"{name}.expand1.w"] = (ex, sq, 1, 1)
            shapes[f"{name}.expand1.b"] = (ex,)
            shapes[f"{name}.expand3.w"] = (ex, sq, 3, 3)
            shapes[f"{name}.expand3.b"] = (ex,)
    return shapes


def reference_architecture(params=None):
    """Build the reference NetworkSpec.

    params maps canonical parameter names to arrays; missing params default
    to zeros. Unknown names raise SpecError (callers doing strict binding,
    like the model loader, check completeness themselves).
    """
    params = dict(params or {})
    known = set(reference_parameter_shapes())
    unknown = set(params) - known
    if unknown:
        raise SpecError(f"unknown parameter names: {sorted(unknown)}")

    def take(name, shape):
        if name in params:
            return _as_f32(name, params[name], shape)
        return np.zeros(shape, dtype=np.float32)

    layers = []
    for name, kind, hp in _REFERENCE_TABLE:
        if kind == "conv":
            kh, kw = hp["kernel"]
            layers.append(ConvLayer(name, ConvSpec(
                hp["in_c"], hp["out_c"], hp["kernel"], hp["stride"], hp["padding"],
                weights=take(f"{name}.w", (hp["out_c"], hp["in_c"], kh, kw)),
                bias=take(f"{name}.b", (hp["out_c"],)),
            )))
        elif kind == "fire":
            sq, ex, in_c = hp["squeeze"], hp["expand"], hp["in_c"]
            layers.append(FireLayer(name, FireSpec(
                squeeze=ConvSpec(in_c, sq, (1, 1),
                                 weights=take(f"{name}.squeeze.w", (sq, in_c, 1, 1)),
                                 bias=take(f"{name}.squeeze.b", (sq,))),
                expand1=ConvSpec(sq, ex, (1, 1),
                                 weights=take(f"{name}.expand1.w", (ex, sq, 1, 1)),
                                 bias=take(f"{name}.expand1.b", (ex,))),
                expand3=ConvSpec(sq, ex, (3, 3), padding=1,
                                 weights=take(f"{name}.expand3.w", (ex, sq, 3, 3)),
                                 bias=take(f"{name}.expand3.b", (ex,))),
            )))
        elif kind == "pool":
            layers.append(MaxPoolLayer(hp["k"], hp["stride"]))
        elif kind == "gap":
            layers.append(GlobalAvgPoolLayer())
        elif kind == "softmax":
            layers.append(SoftmaxLayer())
    net = NetworkSpec(layers=layers)
    net.validate()
    return net


def seeded_random_parameters(seed):
    """He-scaled random parameters for the reference shapes (fixtures, tests).

    Weight std is sqrt(2 / fan_in) so activations stay O(1) through the
    stack; biases get small noise so no channel is degenerate.
    """
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in reference_parameter_shapes().items():
        if name.endswith(".w"):
            fan_in = int(np.prod(shape[1:]))
            std = float(np.sqrt(2.0 / fan_in))
            params[name] = rng.normal(0.0, std, size=shape).astype(np.float32)
        else:
            params[name] = rng.normal(0.0, 0.05, size=shape).astype(np.float32)
    return params
