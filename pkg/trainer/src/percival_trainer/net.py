"""The network, defined for training.

Layer-for-layer the same stack the engine runs: 3x3/s2 conv into four
fire blocks' worth of squeeze/expand pairs with max-pools between, a
1x1 head conv, global average pool, softmax. Class 0 is "ad". The
forward returns the pre-softmax pooled pair (what cross-entropy wants);
probabilities() applies the softmax the engine applies.
"""

from collections import OrderedDict

import numpy as np
import torch
from torch import nn

# (name, squeeze_in, squeeze_out, expand_out_each)
_FIRES = [
    ("fire1", 64, 16, 64),
    ("fire2", 128, 16, 64),
    ("fire3", 128, 32, 128),
    ("fire4", 256, 32, 128),
    ("fire5", 256, 48, 192),
    ("fire6", 384, 48, 192),
]


class Fire(nn.Module):
    def __init__(self, cin, squeeze, expand):
        super().__init__()
        self.squeeze = nn.Conv2d(cin, squeeze, 1)
        self.expand1 = nn.Conv2d(squeeze, expand, 1)
        self.expand3 = nn.Conv2d(squeeze, expand, 3, padding=1)
        self.relu = nn.ReLU(inplace=True)

    def forward(self, x):
        s = self.relu(self.squeeze(x))
        return torch.cat([self.relu(self.expand1(s)),
                          self.relu(self.expand3(s))], dim=1)


class AdNet(nn.Module):
    def __init__(self):
        super().__init__()
        self.conv1 = nn.Conv2d(4, 64, 3, stride=2)
        self.relu = nn.ReLU(inplace=True)
        self.pool = nn.MaxPool2d(3, 2)
        for name, cin, squeeze, expand in _FIRES:
            setattr(self, name, Fire(cin, squeeze, expand))
        self.conv2 = nn.Conv2d(384, 2, 1)

    def _head_input(self, x):
        x = self.pool(self.relu(self.conv1(x)))
        x = self.pool(self.fire2(self.fire1(x)))
        x = self.pool(self.fire4(self.fire3(x)))
        return self.pool(self.fire6(self.fire5(x)))

    def forward(self, x):
        """Deployed semantics: clamped head, pooled. Pre-softmax [N, 2]."""
        return self.relu(self.conv2(self._head_input(x))).mean(dim=(2, 3))

    def training_scores(self, x):
        """Head activations pooled before the clamp.

        The deployed head clamps at zero, and with just two output
        channels a whole 13x13 class map can go negative for every
        image in a batch; those samples then sit at a zero-gradient
        softmax tie and never recover. The loss therefore reads the
        head before the clamp. Decisions and exports always go through
        forward()/probabilities(), which keep the clamp.
        """
        return self.conv2(self._head_input(x)).mean(dim=(2, 3))

    @torch.no_grad()
    def probabilities(self, x):
        return torch.softmax(self.forward(x), dim=1)


def build_model(seed=None):
    """Fresh network; a seed pins the initialization.

    Weights are He-initialized for ReLU (biases zero). The torch default
    underscales 1x1 convs badly enough that six stacked fire blocks
    attenuate the input-dependent signal to nothing and training never
    leaves the constant function.
    """
    if seed is not None:
        torch.manual_seed(seed)
    model = AdNet()
    for module in model.modules():
        if isinstance(module, nn.Conv2d):
            nn.init.kaiming_normal_(module.weight, mode="fan_in",
                                    nonlinearity="relu")
            nn.init.zeros_(module.bias)
    # Small head weights: with only two output channels and a ReLU in
    # front of the pooled logits, large early steps can push an entire
    # 13x13 map negative and freeze that class for good.
    nn.init.normal_(model.conv2.weight, std=0.01)
    return model


def parameter_count(model):
    return sum(p.numel() for p in model.parameters())


def _module_map(model):
    mapping = OrderedDict()
    mapping["conv1"] = model.conv1
    for name, _, _, _ in _FIRES:
        fire = getattr(model, name)
        mapping[f"{name}.squeeze"] = fire.squeeze
        mapping[f"{name}.expand1"] = fire.expand1
        mapping[f"{name}.expand3"] = fire.expand3
    mapping["conv2"] = model.conv2
    return mapping


def export_records(model):
    """Model -> canonical (name, array) pairs for the weight container."""
    records = []
    for prefix, conv in _module_map(model).items():
        records.append((f"{prefix}.w",
                        conv.weight.detach().cpu().numpy().astype(np.float32)))
        records.append((f"{prefix}.b",
                        conv.bias.detach().cpu().numpy().astype(np.float32)))
    return records


def import_records(model, records):
    """Load canonical (name, array) pairs into the model, strictly: every
    parameter must be present with the right shape, nothing extra."""
    table = dict(records)
    for prefix, conv in _module_map(model).items():
        for suffix, param in (("w", conv.weight), ("b", conv.bias)):
            key = f"{prefix}.{suffix}"
            if key not in table:
                raise ValueError(f"missing record {key!r}")
            arr = table.pop(key)
            if tuple(arr.shape) != tuple(param.shape):
                raise ValueError(
                    f"{key}: shape {tuple(arr.shape)} != {tuple(param.shape)}")
            with torch.no_grad():
                param.copy_(torch.from_numpy(np.ascontiguousarray(arr)))
    if table:
        raise ValueError(f"unexpected records: {sorted(table)}")
    return model
