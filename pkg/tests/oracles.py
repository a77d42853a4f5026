"""Independent reference implementations used by the test suite.

Everything in this module is deliberately naive: explicit window scans,
float64 accumulation, list-based cache bookkeeping. Nothing here imports
the package under test, so these stay an independent route for checking
the real kernels. Keep it that way.
"""

import math

import numpy as np


def naive_conv2d_scalar(inp, weights, bias, stride=1, padding=0):
    """Literal quadruple-loop cross-correlation with Python-float accumulation.

    inp: [C,H,W], weights: [O,C,kh,kw], bias: [O]. Slow; small inputs only.
    """
    inp = np.asarray(inp, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    c, h, w = inp.shape
    oc, ic, kh, kw = weights.shape
    assert ic == c
    if padding:
        padded = np.zeros((c, h + 2 * padding, w + 2 * padding), dtype=np.float64)
        padded[:, padding:padding + h, padding:padding + w] = inp
        inp = padded
        h, w = inp.shape[1], inp.shape[2]
    oh = (h - kh) // stride + 1
    ow = (w - kw) // stride + 1
    out = np.zeros((oc, oh, ow), dtype=np.float64)
    for o in range(oc):
        for oy in range(oh):
            for ox in range(ow):
                acc = float(bias[o])
                for i in range(ic):
                    for ky in range(kh):
                        for kx in range(kw):
                            acc += float(inp[i, oy * stride + ky, ox * stride + kx]) * float(
                                weights[o, i, ky, kx]
                            )
                out[o, oy, ox] = acc
    return out.astype(np.float32)


def naive_conv2d(inp, weights, bias, stride=1, padding=0):
    """Window-scan cross-correlation: loops over every output position,
    reduces each window with a float64 product-sum. No im2col, no matmul.
    """
    inp = np.asarray(inp, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    c, h, w = inp.shape
    oc, ic, kh, kw = weights.shape
    assert ic == c
    if padding:
        padded = np.zeros((c, h + 2 * padding, w + 2 * padding), dtype=np.float64)
        padded[:, padding:padding + h, padding:padding + w] = inp
        inp = padded
        h, w = inp.shape[1], inp.shape[2]
    oh = (h - kh) // stride + 1
    ow = (w - kw) // stride + 1
    out = np.empty((oc, oh, ow), dtype=np.float64)
    for o in range(oc):
        wk = weights[o]
        for oy in range(oh):
            y0 = oy * stride
            for ox in range(ow):
                x0 = ox * stride
                window = inp[:, y0:y0 + kh, x0:x0 + kw]
                out[o, oy, ox] = float(np.sum(window * wk)) + float(bias[o])
    return out.astype(np.float32)


def naive_relu(x):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0.0, x, 0.0).astype(np.float32)


def naive_maxpool2d(inp, k, stride):
    """Window scan taking the max of each k-by-k window; overrunning windows dropped."""
    inp = np.asarray(inp, dtype=np.float64)
    c, h, w = inp.shape
    oh = (h - k) // stride + 1
    ow = (w - k) // stride + 1
    out = np.empty((c, oh, ow), dtype=np.float64)
    for ch in range(c):
        for oy in range(oh):
            for ox in range(ow):
                window = inp[ch, oy * stride:oy * stride + k, ox * stride:ox * stride + k]
                out[ch, oy, ox] = window.max()
    return out.astype(np.float32)


def naive_global_avgpool(inp):
    inp = np.asarray(inp, dtype=np.float64)
    c = inp.shape[0]
    n = inp.shape[1] * inp.shape[2]
    out = np.empty(c, dtype=np.float64)
    for ch in range(c):
        acc = 0.0
        for row in inp[ch]:
            for v in row:
                acc += float(v)
        out[ch] = acc / n
    return out.astype(np.float32)


def naive_channel_concat(a, b):
    a = np.asarray(a, dtype=np.float32)
    b = np.asarray(b, dtype=np.float32)
    return np.concatenate([a, b], axis=0)


def naive_softmax(logits):
    xs = [float(v) for v in np.asarray(logits).ravel()]
    m = max(xs)
    exps = [math.exp(v - m) for v in xs]
    total = sum(exps)
    return np.array([e / total for e in exps], dtype=np.float32)


def naive_fire(inp, sq_w, sq_b, e1_w, e1_b, e3_w, e3_b):
    s = naive_relu(naive_conv2d(inp, sq_w, sq_b, stride=1, padding=0))
    a = naive_relu(naive_conv2d(s, e1_w, e1_b, stride=1, padding=0))
    b = naive_relu(naive_conv2d(s, e3_w, e3_b, stride=1, padding=1))
    return naive_channel_concat(a, b)


# Layer plan of the reference network, restated here independently of the
# package so a structural bug there cannot hide. Entries:
#   ("conv", name, stride, padding) | ("pool", k, stride) | ("fire", name)
#   | ("gap",) | ("softmax",)
REFERENCE_PLAN = [
    ("conv", "conv1", 2, 0),
    ("pool", 3, 2),
    ("fire", "fire1"),
    ("fire", "fire2"),
    ("pool", 3, 2),
    ("fire", "fire3"),
    ("fire", "fire4"),
    ("pool", 3, 2),
    ("fire", "fire5"),
    ("fire", "fire6"),
    ("pool", 3, 2),
    ("conv", "conv2", 1, 0),
    ("gap",),
    ("softmax",),
]


def oracle_forward(inp, params, want_logits=False):
    """Naive forward pass over the reference plan.

    params maps canonical names ("conv1.w", "fire1.squeeze.b", ...) to arrays.
    Returns probabilities, or pre-softmax per-class means when want_logits.
    """
    x = np.asarray(inp, dtype=np.float32)
    logits = None
    for step in REFERENCE_PLAN:
        if step[0] == "conv":
            _, name, stride, pad = step
            x = naive_relu(
                naive_conv2d(x, params[name + ".w"], params[name + ".b"], stride, pad)
            )
        elif step[0] == "pool":
            x = naive_maxpool2d(x, step[1], step[2])
        elif step[0] == "fire":
            n = step[1]
            x = naive_fire(
                x,
                params[n + ".squeeze.w"], params[n + ".squeeze.b"],
                params[n + ".expand1.w"], params[n + ".expand1.b"],
                params[n + ".expand3.w"], params[n + ".expand3.b"],
            )
        elif step[0] == "gap":
            x = naive_global_avgpool(x)
            logits = x.copy()
        elif step[0] == "softmax":
            x = naive_softmax(x)
    return logits if want_logits else x


class NaiveLRU:
    """List-based LRU: O(n) everything, obviously correct."""

    def __init__(self, capacity):
        self.capacity = capacity
        self.items = []  # (key, value), most recent last

    def lookup(self, key):
        for i, (k, v) in enumerate(self.items):
            if k == key:
                self.items.append(self.items.pop(i))
                return v
        return None

    def insert(self, key, value):
        if self.capacity <= 0:
            return
        for i, (k, _) in enumerate(self.items):
            if k == key:
                self.items.pop(i)
                break
        self.items.append((key, value))
        while len(self.items) > self.capacity:
            self.items.pop(0)

    def __len__(self):
        return len(self.items)

    def keys(self):
        return [k for k, _ in self.items]


def naive_bilinear_rgba(src, out_h, out_w):
    """Half-pixel-center bilinear resample of an interleaved [H,W,4] uint8
    bitmap, float64 math, returns float32 values still on the 0..255 scale.
    """
    src = np.asarray(src)
    h, w = src.shape[0], src.shape[1]
    out = np.empty((out_h, out_w, 4), dtype=np.float64)
    sy = h / out_h
    sx = w / out_w
    for oy in range(out_h):
        fy = (oy + 0.5) * sy - 0.5
        y0 = math.floor(fy)
        wy = fy - y0
        y0c = min(max(y0, 0), h - 1)
        y1c = min(max(y0 + 1, 0), h - 1)
        for ox in range(out_w):
            fx = (ox + 0.5) * sx - 0.5
            x0 = math.floor(fx)
            wx = fx - x0
            x0c = min(max(x0, 0), w - 1)
            x1c = min(max(x0 + 1, 0), w - 1)
            for ch in range(4):
                top = (1.0 - wx) * float(src[y0c, x0c, ch]) + wx * float(src[y0c, x1c, ch])
                bot = (1.0 - wx) * float(src[y1c, x0c, ch]) + wx * float(src[y1c, x1c, ch])
                out[oy, ox, ch] = (1.0 - wy) * top + wy * bot
    return out.astype(np.float32)


def naive_confusion(predicted_ad, actual_ad):
    tp = fp = fn = tn = 0
    for p, a in zip(predicted_ad, actual_ad):
        if p and a:
            tp += 1
        elif p and not a:
            fp += 1
        elif not p and a:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn
