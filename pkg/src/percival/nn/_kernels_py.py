"""Fallback kernels built on numpy array ops.

Selected by percival.nn.backend when the compiled extension is unavailable
(or forced via PERCIVAL_BACKEND=python). All functions take and return plain
numpy arrays; shape validation lives one level up in percival.nn.ops.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

BACKEND_NAME = "python"


def conv2d(inp, weights, bias, stride, padding):
    """Cross-correlation of [C,H,W] with [O,C,kh,kw] via im2col + matmul."""
    if padding:
        inp = np.pad(inp, ((0, 0), (padding, padding), (padding, padding)))
    oc, ic, kh, kw = weights.shape
    windows = sliding_window_view(inp, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]
    oh, ow = windows.shape[1], windows.shape[2]
    # [C,OH,OW,kh,kw] -> rows of (C,kh,kw) per output position
    cols = np.ascontiguousarray(windows.transpose(1, 2, 0, 3, 4)).reshape(oh * ow, ic * kh * kw)
    out = weights.reshape(oc, ic * kh * kw) @ cols.T
    out += bias[:, None]
    return np.ascontiguousarray(out.reshape(oc, oh, ow))


def maxpool2d(inp, k, stride):
    windows = sliding_window_view(inp, (k, k), axis=(1, 2))[:, ::stride, ::stride]
    return np.ascontiguousarray(windows.max(axis=(3, 4)))


def global_avgpool(inp):
    # 64-bit accumulation, then back to float32
    return inp.mean(axis=(1, 2), dtype=np.float64).astype(np.float32)


def bilinear_resize_rgba(src, out_h, out_w):
    """Half-pixel-center bilinear resample of [H,W,4] uint8 to float32
    [out_h,out_w,4], values kept on the 0..255 scale. Source coordinates are
    clamped at the edges, so outputs stay within the input value range.
    """
    h, w = src.shape[0], src.shape[1]
    fy = (np.arange(out_h, dtype=np.float64) + 0.5) * (h / out_h) - 0.5
    fx = (np.arange(out_w, dtype=np.float64) + 0.5) * (w / out_w) - 0.5
    y0 = np.floor(fy).astype(np.int64)
    x0 = np.floor(fx).astype(np.int64)
    wy = fy - y0
    wx = fx - x0
    y0c = np.clip(y0, 0, h - 1)
    y1c = np.clip(y0 + 1, 0, h - 1)
    x0c = np.clip(x0, 0, w - 1)
    x1c = np.clip(x0 + 1, 0, w - 1)
    s = src.astype(np.float64)
    wxc = wx[None, :, None]
    top = s[y0c[:, None], x0c[None, :]] * (1.0 - wxc) + s[y0c[:, None], x1c[None, :]] * wxc
    bot = s[y1c[:, None], x0c[None, :]] * (1.0 - wxc) + s[y1c[:, None], x1c[None, :]] * wxc
    wyc = wy[:, None, None]
    return (top * (1.0 - wyc) + bot * wyc).astype(np.float32)
