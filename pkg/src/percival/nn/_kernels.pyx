# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels.

Pooling, average pooling, and bilinear resampling are straight C loops.
Convolution does its window gather (im2col) in C and hands the single big
multiply to numpy's float32 matmul, which is where the FLOPs belong.
"""

import numpy as np

BACKEND_NAME = "cython"


cdef void _im2col(const float[:, :, ::1] x, float[:, ::1] cols,
                  Py_ssize_t kh, Py_ssize_t kw, Py_ssize_t stride,
                  Py_ssize_t oh, Py_ssize_t ow) noexcept nogil:
    cdef Py_ssize_t c_dim = x.shape[0]
    cdef Py_ssize_t c, oy, ox, ky, kx, n, j, y0, x0
    for oy in range(oh):
        y0 = oy * stride
        for ox in range(ow):
            x0 = ox * stride
            n = oy * ow + ox
            j = 0
            for c in range(c_dim):
                for ky in range(kh):
                    for kx in range(kw):
                        cols[n, j] = x[c, y0 + ky, x0 + kx]
                        j += 1


def conv2d(inp, weights, bias, int stride, int padding):
    if padding:
        inp = np.pad(inp, ((0, 0), (padding, padding), (padding, padding)))
    cdef const float[:, :, ::1] x = inp
    cdef Py_ssize_t oc = weights.shape[0]
    cdef Py_ssize_t ic = weights.shape[1]
    cdef Py_ssize_t kh = weights.shape[2]
    cdef Py_ssize_t kw = weights.shape[3]
    cdef Py_ssize_t oh = (x.shape[1] - kh) // stride + 1
    cdef Py_ssize_t ow = (x.shape[2] - kw) // stride + 1
    cols_arr = np.empty((oh * ow, ic * kh * kw), dtype=np.float32)
    cdef float[:, ::1] cols = cols_arr
    with nogil:
        _im2col(x, cols, kh, kw, stride, oh, ow)
    out = weights.reshape(oc, ic * kh * kw) @ cols_arr.T
    out += bias[:, None]
    return np.ascontiguousarray(out).reshape(oc, oh, ow)


def maxpool2d(inp, int k, int stride):
    cdef const float[:, :, ::1] x = inp
    cdef Py_ssize_t c_dim = x.shape[0]
    cdef Py_ssize_t oh = (x.shape[1] - k) // stride + 1
    cdef Py_ssize_t ow = (x.shape[2] - k) // stride + 1
    out_arr = np.empty((c_dim, oh, ow), dtype=np.float32)
    cdef float[:, :, ::1] o = out_arr
    cdef Py_ssize_t c, oy, ox, ky, kx, y0, x0
    cdef float m, v
    with nogil:
        for c in range(c_dim):
            for oy in range(oh):
                y0 = oy * stride
                for ox in range(ow):
                    x0 = ox * stride
                    m = x[c, y0, x0]
                    for ky in range(k):
                        for kx in range(k):
                            v = x[c, y0 + ky, x0 + kx]
                            if v > m:
                                m = v
                    o[c, oy, ox] = m
    return out_arr


def global_avgpool(inp):
    cdef const float[:, :, ::1] x = inp
    cdef Py_ssize_t c_dim = x.shape[0]
    cdef Py_ssize_t h = x.shape[1]
    cdef Py_ssize_t w = x.shape[2]
    out_arr = np.empty(c_dim, dtype=np.float32)
    cdef float[::1] o = out_arr
    cdef Py_ssize_t c, y, xx
    cdef double acc
    with nogil:
        for c in range(c_dim):
            acc = 0.0
            for y in range(h):
                for xx in range(w):
                    acc += x[c, y, xx]
            o[c] = <float>(acc / (h * w))
    return out_arr


def bilinear_resize_rgba(src, Py_ssize_t out_h, Py_ssize_t out_w):
    cdef const unsigned char[:, :, ::1] s = src
    cdef Py_ssize_t h = s.shape[0]
    cdef Py_ssize_t w = s.shape[1]
    out_arr = np.empty((out_h, out_w, 4), dtype=np.float32)
    cdef float[:, :, ::1] o = out_arr

    # precompute clamped source indices and fractional weights per axis
    fy = (np.arange(out_h, dtype=np.float64) + 0.5) * (h / float(out_h)) - 0.5
    fx = (np.arange(out_w, dtype=np.float64) + 0.5) * (w / float(out_w)) - 0.5
    y0 = np.floor(fy).astype(np.int64)
    x0 = np.floor(fx).astype(np.int64)
    wy_arr = fy - y0
    wx_arr = fx - x0
    y0c_arr = np.clip(y0, 0, h - 1)
    y1c_arr = np.clip(y0 + 1, 0, h - 1)
    x0c_arr = np.clip(x0, 0, w - 1)
    x1c_arr = np.clip(x0 + 1, 0, w - 1)

    cdef const long[::1] y0c = y0c_arr
    cdef const long[::1] y1c = y1c_arr
    cdef const long[::1] x0c = x0c_arr
    cdef const long[::1] x1c = x1c_arr
    cdef const double[::1] wy = wy_arr
    cdef const double[::1] wx = wx_arr

    cdef Py_ssize_t oy, ox, ch, ya, yb, xa, xb
    cdef double vy, vx, top, bot
    with nogil:
        for oy in range(out_h):
            ya = y0c[oy]
            yb = y1c[oy]
            vy = wy[oy]
            for ox in range(out_w):
                xa = x0c[ox]
                xb = x1c[ox]
                vx = wx[ox]
                for ch in range(4):
                    top = (1.0 - vx) * s[ya, xa, ch] + vx * s[ya, xb, ch]
                    bot = (1.0 - vx) * s[yb, xa, ch] + vx * s[yb, xb, ch]
                    o[oy, ox, ch] = <float>((1.0 - vy) * top + vy * bot)
    return out_arr
