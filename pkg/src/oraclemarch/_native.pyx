# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the hot per-pixel/per-ray loops.

Must stay semantically identical to _pykernels.py (the filters bit for bit:
same accumulation order and same dtype for the penalty subtraction).
"""
import numpy as np

cimport cython
cimport numpy as cnp
from libc.math cimport sqrt

ctypedef fused floating:
    float
    double


def neighborhood_filter(const floating[:, :, ::1] target, int k):
    cdef int h = k // 2
    cdef int height = target.shape[0]
    cdef int width = target.shape[1]
    cdef int c = target.shape[2]
    cdef Py_ssize_t y, i, n, span
    cdef int di, dj
    cdef floating pen, v
    cdef double denom
    cdef const floating* src
    cdef floating* dst

    if floating is float:
        out_np = np.empty((height, width, c), dtype=np.float32)
    else:
        out_np = np.empty((height, width, c), dtype=np.float64)
    cdef floating[:, :, ::1] out = out_np

    n = (<Py_ssize_t>height) * width * c
    src = &target[0, 0, 0]
    dst = &out[0, 0, 0]
    for i in range(n):
        v = src[i]
        dst[i] = v if v > 0 else 0
    if h == 0:
        return out_np

    denom = sqrt(2.0) * h
    for di in range(-h, h + 1):
        for dj in range(-h, h + 1):
            if di == 0 and dj == 0:
                continue
            if sqrt(<double>(di * di + dj * dj)) / denom >= 1.0:
                continue
            pen = <floating>(sqrt(<double>(di * di + dj * dj)) / denom)
            # rows shift by whole contiguous (x, z) spans
            span = (<Py_ssize_t>(width - (dj if dj > 0 else -dj))) * c
            for y in range(max(0, di), min(height, height + di)):
                src = &target[y - di, max(0, -dj), 0]
                dst = &out[y, max(0, dj), 0]
                for i in range(span):
                    v = src[i] - pen
                    dst[i] = v if v > dst[i] else dst[i]
    return out_np


def depth_smooth(const floating[:, :, ::1] target, int z):
    cdef int h = z // 2
    cdef int height = target.shape[0]
    cdef int width = target.shape[1]
    cdef int c = target.shape[2]
    cdef int y, x, b, i, src
    cdef double acc, w

    if floating is float:
        out_np = np.empty((height, width, c), dtype=np.float32)
    else:
        out_np = np.empty((height, width, c), dtype=np.float64)
    cdef floating[:, :, ::1] out = out_np

    if h == 0:
        for y in range(height):
            for x in range(width):
                for b in range(c):
                    out[y, x, b] = target[y, x, b]
        return out_np

    for y in range(height):
        for x in range(width):
            for b in range(c):
                acc = 0.0
                for i in range(-h, h + 1):
                    src = b + i
                    if src < 0 or src >= c:
                        continue
                    w = (h + 1 - (i if i >= 0 else -i)) / <double>(h + 1)
                    acc = acc + (<double>target[y, x, src]) * w
                if acc > 1.0:
                    acc = 1.0
                out[y, x, b] = <floating>acc
    return out_np


def inverse_cdf(const double[:, ::1] pdf, const double[::1] edges, const double[:, ::1] u):
    cdef int r = pdf.shape[0]
    cdef int c = pdf.shape[1]
    cdef int x = u.shape[1]
    cdef int i, j, b
    cdef double mass, cum, lo, pb, uu, frac

    out_np = np.empty((r, x), dtype=np.float64)
    cdef double[:, ::1] out = out_np

    for i in range(r):
        mass = 0.0
        for b in range(c):
            mass += pdf[i, b]
        # u rows are ascending, so a two-pointer sweep suffices
        b = 0
        cum = 0.0
        lo = 0.0
        if mass <= 1e-6:
            # degenerate: uniform pdf
            pb = 1.0 / c
            cum = pb
            for j in range(x):
                uu = u[i, j]
                while cum <= uu and b < c - 1:
                    b += 1
                    lo = cum
                    cum += pb
                frac = (uu - lo) / pb
                if frac < 0.0:
                    frac = 0.0
                elif frac > 1.0:
                    frac = 1.0
                out[i, j] = edges[b] + frac * (edges[b + 1] - edges[b])
        else:
            pb = pdf[i, 0] / mass
            cum = pb
            for j in range(x):
                uu = u[i, j]
                while cum <= uu and b < c - 1:
                    b += 1
                    lo = cum
                    pb = pdf[i, b] / mass
                    cum += pb
                if pb > 0.0:
                    frac = (uu - lo) / pb
                else:
                    frac = 0.5
                if frac < 0.0:
                    frac = 0.0
                elif frac > 1.0:
                    frac = 1.0
                out[i, j] = edges[b] + frac * (edges[b + 1] - edges[b])
    return out_np


def composite_forward(const floating[:, :, ::1] rgb, const floating[:, ::1] alpha, const floating[::1] background):
    cdef int r = rgb.shape[0]
    cdef int x = rgb.shape[1]
    cdef int i, k, ch
    cdef double t, w, acc
    cdef double o0, o1, o2

    if floating is float:
        out_np = np.empty((r, 3), dtype=np.float32)
        acc_np = np.empty(r, dtype=np.float32)
    else:
        out_np = np.empty((r, 3), dtype=np.float64)
        acc_np = np.empty(r, dtype=np.float64)
    cdef floating[:, ::1] out = out_np
    cdef floating[::1] accv = acc_np

    for i in range(r):
        t = 1.0
        acc = 0.0
        o0 = 0.0
        o1 = 0.0
        o2 = 0.0
        for k in range(x):
            w = (<double>alpha[i, k]) * t
            acc += w
            o0 += w * <double>rgb[i, k, 0]
            o1 += w * <double>rgb[i, k, 1]
            o2 += w * <double>rgb[i, k, 2]
            t *= 1.0 - <double>alpha[i, k]
        out[i, 0] = <floating>(o0 + t * <double>background[0])
        out[i, 1] = <floating>(o1 + t * <double>background[1])
        out[i, 2] = <floating>(o2 + t * <double>background[2])
        accv[i] = <floating>acc
    return out_np, acc_np


def composite_backward(
    const floating[:, :, ::1] rgb,
    const floating[:, ::1] alpha,
    const floating[::1] background,
    const floating[:, ::1] g_rgb_out,
    const floating[::1] g_acc,
):
    cdef int r = rgb.shape[0]
    cdef int x = rgb.shape[1]
    cdef int i, k
    cdef double a, t, color_term
    cdef double s0, s1, s2, s_acc

    if floating is float:
        g_rgb_np = np.empty((r, x, 3), dtype=np.float32)
        g_alpha_np = np.empty((r, x), dtype=np.float32)
        texcl_np = np.empty(x, dtype=np.float64)
    else:
        g_rgb_np = np.empty((r, x, 3), dtype=np.float64)
        g_alpha_np = np.empty((r, x), dtype=np.float64)
        texcl_np = np.empty(x, dtype=np.float64)
    cdef floating[:, :, ::1] g_rgb = g_rgb_np
    cdef floating[:, ::1] g_alpha = g_alpha_np
    cdef double[::1] texcl = texcl_np

    for i in range(r):
        t = 1.0
        for k in range(x):
            texcl[k] = t
            g_rgb[i, k, 0] = <floating>((<double>alpha[i, k]) * t * <double>g_rgb_out[i, 0])
            g_rgb[i, k, 1] = <floating>((<double>alpha[i, k]) * t * <double>g_rgb_out[i, 1])
            g_rgb[i, k, 2] = <floating>((<double>alpha[i, k]) * t * <double>g_rgb_out[i, 2])
            t *= 1.0 - <double>alpha[i, k]
        s0 = <double>background[0]
        s1 = <double>background[1]
        s2 = <double>background[2]
        s_acc = 0.0
        for k in range(x - 1, -1, -1):
            color_term = (
                (<double>g_rgb_out[i, 0]) * (<double>rgb[i, k, 0] - s0)
                + (<double>g_rgb_out[i, 1]) * (<double>rgb[i, k, 1] - s1)
                + (<double>g_rgb_out[i, 2]) * (<double>rgb[i, k, 2] - s2)
            )
            g_alpha[i, k] = <floating>(texcl[k] * (color_term + (<double>g_acc[i]) * (1.0 - s_acc)))
            a = <double>alpha[i, k]
            s0 = a * <double>rgb[i, k, 0] + (1.0 - a) * s0
            s1 = a * <double>rgb[i, k, 1] + (1.0 - a) * s1
            s2 = a * <double>rgb[i, k, 2] + (1.0 - a) * s2
            s_acc = a + (1.0 - a) * s_acc
    return g_rgb_np, g_alpha_np
