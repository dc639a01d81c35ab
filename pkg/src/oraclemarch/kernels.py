"""Hot-loop kernels with a compiled core and a pure-numpy fallback.

The Cython extension (oraclemarch._native) is used when it imported
successfully; setting ORACLEMARCH_PURE=1 forces the numpy fallback. Both
backends expose the same four functions and agree exactly (filters) or to
float tolerance (compositing, inverse CDF); see benchmarks/bench_kernels.py
for a speed comparison.
"""
from __future__ import annotations

import os

import numpy as np

from . import _pykernels

if os.environ.get("ORACLEMARCH_PURE", "0") == "1":
    _backend = _pykernels
    NATIVE = False
else:
    try:
        from . import _native as _backend  # type: ignore[no-redef]

        NATIVE = True
    except ImportError:
        _backend = _pykernels
        NATIVE = False

BACKEND = "native" if NATIVE else "python"


def neighborhood_filter(target: np.ndarray, k: int) -> np.ndarray:
    target = np.ascontiguousarray(target)
    return _backend.neighborhood_filter(target, k)


def depth_smooth(target: np.ndarray, z: int) -> np.ndarray:
    target = np.ascontiguousarray(target)
    return _backend.depth_smooth(target, z)


def inverse_cdf(pdf: np.ndarray, edges: np.ndarray, u: np.ndarray) -> np.ndarray:
    pdf = np.ascontiguousarray(pdf, dtype=np.float64)
    edges = np.ascontiguousarray(edges, dtype=np.float64)
    u = np.ascontiguousarray(u, dtype=np.float64)
    return _backend.inverse_cdf(pdf, edges, u)


def composite_forward(rgb, alpha, background):
    rgb = np.ascontiguousarray(rgb)
    alpha = np.ascontiguousarray(alpha, dtype=rgb.dtype)
    background = np.ascontiguousarray(background, dtype=rgb.dtype)
    return _backend.composite_forward(rgb, alpha, background)


def composite_backward(rgb, alpha, background, g_rgb_out, g_acc):
    rgb = np.ascontiguousarray(rgb)
    alpha = np.ascontiguousarray(alpha, dtype=rgb.dtype)
    background = np.ascontiguousarray(background, dtype=rgb.dtype)
    g_rgb_out = np.ascontiguousarray(g_rgb_out, dtype=rgb.dtype)
    g_acc = np.ascontiguousarray(g_acc, dtype=rgb.dtype)
    return _backend.composite_backward(rgb, alpha, background, g_rgb_out, g_acc)
