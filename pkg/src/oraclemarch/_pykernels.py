"""Pure-numpy implementations of the hot per-pixel/per-ray kernels.

These mirror the compiled kernels in _native.pyx exactly (same float
accumulation order) and are used when the extension is unavailable or when
ORACLEMARCH_PURE=1 is set.
"""
from __future__ import annotations

import numpy as np


def neighborhood_filter(target: np.ndarray, k: int) -> np.ndarray:
    """Windowed max with a radial penalty over the two image dimensions.

    target is (H, W, C); neighbor (i, j) contributes value - sqrt(i^2+j^2) /
    (sqrt(2) * floor(k/2)); out-of-image neighbors are skipped and the result
    is clamped below at 0.
    """
    h = k // 2
    out = np.maximum(target, 0.0)
    if h == 0:
        return out.copy()
    height, width = target.shape[0], target.shape[1]
    denom = np.sqrt(2.0) * h
    for di in range(-h, h + 1):
        for dj in range(-h, h + 1):
            if di == 0 and dj == 0:
                continue
            penalty = np.sqrt(float(di * di + dj * dj)) / denom
            if penalty >= 1.0:
                continue
            pen = target.dtype.type(penalty)
            ys = slice(max(0, -di), min(height, height - di))
            yt = slice(max(0, di), min(height, height + di))
            xs = slice(max(0, -dj), min(width, width - dj))
            xt = slice(max(0, dj), min(width, width + dj))
            np.maximum(out[yt, xt], target[ys, xs] - pen, out=out[yt, xt])
    return out


def depth_smooth(target: np.ndarray, z: int) -> np.ndarray:
    """Triangle filter along the class axis, zero-padded, clamped above at 1.

    Accumulates in float64 in fixed offset order so the compiled and numpy
    paths agree bit for bit.
    """
    h = z // 2
    if h == 0:
        return target.copy()
    c = target.shape[-1]
    acc = np.zeros(target.shape, dtype=np.float64)
    for i in range(-h, h + 1):
        w = (h + 1 - abs(i)) / (h + 1)
        lo, hi = max(0, i), min(c, c + i)
        acc[..., max(0, -i) : max(0, -i) + (hi - lo)] += target[..., lo:hi].astype(np.float64) * w
    return np.minimum(acc, 1.0).astype(target.dtype)


def inverse_cdf(pdf: np.ndarray, edges: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Evaluate the inverse CDF of per-row piecewise-constant PDFs.

    pdf is (R, C) nonnegative, edges (C+1,) ascending, u (R, X) ascending
    per row in [0, 1). Rows with total mass <= 1e-6 fall back to the uniform
    PDF. Returns (R, X) positions in edge coordinates.
    """
    pdf = np.asarray(pdf, dtype=np.float64)
    mass = pdf.sum(axis=1, keepdims=True)
    degenerate = mass[:, 0] <= 1e-6
    if np.any(degenerate):
        pdf = pdf.copy()
        pdf[degenerate] = 1.0
        mass = pdf.sum(axis=1, keepdims=True)
    p = pdf / mass
    cum = np.cumsum(p, axis=1)
    c = p.shape[1]
    idx = np.minimum((cum[:, None, :] <= u[:, :, None]).sum(axis=-1), c - 1)
    cum_lo = np.concatenate([np.zeros((p.shape[0], 1)), cum[:, :-1]], axis=1)
    lo = np.take_along_axis(cum_lo, idx, axis=1)
    pb = np.take_along_axis(p, idx, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(pb > 0.0, (u - lo) / pb, 0.5)
    frac = np.clip(frac, 0.0, 1.0)
    left = edges[idx]
    return left + frac * (edges[idx + 1] - left)


def composite_forward(
    rgb: np.ndarray, alpha: np.ndarray, background: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Front-to-back alpha compositing over ordered samples.

    rgb is (R, X, 3), alpha (R, X), background (3,). Returns the composited
    colors (R, 3) and accumulated opacities (R,) = sum of the per-sample
    weights alpha_i * prod_{j<i} (1 - alpha_j).
    """
    trans = np.cumprod(1.0 - alpha, axis=1)
    t_excl = np.concatenate([np.ones_like(alpha[:, :1]), trans[:, :-1]], axis=1)
    w = alpha * t_excl
    acc = w.sum(axis=1)
    out = np.einsum("rx,rxc->rc", w, rgb) + trans[:, -1:] * background[None, :]
    return out, acc


def composite_backward(
    rgb: np.ndarray,
    alpha: np.ndarray,
    background: np.ndarray,
    g_rgb_out: np.ndarray,
    g_acc: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of composite_forward w.r.t. per-sample colors and alphas.

    Uses the back-to-front recursion B_k = a_k c_k + (1-a_k) B_{k+1} so no
    division by (1 - alpha) is needed even at alpha == 1.
    """
    r, x, _ = rgb.shape
    trans = np.cumprod(1.0 - alpha, axis=1)
    t_excl = np.concatenate([np.ones_like(alpha[:, :1]), trans[:, :-1]], axis=1)
    w = alpha * t_excl
    g_rgb = w[:, :, None] * g_rgb_out[:, None, :]
    g_alpha = np.empty_like(alpha)
    suffix_rgb = np.broadcast_to(background, (r, 3)).copy()
    suffix_acc = np.zeros(r, dtype=alpha.dtype)
    for k in range(x - 1, -1, -1):
        color_term = np.einsum("rc,rc->r", g_rgb_out, rgb[:, k, :] - suffix_rgb)
        g_alpha[:, k] = t_excl[:, k] * (color_term + g_acc * (1.0 - suffix_acc))
        a = alpha[:, k : k + 1]
        suffix_rgb = a * rgb[:, k, :] + (1.0 - a) * suffix_rgb
        suffix_acc = alpha[:, k] + (1.0 - alpha[:, k]) * suffix_acc
    return g_rgb, g_alpha
