"""Classified-depth training targets for the sampling oracle.

The first surface depth of every pixel is discretized into C warped-depth
bins (one-hot), then blurred across the image plane with a radial max filter
and along depth with a triangle filter. Filtering trades false positives for
false negatives so the oracle never learns to miss a surface; it applies to
training targets only, never at inference.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import CorruptFile, InvalidKernel, OutOfRange
from .sampling import DepthRange, log_unwarp_depth, log_warp_depth


@dataclass(frozen=True)
class DepthBins:
    """C contiguous bins, uniform in the warped-depth coordinate."""

    c: int
    depth_range: DepthRange

    def __post_init__(self):
        if self.c < 2:
            raise ValueError("need at least 2 depth bins")

    @property
    def edges(self) -> np.ndarray:
        """C+1 ascending warped-depth edges spanning the full range."""
        return np.linspace(self.depth_range.d_min, self.depth_range.d_max, self.c + 1)

    @property
    def centers_warped(self) -> np.ndarray:
        e = self.edges
        return (e[:-1] + e[1:]) / 2.0

    @property
    def centers_world(self) -> np.ndarray:
        """Bin-center depths in world units (input points for the oracle)."""
        return np.asarray(log_unwarp_depth(self.centers_warped, self.depth_range))


@dataclass
class DepthMap:
    """Per-pixel first-surface depth measured from the unified ray origin."""

    depth: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        self.depth = np.asarray(self.depth, dtype=np.float32)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.depth.shape != self.valid.shape or self.depth.ndim != 2:
            raise ValueError("depth and validity mask must share a 2D shape")

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    @property
    def width(self) -> int:
        return self.depth.shape[1]


@dataclass
class ClassTarget:
    """Per-pixel vector of C depth-class values in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.ndim != 3:
            raise ValueError("class target must be (H, W, C)")


def discretize_depths(d_s: np.ndarray, bins: DepthBins) -> np.ndarray:
    """Bin index for each depth: edges[z] <= warp(d) < edges[z+1], with the
    far plane assigned to the last bin."""
    rng = bins.depth_range
    d = np.asarray(d_s, dtype=np.float64)
    tol = 1e-9 * max(rng.extent, 1.0)
    if np.any(d < rng.d_min - tol) or np.any(d > rng.d_max + tol):
        raise OutOfRange("surface depth outside the configured depth range")
    w = np.asarray(log_warp_depth(d, rng))
    idx = np.searchsorted(bins.edges, w, side="right") - 1
    return np.clip(idx, 0, bins.c - 1)


def discretize_depth(d_s: float, bins: DepthBins) -> np.ndarray:
    """One-hot class vector for a single surface depth."""
    one_hot = np.zeros(bins.c, dtype=np.float32)
    one_hot[int(discretize_depths(np.asarray(d_s), bins))] = 1.0
    return one_hot


def _check_kernel(k: int, name: str) -> None:
    if k < 1 or k % 2 == 0:
        raise InvalidKernel(f"{name} must be odd and >= 1, got {k}")


def neighborhood_filter(target: ClassTarget, k: int) -> ClassTarget:
    """Blur classes across neighboring pixels with a radial max filter."""
    _check_kernel(k, "image filter size")
    if k == 1:
        return ClassTarget(target.values.copy())
    return ClassTarget(kernels.neighborhood_filter(target.values, k))


def depth_smooth(target: ClassTarget, z: int) -> ClassTarget:
    """Blur classes along the depth axis with a triangle filter."""
    _check_kernel(z, "depth filter size")
    if z == 1:
        return ClassTarget(target.values.copy())
    return ClassTarget(kernels.depth_smooth(target.values, z))


def one_hot_field(depth: DepthMap, bins: DepthBins) -> ClassTarget:
    """Unfiltered per-pixel one-hot field; background pixels (rays that hit
    nothing) get the last bin so compositing can still return background."""
    d = np.where(depth.valid, depth.depth, bins.depth_range.d_max)
    idx = discretize_depths(d, bins)
    values = np.zeros((depth.height, depth.width, bins.c), dtype=np.float32)
    np.put_along_axis(values, idx[:, :, None], 1.0, axis=2)
    return ClassTarget(values)


def build_targets(depth: DepthMap, bins: DepthBins, k: int, z: int) -> ClassTarget:
    """Full classified-depth target: discretize, blur in image space, blur
    along depth."""
    return depth_smooth(neighborhood_filter(one_hot_field(depth, bins), k), z)


_CACHE_HEADER = struct.Struct("<5I")


def write_target_cache(path, target: ClassTarget, k: int, z: int) -> None:
    """Raw float32 dump with a little-endian (W, H, C, K, Z) header."""
    h, w, c = target.values.shape
    with open(path, "wb") as f:
        f.write(_CACHE_HEADER.pack(w, h, c, k, z))
        f.write(np.ascontiguousarray(target.values, dtype="<f4").tobytes())


def read_target_cache(path, expect_k: int | None = None, expect_z: int | None = None) -> ClassTarget:
    raw = Path(path).read_bytes()
    if len(raw) < _CACHE_HEADER.size:
        raise CorruptFile(f"{path}: truncated target cache header")
    w, h, c, k, z = _CACHE_HEADER.unpack_from(raw)
    if (expect_k is not None and k != expect_k) or (expect_z is not None and z != expect_z):
        raise CorruptFile(f"{path}: cached filters K={k} Z={z} do not match the request")
    values = np.frombuffer(raw, dtype="<f4", offset=_CACHE_HEADER.size)
    if values.size != h * w * c:
        raise CorruptFile(f"{path}: expected {h * w * c} floats, found {values.size}")
    return ClassTarget(values.reshape(h, w, c).copy())
