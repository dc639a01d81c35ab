"""Depth parametrizations, space warping, and sample placement along rays.

Depths are always measured from the unified ray origin. The logarithmic
parametrization maps world depth to a "warped depth" coordinate; placing
samples uniformly in that coordinate concentrates them near the camera.
Space warping is the radial inverse-square-root contraction applied to
sample positions before positional encoding, which compresses background
content toward the view cell.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import BehindAverageCamera, DegeneratePDF, InvalidCount, OutOfRange


@dataclass(frozen=True)
class DepthRange:
    """Near/far distances bounding all sample depths."""

    d_min: float
    d_max: float

    def __post_init__(self):
        if not (0.0 <= self.d_min < self.d_max):
            raise ValueError(f"need 0 <= d_min < d_max, got [{self.d_min}, {self.d_max}]")

    @property
    def extent(self) -> float:
        return self.d_max - self.d_min

    def to_dict(self) -> dict:
        return {"d_min": self.d_min, "d_max": self.d_max}

    @staticmethod
    def from_dict(d: dict) -> "DepthRange":
        return DepthRange(d_min=float(d["d_min"]), d_max=float(d["d_max"]))


@dataclass(frozen=True)
class EncodingConfig:
    """Sine/cosine frequency counts for position and direction features."""

    pos_freqs: int = 10
    dir_freqs: int = 4
    include_raw: bool = True

    def __post_init__(self):
        if self.pos_freqs < 0 or self.dir_freqs < 0:
            raise ValueError("frequency counts must be >= 0")

    @property
    def pos_dim(self) -> int:
        return 3 * (int(self.include_raw) + 2 * self.pos_freqs)

    @property
    def dir_dim(self) -> int:
        return 3 * (int(self.include_raw) + 2 * self.dir_freqs)

    def to_dict(self) -> dict:
        return {
            "pos_freqs": self.pos_freqs,
            "dir_freqs": self.dir_freqs,
            "include_raw": self.include_raw,
        }

    @staticmethod
    def from_dict(d: dict) -> "EncodingConfig":
        return EncodingConfig(
            pos_freqs=int(d["pos_freqs"]),
            dir_freqs=int(d["dir_freqs"]),
            include_raw=bool(d["include_raw"]),
        )


@dataclass
class SampleSet:
    """Per-ray sample depths, world positions, and compositing spacings."""

    t: np.ndarray
    positions: np.ndarray
    deltas: np.ndarray


def _check_range(d, rng: DepthRange, what: str) -> None:
    tol = 1e-9 * max(rng.extent, 1.0)
    d = np.asarray(d)
    if np.any(d < rng.d_min - tol) or np.any(d > rng.d_max + tol):
        raise OutOfRange(f"{what} outside [{rng.d_min}, {rng.d_max}]")


def uniform_depths(rng: DepthRange, n: int) -> np.ndarray:
    """n midpoint depths of equal-width segments between near and far."""
    if n < 1:
        raise InvalidCount(f"sample count must be >= 1, got {n}")
    step = rng.extent / n
    return rng.d_min + (np.arange(n, dtype=np.float64) + 0.5) * step


def log_warp_depth(d, rng: DepthRange):
    """World depth -> warped-depth coordinate. Fixes both endpoints."""
    _check_range(d, rng, "depth")
    d = np.clip(np.asarray(d, dtype=np.float64), rng.d_min, rng.d_max)
    scale = rng.extent / np.log1p(rng.extent)
    out = rng.d_min + np.log1p(d - rng.d_min) * scale
    return out if out.ndim else float(out)


def log_unwarp_depth(w, rng: DepthRange):
    """Exact inverse of log_warp_depth."""
    _check_range(w, rng, "warped depth")
    w = np.clip(np.asarray(w, dtype=np.float64), rng.d_min, rng.d_max)
    out = rng.d_min + np.expm1((w - rng.d_min) / rng.extent * np.log1p(rng.extent))
    out = np.clip(out, rng.d_min, rng.d_max)
    return out if out.ndim else float(out)


def log_depths(rng: DepthRange, n: int) -> np.ndarray:
    """n depths uniform in the warped coordinate; gaps grow with distance."""
    return np.asarray(log_unwarp_depth(uniform_depths(rng, n), rng))


def warp_point(p, d_max: float):
    """Inverse-square-root radial contraction toward the view cell center.

    p is relative to the cell center; the image has magnitude
    sqrt(|p|/d_max), with the origin mapping to itself.
    """
    if d_max <= 0:
        raise ValueError("d_max must be positive")
    p = np.asarray(p)
    if not np.issubdtype(p.dtype, np.floating):
        p = p.astype(np.float64)
    single = p.ndim == 1
    p2 = np.atleast_2d(p)
    norm = np.linalg.norm(p2, axis=-1, keepdims=True).astype(p.dtype, copy=False)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(norm > 0.0, 1.0 / np.sqrt(norm * p.dtype.type(d_max)), p.dtype.type(0.0))
    out = p2 * w
    return out[0] if single else out


def ndc_depth_to_world(u) -> np.ndarray:
    """Normalized device depth u in [0, 1) -> world depth 1/(1-u).

    Uniform steps in u are linear in disparity from the near plane (depth 1)
    out to infinity.
    """
    u = np.asarray(u, dtype=np.float64)
    if np.any(u < 0.0) or np.any(u >= 1.0):
        raise OutOfRange("normalized device depth must lie in [0, 1)")
    return 1.0 / (1.0 - u)


def ndc_depths(n: int) -> np.ndarray:
    """n plane depths along the average camera axis, linear in disparity."""
    if n < 1:
        raise InvalidCount(f"sample count must be >= 1, got {n}")
    u = (np.arange(n, dtype=np.float64) + 0.5) / n
    return ndc_depth_to_world(u)


def ndc_ray_depths(
    origins: np.ndarray,
    directions: np.ndarray,
    avg_position: np.ndarray,
    avg_forward: np.ndarray,
    n: int,
) -> np.ndarray:
    """Per-ray t values hitting the disparity-linear z-planes of the average
    camera. Raises BehindAverageCamera for rays not heading into the front
    hemisphere."""
    z = ndc_depths(n)
    o = np.atleast_2d(origins)
    d = np.atleast_2d(directions)
    dz = (d @ avg_forward).astype(np.float64)
    if np.any(dz <= 1e-9):
        raise BehindAverageCamera("ray does not point into the average camera's front hemisphere")
    z0 = (o - avg_position) @ avg_forward
    return (z[None, :] - z0[:, None]) / dz[:, None]


LOCAL_BASES = ("uniform", "log", "logwarp")


def local_depths(d_s, n: int, rng: DepthRange, mode: str = "uniform") -> np.ndarray:
    """n depths centered on a surface estimate, using the step size a dense
    128-sample sweep of the chosen parametrization would use.

    mode "uniform" steps in world depth; "log" and "logwarp" step in the
    warped coordinate (placement identical; "logwarp" only changes how the
    positions are encoded downstream). Samples are clipped into the range and
    kept strictly ascending. Accepts a scalar or an array of estimates and
    returns shape (..., n).
    """
    if n < 1:
        raise InvalidCount(f"sample count must be >= 1, got {n}")
    if mode not in LOCAL_BASES:
        raise ValueError(f"unknown local sampling base {mode!r}")
    _check_range(d_s, rng, "surface depth")
    d_s = np.asarray(d_s, dtype=np.float64)
    single = d_s.ndim == 0
    step = rng.extent / 128.0
    offsets = (np.arange(n, dtype=np.float64) - (n - 1) / 2.0) * step
    if mode == "uniform":
        t = np.atleast_1d(d_s)[..., None] + offsets
    else:
        w = np.atleast_1d(np.asarray(log_warp_depth(d_s, rng)))[..., None] + offsets
        t = np.asarray(log_unwarp_depth(np.clip(w, rng.d_min, rng.d_max), rng))
    t = np.clip(t, rng.d_min, rng.d_max)
    t = ensure_ascending(t, 1e-7 * max(rng.extent, 1e-30))
    return t[0] if single else t


def ensure_ascending(t: np.ndarray, eps: float) -> np.ndarray:
    """Nudge clipped/tied depths so each row is strictly ascending."""
    t = np.sort(np.atleast_2d(np.asarray(t, dtype=np.float64)), axis=-1)
    for i in range(1, t.shape[-1]):
        t[:, i] = np.maximum(t[:, i], t[:, i - 1] + eps)
    return t


def sample_from_pdf(
    pdf: np.ndarray,
    bin_edges: np.ndarray,
    x: int,
    rng: DepthRange,
    jitter: bool = False,
    rand: np.random.Generator | None = None,
    degenerate_fallback: bool = True,
) -> np.ndarray:
    """Place x depths by inverting the CDF of a piecewise-constant PDF.

    The PDF lives on the warped-depth bins given by bin_edges (ascending,
    C+1 values); the inverse CDF is evaluated at stratified points
    u_k = (k+0.5)/x (optionally jittered within each stratum) with linear
    interpolation inside bins, then mapped back to world depth. A PDF with
    effectively zero mass falls back to the uniform PDF so an untrained
    oracle still renders (set degenerate_fallback=False to raise
    DegeneratePDF instead). Returns ascending world depths, shape (..., x).
    """
    if x < 1:
        raise InvalidCount(f"sample count must be >= 1, got {x}")
    pdf = np.asarray(pdf, dtype=np.float64)
    single = pdf.ndim == 1
    pdf2 = np.atleast_2d(pdf)
    if not degenerate_fallback and np.any(pdf2.sum(axis=1) <= 1e-6):
        raise DegeneratePDF("pdf mass is effectively zero")
    edges = np.asarray(bin_edges, dtype=np.float64)
    if edges.ndim != 1 or edges.shape[0] != pdf2.shape[1] + 1:
        raise ValueError("bin_edges must have pdf length + 1 entries")
    if np.any(np.diff(edges) <= 0):
        raise ValueError("bin_edges must be strictly ascending")
    if jitter:
        if rand is None:
            raise ValueError("jitter requires a random generator")
        u = (np.arange(x) + rand.uniform(0.0, 1.0, size=(pdf2.shape[0], x))) / x
    else:
        u = np.broadcast_to((np.arange(x) + 0.5) / x, (pdf2.shape[0], x))
    warped = kernels.inverse_cdf(pdf2, edges, np.ascontiguousarray(u))
    t = np.asarray(log_unwarp_depth(warped, rng))
    return t[0] if single else t


def encode_features(p: np.ndarray, freqs: int, include_raw: bool = True) -> np.ndarray:
    """Sine/cosine feature vector [p, sin(2^k pi p), cos(2^k pi p), ...].

    p has shape (..., 3) with components expected in roughly [-1, 1]; the
    output dimension is 3 * (include_raw + 2 * freqs).
    """
    p = np.asarray(p)
    width = p.shape[-1]
    out = np.empty(p.shape[:-1] + (width * (int(include_raw) + 2 * freqs),), dtype=p.dtype)
    col = 0
    if include_raw:
        out[..., :width] = p
        col = width
    for k in range(freqs):
        scaled = (p.dtype.type(2.0**k * np.pi)) * p
        np.sin(scaled, out=out[..., col : col + width])
        np.cos(scaled, out=out[..., col + width : col + 2 * width])
        col += 2 * width
    return out


def build_sample_set(
    origin: np.ndarray, direction: np.ndarray, t: np.ndarray, rng: DepthRange
) -> SampleSet:
    """Positions and compositing spacings for ascending per-ray depths."""
    t = np.asarray(t, dtype=np.float64)
    positions = origin + t[:, None] * direction
    deltas = np.empty_like(t)
    deltas[:-1] = np.diff(t)
    deltas[-1] = max(rng.d_max - t[-1], 0.0)
    deltas = np.maximum(deltas, 1e-9 * max(rng.extent, 1e-30))
    return SampleSet(t=t, positions=positions, deltas=deltas)
