"""Volume compositing, losses, and the end-to-end guided-ray pipeline.

One rendered ray runs through five stages: the ray is unified onto the view
cell sphere, depth is handled in the warped coordinate, one oracle forward
produces per-bin sample likelihoods (or a single depth estimate), the chosen
sample positions are contracted toward the view cell and encoded, and the
shading network's outputs are alpha-composited front to back.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels, net
from .errors import LocalSamplingNeedsDepth, ShapeMismatch
from .geom import Pose, ViewCell, circumscribed_sphere, pixel_grid_rays, unify_rays, validate_pose
from .oracle_targets import DepthBins
from .sampling import (
    DepthRange,
    EncodingConfig,
    encode_features,
    ensure_ascending,
    local_depths,
    log_unwarp_depth,
    ndc_ray_depths,
    sample_from_pdf,
    uniform_depths,
    warp_point,
)

SAMPLING_MODES = ("uniform", "log", "logwarp", "ndc", "local-gt")


@dataclass(frozen=True)
class ShadingSample:
    """One sample on a ray: color and opacity, both already in [0, 1]."""

    rgb: np.ndarray
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "rgb", np.asarray(self.rgb, dtype=np.float64).reshape(3))
        if np.any(self.rgb < 0) or np.any(self.rgb > 1) or not (0.0 <= self.alpha <= 1.0):
            raise ValueError("sample color and opacity must lie in [0, 1]")


@dataclass(frozen=True)
class PipelineConfig:
    """Knobs of the ray pipeline shared by training and rendering."""

    samples: int = 4
    bins: int = 32
    oracle_inputs: int = 32
    mode: str = "logwarp"
    use_oracle: bool = True
    local_base: str = "uniform"
    background: tuple[float, float, float] = (0.0, 0.0, 0.0)
    loss_alpha: float = 1.0
    loss_beta: float = 10.0
    alpha_mode: str = "direct"
    jitter: bool = False

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("need at least one sample per ray")
        if self.bins < 2:
            raise ValueError("need at least two oracle bins")
        if self.mode not in SAMPLING_MODES:
            raise ValueError(f"unknown sampling mode {self.mode!r}")
        if self.loss_alpha < 0 or self.loss_beta < 0:
            raise ValueError("loss weights must be >= 0")
        if self.alpha_mode not in ("direct", "density"):
            raise ValueError(f"unknown alpha mode {self.alpha_mode!r}")

    @property
    def encode_space(self) -> str:
        mode = self.local_base if self.mode == "local-gt" else self.mode
        if mode == "logwarp":
            return "warp"
        if mode == "ndc" and not self.use_oracle:
            return "ndc"
        return "linear"

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "bins": self.bins,
            "oracle_inputs": self.oracle_inputs,
            "mode": self.mode,
            "use_oracle": self.use_oracle,
            "local_base": self.local_base,
            "background": list(self.background),
            "loss_alpha": self.loss_alpha,
            "loss_beta": self.loss_beta,
            "alpha_mode": self.alpha_mode,
            "jitter": self.jitter,
        }

    @staticmethod
    def from_dict(d: dict) -> "PipelineConfig":
        return PipelineConfig(
            samples=int(d["samples"]),
            bins=int(d["bins"]),
            oracle_inputs=int(d["oracle_inputs"]),
            mode=str(d["mode"]),
            use_oracle=bool(d["use_oracle"]),
            local_base=str(d["local_base"]),
            background=tuple(float(v) for v in d["background"]),
            loss_alpha=float(d["loss_alpha"]),
            loss_beta=float(d["loss_beta"]),
            alpha_mode=str(d["alpha_mode"]),
            jitter=bool(d["jitter"]),
        )


# ---------------------------------------------------------------------------
# compositing and losses


def composite(
    samples: list[ShadingSample], deltas: np.ndarray | None, background
) -> tuple[np.ndarray, float]:
    """Front-to-back compositing of ordered samples against a background.

    Returns (rgb, accumulated_opacity). deltas are accepted for signature
    parity with the density path but are not needed for direct opacities.
    """
    rgb = np.stack([s.rgb for s in samples])[None, :, :]
    alpha = np.array([[s.alpha for s in samples]], dtype=np.float64)
    out, acc = kernels.composite_forward(rgb, alpha, np.asarray(background, dtype=np.float64))
    return out[0], float(acc[0])


def opacity_loss(alphas: np.ndarray) -> float:
    """Zero once the per-sample opacities of a ray sum to at least one,
    quadratic below that."""
    s = float(np.sum(alphas))
    return 0.0 if s >= 1.0 else (s - 1.0) ** 2


def opacity_loss_batch(alphas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-ray opacity losses and their gradients w.r.t. each alpha."""
    s = alphas.sum(axis=1)
    short = s < 1.0
    losses = np.where(short, (s - 1.0) ** 2, 0.0)
    g = np.where(short, 2.0 * (s - 1.0), 0.0)[:, None] * np.ones_like(alphas)
    return losses, g


def total_loss(
    pred_rgb: np.ndarray,
    target_rgb: np.ndarray,
    alphas: np.ndarray,
    loss_alpha: float = 1.0,
    loss_beta: float = 10.0,
) -> float:
    """Weighted sum of color MSE and the per-ray opacity shortfall."""
    pred_rgb = np.asarray(pred_rgb, dtype=np.float64)
    target_rgb = np.asarray(target_rgb, dtype=np.float64)
    if pred_rgb.shape != target_rgb.shape:
        raise ShapeMismatch(f"prediction {pred_rgb.shape} vs target {target_rgb.shape}")
    mse = float(np.mean((pred_rgb - target_rgb) ** 2))
    alphas2 = np.atleast_2d(np.asarray(alphas, dtype=np.float64))
    losses, _ = opacity_loss_batch(alphas2)
    return loss_alpha * mse + loss_beta * float(np.mean(losses))


def bce_loss(pred: np.ndarray, target: np.ndarray, eps: float = 1e-7) -> float:
    """Mean binary cross-entropy with predictions clamped to [eps, 1-eps]."""
    p = np.clip(np.asarray(pred, dtype=np.float64), eps, 1.0 - eps)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise ShapeMismatch(f"prediction {p.shape} vs target {t.shape}")
    return float(np.mean(-(t * np.log(p) + (1.0 - t) * np.log(1.0 - p))))


def shading_heads(
    raw: np.ndarray, deltas: np.ndarray, alpha_mode: str
) -> tuple[np.ndarray, np.ndarray, dict]:
    """Map shading-network outputs to per-sample (rgb, alpha).

    In "direct" mode the network's fourth output already is the opacity
    (sigmoid applied by the network). In "density" mode the fourth output is
    a raw density; alpha = 1 - exp(-softplus(density) * delta), which makes
    opacity depend on the world-space spacing of the samples.
    """
    rgb = raw[:, :3]
    if alpha_mode == "direct":
        return rgb, raw[:, 3], {}
    z = raw[:, 3]
    sp = np.logaddexp(0.0, z)
    alpha = 1.0 - np.exp(-sp * deltas)
    return rgb, alpha, {"z": z, "sp": sp, "alpha": alpha, "deltas": deltas}


def shading_heads_backward(
    g_rgb: np.ndarray, g_alpha: np.ndarray, head_cache: dict, alpha_mode: str
) -> np.ndarray:
    """Gradient w.r.t. the network's 4 activated outputs."""
    g = np.empty((g_rgb.shape[0], 4), dtype=g_rgb.dtype)
    g[:, :3] = g_rgb
    if alpha_mode == "direct":
        g[:, 3] = g_alpha
    else:
        sig = 1.0 / (1.0 + np.exp(-np.clip(head_cache["z"], -60.0, 60.0)))
        d_alpha_dz = (1.0 - head_cache["alpha"]) * head_cache["deltas"] * sig
        g[:, 3] = g_alpha * d_alpha_dz
    return g


# ---------------------------------------------------------------------------
# the assembled pipeline


@dataclass
class Pipeline:
    """Everything needed to turn rays into colors."""

    cell: ViewCell
    depth_range: DepthRange
    bins: DepthBins
    encoding: EncodingConfig
    config: PipelineConfig
    oracle_cfg: net.MLPConfig | None = None
    oracle_params: net.MLPParams | None = None
    oracle_kind: str = "classified"
    oracle_unified: bool = True
    shading_cfg: net.MLPConfig | None = None
    shading_params: net.MLPParams | None = None
    _sphere: tuple = field(init=False, repr=False)

    def __post_init__(self):
        self._sphere = circumscribed_sphere(self.cell)

    # -- oracle ------------------------------------------------------------

    def oracle_point_depths(self) -> np.ndarray:
        """World depths of the oracle's input points: centers of I evenly
        spaced groups of the C bins."""
        c, i = self.bins.c, self.config.oracle_inputs
        idx = np.floor((np.arange(i) + 0.5) * c / i).astype(int)
        return self.bins.centers_world[idx]

    def oracle_input_dim(self) -> int:
        if self.oracle_kind == "sd":
            return 6
        return 6 + 3 * self.config.oracle_inputs

    def oracle_inputs(
        self, unified_origins: np.ndarray, dirs: np.ndarray, cam_origins: np.ndarray
    ) -> np.ndarray:
        """Raw (unencoded) oracle features: origin, direction, and for the
        classified oracle the I bin-center points along the ray. Positions
        are taken relative to the cell center and scaled by 1/d_max."""
        d_max = self.depth_range.d_max
        origin = unified_origins if self.oracle_unified else cam_origins
        rel = (origin - self.cell.center) / d_max
        if self.oracle_kind == "sd":
            return np.concatenate([rel, dirs], axis=1)
        t_pts = self.oracle_point_depths()
        pts = unified_origins[:, None, :] + t_pts[None, :, None] * dirs[:, None, :]
        pts = (pts - self.cell.center) / d_max
        return np.concatenate([rel, dirs, pts.reshape(len(dirs), -1)], axis=1)

    def oracle_forward(self, unified_origins, dirs, cam_origins):
        feats = self.oracle_inputs(unified_origins, dirs, cam_origins)
        out, _ = net.forward(
            self.oracle_params, self.oracle_cfg, feats, want_cache=False
        )
        return out

    def sd_depth_from_output(self, y: np.ndarray, backoff: np.ndarray) -> np.ndarray:
        """Single-depth oracle output (linear depth scaled to [0, 1]) to
        world depth from the unified origin."""
        rng = self.depth_range
        d = rng.d_min + np.clip(y[:, 0], 0.0, 1.0) * rng.extent
        if not self.oracle_unified:
            d = np.clip(d + backoff, rng.d_min, rng.d_max)
        return d

    # -- sample placement ---------------------------------------------------

    def place_samples(
        self,
        unified_origins: np.ndarray,
        dirs: np.ndarray,
        cam_origins: np.ndarray,
        backoff: np.ndarray,
        gt_depth: np.ndarray | None = None,
        rand: np.random.Generator | None = None,
    ) -> np.ndarray:
        """Per-ray ascending sample depths (from the unified origin)."""
        cfg = self.config
        n = len(dirs)
        if cfg.use_oracle:
            out = self.oracle_forward(unified_origins, dirs, cam_origins)
            if self.oracle_kind == "classified":
                # jitter applies only where a generator is supplied (training
                # batches); rendering stays deterministic
                return sample_from_pdf(
                    out, self.bins.edges, cfg.samples, self.depth_range,
                    jitter=cfg.jitter and rand is not None, rand=rand,
                )
            d_s = self.sd_depth_from_output(out, backoff)
            return local_depths(d_s, cfg.samples, self.depth_range, mode="log")
        if cfg.mode == "uniform":
            t = uniform_depths(self.depth_range, cfg.samples)
            return np.broadcast_to(t, (n, cfg.samples)).copy()
        if cfg.mode == "log":
            t = np.asarray(log_unwarp_depth(uniform_depths(self.depth_range, cfg.samples), self.depth_range))
            return np.broadcast_to(t, (n, cfg.samples)).copy()
        if cfg.mode == "logwarp":
            t = np.asarray(log_unwarp_depth(uniform_depths(self.depth_range, cfg.samples), self.depth_range))
            return np.broadcast_to(t, (n, cfg.samples)).copy()
        if cfg.mode == "ndc":
            f, _, _ = self.cell.basis()
            t = ndc_ray_depths(unified_origins, dirs, self.cell.center, f, cfg.samples)
            return ensure_ascending(t, 1e-9)
        if cfg.mode == "local-gt":
            if gt_depth is None:
                raise LocalSamplingNeedsDepth("local-gt placement needs per-ray surface depth")
            base = "log" if cfg.local_base == "logwarp" else cfg.local_base
            return local_depths(gt_depth, cfg.samples, self.depth_range, mode=base)
        raise ValueError(f"unhandled mode {cfg.mode!r}")

    # -- encoding ------------------------------------------------------------

    def encode_rel_positions(self, rel: np.ndarray) -> np.ndarray:
        """rel (..., 3) = positions minus the cell center -> encoded features."""
        space = self.config.encode_space
        if space == "warp":
            dtype = rel.dtype
            p = warp_point(rel.reshape(-1, 3), self.depth_range.d_max)
            p = p.astype(dtype, copy=False).reshape(rel.shape)
        elif space == "ndc":
            f, r, u = self.cell.basis()
            z = rel @ f
            z = np.maximum(z, 1e-6)
            p = np.stack([(rel @ r) / z, (rel @ u) / z, 1.0 - 1.0 / np.maximum(z, 1.0)], axis=-1)
            p = p.astype(rel.dtype, copy=False)
        else:
            p = rel * rel.dtype.type(1.0 / self.depth_range.d_max)
        return encode_features(p, self.encoding.pos_freqs, self.encoding.include_raw)

    def encode_positions(self, positions: np.ndarray, dtype=None) -> np.ndarray:
        """positions (..., 3) in world space -> encoded features."""
        rel = positions - self.cell.center
        if dtype is not None:
            rel = rel.astype(dtype)
        return self.encode_rel_positions(rel)

    def encode_dirs(self, dirs: np.ndarray, dtype=None) -> np.ndarray:
        d = dirs if dtype is None else np.asarray(dirs).astype(dtype)
        return encode_features(d, self.encoding.dir_freqs, self.encoding.include_raw)

    # -- full ray pipeline ----------------------------------------------------

    def shading_forward(
        self, t: np.ndarray, unified_origins: np.ndarray, dirs: np.ndarray, want_cache: bool = False
    ):
        """Evaluate the shading network at the given per-ray depths.

        Returns (rgb (R,X,3), alpha (R,X), deltas, cache-or-None)."""
        r, x = t.shape
        dtype = self.shading_params.dtype
        rel0 = (unified_origins - self.cell.center).astype(dtype)
        rel = rel0[:, None, :] + t.astype(dtype)[..., None] * dirs.astype(dtype)[:, None, :]
        feats = self.encode_rel_positions(rel).reshape(r * x, -1)
        enc_dir = np.repeat(self.encode_dirs(dirs, dtype=dtype), x, axis=0)
        raw, cache = net.forward(
            self.shading_params, self.shading_cfg, feats, skip=enc_dir, want_cache=want_cache
        )
        deltas = np.empty_like(t)
        deltas[:, :-1] = np.diff(t, axis=1)
        deltas[:, -1] = np.maximum(self.depth_range.d_max - t[:, -1], 0.0)
        deltas = np.maximum(deltas, 1e-9 * max(self.depth_range.extent, 1e-30))
        rgb, alpha, head_cache = shading_heads(
            raw, deltas.reshape(-1).astype(raw.dtype), self.config.alpha_mode
        )
        full_cache = {"net": cache, "head": head_cache} if want_cache else None
        return rgb.reshape(r, x, 3), alpha.reshape(r, x), deltas, full_cache

    def render_rays(
        self,
        origins: np.ndarray,
        dirs: np.ndarray,
        gt_depth: np.ndarray | None = None,
        rand: np.random.Generator | None = None,
    ) -> tuple[np.ndarray, np.ndarray]:
        """Colors and accumulated opacities for a batch of rays."""
        origins = np.asarray(origins, dtype=np.float64)
        dirs = np.asarray(dirs, dtype=np.float64)
        center, radius = self._sphere
        unified, backoff = unify_rays(origins, dirs, center, radius)
        t = self.place_samples(unified, dirs, origins, backoff, gt_depth=gt_depth, rand=rand)
        rgb, alpha, _, _ = self.shading_forward(t, unified, dirs)
        bg = np.asarray(self.config.background, dtype=rgb.dtype)
        out, acc = kernels.composite_forward(
            np.ascontiguousarray(rgb), np.ascontiguousarray(alpha), bg
        )
        return out, acc

    def render_image(
        self,
        pose: Pose,
        width: int,
        height: int,
        gt_depth: np.ndarray | None = None,
        chunk: int = 8192,
    ) -> tuple[np.ndarray, dict]:
        """Render a full image; rays are independent and deterministic."""
        validate_pose(self.cell, pose)
        origins, dirs = pixel_grid_rays(self.cell, pose, width, height)
        out = np.empty((height * width, 3), dtype=np.float32)
        acc = np.empty(height * width, dtype=np.float32)
        start = time.perf_counter()
        for lo in range(0, len(dirs), chunk):
            hi = min(lo + chunk, len(dirs))
            d = None if gt_depth is None else gt_depth.reshape(-1)[lo:hi]
            rgb, a = self.render_rays(origins[lo:hi], dirs[lo:hi], gt_depth=d)
            out[lo:hi] = rgb
            acc[lo:hi] = a
        elapsed = time.perf_counter() - start
        stats = {"accumulated_opacity": acc.reshape(height, width), "wall_ms": elapsed * 1e3}
        return np.clip(out.reshape(height, width, 3), 0.0, 1.0), stats


def render_ray(pipeline: Pipeline, origin, direction, gt_depth: float | None = None) -> np.ndarray:
    """Color of a single ray (convenience wrapper over the batched path)."""
    d = None if gt_depth is None else np.asarray([gt_depth], dtype=np.float64)
    rgb, _ = pipeline.render_rays(
        np.asarray(origin, dtype=np.float64)[None, :],
        np.asarray(direction, dtype=np.float64)[None, :],
        gt_depth=d,
    )
    return rgb[0]
