"""Two-phase training: the sampling oracle first, then the shading network.

The oracle learns classified depth (per-bin BCE against filtered targets)
or, in single-depth mode, regresses the normalized warped surface depth with
MSE. The shading network then trains on the full ray pipeline with the
oracle frozen, minimizing color MSE plus the opacity shortfall penalty.
Minibatches draw rays uniformly across all training images; the checkpoint
with the lowest validation loss is kept.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import net
from .checkpoint import Checkpoint
from .dataset import Dataset
from .errors import DatasetMissingDepth, IncompatibleCheckpoint
from .kernels import composite_backward, composite_forward
from pathlib import Path

from .oracle_targets import DepthBins, DepthMap, build_targets, read_target_cache, write_target_cache
from .render import (
    Pipeline,
    PipelineConfig,
    opacity_loss_batch,
    shading_heads_backward,
)
from .sampling import EncodingConfig

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OracleTrainConfig:
    iterations: int = 20000
    batch_rays: int = 1024
    lr: float = 5e-4
    seed: int = 0
    val_every: int = 500
    val_rays: int = 4096
    hidden_layers: int = 4
    hidden_width: int = 64
    bins: int = 128
    inputs: int = 128
    k: int = 5
    z: int = 5
    single_depth: bool = False
    unify: bool = True
    target_cache_dir: str | None = None

    def __post_init__(self):
        if min(self.iterations, self.batch_rays, self.val_every, self.val_rays) < 1:
            raise ValueError("counts must be positive")


@dataclass(frozen=True)
class ShadingTrainConfig:
    iterations: int = 20000
    batch_rays: int = 1024
    lr: float = 5e-4
    seed: int = 0
    val_every: int = 500
    val_rays: int = 4096
    hidden_layers: int = 4
    hidden_width: int = 64
    samples: int = 4
    mode: str = "logwarp"
    local_base: str = "uniform"
    alpha_mode: str = "direct"
    loss_alpha: float = 1.0
    loss_beta: float = 10.0
    jitter: bool = False
    pos_freqs: int = 10
    dir_freqs: int = 4

    def __post_init__(self):
        if min(self.iterations, self.batch_rays, self.val_every, self.val_rays) < 1:
            raise ValueError("counts must be positive")


def full_scale_oracle(**overrides) -> OracleTrainConfig:
    """Full-size configuration: 8 weight layers of 256, 128 bins/inputs."""
    base = dict(
        iterations=300000, batch_rays=4096, lr=5e-4, hidden_layers=7, hidden_width=256,
        bins=128, inputs=128,
    )
    base.update(overrides)
    return OracleTrainConfig(**base)


def full_scale_shading(**overrides) -> ShadingTrainConfig:
    base = dict(
        iterations=300000, batch_rays=4096, lr=5e-4, hidden_layers=7, hidden_width=256,
    )
    base.update(overrides)
    return ShadingTrainConfig(**base)


def _flatten_bundle(bundle: dict) -> dict:
    out = {}
    for key in ("origins", "dirs", "unified", "backoff", "rgb", "depth"):
        arr = bundle[key]
        out[key] = arr.reshape(-1, arr.shape[-1]) if arr.ndim == 3 else arr.reshape(-1)
    return out


def _oracle_targets(
    dataset: Dataset, bundle: dict, bins: DepthBins, cfg: OracleTrainConfig
) -> np.ndarray:
    """Training targets, flattened to (n_rays, C) or (n_rays, 1) for SD."""
    w, h = dataset.resolution
    rng = dataset.depth_range
    depth = bundle["depth"]
    if cfg.single_depth:
        # plain depth regression: the target is the linear depth scaled to
        # [0, 1] (d_min at 0), with no logarithmic transform
        d = depth if cfg.unify else np.maximum(depth - bundle["backoff"].reshape(depth.shape), 0.0)
        d = np.where(np.isfinite(depth), d, rng.d_max)
        d = np.clip(d, rng.d_min, rng.d_max)
        y = (d - rng.d_min) / rng.extent
        return y.reshape(-1, 1).astype(np.float32)
    per_image = []
    for i, image_id in enumerate(bundle["ids"]):
        cache_path = None
        if cfg.target_cache_dir is not None:
            cache_path = (
                Path(cfg.target_cache_dir)
                / f"{image_id}.target.c{bins.c}k{cfg.k}z{cfg.z}.f32"
            )
        if cache_path is not None and cache_path.exists():
            target = read_target_cache(cache_path, expect_k=cfg.k, expect_z=cfg.z)
        else:
            dm = DepthMap(
                depth=np.where(np.isfinite(depth[i]), depth[i], 0.0).reshape(h, w),
                valid=np.isfinite(depth[i]).reshape(h, w),
            )
            target = build_targets(dm, bins, cfg.k, cfg.z)
            if cache_path is not None:
                cache_path.parent.mkdir(parents=True, exist_ok=True)
                write_target_cache(cache_path, target, cfg.k, cfg.z)
        per_image.append(target.values.reshape(-1, bins.c))
    return np.concatenate(per_image, axis=0)


def train_oracle(dataset: Dataset, cfg: OracleTrainConfig) -> Checkpoint:
    """Phase one: fit the sampling oracle on ground-truth depth."""
    if not dataset.has_depth():
        raise DatasetMissingDepth("oracle training needs depth buffers")
    rng_np = np.random.default_rng(cfg.seed)
    bins = DepthBins(cfg.bins, dataset.depth_range)
    kind = "sd" if cfg.single_depth else "classified"
    pipe_cfg = PipelineConfig(
        samples=2, bins=cfg.bins, oracle_inputs=cfg.inputs, mode="logwarp", use_oracle=True
    )
    mlp_cfg = net.MLPConfig(
        in_dim=6 if cfg.single_depth else 6 + 3 * cfg.inputs,
        out_dim=1 if cfg.single_depth else cfg.bins,
        hidden_layers=cfg.hidden_layers,
        hidden_width=cfg.hidden_width,
        output_activation="sigmoid",
    )
    params = net.init_params(mlp_cfg, seed=cfg.seed)
    pipeline = Pipeline(
        cell=dataset.cell,
        depth_range=dataset.depth_range,
        bins=bins,
        encoding=EncodingConfig(),
        config=pipe_cfg,
        oracle_cfg=mlp_cfg,
        oracle_params=params,
        oracle_kind=kind,
        oracle_unified=cfg.unify,
    )

    train_bundle = dataset.ray_bundle("train")
    val_bundle = dataset.ray_bundle("val")
    train_targets = _oracle_targets(dataset, train_bundle, bins, cfg)
    val_targets = _oracle_targets(dataset, val_bundle, bins, cfg)
    train = _flatten_bundle(train_bundle)
    val = _flatten_bundle(val_bundle)
    n_val = min(cfg.val_rays, len(val["dirs"]))
    val_idx = rng_np.choice(len(val["dirs"]), size=n_val, replace=False)
    val_in = pipeline.oracle_inputs(
        val["unified"][val_idx], val["dirs"][val_idx], val["origins"][val_idx]
    )
    val_t = val_targets[val_idx]

    adam = net.AdamState.init(params, lr=cfg.lr)
    best_loss, best_params, best_iter = np.inf, params.copy(), 0
    n_train = len(train["dirs"])

    def validation_loss() -> float:
        out, _ = net.forward(params, mlp_cfg, val_in, want_cache=False)
        if cfg.single_depth:
            return float(np.mean((out - val_t) ** 2))
        p = np.clip(out.astype(np.float64), 1e-7, 1.0 - 1e-7)
        t = val_t.astype(np.float64)
        return float(np.mean(-(t * np.log(p) + (1.0 - t) * np.log(1.0 - p))))

    for it in range(cfg.iterations + 1):
        if it % cfg.val_every == 0 or it == cfg.iterations:
            loss = validation_loss()
            if loss < best_loss:
                best_loss, best_params, best_iter = loss, params.copy(), it
            log.info("oracle iter %d val %.5f", it, loss)
        if it == cfg.iterations:
            break
        idx = rng_np.integers(0, n_train, size=cfg.batch_rays)
        feats = pipeline.oracle_inputs(
            train["unified"][idx], train["dirs"][idx], train["origins"][idx]
        )
        target = train_targets[idx]
        out, cache = net.forward(params, mlp_cfg, feats)
        if cfg.single_depth:
            g_out = (2.0 / out.size) * (out - target)
            grads_w, grads_b, _, _ = net.backward(params, mlp_cfg, cache, g_out=g_out)
        else:
            g_logits = (out - target) / out.size
            grads_w, grads_b, _, _ = net.backward(params, mlp_cfg, cache, g_logits=g_logits)
        net.adam_step(params, grads_w, grads_b, adam)

    return Checkpoint(
        cell=dataset.cell,
        depth_range=dataset.depth_range,
        encoding=EncodingConfig(),
        pipeline=pipe_cfg,
        oracle_cfg=mlp_cfg,
        oracle_params=best_params,
        oracle_kind=kind,
        oracle_unified=cfg.unify,
        fov_deg=dataset.fov_deg,
        phase="oracle",
        iteration=best_iter,
        validation_loss=best_loss,
    )


def _check_compatible(dataset: Dataset, ckpt: Checkpoint) -> None:
    if ckpt.depth_range != dataset.depth_range:
        raise IncompatibleCheckpoint("depth range differs between checkpoint and dataset")
    c = dataset.cell
    k = ckpt.cell
    same = (
        np.allclose(c.center, k.center)
        and np.allclose(c.size, k.size)
        and np.allclose(c.forward, k.forward)
        and c.max_pitch_deg == k.max_pitch_deg
        and c.max_yaw_deg == k.max_yaw_deg
    )
    if not same:
        raise IncompatibleCheckpoint("view cell differs between checkpoint and dataset")


def train_shading(
    dataset: Dataset, oracle_ckpt: Checkpoint | None, cfg: ShadingTrainConfig
) -> Checkpoint:
    """Phase two: fit the shading network on the assembled ray pipeline.

    The oracle (when given) is frozen; without one, samples are placed by the
    configured fixed strategy (uniform / log / logwarp / ndc / local-gt).
    """
    use_oracle = oracle_ckpt is not None
    if use_oracle:
        _check_compatible(dataset, oracle_ckpt)
        if oracle_ckpt.oracle_cfg is None:
            raise IncompatibleCheckpoint("checkpoint has no oracle network")
    if cfg.mode == "local-gt" and not dataset.has_depth():
        raise DatasetMissingDepth("local-gt sampling needs depth buffers")

    rng_np = np.random.default_rng(cfg.seed + 1)
    encoding = EncodingConfig(pos_freqs=cfg.pos_freqs, dir_freqs=cfg.dir_freqs)
    pipe_cfg = PipelineConfig(
        samples=cfg.samples,
        bins=oracle_ckpt.pipeline.bins if use_oracle else 32,
        oracle_inputs=oracle_ckpt.pipeline.oracle_inputs if use_oracle else 32,
        mode=cfg.mode,
        use_oracle=use_oracle,
        local_base=cfg.local_base,
        background=dataset.background,
        loss_alpha=cfg.loss_alpha,
        loss_beta=cfg.loss_beta,
        alpha_mode=cfg.alpha_mode,
        jitter=cfg.jitter,
    )
    acts = ("sigmoid",) * 4 if cfg.alpha_mode == "direct" else ("sigmoid",) * 3 + ("none",)
    mlp_cfg = net.MLPConfig(
        in_dim=encoding.pos_dim,
        out_dim=4,
        hidden_layers=cfg.hidden_layers,
        hidden_width=cfg.hidden_width,
        skip_layer=cfg.hidden_layers,
        skip_dim=encoding.dir_dim,
        output_activation=acts,
    )
    params = net.init_params(mlp_cfg, seed=cfg.seed + 1)
    pipeline = Pipeline(
        cell=dataset.cell,
        depth_range=dataset.depth_range,
        bins=DepthBins(pipe_cfg.bins, dataset.depth_range),
        encoding=encoding,
        config=pipe_cfg,
        oracle_cfg=oracle_ckpt.oracle_cfg if use_oracle else None,
        oracle_params=oracle_ckpt.oracle_params if use_oracle else None,
        oracle_kind=oracle_ckpt.oracle_kind if use_oracle else "classified",
        oracle_unified=oracle_ckpt.oracle_unified if use_oracle else True,
        shading_cfg=mlp_cfg,
        shading_params=params,
    )

    train = _flatten_bundle(dataset.ray_bundle("train"))
    val = _flatten_bundle(dataset.ray_bundle("val"))
    rng_d = dataset.depth_range
    for b in (train, val):
        b["gt_depth"] = np.clip(
            np.where(np.isfinite(b["depth"]), b["depth"], rng_d.d_max), rng_d.d_min, rng_d.d_max
        ).astype(np.float64)
    n_val = min(cfg.val_rays, len(val["dirs"]))
    val_idx = rng_np.choice(len(val["dirs"]), size=n_val, replace=False)
    bg = np.asarray(pipe_cfg.background, dtype=np.float32)

    def run_rays(bundle, idx, want_cache, rand=None):
        unified = bundle["unified"][idx]
        dirs = bundle["dirs"][idx]
        t = pipeline.place_samples(
            unified, dirs, bundle["origins"][idx], bundle["backoff"][idx],
            gt_depth=bundle["gt_depth"][idx], rand=rand,
        )
        rgb_s, alpha_s, deltas, cache = pipeline.shading_forward(
            t, unified, dirs, want_cache=want_cache
        )
        rgb_s = np.ascontiguousarray(rgb_s)
        alpha_s = np.ascontiguousarray(alpha_s)
        pred, acc = composite_forward(rgb_s, alpha_s, bg)
        return t, rgb_s, alpha_s, deltas, cache, pred, acc

    def validation_loss() -> float:
        _, _, alpha_s, _, _, pred, _ = run_rays(val, val_idx, want_cache=False)
        target = val["rgb"][val_idx]
        mse = float(np.mean((pred.astype(np.float64) - target) ** 2))
        op, _ = opacity_loss_batch(alpha_s.astype(np.float64))
        return cfg.loss_alpha * mse + cfg.loss_beta * float(np.mean(op))

    adam = net.AdamState.init(params, lr=cfg.lr)
    best_loss, best_params, best_iter = np.inf, params.copy(), 0
    n_train = len(train["dirs"])

    for it in range(cfg.iterations + 1):
        if it % cfg.val_every == 0 or it == cfg.iterations:
            loss = validation_loss()
            if loss < best_loss:
                best_loss, best_params, best_iter = loss, params.copy(), it
            log.info("shading iter %d val %.5f", it, loss)
        if it == cfg.iterations:
            break
        idx = rng_np.integers(0, n_train, size=cfg.batch_rays)
        t, rgb_s, alpha_s, deltas, cache, pred, acc = run_rays(train, idx, want_cache=True, rand=rng_np)
        target = train["rgb"][idx]
        b = len(idx)
        g_pred = (cfg.loss_alpha * 2.0 / pred.size) * (pred - target)
        g_rgb_s, g_alpha_comp = composite_backward(
            rgb_s, alpha_s, bg, g_pred.astype(rgb_s.dtype), np.zeros(b, dtype=rgb_s.dtype)
        )
        _, g_op = opacity_loss_batch(alpha_s)
        g_alpha = g_alpha_comp + (cfg.loss_beta / b) * g_op.astype(rgb_s.dtype)
        x = pipe_cfg.samples
        g_out = shading_heads_backward(
            g_rgb_s.reshape(b * x, 3),
            g_alpha.reshape(b * x),
            cache["head"],
            cfg.alpha_mode,
        )
        grads_w, grads_b, _, _ = net.backward(params, mlp_cfg, cache["net"], g_out=g_out)
        net.adam_step(params, grads_w, grads_b, adam)

    return Checkpoint(
        cell=dataset.cell,
        depth_range=dataset.depth_range,
        encoding=encoding,
        pipeline=pipe_cfg,
        oracle_cfg=oracle_ckpt.oracle_cfg if use_oracle else None,
        oracle_params=oracle_ckpt.oracle_params if use_oracle else None,
        oracle_kind=oracle_ckpt.oracle_kind if use_oracle else "classified",
        oracle_unified=oracle_ckpt.oracle_unified if use_oracle else True,
        shading_cfg=mlp_cfg,
        shading_params=best_params,
        fov_deg=dataset.fov_deg,
        phase="shading",
        iteration=best_iter,
        validation_loss=best_loss,
    )
