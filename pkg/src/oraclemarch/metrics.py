"""Quality and cost metrics plus the evaluation/ablation runners."""
from __future__ import annotations

import json
import logging
from dataclasses import replace
from pathlib import Path

import numpy as np

from .checkpoint import Checkpoint
from .dataset import Dataset
from .errors import ShapeMismatch
from .net import flop_count
from .train import OracleTrainConfig, ShadingTrainConfig, train_oracle, train_shading

log = logging.getLogger(__name__)


def psnr(img: np.ndarray, ref: np.ndarray) -> float:
    """10*log10(1/MSE) over all channels of two [0,1] images; identical
    images return +inf."""
    img = np.asarray(img, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if img.shape != ref.shape:
        raise ShapeMismatch(f"image {img.shape} vs reference {ref.shape}")
    mse = float(np.mean((img - ref) ** 2))
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(1.0 / mse)


def pipeline_flops_per_pixel(ckpt: Checkpoint, samples: int | None = None) -> int:
    """Exact per-pixel cost: one oracle evaluation plus `samples` shading
    evaluations (integer arithmetic throughout)."""
    x = ckpt.pipeline.samples if samples is None else samples
    if x < 0:
        raise ValueError("sample count must be >= 0")
    total = 0
    if ckpt.oracle_cfg is not None and ckpt.pipeline.use_oracle:
        total += flop_count(ckpt.oracle_cfg)
    if ckpt.shading_cfg is not None:
        total += x * flop_count(ckpt.shading_cfg)
    return total


def evaluate(ckpt: Checkpoint, dataset: Dataset, split: str = "test") -> dict:
    """Render every pose of a split and aggregate quality and cost.

    Poses outside the view cell are rejected (render_image validates); the
    report is JSON-serializable."""
    ids = dataset.split_ids(split)
    pipeline = ckpt.build_pipeline()
    w, h = dataset.resolution
    rng_d = dataset.depth_range
    per_image = []
    wall_ms = []
    for image_id in ids:
        pose = dataset.pose(image_id)
        gt_depth = None
        if ckpt.pipeline.mode == "local-gt" and not ckpt.pipeline.use_oracle:
            depth = dataset.load_depth(image_id)
            gt_depth = np.clip(
                np.where(np.isfinite(depth), depth, rng_d.d_max), rng_d.d_min, rng_d.d_max
            )
        img, stats = pipeline.render_image(pose, w, h, gt_depth=gt_depth)
        value = psnr(img, dataset.load_rgb(image_id))
        per_image.append({"pose_id": image_id, "psnr": value})
        wall_ms.append(stats["wall_ms"])
    mean_psnr = float(np.mean([p["psnr"] for p in per_image]))
    return {
        "config": {
            "pipeline": ckpt.pipeline.to_dict(),
            "oracle_kind": None if ckpt.oracle_cfg is None else ckpt.oracle_kind,
            "phase": ckpt.phase,
            "iteration": ckpt.iteration,
            "split": split,
        },
        "per_image": per_image,
        "mean_psnr": mean_psnr,
        "mflop_per_pixel": pipeline_flops_per_pixel(ckpt) / 1e6,
        "wall_ms_per_frame": float(np.mean(wall_ms)),
    }


def write_report(report: dict | list, path: str | Path) -> None:
    def _default(o):
        if isinstance(o, float) and np.isinf(o):
            return "inf"
        raise TypeError(f"not serializable: {o!r}")

    def _clean(obj):
        if isinstance(obj, dict):
            return {k: _clean(v) for k, v in obj.items()}
        if isinstance(obj, list):
            return [_clean(v) for v in obj]
        if isinstance(obj, float) and np.isinf(obj):
            return "inf"
        return obj

    Path(path).write_text(json.dumps(_clean(report), indent=2, sort_keys=True, default=_default))


def format_table(rows: list[dict]) -> str:
    """Human-readable summary of ablation/evaluation rows."""
    header = f"{'name':<28} {'psnr':>8} {'mflop/px':>10} {'ms/frame':>10}"
    lines = [header, "-" * len(header)]
    for row in rows:
        lines.append(
            f"{row['name']:<28} {row['mean_psnr']:>8.3f} "
            f"{row['mflop_per_pixel']:>10.4f} {row['wall_ms_per_frame']:>10.1f}"
        )
    return "\n".join(lines)


def parse_grid_spec(spec: str) -> list[dict]:
    """Ablation grid: JSON (string or file path) or the shorthand
    'mode=uniform,log;samples=4;oracle=none' whose comma lists are crossed.

    Cell keys: mode, samples, oracle (none | classified | sd | sd-unified),
    k, z, base (local-gt step base).
    """
    text = spec.strip()
    if text.endswith(".json") and Path(text).exists():
        text = Path(text).read_text().strip()
    if text.startswith("[") or text.startswith("{"):
        cells = json.loads(text)
        return cells if isinstance(cells, list) else [cells]
    axes: dict[str, list[str]] = {}
    for part in text.split(";"):
        if not part.strip():
            continue
        key, _, values = part.partition("=")
        axes[key.strip()] = [v.strip() for v in values.split(",") if v.strip()]
    cells: list[dict] = [{}]
    for key, values in axes.items():
        cells = [dict(cell, **{key: v}) for cell in cells for v in values]
    return cells


def _cell_name(cell: dict) -> str:
    if "name" in cell:
        return cell["name"]
    parts = []
    oracle = cell.get("oracle", "none")
    if oracle != "none":
        parts.append(oracle)
        if oracle == "classified":
            parts.append(f"k{cell.get('k', 5)}z{cell.get('z', 5)}")
    parts.append(str(cell.get("mode", "logwarp")))
    parts.append(f"x{cell.get('samples', 4)}")
    if cell.get("mode") == "local-gt":
        parts.append(str(cell.get("base", "uniform")))
    return "-".join(parts)


def ablation(
    dataset: Dataset,
    cells: list[dict],
    oracle_template: OracleTrainConfig,
    shading_template: ShadingTrainConfig,
    split: str = "test",
) -> list[dict]:
    """Train and evaluate one pipeline per grid cell at the template sizes."""
    rows = []
    for cell in cells:
        name = _cell_name(cell)
        oracle_kind = str(cell.get("oracle", "none"))
        samples = int(cell.get("samples", shading_template.samples))
        mode = str(cell.get("mode", shading_template.mode))
        log.info("ablation cell %s", name)
        oracle_ckpt = None
        if oracle_kind != "none":
            ocfg = replace(
                oracle_template,
                k=int(cell.get("k", oracle_template.k)),
                z=int(cell.get("z", oracle_template.z)),
                single_depth=oracle_kind in ("sd", "sd-unified"),
                unify=oracle_kind != "sd",
            )
            oracle_ckpt = train_oracle(dataset, ocfg)
        scfg = replace(
            shading_template,
            samples=samples,
            mode=mode,
            local_base=str(cell.get("base", shading_template.local_base)),
        )
        ckpt = train_shading(dataset, oracle_ckpt, scfg)
        report = evaluate(ckpt, dataset, split=split)
        rows.append({"name": name, **report})
    return rows
