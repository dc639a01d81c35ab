"""RGBD dataset generation and persistence.

Layout: a directory with `manifest.json` plus per-image `NNNN.rgb.f32`
(H*W*3 float32) and `NNNN.depth.f32` (H*W float32) buffers, little-endian
row-major. Depths are measured from the unified ray origin; background
pixels store +inf. Poses are sampled uniformly inside the view cell, split
train/val/test in sequence order.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CorruptFile, EmptySplit
from .geom import Pose, ViewCell, circumscribed_sphere, pixel_grid_rays, sample_pose, unify_rays
from .sampling import DepthRange
from .scenes import ScenePreset, trace_rays

MANIFEST_VERSION = 1


@dataclass
class Dataset:
    root: Path
    manifest: dict

    @property
    def resolution(self) -> tuple[int, int]:
        w, h = self.manifest["resolution"]
        return int(w), int(h)

    @property
    def fov_deg(self) -> float:
        return float(self.manifest["fov_deg"])

    @property
    def cell(self) -> ViewCell:
        return ViewCell.from_dict(self.manifest["view_cell"])

    @property
    def depth_range(self) -> DepthRange:
        return DepthRange.from_dict(self.manifest["depth_range"])

    @property
    def background(self) -> tuple[float, float, float]:
        return tuple(self.manifest["background"])

    def split_ids(self, split: str) -> list[str]:
        ids = self.manifest["splits"].get(split, [])
        if not ids:
            raise EmptySplit(f"split {split!r} has no images")
        return list(ids)

    def record(self, image_id: str) -> dict:
        for rec in self.manifest["images"]:
            if rec["id"] == image_id:
                return rec
        raise KeyError(f"image {image_id!r} not in manifest")

    def pose(self, image_id: str) -> Pose:
        return Pose.from_dict(self.record(image_id)["pose"])

    def load_rgb(self, image_id: str) -> np.ndarray:
        w, h = self.resolution
        return _read_f32(self.root / self.record(image_id)["rgb"], h * w * 3).reshape(h, w, 3)

    def load_depth(self, image_id: str) -> np.ndarray:
        w, h = self.resolution
        return _read_f32(self.root / self.record(image_id)["depth"], h * w).reshape(h, w)

    def has_depth(self) -> bool:
        return all("depth" in rec for rec in self.manifest["images"])

    def ray_bundle(self, split: str) -> dict:
        """All rays of a split stacked for batched training/evaluation.

        Returns arrays keyed: origins, dirs, unified, backoff (n, HW, 3|1)
        float64; rgb (n, HW, 3) float32; depth (n, HW) float32 with +inf for
        background; ids, poses.
        """
        ids = self.split_ids(split)
        w, h = self.resolution
        cell = self.cell
        center, radius = circumscribed_sphere(cell)
        origins = np.empty((len(ids), h * w, 3))
        dirs = np.empty_like(origins)
        unified = np.empty_like(origins)
        backoff = np.empty((len(ids), h * w))
        rgb = np.empty((len(ids), h * w, 3), dtype=np.float32)
        depth = np.empty((len(ids), h * w), dtype=np.float32)
        for i, image_id in enumerate(ids):
            pose = self.pose(image_id)
            o, d = pixel_grid_rays(cell, pose, w, h)
            u, b = unify_rays(o, d, center, radius)
            origins[i], dirs[i], unified[i], backoff[i] = o, d, u, b
            rgb[i] = self.load_rgb(image_id).reshape(-1, 3)
            depth[i] = self.load_depth(image_id).reshape(-1)
        return {
            "ids": ids,
            "poses": [self.pose(i) for i in ids],
            "origins": origins,
            "dirs": dirs,
            "unified": unified,
            "backoff": backoff,
            "rgb": rgb,
            "depth": depth,
        }


def _read_f32(path: Path, count: int) -> np.ndarray:
    data = np.fromfile(path, dtype="<f4")
    if data.size != count:
        raise CorruptFile(f"{path} holds {data.size} floats, expected {count}")
    return data


def split_counts(n: int, ratios: tuple[float, float, float]) -> tuple[int, int, int]:
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("split ratios must sum to 1")
    n_train = int(np.floor(n * ratios[0]))
    n_val = int(np.floor(n * ratios[1]))
    return n_train, n_val, n - n_train - n_val


def generate_dataset(
    preset: ScenePreset,
    out_dir: str | Path,
    n_images: int = 60,
    resolution: tuple[int, int] = (64, 64),
    fov_deg: float | None = None,
    ratios: tuple[float, float, float] = (0.7, 0.1, 0.2),
    seed: int = 0,
) -> Dataset:
    """Render n_images random in-cell poses of the scene to disk."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    w, h = resolution
    fov = preset.fov_deg if fov_deg is None else fov_deg
    cell, scene, rng_depth = preset.cell, preset.scene, preset.depth_range
    center, radius = circumscribed_sphere(cell)
    rng = np.random.default_rng(seed)
    n_train, n_val, n_test = split_counts(n_images, ratios)
    records, splits = [], {"train": [], "val": [], "test": []}
    for i in range(n_images):
        pose = sample_pose(cell, fov, rng)
        origins, dirs = pixel_grid_rays(cell, pose, w, h)
        rgb, t_cam, hit = trace_rays(origins, dirs, scene)
        _, backoff = unify_rays(origins, dirs, center, radius)
        depth = t_cam + backoff
        # content past the far plane is treated as background
        hit &= depth <= rng_depth.d_max
        rgb[~hit] = np.asarray(scene.background)
        depth = np.where(hit, depth, np.inf).astype(np.float32)
        if np.any(depth[hit] < rng_depth.d_min):
            raise ValueError("scene content closer than the declared near distance")
        image_id = f"{i:04d}"
        rgb32 = rgb.astype(np.float32)
        rgb32.astype("<f4").tofile(out / f"{image_id}.rgb.f32")
        depth.astype("<f4").tofile(out / f"{image_id}.depth.f32")
        split = "train" if i < n_train else ("val" if i < n_train + n_val else "test")
        splits[split].append(image_id)
        records.append(
            {
                "id": image_id,
                "pose": pose.to_dict(),
                "split": split,
                "rgb": f"{image_id}.rgb.f32",
                "depth": f"{image_id}.depth.f32",
            }
        )
    manifest = {
        "format_version": MANIFEST_VERSION,
        "scene": preset.name,
        "resolution": [w, h],
        "fov_deg": fov,
        "depth_range": rng_depth.to_dict(),
        "view_cell": cell.to_dict(),
        "background": list(scene.background),
        "depth_reference": "unified-origin",
        "seed": seed,
        "images": records,
        "splits": splits,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return Dataset(root=out, manifest=manifest)


def load_dataset(path: str | Path) -> Dataset:
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise CorruptFile(f"no manifest.json under {root}")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("format_version") != MANIFEST_VERSION:
        raise CorruptFile(f"unsupported dataset format {manifest.get('format_version')}")
    return Dataset(root=root, manifest=manifest)
