"""Analytic test scenes: spheres, boxes, and planes with Lambertian shading.

These generate the ground-truth RGBD images the networks train on. Shading
is purely local (no shadows): albedo * (max(0, n.l) + ambient), clamped to
[0, 1], with an optional 3D checker pattern on the albedo.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geom import ViewCell
from .sampling import DepthRange

_EPS = 1e-6


@dataclass(frozen=True)
class Material:
    albedo: tuple[float, float, float]
    checker_scale: float | None = None
    albedo2: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def shade_albedo(self, points: np.ndarray) -> np.ndarray:
        a = np.broadcast_to(np.asarray(self.albedo), points.shape).copy()
        if self.checker_scale is not None:
            parity = np.floor(points / self.checker_scale).sum(axis=-1).astype(np.int64) % 2
            a[parity == 1] = np.asarray(self.albedo2)
        return a


@dataclass(frozen=True)
class Sphere:
    center: tuple[float, float, float]
    radius: float
    material: Material

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("sphere radius must be positive")

    def intersect(self, o: np.ndarray, d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.center)
        oc = o - c
        b = np.einsum("ij,ij->i", oc, d)
        disc = b * b - (np.einsum("ij,ij->i", oc, oc) - self.radius**2)
        ok = disc >= 0.0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        t_near = -b - sq
        t_far = -b + sq
        t = np.where(t_near > _EPS, t_near, t_far)
        ok &= t > _EPS
        t = np.where(ok, t, np.inf)
        t_safe = np.where(ok, t, 0.0)
        n = (o + t_safe[:, None] * d - c) / self.radius
        return t, n


@dataclass(frozen=True)
class Box:
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]
    material: Material

    def __post_init__(self):
        if not np.all(np.asarray(self.hi) > np.asarray(self.lo)):
            raise ValueError("box must have positive extent")

    def intersect(self, o: np.ndarray, d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / d
            t1 = (lo - o) * inv
            t2 = (hi - o) * inv
        # parallel rays: +/-inf slabs resolve correctly through min/max
        t1 = np.where(np.isnan(t1), -np.inf, t1)
        t2 = np.where(np.isnan(t2), np.inf, t2)
        tn = np.maximum.reduce(np.minimum(t1, t2), axis=1)
        tf = np.minimum.reduce(np.maximum(t1, t2), axis=1)
        ok = (tn <= tf) & (tf > _EPS)
        t = np.where(tn > _EPS, tn, tf)
        ok &= t > _EPS
        t = np.where(ok, t, np.inf)
        p = o + np.where(ok, t, 0.0)[:, None] * d
        q = (p - (lo + hi) / 2.0) / ((hi - lo) / 2.0)
        axis = np.argmax(np.abs(q), axis=1)
        n = np.zeros_like(p)
        rows = np.arange(len(p))
        n[rows, axis] = np.sign(q[rows, axis])
        return t, n


@dataclass(frozen=True)
class Plane:
    point: tuple[float, float, float]
    normal: tuple[float, float, float]
    material: Material

    def __post_init__(self):
        n = float(np.linalg.norm(np.asarray(self.normal)))
        if abs(n - 1.0) > 1e-9:
            raise ValueError("plane normal must be a unit vector")

    def intersect(self, o: np.ndarray, d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n = np.asarray(self.normal)
        denom = d @ n
        with np.errstate(divide="ignore", invalid="ignore"):
            t = ((np.asarray(self.point) - o) @ n) / denom
        ok = (np.abs(denom) > 1e-12) & (t > _EPS)
        t = np.where(ok, t, np.inf)
        facing = np.where(denom[:, None] < 0.0, 1.0, -1.0)
        return t, np.broadcast_to(n, o.shape) * facing


@dataclass(frozen=True)
class SceneDef:
    primitives: tuple
    light_dir: tuple[float, float, float]
    ambient: float
    background: tuple[float, float, float]

    def __post_init__(self):
        n = float(np.linalg.norm(np.asarray(self.light_dir)))
        if abs(n - 1.0) > 1e-9:
            raise ValueError("light direction must be a unit vector")


def trace_rays(
    origins: np.ndarray, dirs: np.ndarray, scene: SceneDef
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nearest-hit trace of a ray batch.

    Returns (rgb, t, hit) where t is the camera-origin distance of the first
    surface (inf on miss) and missed rays get the background color.
    """
    o = np.atleast_2d(np.asarray(origins, dtype=np.float64))
    d = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
    best_t = np.full(len(o), np.inf)
    best_n = np.zeros_like(o)
    best_idx = np.full(len(o), -1)
    for i, prim in enumerate(scene.primitives):
        t, n = prim.intersect(o, d)
        closer = t < best_t
        best_t = np.where(closer, t, best_t)
        best_n[closer] = n[closer]
        best_idx[closer] = i
    hit = best_idx >= 0
    rgb = np.broadcast_to(np.asarray(scene.background), o.shape).copy()
    light = np.asarray(scene.light_dir)
    lam = np.maximum(best_n @ light, 0.0)
    points = o + np.where(hit, best_t, 0.0)[:, None] * d
    for i, prim in enumerate(scene.primitives):
        sel = best_idx == i
        if not np.any(sel):
            continue
        albedo = prim.material.shade_albedo(points[sel])
        rgb[sel] = albedo * (lam[sel, None] + scene.ambient)
    return np.clip(rgb, 0.0, 1.0), best_t, hit


@dataclass(frozen=True)
class ScenePreset:
    name: str
    scene: SceneDef
    cell: ViewCell
    depth_range: DepthRange
    fov_deg: float


def _norm(v) -> tuple[float, float, float]:
    a = np.asarray(v, dtype=np.float64)
    return tuple(a / np.linalg.norm(a))


def sphere_room() -> ScenePreset:
    """Small depth range: spheres, a crate, and thin pillars in front of a
    checkered wall. The thin structures produce the depth discontinuities
    that make sample placement hard."""
    pillar = Material((0.9, 0.88, 0.8))
    scene = SceneDef(
        primitives=(
            Box((-7.0, -1.45, -2.0), (7.0, -1.2, 9.0),
                Material((0.62, 0.6, 0.58), checker_scale=3.0, albedo2=(0.4, 0.39, 0.38))),
            Box((-6.0, -1.2, 8.0), (6.0, 3.0, 8.25),
                Material((0.55, 0.62, 0.8), checker_scale=1.0, albedo2=(0.85, 0.87, 0.9))),
            Sphere((-0.9, -0.15, 4.0), 1.05, Material((0.8, 0.16, 0.12))),
            Sphere((1.3, 0.3, 5.5), 0.8, Material((0.85, 0.66, 0.2))),
            Box((0.2, -1.2, 2.6), (1.15, -0.35, 3.55), Material((0.18, 0.6, 0.25))),
            Box((-2.35, -1.2, 5.4), (-2.15, 4.6, 5.6), pillar),
            Box((-0.1, -1.2, 6.6), (0.08, 5.2, 6.78), pillar),
            Box((1.1, -1.2, 5.0), (1.28, 4.2, 5.18), pillar),
            Box((2.2, -1.2, 6.0), (2.38, 4.8, 6.18), pillar),
            Box((-2.4, 1.0, 6.4), (2.4, 1.18, 6.58), Material((0.75, 0.5, 0.3))),
            Box((-2.4, 2.6, 5.9), (2.4, 2.78, 6.08), Material((0.45, 0.3, 0.55))),
        ),
        light_dir=_norm((0.35, 0.75, -0.45)),
        ambient=0.18,
        background=(0.04, 0.05, 0.08),
    )
    cell = ViewCell(
        center=(0.0, 0.0, 0.0), size=(1.2, 0.8, 1.2), forward=(0.0, 0.0, 1.0),
        max_pitch_deg=30.0, max_yaw_deg=20.0,
    )
    return ScenePreset("sphere-room", scene, cell, DepthRange(0.0, 15.0), fov_deg=55.0)


def corridor() -> ScenePreset:
    """Long closed corridor: depth ratio far/near of several hundred."""
    scene = SceneDef(
        primitives=(
            Box((-1.75, -1.75, -3.0), (-1.5, 1.75, 100.0),
                Material((0.75, 0.45, 0.3), checker_scale=2.0, albedo2=(0.45, 0.2, 0.15))),
            Box((1.5, -1.75, -3.0), (1.75, 1.75, 100.0),
                Material((0.3, 0.45, 0.75), checker_scale=2.0, albedo2=(0.15, 0.2, 0.45))),
            Box((-1.75, -1.75, -3.0), (1.75, -1.5, 100.0),
                Material((0.6, 0.6, 0.6), checker_scale=2.0, albedo2=(0.3, 0.3, 0.3))),
            Box((-1.75, 1.5, -3.0), (1.75, 1.75, 100.0),
                Material((0.5, 0.5, 0.45), checker_scale=2.0, albedo2=(0.35, 0.35, 0.3))),
            Box((-1.75, -1.75, 100.0), (1.75, 1.75, 100.25),
                Material((0.9, 0.85, 0.3), checker_scale=0.5, albedo2=(0.2, 0.18, 0.1))),
            Box((-1.75, -1.75, -3.25), (1.75, 1.75, -3.0), Material((0.2, 0.2, 0.2))),
        ),
        light_dir=_norm((0.35, 0.85, -0.4)),
        ambient=0.25,
        background=(0.0, 0.0, 0.0),
    )
    cell = ViewCell(
        center=(0.0, 0.0, 0.0), size=(1.0, 1.0, 1.0), forward=(0.0, 0.0, 1.0),
        max_pitch_deg=30.0, max_yaw_deg=20.0,
    )
    return ScenePreset("corridor", scene, cell, DepthRange(0.5, 105.0), fov_deg=60.0)


PRESETS = {"sphere-room": sphere_room, "corridor": corridor}


def get_preset(name: str) -> ScenePreset:
    if name not in PRESETS:
        raise KeyError(f"unknown scene preset {name!r}; available: {sorted(PRESETS)}")
    return PRESETS[name]()
