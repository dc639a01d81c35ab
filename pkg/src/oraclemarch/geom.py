"""View cells, rays, ray unification, and camera pose sampling.

A view cell is the box of supported camera positions together with a forward
direction and maximum yaw/pitch. Rays are canonicalized by re-origining them
onto the sphere circumscribed around the view cell (backward along the ray),
so that all rays on the same oriented line share one description and all
scene content sits at positive depth from the canonical origin.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import OriginOutsideSphere, PixelOutOfBounds, PoseOutsideViewCell

_WORLD_UP = np.array([0.0, 1.0, 0.0])


def _as_vec3(v) -> np.ndarray:
    a = np.asarray(v, dtype=np.float64).reshape(3)
    return a


@dataclass(frozen=True)
class ViewCell:
    """Axis-aligned box of camera positions with rotation limits."""

    center: np.ndarray
    size: np.ndarray
    forward: np.ndarray
    max_pitch_deg: float = 30.0
    max_yaw_deg: float = 20.0

    def __post_init__(self):
        object.__setattr__(self, "center", _as_vec3(self.center))
        object.__setattr__(self, "size", _as_vec3(self.size))
        object.__setattr__(self, "forward", _as_vec3(self.forward))
        if not np.all(self.size > 0):
            raise ValueError(f"view cell size must be positive, got {self.size}")
        n = float(np.linalg.norm(self.forward))
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"forward must be a unit vector, |forward|={n}")
        if not (0.0 <= self.max_pitch_deg <= 90.0 and 0.0 <= self.max_yaw_deg <= 90.0):
            raise ValueError("rotation limits must lie in [0, 90] degrees")

    def contains_position(self, p) -> bool:
        p = _as_vec3(p)
        half = self.size / 2.0
        return bool(np.all(np.abs(p - self.center) <= half + 1e-12))

    def clamp_position(self, p) -> np.ndarray:
        p = _as_vec3(p)
        half = self.size / 2.0
        return np.clip(p, self.center - half, self.center + half)

    def basis(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Orthonormal (forward, right, up) frame for the cell."""
        f = self.forward
        up_hint = _WORLD_UP if abs(float(f @ _WORLD_UP)) < 0.999 else np.array([0.0, 0.0, 1.0])
        right = np.cross(up_hint, f)
        right /= np.linalg.norm(right)
        up = np.cross(f, right)
        return f, right, up

    def to_dict(self) -> dict:
        return {
            "center": self.center.tolist(),
            "size": self.size.tolist(),
            "forward": self.forward.tolist(),
            "max_pitch_deg": self.max_pitch_deg,
            "max_yaw_deg": self.max_yaw_deg,
        }

    @staticmethod
    def from_dict(d: dict) -> "ViewCell":
        return ViewCell(
            center=d["center"],
            size=d["size"],
            forward=d["forward"],
            max_pitch_deg=float(d["max_pitch_deg"]),
            max_yaw_deg=float(d["max_yaw_deg"]),
        )


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "origin", _as_vec3(self.origin))
        object.__setattr__(self, "direction", _as_vec3(self.direction))
        n = float(np.linalg.norm(self.direction))
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"ray direction must be unit length, got |d|={n}")


@dataclass(frozen=True)
class UnifiedRay:
    """A ray re-origined onto the view cell's circumscribed sphere."""

    origin: np.ndarray
    direction: np.ndarray
    sphere_center: np.ndarray
    sphere_radius: float

    def __post_init__(self):
        object.__setattr__(self, "origin", _as_vec3(self.origin))
        object.__setattr__(self, "direction", _as_vec3(self.direction))
        object.__setattr__(self, "sphere_center", _as_vec3(self.sphere_center))
        r = float(self.sphere_radius)
        err = abs(float(np.linalg.norm(self.origin - self.sphere_center)) - r)
        if err > 1e-6 * r:
            raise ValueError("unified origin does not lie on the sphere")


def circumscribed_sphere(cell: ViewCell) -> tuple[np.ndarray, float]:
    """Sphere through all eight corners of the view cell box."""
    return cell.center.copy(), float(np.linalg.norm(cell.size / 2.0))


def unify_rays(
    origins: np.ndarray, directions: np.ndarray, center: np.ndarray, radius: float
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized re-origin of rays onto the sphere, backward along each ray.

    Returns (unified_origins, backoff) where backoff[i] >= 0 is the distance
    moved against the ray direction. Raises OriginOutsideSphere if any origin
    lies outside the sphere.
    """
    o = np.atleast_2d(np.asarray(origins, dtype=np.float64))
    d = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    q = o - center
    qd = np.einsum("ij,ij->i", q, d)
    qq = np.einsum("ij,ij->i", q, q)
    disc = qd * qd + radius * radius - qq
    if np.any(qq > radius * radius * (1.0 + 1e-9)):
        raise OriginOutsideSphere("ray origin outside the unification sphere")
    t = qd + np.sqrt(np.maximum(disc, 0.0))
    return o - t[:, None] * d, t


def unify_ray(ray: Ray, sphere: tuple[np.ndarray, float]) -> UnifiedRay:
    """Canonical description of the ray's oriented line.

    The origin is moved backward (t >= 0 against the direction) to the point
    where the line enters the sphere, so coincident rays map to the same
    UnifiedRay and all visible content is at positive depth.
    """
    center, radius = sphere
    o, _ = unify_rays(ray.origin[None, :], ray.direction[None, :], center, radius)
    return UnifiedRay(
        origin=o[0], direction=ray.direction, sphere_center=center, sphere_radius=radius
    )


@dataclass(frozen=True)
class Pose:
    """Camera pose: position plus yaw/pitch relative to the cell forward."""

    position: np.ndarray
    yaw_deg: float
    pitch_deg: float
    fov_deg: float

    def __post_init__(self):
        object.__setattr__(self, "position", _as_vec3(self.position))
        if not (0.0 < self.fov_deg < 180.0):
            raise ValueError("fov must lie in (0, 180) degrees")

    def to_dict(self) -> dict:
        return {
            "position": self.position.tolist(),
            "yaw_deg": self.yaw_deg,
            "pitch_deg": self.pitch_deg,
            "fov_deg": self.fov_deg,
        }

    @staticmethod
    def from_dict(d: dict) -> "Pose":
        return Pose(
            position=d["position"],
            yaw_deg=float(d["yaw_deg"]),
            pitch_deg=float(d["pitch_deg"]),
            fov_deg=float(d["fov_deg"]),
        )


def _rotate(v: np.ndarray, axis: np.ndarray, angle_rad: float) -> np.ndarray:
    """Rodrigues rotation of v around a unit axis."""
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    return v * c + np.cross(axis, v) * s + axis * (axis @ v) * (1.0 - c)


def camera_frame(cell: ViewCell, pose: Pose) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Camera-to-world (forward, right, up) for a pose inside the cell.

    Yaw rotates around the cell's up axis (positive = toward +right), then
    pitch rotates around the yawed right axis (positive = upward).
    """
    f, right, up = cell.basis()
    yaw = np.deg2rad(pose.yaw_deg)
    pitch = np.deg2rad(pose.pitch_deg)
    f1 = _rotate(f, up, -yaw)
    r1 = _rotate(right, up, -yaw)
    f2 = _rotate(f1, r1, pitch)
    u2 = np.cross(f2, r1)
    return f2, r1, u2


def validate_pose(cell: ViewCell, pose: Pose) -> None:
    if not cell.contains_position(pose.position):
        raise PoseOutsideViewCell(f"position {pose.position.tolist()} outside view cell")
    if abs(pose.yaw_deg) > cell.max_yaw_deg + 1e-9:
        raise PoseOutsideViewCell(f"|yaw|={abs(pose.yaw_deg)} exceeds {cell.max_yaw_deg}")
    if abs(pose.pitch_deg) > cell.max_pitch_deg + 1e-9:
        raise PoseOutsideViewCell(f"|pitch|={abs(pose.pitch_deg)} exceeds {cell.max_pitch_deg}")


def clamp_pose(cell: ViewCell, pose: Pose) -> tuple[Pose, bool]:
    """Clamp a pose into the cell's position box and rotation limits."""
    pos = cell.clamp_position(pose.position)
    yaw = float(np.clip(pose.yaw_deg, -cell.max_yaw_deg, cell.max_yaw_deg))
    pitch = float(np.clip(pose.pitch_deg, -cell.max_pitch_deg, cell.max_pitch_deg))
    clamped = bool(
        np.any(np.abs(pos - pose.position) > 1e-12)
        or yaw != pose.yaw_deg
        or pitch != pose.pitch_deg
    )
    return Pose(position=pos, yaw_deg=yaw, pitch_deg=pitch, fov_deg=pose.fov_deg), clamped


def sample_pose(cell: ViewCell, fov_deg: float, rng: np.random.Generator) -> Pose:
    """Uniform random pose: position in the box, yaw/pitch in their limits."""
    u = rng.uniform(-0.5, 0.5, size=3)
    pos = cell.center + u * cell.size
    yaw = rng.uniform(-cell.max_yaw_deg, cell.max_yaw_deg)
    pitch = rng.uniform(-cell.max_pitch_deg, cell.max_pitch_deg)
    return Pose(position=pos, yaw_deg=float(yaw), pitch_deg=float(pitch), fov_deg=fov_deg)


def pixel_grid_rays(
    cell: ViewCell, pose: Pose, width: int, height: int
) -> tuple[np.ndarray, np.ndarray]:
    """Rays through all pixel centers of a pinhole camera.

    Returns (origins, directions), each (height*width, 3), row-major with the
    top-left pixel first. Vertical fov, square pixels.
    """
    f, right, up = camera_frame(cell, pose)
    half_h = np.tan(np.deg2rad(pose.fov_deg) / 2.0)
    half_w = half_h * (width / height)
    px = (np.arange(width) + 0.5) / width * 2.0 - 1.0
    py = 1.0 - (np.arange(height) + 0.5) / height * 2.0
    u, v = np.meshgrid(px, py)
    dirs = (
        f[None, None, :]
        + u[..., None] * half_w * right[None, None, :]
        + v[..., None] * half_h * up[None, None, :]
    ).reshape(-1, 3)
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    origins = np.broadcast_to(pose.position, dirs.shape).copy()
    return origins, dirs


def pixel_ray(cell: ViewCell, pose: Pose, px: int, py: int, width: int, height: int) -> Ray:
    """Ray through the center of pixel (px, py); py counts down from the top."""
    if not (0 <= px < width and 0 <= py < height):
        raise PixelOutOfBounds(f"pixel ({px},{py}) outside {width}x{height}")
    f, right, up = camera_frame(cell, pose)
    half_h = np.tan(np.deg2rad(pose.fov_deg) / 2.0)
    half_w = half_h * (width / height)
    u = (px + 0.5) / width * 2.0 - 1.0
    v = 1.0 - (py + 0.5) / height * 2.0
    d = f + u * half_w * right + v * half_h * up
    return Ray(origin=pose.position, direction=d / np.linalg.norm(d))
