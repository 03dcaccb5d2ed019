"""Pinhole camera, rigid transforms and planar robot state.

Conventions used throughout the package:

* camera frame: +z forward, +x right, +y down
* world frame: z up, gravity along -z
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class NonPositiveDepth(ValueError):
    pass


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    @classmethod
    def from_hfov(cls, width: int, height: int, hfov: float) -> "CameraIntrinsics":
        f = (width / 2.0) / math.tan(hfov / 2.0)
        return cls(f, f, (width - 1) / 2.0, (height - 1) / 2.0, width, height)

    def pixel_rays(self, stride: int = 1) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Pixel grid (u, v) on the stride lattice and camera-frame rays with unit z."""
        us = np.arange(0, self.width, stride, dtype=float)
        vs = np.arange(0, self.height, stride, dtype=float)
        u, v = np.meshgrid(us, vs)
        rays = np.stack([(u - self.cx) / self.fx, (v - self.cy) / self.fy, np.ones_like(u)], axis=-1)
        return u, v, rays


@dataclass(frozen=True)
class Pose3:
    """Rigid transform mapping body-frame points into the world frame."""

    rotation: np.ndarray = field(default_factory=lambda: _frozen(np.eye(3)))
    translation: np.ndarray = field(default_factory=lambda: _frozen(np.zeros(3)))

    def __post_init__(self):
        r = _frozen(self.rotation)
        t = _frozen(self.translation)
        if r.shape != (3, 3) or t.shape != (3,):
            raise ValueError("rotation must be 3x3 and translation a 3-vector")
        if np.max(np.abs(r @ r.T - np.eye(3))) > 1e-9 or abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise ValueError("rotation is not orthonormal")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "Pose3":
        return cls()

    @classmethod
    def camera(cls, position, yaw: float, pitch: float = 0.0) -> "Pose3":
        """Camera looking along heading ``yaw`` (world), tilted down by ``pitch``."""
        cy, sy = math.cos(yaw), math.sin(yaw)
        cp, sp = math.cos(pitch), math.sin(pitch)
        forward = np.array([cy * cp, sy * cp, -sp])
        right = np.array([sy, -cy, 0.0])
        down = np.cross(forward, right)
        return cls(np.column_stack([right, down, forward]), position)

    @classmethod
    def body(cls, position, yaw: float) -> "Pose3":
        """z-up body frame (x forward, y left) rotated by ``yaw`` about world z."""
        c, s = math.cos(yaw), math.sin(yaw)
        return cls(np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]), position)

    def compose(self, other: "Pose3") -> "Pose3":
        return Pose3(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    def inverse(self) -> "Pose3":
        rt = self.rotation.T
        return Pose3(rt, -rt @ self.translation)

    def apply(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation

    def apply_inverse(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return (p - self.translation) @ self.rotation


def project(point, pose: Pose3, k: CameraIntrinsics):
    """World point to ``(u, v, z)``; ``None`` when behind the camera or off-image."""
    pc = pose.apply_inverse(point)
    z = float(pc[2])
    if z <= 0.0:
        return None
    u = k.fx * pc[0] / z + k.cx
    v = k.fy * pc[1] / z + k.cy
    if not (-0.5 <= u < k.width - 0.5 and -0.5 <= v < k.height - 0.5):
        return None
    return float(u), float(v), z


def backproject(u: float, v: float, z: float, pose: Pose3, k: CameraIntrinsics) -> np.ndarray:
    if not z > 0.0:
        raise NonPositiveDepth(f"depth must be positive, got {z}")
    pc = np.array([z * (u - k.cx) / k.fx, z * (v - k.cy) / k.fy, z])
    return pose.apply(pc)


def backproject_many(u, v, z, pose: Pose3, k: CameraIntrinsics) -> np.ndarray:
    """Vectorised :func:`backproject`; caller guarantees ``z > 0``."""
    z = np.asarray(z, dtype=float)
    pc = np.stack([z * (np.asarray(u) - k.cx) / k.fx, z * (np.asarray(v) - k.cy) / k.fy, z], axis=-1)
    return pose.apply(pc)


def as_cloud(points) -> np.ndarray:
    """Validate an ``(N, 3)`` point array."""
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    if not np.all(np.isfinite(p)):
        raise ValueError("point cloud contains non-finite coordinates")
    return p


@dataclass(frozen=True)
class RobotState:
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0
    v: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])


# planar pose without velocities
Pose2 = RobotState
