"""Virtual LiDAR, depth camera and a monocular depth-network surrogate."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .. import kernels
from ..depth import DisparityImage, SparseAnchors, sobel_magnitude
from ..geometry import CameraIntrinsics, Pose3
from .world import World


class TooFewValidPixels(ValueError):
    pass


def _visible(circles, origin, reach, view):
    """Primitives whose bounding circle can be hit within ``reach`` (and the view cone)."""
    dx, dy = circles[:, 0] - origin[0], circles[:, 1] - origin[1]
    dist = np.hypot(dx, dy)
    keep = dist - circles[:, 2] <= reach
    if view is not None:
        heading, half = view
        off = np.abs(np.angle(np.exp(1j * (np.arctan2(dy, dx) - heading))))
        margin = np.arcsin(np.clip(circles[:, 2] / np.maximum(dist, 1e-9), 0.0, 1.0))
        keep &= (dist <= circles[:, 2]) | (off <= half + margin)
    return keep


def cast(world: World, origin, dirs, t_max: float = np.inf, view=None) -> tuple[np.ndarray, np.ndarray]:
    """Nearest hit distances (in units of ``dirs``) and primitive ids.

    Primitives out of reach of every ray are culled first; ``view`` is an
    optional ``(heading, half_angle)`` planar cone containing all rays.
    """
    a = world.ray_arrays
    origin = np.asarray(origin, dtype=float)
    dirs = np.ascontiguousarray(dirs, dtype=float)
    nb, nc, ns = len(a["boxes"]), len(a["cyls"]), len(a["spheres"])
    if len(a["circles"]) and np.isfinite(t_max):
        reach = float(t_max) * float(np.max(np.hypot(dirs[:, 0], dirs[:, 1]))) if len(dirs) else 0.0
        keep = _visible(a["circles"], origin, reach, view)
    else:
        keep = np.ones(len(a["circles"]), dtype=bool)
    kb, kc, ks, kg = np.split(keep, [nb, nb + nc, nb + nc + ns])
    gi = np.flatnonzero(kg)
    idx = a["prism_index"][gi]
    planes = np.concatenate([a["planes"][s:s + n] for s, n in idx]) if len(idx) else a["planes"][:0]
    new_index = np.column_stack([np.concatenate([[0], np.cumsum(idx[:, 1])[:-1]]), idx[:, 1]]) if len(idx) \
        else a["prism_index"][:0]
    t, pid = kernels.cast_rays(origin, dirs, float(t_max), a["boxes"][kb], a["cyls"][kc], a["spheres"][ks], planes,
                               new_index, a["prism_z"][gi], a["hf"], a["hf_x0"], a["hf_y0"], a["hf_res"])
    lut = np.concatenate([[-1, 0], 1 + np.flatnonzero(keep)]).astype(np.int32)
    return t, lut[np.asarray(pid) + 1]


@dataclass(frozen=True)
class LidarSpec:
    channels: int = 32
    azimuth_steps: int = 360
    vertical_fov: tuple[float, float] = (-0.5, 0.25)
    max_range: float = 20.0
    noise_sigma: float = 0.01

    def __post_init__(self):
        if self.channels < 1 or self.azimuth_steps < 1:
            raise ValueError("channels and azimuth_steps must be >= 1")
        if self.max_range <= 0 or self.noise_sigma < 0:
            raise ValueError("max_range must be positive and noise_sigma non-negative")
        lo, hi = self.vertical_fov
        if hi < lo:
            raise ValueError("vertical_fov must be (lower, upper)")

    def directions(self) -> np.ndarray:
        """Unit beam directions in the sensor frame (x forward, z up), channel-major."""
        lo, hi = self.vertical_fov
        el = np.array([0.5 * (lo + hi)]) if self.channels == 1 else np.linspace(lo, hi, self.channels)
        az = np.arange(self.azimuth_steps) * (2.0 * math.pi / self.azimuth_steps)
        e, a = np.meshgrid(el, az, indexing="ij")
        return np.stack([np.cos(e) * np.cos(a), np.cos(e) * np.sin(a), np.sin(e)], axis=-1).reshape(-1, 3)


def raycast_lidar(world: World, pose: Pose3, spec: LidarSpec, seed) -> np.ndarray:
    """World-frame returns of one sweep; rays without a hit inside ``max_range`` are dropped."""
    dirs = spec.directions() @ pose.rotation.T
    t, _ = cast(world, pose.translation, dirs, spec.max_range)
    hit = np.isfinite(t)
    t = t[hit]
    if spec.noise_sigma > 0:
        rng = np.random.default_rng(seed)
        t = t + rng.normal(0.0, spec.noise_sigma, size=t.shape)
    return pose.translation + dirs[hit] * t[:, None]


@dataclass(frozen=True)
class DepthImage:
    """Per-pixel optical-axis depth (``inf`` where nothing is hit) and primitive ids."""

    depth: np.ndarray
    ids: np.ndarray

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.depth)


def render_depth(world: World, pose: Pose3, k: CameraIntrinsics, max_depth: float = 60.0) -> DepthImage:
    """Optical-axis depth per pixel; surfaces beyond ``max_depth`` read as sky."""
    _, _, rays = k.pixel_rays(1)
    dirs = rays.reshape(-1, 3) @ pose.rotation.T
    fwd = pose.rotation[:, 2]
    hx = float(np.max(np.abs(np.arctan2(dirs[:, 0] * -fwd[1] + dirs[:, 1] * fwd[0],
                                        dirs[:, 0] * fwd[0] + dirs[:, 1] * fwd[1]))))
    view = (math.atan2(fwd[1], fwd[0]), hx) if hx < math.pi / 2 else None
    t, pid = cast(world, pose.translation, dirs, max_depth, view)
    return DepthImage(t.reshape(k.height, k.width), pid.reshape(k.height, k.width))


@dataclass(frozen=True)
class DepthArtifacts:
    affine_drift: bool = True
    border_blur_sigma: float = 1.5
    grass_blur_multiplier: float = 3.0
    noise_sigma: float = 0.002

    def __post_init__(self):
        if self.border_blur_sigma < 0 or self.noise_sigma < 0 or self.grass_blur_multiplier < 0:
            raise ValueError("artifact parameters must be non-negative")

    @classmethod
    def none(cls) -> "DepthArtifacts":
        return cls(True, 0.0, 1.0, 0.0)


def grass_region(gt: DepthImage, world: World, k: CameraIntrinsics) -> np.ndarray:
    """Grass silhouette pixels grown by the patches' soft edge."""
    sil = gt.ids >= world.grass_id_start
    if not sil.any() or not world.grass:
        return sil
    edge = max(g.soft_edge for g in world.grass)
    z = float(np.median(gt.depth[sil]))
    px = int(round(k.fx * edge / max(z, 1e-3)))
    if px <= 0:
        return sil
    return ndimage.maximum_filter(sil, size=2 * px + 1)


def synthesize_relative_depth(gt: DepthImage, world: World, k: CameraIntrinsics,
                              art: DepthArtifacts, seed, return_affine: bool = False):
    """Relative disparity normalised to [0, 1].

    Sky pixels carry zero true disparity. With ``return_affine`` the hidden
    per-frame ``(s, b)`` is returned alongside the image.
    """
    if not gt.valid.any():
        raise TooFewValidPixels("ground-truth depth has no valid pixel")
    rng = np.random.default_rng(seed)
    d = np.where(gt.valid, 1.0 / np.where(gt.valid, gt.depth, 1.0), 0.0)
    if art.affine_drift:
        s, b = float(rng.uniform(0.5, 2.0)), float(rng.uniform(-0.1, 0.1))
    else:
        s, b = 1.0, 0.0
    x = s * d + b
    if art.border_blur_sigma > 0:
        out = ndimage.gaussian_filter(x, art.border_blur_sigma, mode="nearest")
        if art.grass_blur_multiplier != 1.0:
            region = grass_region(gt, world, k)
            if region.any():
                heavy = ndimage.gaussian_filter(x, art.border_blur_sigma * art.grass_blur_multiplier, mode="nearest")
                out = np.where(region, heavy, out)
        x = out
    if art.noise_sigma > 0:
        x = x + rng.normal(0.0, art.noise_sigma, size=x.shape)
    lo, hi = float(x.min()), float(x.max())
    span = hi - lo if hi > lo else 1.0
    x = np.clip((x - lo) / span, 0.0, 1.0)
    img = DisparityImage(x, np.ones(x.shape, dtype=bool))
    return (img, (s, b)) if return_affine else img


@dataclass(frozen=True)
class AnchorModel:
    k: int = 100
    pixel_gradient_percentile: float = 50.0
    depth_noise_sigma: float = 0.01
    glitch_prob: float = 0.05
    glitch_scale: float = 1.5
    max_depth: float = 30.0

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("k must be >= 2")
        if not 0.0 <= self.glitch_prob <= 1.0:
            raise ValueError("glitch_prob must lie in [0, 1]")
        if not 0.0 <= self.pixel_gradient_percentile < 100.0:
            raise ValueError("pixel_gradient_percentile must lie in [0, 100)")


def sample_anchors(gt: DepthImage, disp: DisparityImage, model: AnchorModel, seed) -> SparseAnchors:
    """Sparse metric depths at high-gradient pixels, the stand-in for tracked features."""
    valid = gt.valid & disp.valid & (gt.depth <= model.max_depth)
    n_valid = int(valid.sum())
    if n_valid < model.k:
        raise TooFewValidPixels(f"{n_valid} valid pixels, need {model.k}")
    rng = np.random.default_rng(seed)
    grad = sobel_magnitude(disp.values)
    cut = np.percentile(grad[valid], model.pixel_gradient_percentile)
    cand = np.flatnonzero(valid & (grad >= cut))
    if len(cand) < model.k:
        cand = np.flatnonzero(valid)
    pick = np.sort(rng.choice(cand, size=model.k, replace=False))
    v, u = np.unravel_index(pick, gt.depth.shape)
    z = gt.depth.reshape(-1)[pick]
    if model.depth_noise_sigma > 0:
        z = z * (1.0 + rng.normal(0.0, model.depth_noise_sigma, size=z.shape))
    if rng.random() < model.glitch_prob:
        z = z * model.glitch_scale
    return SparseAnchors(u.astype(float), v.astype(float), np.maximum(z, 1e-3))
