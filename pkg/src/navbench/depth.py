"""Metric rescaling of relative disparity maps with sparse depth anchors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .geometry import CameraIntrinsics, Pose3, backproject_many


class TooFewAnchors(ValueError):
    pass


class DegenerateAnchors(ValueError):
    pass


class AlphaOutOfRange(ValueError):
    pass


class EmptyOutput(RuntimeError):
    """No pixel survived metricization; the frame should be skipped."""


@dataclass(frozen=True)
class DisparityImage:
    values: np.ndarray
    valid: np.ndarray

    @classmethod
    def from_values(cls, values) -> "DisparityImage":
        values = np.asarray(values, dtype=float)
        return cls(values, np.isfinite(values))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class SparseAnchors:
    u: np.ndarray
    v: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        for name in ("u", "v", "z"):
            object.__setattr__(self, name, np.asarray(getattr(self, name)))
        if np.any(self.z <= 0):
            raise ValueError("anchor depths must be positive")

    def __len__(self) -> int:
        return len(self.z)


@dataclass(frozen=True)
class ScaleShift:
    s: float
    b: float

    def as_array(self) -> np.ndarray:
        return np.array([self.s, self.b])


def _normal_equations(d: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    n = len(d)
    sd, sy = d.sum(), y.sum()
    sdd, sdy = (d * d).sum(), (d * y).sum()
    det = n * sdd - sd * sd
    s = (n * sdy - sd * sy) / det
    b = (sdd * sy - sd * sdy) / det
    return float(s), float(b)


def fit_scale_shift(disp: DisparityImage, anchors: SparseAnchors, robust: bool = True) -> ScaleShift:
    """Least-squares ``s * d + b = 1 / z`` over the anchors.

    With ``robust`` one MAD rejection pass (3 x MAD) is applied before the
    final fit.
    """
    u = np.asarray(anchors.u, dtype=int)
    v = np.asarray(anchors.v, dtype=int)
    keep = disp.valid[v, u]
    d = disp.values[v, u][keep]
    y = 1.0 / np.asarray(anchors.z, dtype=float)[keep]
    if len(d) < 2:
        raise TooFewAnchors(f"need at least 2 usable anchors, got {len(d)}")
    if np.var(d) < 1e-12:
        raise DegenerateAnchors("anchor disparities have (near) zero variance")
    s, b = _normal_equations(d, y)
    if robust:
        r = s * d + b - y
        dev = np.abs(r - np.median(r))
        mad = np.median(dev)
        if mad > 1e-12 * max(1.0, float(np.abs(y).max())):
            inl = dev <= 3.0 * mad
            if inl.sum() >= 2 and np.var(d[inl]) >= 1e-12:
                s, b = _normal_equations(d[inl], y[inl])
    return ScaleShift(s, b)


def smooth_scale_shift(prev: ScaleShift, new: ScaleShift, alpha: float) -> ScaleShift:
    """Exponential moving average of the scale/shift vector."""
    if not 0.0 <= alpha <= 1.0:
        raise AlphaOutOfRange(f"alpha must be in [0, 1], got {alpha}")
    if alpha == 0.0:
        return new
    if alpha == 1.0:
        return prev
    return ScaleShift(alpha * prev.s + (1.0 - alpha) * new.s, alpha * prev.b + (1.0 - alpha) * new.b)


class ScaleSmoother:
    """Holds the smoothed estimate between frames; the first estimate is taken as-is."""

    def __init__(self, alpha: float):
        if not 0.0 <= alpha <= 1.0:
            raise AlphaOutOfRange(f"alpha must be in [0, 1], got {alpha}")
        self.alpha = alpha
        self.state: ScaleShift | None = None

    def update(self, estimate: ScaleShift) -> ScaleShift:
        if self.state is None:
            self.state = estimate
        else:
            self.state = smooth_scale_shift(self.state, estimate, self.alpha)
        return self.state


_SOBEL = np.array([1.0, 2.0, 1.0]) / 8.0


def sobel_magnitude(values: np.ndarray) -> np.ndarray:
    """Per-pixel gradient magnitude from normalised 3x3 Sobel kernels (replicated border)."""
    gx = ndimage.correlate1d(values, [-1.0, 0.0, 1.0], axis=1, mode="nearest")
    gx = ndimage.correlate1d(gx, _SOBEL, axis=0, mode="nearest")
    gy = ndimage.correlate1d(values, [-1.0, 0.0, 1.0], axis=0, mode="nearest")
    gy = ndimage.correlate1d(gy, _SOBEL, axis=1, mode="nearest")
    return np.hypot(gx, gy)


def edge_mask(disp: DisparityImage, grad_threshold: float = 0.05, radius: int = 5) -> np.ndarray:
    """Boolean mask (True = excluded) of pixels near disparity discontinuities.

    A pixel is an edge when its Sobel magnitude exceeds ``grad_threshold``
    times the disparity range; edges are dilated by Chebyshev ``radius``.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    vals = np.where(disp.valid, disp.values, 0.0)
    if not np.any(disp.valid) or not np.isfinite(grad_threshold):
        return np.zeros(vals.shape, dtype=bool)
    rng = float(vals[disp.valid].max() - vals[disp.valid].min())
    if rng <= 0.0:
        return np.zeros(vals.shape, dtype=bool)
    edges = sobel_magnitude(vals) > grad_threshold * rng
    if radius == 0 or not edges.any():
        return edges
    return ndimage.maximum_filter(edges, size=2 * radius + 1, mode="constant", cval=False)


def metricize(
    disp: DisparityImage,
    ss: ScaleShift,
    mask: np.ndarray | None,
    stride: int,
    pose: Pose3,
    k: CameraIntrinsics,
    eps_disp: float = 1e-6,
    max_range: float = 30.0,
) -> np.ndarray:
    """Back-project the rescaled disparity on the stride lattice to a world-frame cloud."""
    if not (np.isfinite(ss.s) and np.isfinite(ss.b)):
        raise ValueError("scale/shift must be finite")
    sub = (slice(0, None, stride), slice(0, None, stride))
    d = disp.values[sub]
    ok = disp.valid[sub].copy()
    if mask is not None:
        ok &= ~mask[sub]
    metric = ss.s * np.where(ok, d, 0.0) + ss.b
    ok &= metric > eps_disp
    z = np.full(d.shape, np.inf)
    np.divide(1.0, metric, out=z, where=ok)
    ok &= np.isfinite(z) & (z <= max_range)
    if not ok.any():
        raise EmptyOutput("every pixel was masked, invalid or out of range")
    vv, uu = np.nonzero(ok)
    return backproject_many(uu * stride, vv * stride, z[ok], pose, k)
