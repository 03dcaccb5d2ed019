"""Cloth Simulation Filter ground segmentation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels


class EmptyCloud(ValueError):
    pass


@dataclass(frozen=True)
class ClothParams:
    cell_size: float = 0.5
    rigidness: int = 2
    class_threshold: float = 0.15
    max_iterations: int = 500
    convergence_eps: float = 1e-3
    drop_fraction: float = 0.1

    def __post_init__(self):
        if self.cell_size <= 0 or self.class_threshold <= 0:
            raise ValueError("cell_size and class_threshold must be positive")
        if self.rigidness not in (1, 2, 3):
            raise ValueError("rigidness must be 1, 2 or 3")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    @property
    def gravity_displacement(self) -> float:
        return self.drop_fraction * self.cell_size


@dataclass(frozen=True)
class ClothSurface:
    """Cloth heights (original, un-inverted frame) on a lattice; node (i, j) at
    ``(x0 + j * cell, y0 + i * cell)``."""

    heights: np.ndarray
    pinned: np.ndarray
    x0: float
    y0: float
    cell_size: float
    iterations: int = 0

    def height_at(self, x, y) -> np.ndarray:
        """Bilinear cloth height; coordinates outside the lattice are clamped."""
        ny, nx = self.heights.shape
        fx = np.clip((np.asarray(x, dtype=float) - self.x0) / self.cell_size, 0.0, nx - 1.0)
        fy = np.clip((np.asarray(y, dtype=float) - self.y0) / self.cell_size, 0.0, ny - 1.0)
        j = np.minimum(fx.astype(np.int64), nx - 2)
        i = np.minimum(fy.astype(np.int64), ny - 2)
        ax, ay = fx - j, fy - i
        h = self.heights
        return ((h[i, j] * (1 - ax) + h[i, j + 1] * ax) * (1 - ay)
                + (h[i + 1, j] * (1 - ax) + h[i + 1, j + 1] * ax) * ay)


@dataclass(frozen=True)
class GroundSegmentation:
    ground: np.ndarray
    obstacles: np.ndarray
    heights: np.ndarray

    def __len__(self) -> int:
        return len(self.ground) + len(self.obstacles)


def _lattice(cloud: np.ndarray, cell: float):
    x0 = np.floor(cloud[:, 0].min() / cell) * cell - cell
    y0 = np.floor(cloud[:, 1].min() / cell) * cell - cell
    nx = int(np.ceil((cloud[:, 0].max() - x0) / cell)) + 2
    ny = int(np.ceil((cloud[:, 1].max() - y0) / cell)) + 2
    return x0, y0, max(nx, 2), max(ny, 2)


def simulate_cloth(cloud, params: ClothParams = ClothParams()) -> ClothSurface:
    """Drop a cloth onto the inverted cloud and relax it.

    Each lattice node collides with the highest inverted point (the lowest
    original point) among points nearest to it; nodes without points are
    unconstrained.
    """
    cloud = np.asarray(cloud, dtype=float).reshape(-1, 3)
    if len(cloud) == 0:
        raise EmptyCloud("cannot simulate a cloth over an empty cloud")
    cell = params.cell_size
    x0, y0, nx, ny = _lattice(cloud, cell)
    j = np.rint((cloud[:, 0] - x0) / cell).astype(np.int64)
    i = np.rint((cloud[:, 1] - y0) / cell).astype(np.int64)
    inv = -cloud[:, 2]
    constraint = np.full(ny * nx, -np.inf)
    np.maximum.at(constraint, i * nx + j, inv)
    has_c = np.isfinite(constraint)
    constraint = np.where(has_c, constraint, 0.0).reshape(ny, nx)
    start = np.full((ny, nx), inv.max() + params.gravity_displacement)
    z, pinned, it = kernels.cloth_relax(start, constraint, has_c.reshape(ny, nx), params.gravity_displacement,
                                        params.rigidness, params.max_iterations, params.convergence_eps)
    return ClothSurface(-np.asarray(z), np.asarray(pinned, dtype=bool), float(x0), float(y0), cell, int(it))


def classify(cloud, cloth: ClothSurface, class_threshold: float) -> GroundSegmentation:
    cloud = np.asarray(cloud, dtype=float).reshape(-1, 3)
    zc = cloth.height_at(cloud[:, 0], cloud[:, 1])
    diff = cloud[:, 2] - zc
    ground = np.abs(diff) <= class_threshold
    return GroundSegmentation(cloud[ground], cloud[~ground], np.maximum(diff[~ground], 0.0))


def segment(cloud, params: ClothParams = ClothParams()) -> GroundSegmentation:
    cloth = simulate_cloth(cloud, params)
    return classify(cloud, cloth, params.class_threshold)
