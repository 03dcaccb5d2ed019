"""Robot-centric rolling 2.5D obstacle-height grid."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .csf import GroundSegmentation

UNKNOWN, GROUND, OBSTACLE = 0, 1, 2
_CODES = {UNKNOWN: "U", GROUND: "G", OBSTACLE: "O"}


@dataclass(frozen=True)
class ElevationGrid:
    """Cell ``(r, c)`` sits at world ``((ci + c - half) * res, (cj + r - half) * res)``.

    Rows index y, columns index x; ``(ci, cj)`` is the snapped robot cell.
    """

    state: np.ndarray
    height: np.ndarray
    last_seen: np.ndarray
    resolution: float
    ci: int
    cj: int

    @classmethod
    def empty(cls, size: int = 201, resolution: float = 0.1, center=(0.0, 0.0)) -> "ElevationGrid":
        if size % 2 == 0:
            raise ValueError("grid size must be odd")
        ci, cj = _snap(center, resolution)
        return cls(np.zeros((size, size), dtype=np.int8), np.zeros((size, size)),
                   np.full((size, size), -1, dtype=np.int64), resolution, ci, cj)

    @property
    def size(self) -> int:
        return self.state.shape[0]

    @property
    def half(self) -> int:
        return self.size // 2

    @property
    def origin(self) -> tuple[float, float]:
        """World x-y of cell (0, 0)."""
        return ((self.ci - self.half) * self.resolution, (self.cj - self.half) * self.resolution)

    @property
    def center(self) -> tuple[float, float]:
        return (self.ci * self.resolution, self.cj * self.resolution)

    def cell_of(self, x, y):
        """(row, col) index arrays of the cells containing world points."""
        x0, y0 = self.origin
        c = np.rint((np.asarray(x, dtype=float) - x0) / self.resolution).astype(np.int64)
        r = np.rint((np.asarray(y, dtype=float) - y0) / self.resolution).astype(np.int64)
        return r, c

    def contains(self, x, y) -> np.ndarray:
        r, c = self.cell_of(x, y)
        return (r >= 0) & (r < self.size) & (c >= 0) & (c < self.size)

    def bounds(self) -> tuple[float, float, float, float]:
        x0, y0 = self.origin
        ext = (self.size - 0.5) * self.resolution
        return x0 - 0.5 * self.resolution, x0 + ext, y0 - 0.5 * self.resolution, y0 + ext


def _snap(xy, res) -> tuple[int, int]:
    return int(np.rint(xy[0] / res)), int(np.rint(xy[1] / res))


def integrate(grid: ElevationGrid, seg: GroundSegmentation, tick: int, min_ground_points: int = 3) -> ElevationGrid:
    """Fold one segmented frame into the grid; cells without points are left untouched."""
    n = grid.size
    state, height, seen = grid.state.copy(), grid.height.copy(), grid.last_seen.copy()

    obs = np.asarray(seg.obstacles).reshape(-1, 3)
    r, c = grid.cell_of(obs[:, 0], obs[:, 1])
    inb = (r >= 0) & (r < n) & (c >= 0) & (c < n)
    flat_obs = r[inb] * n + c[inb]
    hmax = np.full(n * n, -np.inf)
    np.maximum.at(hmax, flat_obs, np.asarray(seg.heights)[inb])
    has_obs = np.isfinite(hmax)

    gnd = np.asarray(seg.ground).reshape(-1, 3)
    r, c = grid.cell_of(gnd[:, 0], gnd[:, 1])
    inb = (r >= 0) & (r < n) & (c >= 0) & (c < n)
    counts = np.bincount(r[inb] * n + c[inb], minlength=n * n)
    clear = ~has_obs & (counts >= min_ground_points)

    s, h, t = state.reshape(-1), height.reshape(-1), seen.reshape(-1)
    s[has_obs] = OBSTACLE
    h[has_obs] = hmax[has_obs]
    t[has_obs] = tick
    s[clear] = GROUND
    h[clear] = 0.0
    t[clear] = tick
    return replace(grid, state=state, height=height, last_seen=seen)


def _shift(a: np.ndarray, dr: int, dc: int, fill) -> np.ndarray:
    """out[r, c] = a[r + dr, c + dc] where in bounds, else ``fill``."""
    n, m = a.shape
    out = np.full_like(a, fill)
    if abs(dr) >= n or abs(dc) >= m:
        return out
    src_r = slice(max(dr, 0), n + min(dr, 0))
    dst_r = slice(max(-dr, 0), n + min(-dr, 0))
    src_c = slice(max(dc, 0), m + min(dc, 0))
    dst_c = slice(max(-dc, 0), m + min(-dc, 0))
    out[dst_r, dst_c] = a[src_r, src_c]
    return out


def recenter(grid: ElevationGrid, new_robot_xy) -> ElevationGrid:
    """Re-anchor the grid on a new robot position; content keeps its world placement."""
    ci, cj = _snap(new_robot_xy, grid.resolution)
    dc, dr = ci - grid.ci, cj - grid.cj
    if dc == 0 and dr == 0:
        return grid
    return replace(grid, state=_shift(grid.state, dr, dc, UNKNOWN), height=_shift(grid.height, dr, dc, 0.0),
                   last_seen=_shift(grid.last_seen, dr, dc, -1), ci=ci, cj=cj)


def dump_grid(grid: ElevationGrid) -> str:
    """Plain-text dump: header, a matrix of cell codes (U/G/O), then a matrix of heights.

    Row 0 is the southernmost row (smallest y).
    """
    lines = [f"# navbench elevation grid v1",
             f"size {grid.size}",
             f"resolution {grid.resolution!r}",
             f"center_cell {grid.ci} {grid.cj}",
             "codes"]
    lines += ["".join(_CODES[int(v)] for v in row) for row in grid.state]
    lines.append("heights")
    lines += [" ".join(f"{v:.3f}" for v in row) for row in grid.height]
    return "\n".join(lines) + "\n"


def load_grid(text: str) -> ElevationGrid:
    lines = text.splitlines()
    size = int(lines[1].split()[1])
    res = float(lines[2].split()[1])
    ci, cj = (int(v) for v in lines[3].split()[1:3])
    inv = {v: k for k, v in _CODES.items()}
    codes = lines[5:5 + size]
    state = np.array([[inv[ch] for ch in row] for row in codes], dtype=np.int8)
    heights = np.array([[float(v) for v in row.split()] for row in lines[6 + size:6 + 2 * size]])
    return ElevationGrid(state, heights, np.full((size, size), -1, dtype=np.int64), res, ci, cj)
