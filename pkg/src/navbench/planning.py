"""Costmap, A* global planning and the elastic-band local planner."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import ndimage

from . import kernels
from .elevation import OBSTACLE, ElevationGrid
from .geometry import RobotState, wrap_angle


class NoPath(RuntimeError):
    pass


class StartBlocked(NoPath):
    pass


class Infeasible(RuntimeError):
    """The local planner could not produce a collision-free band."""


SIM_TUNED = "sim_tuned"
REAL_PARAMS = "real_params"

# (time, obstacle, via_point, kinematic, velocity)
DEFAULT_WEIGHTS = {
    SIM_TUNED: (1.0, 0.1, 1000.0, 100.0, 10.0),
    REAL_PARAMS: (1.0, 50.0, 2.0, 100.0, 10.0),
}


@dataclass(frozen=True)
class PlannerConfig:
    mode: str = REAL_PARAMS
    robot_radius: float = 0.6
    v_max: float = 1.5
    v_min: float = -0.3
    omega_max: float = 1.0
    a_max: float = 1.0
    obstacle_clearance: float = 0.3
    weights: tuple = ()
    iterations: int = 100
    step_size: float = 0.1
    height_threshold: float = 0.30
    horizon: float = 5.0
    band_spacing: float = 0.3

    def __post_init__(self):
        if self.mode not in DEFAULT_WEIGHTS:
            raise ValueError(f"unknown planner mode {self.mode!r}")
        if not self.weights:
            object.__setattr__(self, "weights", DEFAULT_WEIGHTS[self.mode])
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.weights) != 5 or min(self.weights) < 0:
            raise ValueError("weights must be five non-negative numbers")
        if self.v_max <= 0 or self.omega_max <= 0:
            raise ValueError("velocity limits must be positive")
        if not -self.v_max <= self.v_min <= self.v_max:
            raise ValueError("v_min must lie in [-v_max, v_max]")


@dataclass(frozen=True)
class Costmap:
    blocked: np.ndarray
    resolution: float
    origin: tuple[float, float]

    @property
    def shape(self) -> tuple[int, int]:
        return self.blocked.shape

    def cell_of(self, x, y):
        r = np.rint((np.asarray(y, dtype=float) - self.origin[1]) / self.resolution).astype(np.int64)
        c = np.rint((np.asarray(x, dtype=float) - self.origin[0]) / self.resolution).astype(np.int64)
        return r, c

    def world_of(self, r, c) -> np.ndarray:
        return np.stack([self.origin[0] + np.asarray(c) * self.resolution,
                         self.origin[1] + np.asarray(r) * self.resolution], axis=-1)

    def inside(self, r, c) -> bool:
        h, w = self.blocked.shape
        return 0 <= r < h and 0 <= c < w

    @cached_property
    def clearance(self) -> np.ndarray:
        """Distance (m) from each cell centre to the nearest blocked cell centre."""
        if not self.blocked.any():
            return np.full(self.blocked.shape, 1e3)
        return ndimage.distance_transform_edt(~self.blocked) * self.resolution


def inflate(lethal: np.ndarray, radius_cells: float) -> np.ndarray:
    if not lethal.any():
        return lethal.copy()
    return ndimage.distance_transform_edt(~lethal) <= radius_cells + 1e-9


def build_costmap(grid: ElevationGrid, height_threshold: float = 0.30, robot_radius: float = 0.6) -> Costmap:
    """Obstacle cells above the height threshold, inflated by the robot radius.

    Unknown cells are free.
    """
    if height_threshold <= 0:
        raise ValueError("height_threshold must be positive")
    lethal = (grid.state == OBSTACLE) & (grid.height > height_threshold)
    return Costmap(inflate(lethal, robot_radius / grid.resolution), grid.resolution, grid.origin)


@dataclass(frozen=True)
class GlobalPath:
    points: np.ndarray
    cells: np.ndarray
    total_length: float

    def __len__(self) -> int:
        return len(self.points)


def path_length_cells(cells: np.ndarray) -> tuple[int, int]:
    """(straight, diagonal) move counts of a cell path."""
    d = np.abs(np.diff(np.asarray(cells), axis=0))
    diag = int(np.sum((d[:, 0] == 1) & (d[:, 1] == 1)))
    return len(d) - diag, diag


def astar(cmap: Costmap, start, goal) -> GlobalPath:
    """Optimal 8-connected path between world points (no corner cutting)."""
    sr, sc = (int(v) for v in cmap.cell_of(start[0], start[1]))
    gr, gc = (int(v) for v in cmap.cell_of(goal[0], goal[1]))
    if not cmap.inside(sr, sc):
        raise StartBlocked("start outside the costmap")
    if cmap.blocked[sr, sc]:
        raise StartBlocked("start cell is blocked")
    if not cmap.inside(gr, gc) or cmap.blocked[gr, gc]:
        raise NoPath("goal cell is outside the map or blocked")
    cells = kernels.astar_grid(cmap.blocked, sr, sc, gr, gc)
    if cells is None:
        raise NoPath("goal unreachable")
    n_straight, n_diag = path_length_cells(cells)
    length = (n_straight + n_diag * math.sqrt(2.0)) * cmap.resolution
    return GlobalPath(cmap.world_of(cells[:, 0], cells[:, 1]), cells, length)


def nearest_free(cmap: Costmap, xy, max_radius: float) -> tuple[float, float] | None:
    """Closest free cell centre within ``max_radius`` of ``xy``."""
    r, c = (int(v) for v in cmap.cell_of(xy[0], xy[1]))
    k = int(math.ceil(max_radius / cmap.resolution))
    h, w = cmap.shape
    r0, r1, c0, c1 = max(r - k, 0), min(r + k + 1, h), max(c - k, 0), min(c + k + 1, w)
    if r0 >= r1 or c0 >= c1:
        return None
    rr, cc = np.mgrid[r0:r1, c0:c1]
    d2 = (rr - r) ** 2 + (cc - c) ** 2
    ok = ~cmap.blocked[r0:r1, c0:c1] & (d2 <= k * k)
    if not ok.any():
        return None
    idx = np.flatnonzero(ok)
    best = idx[np.argmin(d2.reshape(-1)[idx])]
    p = cmap.world_of(rr.reshape(-1)[best], cc.reshape(-1)[best])
    return float(p[0]), float(p[1])


def clip_goal(cmap: Costmap, robot_xy, goal_xy, margin_cells: int = 2) -> tuple[float, float]:
    """Goal projected into the costmap window along the robot-goal line when outside."""
    h, w = cmap.shape
    res = cmap.resolution
    lo_x = cmap.origin[0] + margin_cells * res
    hi_x = cmap.origin[0] + (w - 1 - margin_cells) * res
    lo_y = cmap.origin[1] + margin_cells * res
    hi_y = cmap.origin[1] + (h - 1 - margin_cells) * res
    gx, gy = goal_xy
    if lo_x <= gx <= hi_x and lo_y <= gy <= hi_y:
        return float(gx), float(gy)
    rx, ry = robot_xy
    dx, dy = gx - rx, gy - ry
    s = 1.0
    for d, o, lo, hi in ((dx, rx, lo_x, hi_x), (dy, ry, lo_y, hi_y)):
        if d > 0:
            s = min(s, (hi - o) / d)
        elif d < 0:
            s = min(s, (lo - o) / d)
    s = max(s, 0.0)
    return float(rx + s * dx), float(ry + s * dy)


@dataclass(frozen=True)
class LocalTrajectory:
    poses: np.ndarray
    dts: np.ndarray
    cost: float = float("nan")
    iterations: int = 0

    def __len__(self) -> int:
        return len(self.poses)


def _resample(poly: np.ndarray, spacing: float, horizon: float) -> np.ndarray:
    seg = np.hypot(*np.diff(poly, axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = min(horizon, cum[-1])
    if total <= 1e-9:
        return poly[:1]
    s = np.arange(0.0, total, spacing)
    if total - s[-1] > 1e-6:
        s = np.append(s, total)
    x = np.interp(s, cum, poly[:, 0])
    y = np.interp(s, cum, poly[:, 1])
    return np.stack([x, y], axis=1)


def init_band(path: GlobalPath, state: RobotState, cfg: PlannerConfig) -> LocalTrajectory:
    pts = np.asarray(path.points, dtype=float)
    poly = np.vstack([[state.x, state.y], pts[1:]]) if len(pts) > 1 else np.vstack([[state.x, state.y], pts])
    band = _resample(poly, cfg.band_spacing, cfg.horizon)
    if len(band) < 2:
        band = np.vstack([band, band[-1:] + 1e-3 * np.array([math.cos(state.theta), math.sin(state.theta)])])
    d = np.diff(band, axis=0)
    heading = np.arctan2(d[:, 1], d[:, 0])
    theta = np.empty(len(band))
    theta[0] = state.theta
    theta[1:-1] = heading[1:]
    theta[-1] = heading[-1]
    # keep headings continuous relative to the robot heading
    for k in range(1, len(theta)):
        theta[k] = theta[k - 1] + wrap_angle(theta[k] - theta[k - 1])
    poses = np.column_stack([band, theta])
    dts = np.maximum(np.hypot(d[:, 0], d[:, 1]) / cfg.v_max, 0.01)
    return LocalTrajectory(poses, dts)


def _via_polyline(path: GlobalPath, state: RobotState, horizon: float) -> np.ndarray:
    pts = np.vstack([[state.x, state.y], np.asarray(path.points)[1:]]) if len(path) > 1 else np.asarray(path.points)
    seg = np.hypot(*np.diff(pts, axis=0).T) if len(pts) > 1 else np.zeros(0)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    keep = cum <= horizon + 1.0
    keep[: min(2, len(keep))] = True
    return pts[keep]


def teb_optimize(path: GlobalPath, cmap: Costmap, state: RobotState, cfg: PlannerConfig) -> LocalTrajectory:
    """Optimise a timed band along the global path ahead of the robot.

    Raises :class:`Infeasible` when a planned pose (other than the fixed
    current pose) ends on a blocked cell.
    """
    if len(path) == 0:
        raise ValueError("empty global path")
    band = init_band(path, state, cfg)
    via = _via_polyline(path, state, cfg.horizon)
    poses, dts, cost, it = kernels.band_descent(
        band.poses, band.dts, cmap.clearance, cmap.origin[0], cmap.origin[1], cmap.resolution, via,
        cfg.weights, cfg.obstacle_clearance, cfg.v_max, cfg.omega_max, cfg.iterations, cfg.step_size)
    poses, dts = np.asarray(poses), np.asarray(dts)
    r, c = cmap.cell_of(poses[1:, 0], poses[1:, 1])
    h, w = cmap.shape
    inside = (r >= 0) & (r < h) & (c >= 0) & (c < w)
    if np.any(cmap.blocked[r[inside], c[inside]]):
        raise Infeasible("band pose on a blocked cell after optimisation")
    return LocalTrajectory(poses, dts, float(cost), int(it))


def first_command(traj: LocalTrajectory, cfg: PlannerConfig) -> tuple[float, float]:
    """Velocity command realising the first band segment, clamped to the limits."""
    p0, p1 = traj.poses[0], traj.poses[1]
    dt = float(traj.dts[0])
    dx, dy = p1[0] - p0[0], p1[1] - p0[1]
    v = (dx * math.cos(p0[2]) + dy * math.sin(p0[2])) / dt
    om = wrap_angle(p1[2] - p0[2]) / dt
    v = min(max(v, cfg.v_min, -cfg.v_max), cfg.v_max)
    om = min(max(om, -cfg.omega_max), cfg.omega_max)
    return float(v), float(om)
