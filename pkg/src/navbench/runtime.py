"""Deterministic closed-loop episodes: perception, mapping and planning on fixed tick rates."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import depth as dr
from .csf import ClothParams, EmptyCloud, segment
from .elevation import ElevationGrid, integrate, recenter
from .geometry import CameraIntrinsics, Pose3, RobotState
from .planning import (Infeasible, NoPath, PlannerConfig, astar, build_costmap, clip_goal, first_command,
                       nearest_free, teb_optimize)
from .sim.robot import Collision, step_robot
from .sim.sensors import (AnchorModel, DepthArtifacts, LidarSpec, TooFewValidPixels, raycast_lidar, render_depth,
                          sample_anchors, synthesize_relative_depth)
from .sim.world import World

LIDAR, MONO = "lidar", "mono"
DEFAULT_RATES = {LIDAR: (20.0, 16.0, 12.0), MONO: (10.0, 6.0, 12.0)}

SUCCESS, TIMEOUT, COLLISION, ABORT = "Success", "Timeout", "Collision", "PlannerAbort"
OUTCOMES = (SUCCESS, TIMEOUT, COLLISION, ABORT)


@dataclass(frozen=True)
class CameraSpec:
    width: int = 320
    height: int = 240
    hfov: float = math.pi / 2
    mount_height: float = 1.2
    pitch: float = math.radians(10.0)

    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics.from_hfov(self.width, self.height, self.hfov)


@dataclass(frozen=True)
class PipelineConfig:
    perception_mode: str = LIDAR
    rates: tuple = ()
    sim_dt: float = 1.0 / 240.0
    edge_masking: bool = True
    smoothing: bool = True
    alpha: float = 0.8
    grad_threshold: float = 0.015
    mask_radius: int = 5
    stride: int = 2
    mono_max_range: float = 15.0
    robust_fit: bool = True
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    csf: ClothParams = field(default_factory=ClothParams)
    lidar: LidarSpec = field(default_factory=LidarSpec)
    lidar_mount_height: float = 1.0
    camera: CameraSpec = field(default_factory=CameraSpec)
    artifacts: DepthArtifacts = field(default_factory=DepthArtifacts)
    anchors: AnchorModel = field(default_factory=AnchorModel)
    grid_size: int = 201
    grid_resolution: float = 0.1
    min_ground_points: int = 3
    robot_radius: float = 0.45
    alpha_max: float = 4.0
    goal_radius: float = 2.0
    max_consecutive_infeasible: int = 10
    record_dt: float = 0.1

    def __post_init__(self):
        if self.perception_mode not in DEFAULT_RATES:
            raise ValueError(f"perception_mode must be one of {tuple(DEFAULT_RATES)}")
        if not self.rates:
            object.__setattr__(self, "rates", DEFAULT_RATES[self.perception_mode])
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        if len(self.rates) != 3 or min(self.rates) <= 0:
            raise ValueError("rates must be three positive frequencies")
        if self.sim_dt <= 0:
            raise ValueError("sim_dt must be positive")
        self.tick_periods()
        if not 0.0 <= self.alpha <= 1.0:
            raise dr.AlphaOutOfRange(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.record_dt < self.sim_dt:
            raise ValueError("record_dt must be at least sim_dt")

    def tick_periods(self) -> tuple[int, int, int]:
        """Module periods in simulation steps; each must be a whole number of steps."""
        out = []
        for r in self.rates:
            n = 1.0 / (r * self.sim_dt)
            if abs(n - round(n)) * self.sim_dt > 1e-9:
                raise ValueError(f"sim_dt {self.sim_dt} does not divide the {r} Hz period")
            out.append(int(round(n)))
        return tuple(out)

    @property
    def effective_alpha(self) -> float:
        """Disabling smoothing is exactly a zero EMA weight."""
        return self.alpha if self.smoothing else 0.0

    def mask_params(self) -> tuple[float, int]:
        """Disabling masking is exactly an infinite threshold with zero radius."""
        return (self.grad_threshold, self.mask_radius) if self.edge_masking else (math.inf, 0)


@dataclass(frozen=True)
class RunRecord:
    times: np.ndarray
    states: np.ndarray  # (n, 5): x, y, theta, v, omega
    outcome: str
    path_length: float
    seed: int
    goal: tuple[float, float]
    duration: float
    planner_failures: int = 0

    @property
    def success(self) -> bool:
        return self.outcome == SUCCESS

    @property
    def xy(self) -> np.ndarray:
        return self.states[:, :2]

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "path_length": round(self.path_length, 6),
            "seed": self.seed,
            "goal": [round(float(g), 6) for g in self.goal],
            "duration": round(self.duration, 6),
            "planner_failures": self.planner_failures,
            "trajectory": [[round(float(t), 4), round(float(s[0]), 4), round(float(s[1]), 4), round(float(s[2]), 4)]
                           for t, s in zip(self.times, self.states)],
        }


def default_time_budget(start_xy, goal_xy, v_max: float) -> float:
    return 4.0 * math.dist(start_xy, goal_xy) / v_max + 60.0


def polyline_length(xy: np.ndarray) -> float:
    xy = np.asarray(xy, dtype=float)
    if len(xy) < 2:
        return 0.0
    return float(np.sum(np.hypot(*np.diff(xy, axis=0).T)))


def _frame_seed(seed: int, stream: int, tick: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), stream, tick])


class Pipeline:
    """Per-episode perception, mapping and planning state."""

    def __init__(self, world: World, goal, cfg: PipelineConfig, seed: int):
        self.world = world
        self.goal = (float(goal[0]), float(goal[1]))
        self.cfg = cfg
        self.seed = int(seed)
        self.k = cfg.camera.intrinsics()
        self.smoother = dr.ScaleSmoother(cfg.effective_alpha)
        self.grid: ElevationGrid | None = None
        # published outputs (what downstream modules may read) and in-flight results
        self.cloud = None
        self.cloud_version = 0
        self.map: ElevationGrid | None = None
        self.map_version = 0
        self._pending_cloud = None
        self._pending_map = None
        self._pending_cmd = None
        self._integrated_version = 0
        self._costmap = None
        self._costmap_version = -1
        self.command = (0.0, 0.0)
        self.infeasible = 0
        self.failures = 0

    # ---- perception
    def sense(self, state: RobotState, tick: int):
        cfg = self.cfg
        ground = float(self.world.terrain_z(state.x, state.y))
        if cfg.perception_mode == LIDAR:
            pose = Pose3.body((state.x, state.y, ground + cfg.lidar_mount_height), state.theta)
            return raycast_lidar(self.world, pose, cfg.lidar, _frame_seed(self.seed, 1, tick))
        pose = Pose3.camera((state.x, state.y, ground + cfg.camera.mount_height), state.theta, cfg.camera.pitch)
        gt = render_depth(self.world, pose, self.k)
        try:
            disp = synthesize_relative_depth(gt, self.world, self.k, cfg.artifacts, _frame_seed(self.seed, 2, tick))
            anchors = sample_anchors(gt, disp, cfg.anchors, _frame_seed(self.seed, 3, tick))
            ss = self.smoother.update(dr.fit_scale_shift(disp, anchors, robust=cfg.robust_fit))
            thr, rad = cfg.mask_params()
            mask = dr.edge_mask(disp, thr, rad)
            return dr.metricize(disp, ss, mask, cfg.stride, pose, self.k, max_range=cfg.mono_max_range)
        except (TooFewValidPixels, dr.TooFewAnchors, dr.DegenerateAnchors, dr.EmptyOutput):
            return None

    # ---- mapping
    def update_map(self, state: RobotState, tick: int):
        cfg = self.cfg
        if self.grid is None:
            self.grid = ElevationGrid.empty(cfg.grid_size, cfg.grid_resolution, (state.x, state.y))
        self.grid = recenter(self.grid, (state.x, state.y))
        if self.cloud is not None and self.cloud_version != self._integrated_version:
            self._integrated_version = self.cloud_version
            pts = self.cloud
            inside = self.grid.contains(pts[:, 0], pts[:, 1])
            pts = pts[inside]
            if len(pts):
                try:
                    seg = segment(pts, cfg.csf)
                except EmptyCloud:
                    seg = None
                if seg is not None:
                    self.grid = integrate(self.grid, seg, tick, cfg.min_ground_points)
        return self.grid

    # ---- planning
    def costmap(self):
        if self._costmap_version != self.map_version:
            p = self.cfg.planner
            self._costmap = build_costmap(self.map, p.height_threshold, p.robot_radius)
            self._costmap_version = self.map_version
        return self._costmap

    def plan(self, state: RobotState):
        """Velocity command, or ``None`` when planning failed this tick."""
        if self.map is None:
            return (0.0, 0.0)
        cfg = self.cfg.planner
        cmap = self.costmap()
        start = (state.x, state.y)
        r, c = cmap.cell_of(*start)
        if not cmap.inside(int(r), int(c)) or cmap.blocked[r, c]:
            start = nearest_free(cmap, start, 1.0)
            if start is None:
                return None
        goal = clip_goal(cmap, (state.x, state.y), self.goal)
        clipped = goal != self.goal
        gr, gc = cmap.cell_of(*goal)
        if cmap.blocked[gr, gc]:
            goal = nearest_free(cmap, goal, 3.0 if clipped else 1.5)
            if goal is None:
                return None
        try:
            path = astar(cmap, start, goal)
            traj = teb_optimize(path, cmap, replace(state, x=start[0], y=start[1]), cfg)
        except (NoPath, Infeasible):
            return None
        return first_command(traj, cfg)


def run_episode(world: World, start: RobotState, goal, cfg: PipelineConfig, seed: int,
                time_budget: float | None = None) -> RunRecord:
    """Simulate one navigation attempt; every failure mode is reported as an outcome."""
    goal = (float(goal[0]), float(goal[1]))
    if time_budget is None:
        time_budget = default_time_budget((start.x, start.y), goal, cfg.planner.v_max)
    if float(world.clearance((start.x, start.y))[0]) < cfg.robot_radius:
        raise ValueError("start pose collides with an obstacle")
    p_per, p_map, p_plan = cfg.tick_periods()
    rec_every = max(1, int(round(cfg.record_dt / cfg.sim_dt)))
    n_steps = int(math.ceil(time_budget / cfg.sim_dt - 1e-9))
    pipe = Pipeline(world, goal, cfg, seed)
    state = RobotState(start.x, start.y, start.theta)
    times = [0.0]
    states = [(state.x, state.y, state.theta, state.v, state.omega)]
    outcome = TIMEOUT
    step = 0
    while step < n_steps:
        # module ticks at the start of the step: publish last tick's result, then start the next one
        if step % p_per == 0:
            if pipe._pending_cloud is not None:
                pipe.cloud, pipe.cloud_version = pipe._pending_cloud, pipe.cloud_version + 1
            pipe._pending_cloud = pipe.sense(state, step // p_per)
        if step % p_map == 0:
            if pipe._pending_map is not None:
                pipe.map, pipe.map_version = pipe._pending_map, pipe.map_version + 1
            pipe._pending_map = pipe.update_map(state, step // p_map)
        if step % p_plan == 0:
            if pipe._pending_cmd is not None:
                pipe.command = pipe._pending_cmd
            cmd = pipe.plan(state)
            if cmd is None:
                pipe.infeasible += 1
                pipe.failures += 1
                cmd = (0.0, 0.0)
                if pipe.infeasible >= cfg.max_consecutive_infeasible:
                    outcome = ABORT
                    break
            else:
                pipe.infeasible = 0
            pipe._pending_cmd = cmd
        try:
            state = step_robot(state, pipe.command, cfg.sim_dt, world, a_max=cfg.planner.a_max,
                               alpha_max=cfg.alpha_max, robot_radius=cfg.robot_radius)
        except Collision as exc:
            state = exc.state
            step += 1
            outcome = COLLISION
            break
        step += 1
        if math.hypot(state.x - goal[0], state.y - goal[1]) <= cfg.goal_radius:
            outcome = SUCCESS
            break
        if step % rec_every == 0:
            times.append(step * cfg.sim_dt)
            states.append((state.x, state.y, state.theta, state.v, state.omega))
    t_end = step * cfg.sim_dt
    if times[-1] < t_end - 1e-12:
        times.append(t_end)
        states.append((state.x, state.y, state.theta, state.v, state.omega))
    st = np.array(states, dtype=float)
    return RunRecord(np.array(times), st, outcome, polyline_length(st[:, :2]), int(seed), goal, t_end,
                     pipe.failures)
