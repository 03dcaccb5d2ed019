"""Scenario matrices, reference trajectories, SR/SPL/DR metrics and reports."""
from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, is_dataclass, replace

import numpy as np

from . import kernels
from .geometry import RobotState
from .runtime import PipelineConfig, RunRecord, run_episode
from .sim.world import DIFFICULTIES, GOAL_DISTANCES, World, generate_world

log = logging.getLogger(__name__)

DELTA = 2.0


class NoReferencePath(RuntimeError):
    pass


class EmptyRecords(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    difficulty: str
    world_seed: int
    goal_distance: float
    goal: tuple[float, float]
    n_runs: int = 10

    def __post_init__(self):
        if self.n_runs < 1:
            raise ValueError("a scenario needs at least one run")


@dataclass(frozen=True)
class ReferenceTrajectory:
    points: np.ndarray
    cumulative: np.ndarray

    @property
    def total(self) -> float:
        return float(self.cumulative[-1])

    @classmethod
    def from_points(cls, points) -> "ReferenceTrajectory":
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        seg = np.hypot(*np.diff(p, axis=0).T) if len(p) > 1 else np.zeros(0)
        return cls(p, np.concatenate([[0.0], np.cumsum(seg)]))


@dataclass(frozen=True)
class ScenarioMetrics:
    sr: float
    spl: float
    dr: float
    n: int
    spl_ratio_over_one: int = 0


# ------------------------------------------------------------ reference ---


def truth_blocked(world: World, resolution: float = 0.1, robot_radius: float = 0.6):
    """Ground-truth costmap over the world bounds: solid footprints inflated, grass free."""
    xmin, xmax, ymin, ymax = world.bounds
    nx = int(round((xmax - xmin) / resolution)) + 1
    ny = int(round((ymax - ymin) / resolution)) + 1
    xs = xmin + np.arange(nx) * resolution
    ys = ymin + np.arange(ny) * resolution
    gx, gy = np.meshgrid(xs, ys)
    clear = world.clearance(np.column_stack([gx.ravel(), gy.ravel()])).reshape(ny, nx)
    return clear <= robot_radius, (xmin, ymin)


def _segment_free(blocked, origin, res, a, b) -> bool:
    n = max(2, int(math.ceil(math.dist(a, b) / (0.25 * res))) + 1)
    s = np.linspace(0.0, 1.0, n)
    x = a[0] + s * (b[0] - a[0])
    y = a[1] + s * (b[1] - a[1])
    c = np.rint((x - origin[0]) / res).astype(int)
    r = np.rint((y - origin[1]) / res).astype(int)
    h, w = blocked.shape
    if np.any((r < 0) | (r >= h) | (c < 0) | (c >= w)):
        return False
    return not blocked[r, c].any()


def shortcut(points, free) -> np.ndarray:
    """Greedy line-of-sight smoothing: from each kept vertex jump to the farthest visible one."""
    pts = np.asarray(points, dtype=float)
    out = [0]
    i = 0
    while i < len(pts) - 1:
        j = len(pts) - 1
        while j > i + 1 and not free(pts[i], pts[j]):
            j -= 1
        out.append(j)
        i = j
    return pts[out]


def densify(points, spacing: float) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    out = [pts[:1]]
    for a, b in zip(pts[:-1], pts[1:]):
        n = max(1, int(math.ceil(math.dist(a, b) / spacing)))
        s = np.arange(1, n + 1)[:, None] / n
        out.append(a + s * (b - a))
    return np.vstack(out)


def reference_trajectory(world: World, start, goal, resolution: float = 0.1, robot_radius: float = 0.6,
                         spacing: float = 0.1, smooth: bool = True) -> ReferenceTrajectory:
    """Shortest ground-truth-feasible route, shortened by line of sight and resampled."""
    blocked, origin = truth_blocked(world, resolution, robot_radius)
    h, w = blocked.shape

    def cell(p):
        return int(round((p[1] - origin[1]) / resolution)), int(round((p[0] - origin[0]) / resolution))

    (sr, sc), (gr, gc) = cell(start), cell(goal)
    for r, c in ((sr, sc), (gr, gc)):
        if not (0 <= r < h and 0 <= c < w) or blocked[r, c]:
            raise NoReferencePath("start or goal is blocked in the ground-truth costmap")
    cells = kernels.astar_grid(blocked, sr, sc, gr, gc)
    if cells is None:
        raise NoReferencePath("goal unreachable in the ground-truth costmap")
    pts = np.column_stack([origin[0] + cells[:, 1] * resolution, origin[1] + cells[:, 0] * resolution])
    pts[0], pts[-1] = start, goal
    if smooth:
        pts = shortcut(pts, lambda a, b: _segment_free(blocked, origin, resolution, a, b))
    return ReferenceTrajectory.from_points(densify(pts, spacing))


# -------------------------------------------------------------- metrics ---


def _progress(xy: np.ndarray, ref: ReferenceTrajectory, delta: float) -> float:
    """Largest reference progress fraction among reference points within ``delta`` of any robot position."""
    if ref.total <= 0:
        return 0.0
    best = 0.0
    frac = ref.cumulative / ref.total
    for chunk in np.array_split(xy, max(1, len(xy) // 512 + 1)):
        d2 = (chunk[:, None, 0] - ref.points[None, :, 0]) ** 2 + (chunk[:, None, 1] - ref.points[None, :, 1]) ** 2
        near = d2 <= delta * delta
        if near.any():
            best = max(best, float(np.max(np.where(near, frac[None, :], 0.0))))
    return best


def compute_metrics(records, ref: ReferenceTrajectory, delta: float = DELTA) -> ScenarioMetrics:
    """SR, SPL (literal reference/actual ratio, unclamped) and distance ratio."""
    records = list(records)
    if not records:
        raise EmptyRecords("no run records")
    s = np.array([r.success for r in records], dtype=float)
    ratios = np.array([ref.total / r.path_length if r.path_length > 0 else 1.0 for r in records])
    spl_terms = s * ratios
    dr_terms = np.array([1.0 if r.success else _progress(np.asarray(r.xy), ref, delta) for r in records])
    return ScenarioMetrics(float(s.mean()), float(spl_terms.mean()), float(dr_terms.mean()), len(records),
                           int(np.sum((s > 0) & (ratios > 1.0))))


# --------------------------------------------------------------- matrix ---


def _stable(*parts) -> int:
    """Deterministic 32-bit integer from small ints/strings (no hash randomisation)."""
    acc = 2166136261
    for ch in "|".join(str(p) for p in parts).encode():
        acc = ((acc ^ ch) * 16777619) & 0xFFFFFFFF
    return acc


def pick_worlds(difficulty: str, n: int, master_seed: int, goals=GOAL_DISTANCES, max_tries: int = 50):
    """``n`` world seeds whose every goal has a ground-truth route; skipped seeds are logged."""
    out = []
    k = 0
    while len(out) < n:
        for attempt in range(max_tries):
            seed = _stable(master_seed, difficulty, k, attempt) % 1_000_000
            world = generate_world(difficulty, seed)
            try:
                refs = {g: reference_trajectory(world, (0.0, 0.0), (g, 0.0)) for g in goals}
            except NoReferencePath:
                log.info("world %s/%d has no reference path, redrawing", difficulty, seed)
                continue
            out.append((world, refs))
            break
        else:
            raise NoReferencePath(f"no feasible {difficulty} world after {max_tries} draws")
        k += 1
    return out


def _run_job(job):
    world, goal, cfg, seed = job
    return run_episode(world, RobotState(0.0, 0.0, 0.0), goal, cfg, seed)


def _map_jobs(jobs, n_jobs: int):
    if n_jobs <= 1 or len(jobs) <= 1:
        return [_run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_jobs) as ex:
        return list(ex.map(_run_job, jobs, chunksize=1))


def _config_dict(obj):
    if is_dataclass(obj):
        return {k: _config_dict(v) for k, v in asdict(obj).items()}
    if isinstance(obj, dict):
        return {k: _config_dict(v) for k, v in obj.items()}
    if isinstance(obj, (tuple, list)):
        return [_config_dict(v) for v in obj]
    if isinstance(obj, float):
        return round(obj, 12) if math.isfinite(obj) else str(obj)
    return obj


def _r(x: float) -> float:
    return round(float(x), 6)


def run_matrix(difficulties, goals, configs: dict, n_runs: int, master_seed: int, jobs: int = 1,
               trajectories: bool = True) -> dict:
    """Run every (config, difficulty, goal, run) cell with seeds shared across configs."""
    difficulties = list(difficulties)
    goals = [float(g) for g in goals]
    worlds = {d: pick_worlds(d, n_runs, master_seed, goals) for d in difficulties}
    keys, joblist = [], []
    for name, cfg in configs.items():
        for d in difficulties:
            for i, (world, _) in enumerate(worlds[d]):
                for g in goals:
                    keys.append((name, d, g, i))
                    joblist.append((world, (g, 0.0), cfg, _stable(master_seed, d, g, i) % 2**31))
    results = dict(zip(keys, _map_jobs(joblist, jobs)))

    runs, cells = [], []
    for name in configs:
        for d in difficulties:
            for g in goals:
                recs = [results[(name, d, g, i)] for i in range(n_runs)]
                for i, rec in enumerate(recs):
                    ref = worlds[d][i][1][g]
                    entry = {"config": name, "difficulty": d, "goal_distance": g, "run": i,
                             "world_seed": worlds[d][i][0].seed, "reference_length": _r(ref.total)}
                    entry.update(rec.to_dict())
                    if not trajectories:
                        entry.pop("trajectory")
                    runs.append(entry)
                per_run = [compute_metrics([rec], worlds[d][i][1][g]) for i, rec in enumerate(recs)]
                m = ScenarioMetrics(
                    float(np.mean([p.sr for p in per_run])), float(np.mean([p.spl for p in per_run])),
                    float(np.mean([p.dr for p in per_run])), len(per_run), sum(p.spl_ratio_over_one for p in per_run))
                cells.append({"config": name, "difficulty": d, "goal": g, "sr": _r(m.sr), "spl": _r(m.spl),
                              "dr": _r(m.dr), "n": m.n, "spl_ratio_over_one": m.spl_ratio_over_one})
    return {
        "format": "navbench-report/1",
        "master_seed": int(master_seed),
        "n_runs": int(n_runs),
        "difficulties": difficulties,
        "goals": goals,
        "configs": {name: _config_dict(cfg) for name, cfg in configs.items()},
        "cells": cells,
        "averages": _averages(cells),
        "runs": runs,
    }


def _averages(cells) -> list:
    out = []
    groups = {}
    for c in cells:
        groups.setdefault((c["config"], c["difficulty"]), []).append(c)
    for (name, d), cs in groups.items():
        out.append({"config": name, "difficulty": d,
                    **{k: _r(np.mean([c[k] for c in cs])) for k in ("sr", "spl", "dr")}})
    return out


def ablation_configs(base: PipelineConfig) -> dict:
    """The 2x2 grid over edge masking and smoothing, named ``mask=<0|1>,smooth=<0|1>``."""
    out = {}
    for mask in (False, True):
        for smooth in (False, True):
            out[f"mask={int(mask)},smooth={int(smooth)}"] = replace(base, edge_masking=mask, smoothing=smooth)
    return out


def ablation_table(report: dict) -> list:
    """Rows (mask, smooth, SPL per difficulty, average SPL) for the four ablation cells."""
    rows = []
    for name in report["configs"]:
        mask = name.split(",")[0].endswith("1")
        smooth = name.split(",")[1].endswith("1")
        per = {}
        for a in report["averages"]:
            if a["config"] == name:
                per[a["difficulty"]] = a["spl"]
        vals = [per[d] for d in report["difficulties"]]
        rows.append({"edge_masking": mask, "smoothing": smooth, "spl": per, "avg": _r(np.mean(vals))})
    return rows


# -------------------------------------------------------------- output ----


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=1) + "\n"


def write_report(report: dict, out_dir, name: str = "report") -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{name}.json")
    with open(path, "w") as fh:
        fh.write(dumps(report))
    return path


def render_results(report: dict) -> str:
    """One block per configuration: metric rows by difficulty/goal columns, plus per-difficulty averages."""
    lines = []
    diffs, goals = report["difficulties"], report["goals"]
    head = ["metric"] + [f"{d[:4]}-{int(g)}m" for d in diffs for g in goals] + [f"{d[:4]}-avg" for d in diffs]
    for name in report["configs"]:
        lines.append(f"[{name}]")
        lines.append("  ".join(f"{h:>10}" for h in head))
        cell = {(c["difficulty"], c["goal"]): c for c in report["cells"] if c["config"] == name}
        avg = {a["difficulty"]: a for a in report["averages"] if a["config"] == name}
        for key in ("sr", "spl", "dr"):
            row = [key.upper()] + [f"{cell[(d, g)][key]:.2f}" for d in diffs for g in goals]
            row += [f"{avg[d][key]:.2f}" for d in diffs]
            lines.append("  ".join(f"{v:>10}" for v in row))
        flagged = sum(c["spl_ratio_over_one"] for c in report["cells"] if c["config"] == name)
        if flagged:
            lines.append(f"  note: {flagged} successful runs were shorter than their reference (SPL ratio > 1)")
        lines.append("")
    return "\n".join(lines)


def render_ablation(report: dict) -> str:
    diffs = report["difficulties"]
    head = ["edge mask", "smoothing"] + [d for d in diffs] + ["Avg"]
    lines = ["  ".join(f"{h:>10}" for h in head)]
    for row in ablation_table(report):
        vals = ["yes" if row["edge_masking"] else "no", "yes" if row["smoothing"] else "no"]
        vals += [f"{row['spl'][d]:.3f}" for d in diffs] + [f"{row['avg']:.3f}"]
        lines.append("  ".join(f"{v:>10}" for v in vals))
    return "\n".join(lines) + "\n"

