"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 3] [--episode]

Each kernel gets the same inputs on both backends; the table reports the best
of ``--repeat`` wall times and the speedup. ``--episode`` also times one short
LiDAR episode per backend in a subprocess (the pure run takes minutes).
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np
from scipy import ndimage

from navbench import _pykernels as pure
from navbench.geometry import Pose3
from navbench.sim.sensors import LidarSpec
from navbench.sim.world import generate_world

try:
    from navbench import _kernels as compiled
except ImportError:
    sys.exit("compiled extension not built; run `python setup.py build_ext --inplace` first")


def cloth_case():
    rng = np.random.default_rng(0)
    c = ndimage.gaussian_filter(rng.normal(0, 1.0, (60, 60)), 3)
    has = rng.uniform(size=c.shape) < 0.8
    start = np.full(c.shape, c.max() + 0.05)
    return "cloth_relax 60x60 r=2", lambda k: k.cloth_relax(start, c, has, 0.05, 2, 500, 1e-3)


def astar_case():
    rng = np.random.default_rng(1)
    blocked = rng.uniform(size=(200, 200)) < 0.2
    blocked[0, 0] = blocked[199, 199] = False
    return "astar_grid 200x200", lambda k: k.astar_grid(blocked, 0, 0, 199, 199)


def raycast_case():
    w = generate_world("hard", 3)
    a = w.ray_arrays
    dirs = LidarSpec(16, 360).directions() @ Pose3.body((0, 0, 0), 0.0).rotation.T
    origin = np.array([0.0, 0.0, float(w.terrain_z(0.0, 0.0)) + 1.0])
    args = (origin, dirs, 40.0, a["boxes"], a["cyls"], a["spheres"], a["planes"], a["prism_index"], a["prism_z"],
            a["hf"], a["hf_x0"], a["hf_y0"], a["hf_res"])
    return f"cast_rays {len(dirs)} rays, hard world", lambda k: k.cast_rays(*args)


def band_case():
    rng = np.random.default_rng(2)
    blocked = rng.uniform(size=(200, 200)) < 0.01
    dist = ndimage.distance_transform_edt(~blocked) * 0.1
    n = 30
    poses = np.column_stack([np.linspace(0.5, 8.0, n), 10.0 + rng.normal(0, 0.1, n), np.zeros(n)])
    dts = np.full(n - 1, 0.3)
    path = np.column_stack([np.linspace(0.3, 9.0, 90), np.full(90, 10.0)])
    args = (poses, dts, dist, 0.0, 0.0, 0.1, path, (1.0, 10.0, 50.0, 1.0, 1.0), 0.3, 1.5, 1.0)
    return "band_descent 30 poses x 50 it", lambda k: k.band_descent(*args, 50, 0.05)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def episode_time(pure_backend: bool) -> float:
    code = ("import time; from navbench.bench import pick_worlds; from navbench.runtime import PipelineConfig, "
            "run_episode; from navbench.geometry import RobotState\n"
            "(w, _), = pick_worlds('medium', 1, 0, goals=(10.0,))\n"
            "t = time.perf_counter(); run_episode(w, RobotState(), (10.0, 0.0), PipelineConfig(), 0)\n"
            "print(time.perf_counter() - t)")
    env = dict(os.environ, NAVBENCH_PURE="1" if pure_backend else "0")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--episode", action="store_true", help="also time a full 10 m LiDAR episode per backend")
    args = ap.parse_args()

    print(f"{'kernel':<36}{'compiled [s]':>14}{'python [s]':>14}{'speedup':>10}")
    for name, fn in (cloth_case(), astar_case(), raycast_case(), band_case()):
        tc = best_of(lambda: fn(compiled), args.repeat)
        tp = best_of(lambda: fn(pure), args.repeat)
        print(f"{name:<36}{tc:>14.4f}{tp:>14.4f}{tp / tc:>9.1f}x")
    if args.episode:
        tc, tp = episode_time(False), episode_time(True)
        print(f"{'episode medium 10 m lidar':<36}{tc:>14.2f}{tp:>14.2f}{tp / tc:>9.1f}x")


if __name__ == "__main__":
    main()
