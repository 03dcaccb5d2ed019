"""navbench command line: single runs, benchmark matrices, ablations and world export."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import bench, config
from .geometry import RobotState
from .runtime import DEFAULT_RATES, run_episode
from .sim.world import DIFFICULTIES, grass_corridor_world, save_world, generate_world

MODES = tuple(DEFAULT_RATES)
QUICK_DIFFICULTIES = ("easy", "medium")
QUICK_N = 3


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("NAVBENCH_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise config.ConfigError(f"NAVBENCH_SEED must be an integer, got {env!r}")
    return 0


def _csv_list(kind, choices):
    def parse(text):
        items = [t.strip() for t in text.split(",") if t.strip()]
        bad = [t for t in items if t not in choices]
        if not items or bad:
            raise argparse.ArgumentTypeError(f"invalid {kind} {text!r}; choose from {', '.join(choices)}")
        return tuple(items)
    return parse


def _goal(text):
    try:
        g = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"goal must be a distance in meters, got {text!r}")
    if g not in (10.0, 20.0, 30.0):
        raise argparse.ArgumentTypeError("goal must be one of 10, 20, 30")
    return g


def _common(p, seed=True):
    p.add_argument("--config", default="real-params", help="preset name (sim-tuned, real-params) or YAML/JSON file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config value, e.g. pipeline.planner.v_max=1.2 (repeatable)")
    if seed:
        p.add_argument("--seed", type=int, default=None, help="master seed (falls back to $NAVBENCH_SEED, then 0)")
    p.add_argument("--out", default="navbench-out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="navbench", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one episode")
    p.add_argument("--difficulty", choices=DIFFICULTIES, default="easy")
    p.add_argument("--goal", type=_goal, default=10.0)
    p.add_argument("--mode", choices=MODES, default="lidar")
    _common(p)

    p = sub.add_parser("bench", help="run the scenario matrix")
    p.add_argument("--difficulty", type=_csv_list("difficulty", DIFFICULTIES), default=None,
                   help="comma-separated difficulties (default: all)")
    p.add_argument("--modes", type=_csv_list("mode", MODES), default=MODES)
    p.add_argument("--mode", choices=MODES, default=None, help="single mode (shorthand for --modes)")
    p.add_argument("--n", type=int, default=None, help="runs per goal")
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")
    p.add_argument("--quick", action="store_true", help=f"N={QUICK_N} on {', '.join(QUICK_DIFFICULTIES)} only")
    _common(p)

    p = sub.add_parser("ablate", help="edge masking x smoothing grid in mono mode")
    p.add_argument("--difficulty", type=_csv_list("difficulty", DIFFICULTIES), default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--quick", action="store_true", help=f"N={QUICK_N}")
    _common(p)

    p = sub.add_parser("export-world", help="write a world file")
    p.add_argument("--difficulty", choices=DIFFICULTIES, default="easy")
    p.add_argument("--kind", choices=("generated", "grass-corridor"), default="generated")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="world.json", help="output file")
    return ap


def _jobs(args, root) -> int:
    j = args.jobs if args.jobs is not None else root.bench.jobs
    return j if j and j > 0 else (os.cpu_count() or 1)


def _write(path, text):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)


def _trajectory_csv(runs) -> str:
    lines = ["config,difficulty,goal,run,t,x,y,theta"]
    for r in runs:
        for t, x, y, th in r.get("trajectory", []):
            lines.append(f"{r['config']},{r['difficulty']},{int(r['goal_distance'])},{r['run']},{t},{x},{y},{th}")
    return "\n".join(lines) + "\n"


def cmd_run(args) -> int:
    root = config.load(args.config, args.set)
    seed = _seed(args)
    cfg = root.pipeline_for(args.difficulty, args.mode)
    (world, refs), = bench.pick_worlds(args.difficulty, 1, seed, goals=(args.goal,))
    rec = run_episode(world, RobotState(0.0, 0.0, 0.0), (args.goal, 0.0), cfg, seed)
    ref = refs[args.goal]
    m = bench.compute_metrics([rec], ref)
    doc = {
        "format": "navbench-run/1",
        "config": config.to_dict(root),
        "difficulty": args.difficulty,
        "mode": args.mode,
        "world_seed": world.seed,
        "goal_distance": args.goal,
        "reference_length": round(ref.total, 6),
        "metrics": {"sr": m.sr, "spl": round(m.spl, 6), "dr": round(m.dr, 6)},
        "record": rec.to_dict(),
    }
    stem = os.path.join(args.out, f"run-{args.difficulty}-{int(args.goal)}m-{args.mode}-s{seed}")
    _write(stem + ".json", json.dumps(doc, sort_keys=True, indent=1) + "\n")
    _write(stem + ".csv", "t,x,y,theta\n" + "".join(f"{t},{x},{y},{th}\n" for t, x, y, th in doc["record"]["trajectory"]))
    print(f"outcome: {rec.outcome}")
    print(f"path length: {rec.path_length:.2f} m (reference {ref.total:.2f} m)")
    print(f"goal distance: {args.goal:.0f} m")
    print(f"record: {stem}.json")
    return 0


def _grid_args(args, root):
    diffs = args.difficulty or (QUICK_DIFFICULTIES if args.quick else tuple(root.bench.difficulties))
    n = args.n if args.n is not None else (QUICK_N if args.quick else root.bench.n_runs)
    if n < 1:
        raise config.ConfigError("--n must be >= 1")
    return diffs, n


def _per_difficulty(root, diffs, make):
    """Configs may differ per difficulty (e.g. cloth stiffness), so matrices run difficulty by difficulty."""
    parts = [make(d) for d in diffs]
    merged = dict(parts[0])
    for p in parts[1:]:
        merged["difficulties"] = merged["difficulties"] + p["difficulties"]
        merged["cells"] = merged["cells"] + p["cells"]
        merged["averages"] = merged["averages"] + p["averages"]
        merged["runs"] = merged["runs"] + p["runs"]
    merged["configs_by_difficulty"] = {p["difficulties"][0]: p["configs"] for p in parts}
    return merged


def cmd_bench(args) -> int:
    root = config.load(args.config, args.set)
    seed = _seed(args)
    diffs, n = _grid_args(args, root)
    modes = (args.mode,) if args.mode else args.modes
    jobs = _jobs(args, root)
    goals = tuple(root.bench.goals)

    def make(d):
        cfgs = {m: root.pipeline_for(d, m) for m in modes}
        return bench.run_matrix([d], goals, cfgs, n, seed, jobs)

    report = _per_difficulty(root, diffs, make)
    report["root_config"] = config.to_dict(root)
    os.makedirs(args.out, exist_ok=True)
    bench.write_report(report, args.out, "bench")
    tables = bench.render_results(report)
    _write(os.path.join(args.out, "bench-tables.txt"), tables)
    _write(os.path.join(args.out, "bench-trajectories.csv"), _trajectory_csv(report["runs"]))
    print(tables, end="")
    print(f"report: {os.path.join(args.out, 'bench.json')}")
    return 0


def cmd_ablate(args) -> int:
    root = config.load(args.config, args.set)
    seed = _seed(args)
    diffs, n = _grid_args(args, root)
    if not args.difficulty and not args.quick:
        diffs = tuple(root.bench.difficulties)
    jobs = _jobs(args, root)
    goals = tuple(root.bench.goals)

    def make(d):
        cfgs = bench.ablation_configs(root.pipeline_for(d, "mono"))
        return bench.run_matrix([d], goals, cfgs, n, seed, jobs)

    report = _per_difficulty(root, diffs, make)
    report["root_config"] = config.to_dict(root)
    report["ablation"] = bench.ablation_table(report)
    bench.write_report(report, args.out, "ablation")
    table = bench.render_ablation(report)
    _write(os.path.join(args.out, "ablation-table.txt"), table)
    _write(os.path.join(args.out, "ablation-trajectories.csv"), _trajectory_csv(report["runs"]))
    print(table, end="")
    print(f"report: {os.path.join(args.out, 'ablation.json')}")
    return 0


def cmd_export_world(args) -> int:
    seed = _seed(args)
    if args.kind == "grass-corridor":
        world = grass_corridor_world(seed)
    else:
        world = generate_world(args.difficulty, seed)
    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    save_world(world, args.out)
    print(f"world: {args.out}")
    return 0


COMMANDS = {"run": cmd_run, "bench": cmd_bench, "ablate": cmd_ablate, "export-world": cmd_export_world}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except config.ConfigError as exc:
        print(f"navbench: config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
