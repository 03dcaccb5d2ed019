import math
from dataclasses import replace

import numpy as np
import pytest

from navbench.depth import AlphaOutOfRange
from navbench.geometry import RobotState
from navbench.planning import PlannerConfig, build_costmap
from navbench.runtime import (ABORT, COLLISION, DEFAULT_RATES, LIDAR, MONO, SUCCESS, TIMEOUT, Pipeline,
                              PipelineConfig, default_time_budget, polyline_length, run_episode)
from navbench.sim.sensors import AnchorModel, DepthArtifacts
from navbench.sim.world import Box, Cylinder, World

EMPTY = World("easy", 0)
START = RobotState(0.0, 0.0, 0.0)


def test_default_rates_follow_mode():
    assert PipelineConfig().rates == DEFAULT_RATES[LIDAR]
    assert PipelineConfig(perception_mode=MONO).rates == DEFAULT_RATES[MONO]


def test_tick_periods():
    assert PipelineConfig().tick_periods() == (12, 15, 20)
    assert PipelineConfig(perception_mode=MONO).tick_periods() == (24, 40, 20)


def test_incompatible_sim_step_rejected():
    with pytest.raises(ValueError):
        PipelineConfig(sim_dt=1.0 / 120.0)
    with pytest.raises(ValueError):
        PipelineConfig(rates=(20.0, 7.0, 12.0))


@pytest.mark.parametrize("bad", [dict(perception_mode="radar"), dict(rates=(1.0, 2.0)), dict(rates=(0.0, 1.0, 1.0)),
                                 dict(sim_dt=0.0), dict(record_dt=1e-4)])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        PipelineConfig(**bad)


def test_alpha_validation():
    with pytest.raises(AlphaOutOfRange):
        PipelineConfig(alpha=1.2)


def test_disabling_stages_is_exact_limit():
    cfg = PipelineConfig(edge_masking=False, smoothing=False)
    assert cfg.effective_alpha == 0.0
    assert cfg.mask_params() == (math.inf, 0)
    on = PipelineConfig()
    assert on.effective_alpha == on.alpha and on.mask_params() == (on.grad_threshold, on.mask_radius)


def test_time_budget_and_polyline():
    assert default_time_budget((0, 0), (30, 0), 1.5) > 30 / 1.5
    assert polyline_length(np.array([[0, 0], [3, 4], [3, 5]])) == 6.0
    assert polyline_length(np.zeros((1, 2))) == 0.0


@pytest.mark.parametrize("mode", [LIDAR, MONO])
def test_empty_world_success(mode):
    rec = run_episode(EMPTY, START, (10.0, 0.0), PipelineConfig(perception_mode=mode), seed=1)
    assert rec.outcome == SUCCESS
    # the run ends on entering the 2 m goal disc
    assert 8.0 - 1e-6 <= rec.path_length <= 10.0
    assert math.hypot(rec.xy[-1, 0] - 10.0, rec.xy[-1, 1]) <= 2.0
    assert rec.planner_failures == 0


def test_record_layout():
    rec = run_episode(EMPTY, START, (10.0, 0.0), PipelineConfig(), seed=1)
    assert rec.states.shape == (len(rec.times), 5)
    assert np.allclose(np.diff(rec.times[:-1]), 0.1)
    assert rec.times[-1] == pytest.approx(rec.duration)
    d = rec.to_dict()
    assert d["outcome"] == SUCCESS and len(d["trajectory"]) == len(rec.times)


def test_first_command_waits_for_a_map():
    # nothing is published before the first perception, mapping and planning periods elapse
    rec = run_episode(EMPTY, START, (10.0, 0.0), PipelineConfig(), seed=1, time_budget=0.1)
    assert rec.outcome == TIMEOUT
    np.testing.assert_allclose(rec.xy, 0.0)


def test_ringed_goal_aborts():
    ring = tuple(Cylinder((10 + 2.5 * math.cos(a), 2.5 * math.sin(a), 0.0), 0.4, 3.0)
                 for a in np.linspace(0, 2 * math.pi, 26, endpoint=False))
    rec = run_episode(World("medium", 0, cylinders=ring), START, (10.0, 0.0), PipelineConfig(), seed=0)
    assert rec.outcome == ABORT
    assert rec.planner_failures >= 10


def test_blind_robot_collides():
    w = World("easy", 0, boxes=(Box((5.0, 0.0, 0.5), (1.0, 4.0, 1.0)),))
    cfg = PipelineConfig(planner=PlannerConfig(height_threshold=5.0))
    rec = run_episode(w, START, (10.0, 0.0), cfg, seed=0)
    assert rec.outcome == COLLISION
    assert rec.xy[-1, 0] < 5.0


def test_start_in_obstacle_rejected():
    w = World("easy", 0, boxes=(Box((0.0, 0.0, 0.5), (1.0, 1.0, 1.0)),))
    with pytest.raises(ValueError):
        run_episode(w, START, (10.0, 0.0), PipelineConfig(), seed=0)


def test_timeout_with_tiny_budget():
    rec = run_episode(EMPTY, START, (10.0, 0.0), PipelineConfig(), seed=0, time_budget=2.0)
    assert rec.outcome == TIMEOUT and rec.duration == pytest.approx(2.0)


@pytest.mark.parametrize("mode", [LIDAR, MONO])
def test_episode_deterministic(mode):
    w = World("medium", 0, cylinders=(Cylinder((5.0, 0.3, 0.0), 0.4, 3.0),))
    cfg = PipelineConfig(perception_mode=mode)
    a = run_episode(w, START, (10.0, 0.0), cfg, seed=3)
    b = run_episode(w, START, (10.0, 0.0), cfg, seed=3)
    assert a.to_dict() == b.to_dict()
    assert a.states.tobytes() == b.states.tobytes()


def stationary_costmap(world, cfg, frames=4):
    pipe = Pipeline(world, (10.0, 0.0), cfg, seed=0)
    for t in range(frames):
        pipe.cloud = pipe.sense(START, t)
        pipe.cloud_version += 1
        pipe.map = pipe.update_map(START, t)
    p = cfg.planner
    return build_costmap(pipe.map, p.height_threshold, p.robot_radius)


def test_artifact_free_mono_matches_lidar_costmap():
    w = World("easy", 0, boxes=(Box((5.0, 1.0, 0.5), (1.0, 1.0, 1.0)), Box((7.0, -2.0, 0.6), (0.8, 0.8, 1.2))))
    lidar = stationary_costmap(w, PipelineConfig())
    mono_cfg = PipelineConfig(perception_mode=MONO, artifacts=DepthArtifacts.none(),
                              anchors=AnchorModel(depth_noise_sigma=0.0, glitch_prob=0.0))
    mono = stationary_costmap(w, mono_cfg)
    assert lidar.blocked.sum() > 100
    agree = np.mean(lidar.blocked == mono.blocked)
    assert agree >= 0.99


def test_mono_perception_failures_are_skipped():
    # staring into the sky yields no usable frame rather than an exception
    cfg = PipelineConfig(perception_mode=MONO, camera=replace(PipelineConfig().camera, pitch=-1.2))
    pipe = Pipeline(EMPTY, (10.0, 0.0), cfg, seed=0)
    assert pipe.sense(START, 0) is None
