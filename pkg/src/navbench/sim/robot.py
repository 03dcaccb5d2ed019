"""Differential-drive robot surrogate."""
from __future__ import annotations

import math

from ..geometry import RobotState
from .world import World


class Collision(RuntimeError):
    def __init__(self, state: RobotState, clearance: float):
        super().__init__(f"robot disc hit an obstacle at ({state.x:.2f}, {state.y:.2f}), clearance {clearance:.3f}")
        self.state = state
        self.clearance = clearance


def _limit(target: float, current: float, max_step: float) -> float:
    return current + min(max(target - current, -max_step), max_step)


def step_robot(state: RobotState, cmd, dt: float, world: World | None = None, *, a_max: float = 1.0,
               alpha_max: float = 4.0, robot_radius: float = 0.45) -> RobotState:
    """Advance the unicycle by ``dt`` under a rate-limited command.

    Raises :class:`Collision` when the body disc overlaps a solid obstacle;
    grass is driven through.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    v = _limit(float(cmd[0]), state.v, a_max * dt)
    w = _limit(float(cmd[1]), state.omega, alpha_max * dt)
    th = state.theta
    if abs(w) > 1e-6:
        th1 = th + w * dt
        x = state.x + v / w * (math.sin(th1) - math.sin(th))
        y = state.y - v / w * (math.cos(th1) - math.cos(th))
    else:
        th1 = th + w * dt
        x = state.x + v * math.cos(th) * dt
        y = state.y + v * math.sin(th) * dt
    nxt = RobotState(x, y, th1, v, w)
    if world is not None:
        c = float(world.clearance((x, y))[0])
        if c < robot_radius:
            raise Collision(nxt, c)
    return nxt
