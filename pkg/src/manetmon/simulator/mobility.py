"""Random-waypoint motion."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["Motion", "start_motion", "rwp_step"]


@dataclass
class Motion:
    x: float
    y: float
    wx: float
    wy: float
    pause_left: float = 0.0  # seconds


def _waypoint(area, rng: np.random.Generator) -> tuple[float, float]:
    return float(rng.uniform(0.0, area[0])), float(rng.uniform(0.0, area[1]))


def start_motion(x: float, y: float, area, rng: np.random.Generator) -> Motion:
    wx, wy = _waypoint(area, rng)
    return Motion(float(x), float(y), wx, wy)


def rwp_step(m: Motion, dt_s: float, speed: float, area, rng: np.random.Generator,
             pause_s: float = 0.0) -> Motion:
    """Advance one node by ``dt_s`` seconds.

    Travel is along straight legs at constant speed; time left over after
    reaching a waypoint is spent pausing and then on the next leg.
    """
    if speed <= 0:
        raise ValueError("speed must be positive")
    m = Motion(m.x, m.y, m.wx, m.wy, m.pause_left)
    left = dt_s
    while left > 1e-12:
        if m.pause_left > 0:
            used = min(m.pause_left, left)
            m.pause_left -= used
            left -= used
            continue
        dx, dy = m.wx - m.x, m.wy - m.y
        dist = math.hypot(dx, dy)
        reach = speed * left
        if reach < dist:
            m.x += dx / dist * reach
            m.y += dy / dist * reach
            break
        m.x, m.y = m.wx, m.wy
        left -= dist / speed
        m.wx, m.wy = _waypoint(area, rng)
        m.pause_left = pause_s
    return m
