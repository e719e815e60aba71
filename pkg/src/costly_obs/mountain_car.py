"""Ground-truth Mountain Car physics.

Pure functions over an immutable ``TrueState``; no environment object lives
here. Constants follow the classic-control reference environment, except
that the episode ends when the car reaches position 0.5.
"""
from __future__ import annotations

import enum
import math
from typing import NamedTuple

import numpy as np

MIN_POSITION = -1.2
MAX_POSITION = 0.6
MAX_SPEED = 0.07
GOAL_POSITION = 0.5
FORCE = 0.001
GRAVITY = 0.0025
START_LOW = -0.6
START_HIGH = -0.4


class Motion(enum.IntEnum):
    LEFT = 0
    COAST = 1
    RIGHT = 2

    @property
    def force(self) -> int:
        return int(self) - 1


class TrueState(NamedTuple):
    position: float
    velocity: float


def reset(rng: np.random.Generator) -> TrueState:
    """Draw a start state: position ~ U[-0.6, -0.4], velocity 0."""
    return TrueState(float(rng.uniform(START_LOW, START_HIGH)), 0.0)


def step(s: TrueState, m: Motion | int) -> tuple[TrueState, bool]:
    p, v = s
    v = v + (int(m) - 1) * FORCE - GRAVITY * math.cos(3.0 * p)
    if v > MAX_SPEED:
        v = MAX_SPEED
    elif v < -MAX_SPEED:
        v = -MAX_SPEED
    p = p + v
    if p > MAX_POSITION:
        p = MAX_POSITION
    elif p <= MIN_POSITION:
        p = MIN_POSITION
        v = 0.0
    return TrueState(p, v), p >= GOAL_POSITION


def mechanical_energy(s: TrueState) -> float:
    """Potential plus kinetic energy used for reward shaping."""
    p, v = s
    return math.sin(3.0 * p) * GRAVITY + 0.5 * v * v
