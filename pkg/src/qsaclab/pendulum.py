"""Deterministic pendulum swing-up task.

Classic frictionless pendulum: angle 0 is upright, torque is the single
continuous action in [-2, 2], and an episode is a fixed 200-step time
limit.  Dynamics and reward are frozen here for bit-reproducibility:

    theta_dot' = clamp(theta_dot + (3g/(2l) sin(theta) + 3/(m l^2) a) dt, -8, 8)
    theta'     = theta + theta_dot' * dt
    reward     = -(wrap(theta)^2 + 0.1 theta_dot^2 + 0.001 a^2)

with g=10, m=1, l=1, dt=0.05 and the reward computed from the
pre-transition state.  wrap maps angles to (-pi, pi].  The observation is
(cos theta, sin theta, theta_dot).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GRAVITY = 10.0
MASS = 1.0
LENGTH = 1.0
DT = 0.05
MAX_SPEED = 8.0
MAX_TORQUE = 2.0
EPISODE_STEPS = 200

# tightest reward is 0 (upright, at rest, no torque); the loosest is bounded
REWARD_MIN = -(np.pi**2 + 0.1 * MAX_SPEED**2 + 0.001 * MAX_TORQUE**2)


@dataclass
class PendulumState:
    theta: float
    theta_dot: float
    step_count: int = 0


def wrap_angle(x: float) -> float:
    """Map an angle to (-pi, pi]."""
    return np.pi - (np.pi - x) % (2.0 * np.pi)


def observe(state: PendulumState) -> np.ndarray:
    return np.array([np.cos(state.theta), np.sin(state.theta), state.theta_dot])


def reset(rng: np.random.Generator) -> tuple[PendulumState, np.ndarray]:
    """Start at a uniform random angle in [-pi, pi] and velocity in [-1, 1]."""
    state = PendulumState(theta=rng.uniform(-np.pi, np.pi), theta_dot=rng.uniform(-1.0, 1.0))
    return state, observe(state)


def step(state: PendulumState, action: float) -> tuple[PendulumState, np.ndarray, float, bool]:
    """One transition; returns (next_state, observation, reward, done).

    ``done`` fires at the 200-step time limit.  Stepping a finished
    episode is a contract violation.
    """
    if state.step_count >= EPISODE_STEPS:
        raise RuntimeError("episode already finished; reset the environment")
    a = float(np.clip(action, -MAX_TORQUE, MAX_TORQUE))
    reward = -(wrap_angle(state.theta) ** 2 + 0.1 * state.theta_dot**2 + 0.001 * a**2)
    accel = 3.0 * GRAVITY / (2.0 * LENGTH) * np.sin(state.theta) + 3.0 / (MASS * LENGTH**2) * a
    theta_dot = float(np.clip(state.theta_dot + accel * DT, -MAX_SPEED, MAX_SPEED))
    theta = state.theta + theta_dot * DT
    nxt = PendulumState(theta, theta_dot, state.step_count + 1)
    return nxt, observe(nxt), float(reward), nxt.step_count == EPISODE_STEPS
