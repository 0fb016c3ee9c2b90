"""Mountain car with a 7-weight perceptron policy.

Dynamics (classic formulation): position in [-1.2, 0.6], goal at 0.5,
``v' = v + 0.001 a - 0.0025 cos(3 x)`` with ``|v'| <= 0.07``, an inelastic
wall at -1.2 (velocity reset to zero), start at ``x = -0.5, v = 0``, reward
-1 per step until the goal is reached, horizon 500.

The policy sees position, velocity ``x_t - x_{t-1}`` and acceleration
``v_t - v_{t-1}``::

    a = tanh(w7 * (w1 + w2 x + w3 v + w4 dv + w6 tanh(w5 dv)))

Weights are searched in ``[0, 1]^7`` and mapped to the real line with
``w = tan((pi - eps) w01 - pi / 2)``.
"""

from dataclasses import dataclass
import math

import numpy as np

from ._accel import jit, pick

X_MIN, X_MAX, X_GOAL = -1.2, 0.6, 0.5
V_MAX = 0.07
X_START = -0.5
HORIZON = 500
EPSILON_PI = 1e-4
WIRINGS = {"inner": 0, "scaled": 1}


@dataclass(frozen=True)
class EpisodeResult:
    total_reward: float
    steps: int
    reached_goal: bool


def map_policy_weights(w01, eps=EPSILON_PI):
    w01 = np.asarray(w01, dtype=float)
    return np.tan((math.pi - eps) * w01 - math.pi / 2.0)


def unmap_policy_weights(w, eps=EPSILON_PI):
    """Inverse of :func:`map_policy_weights`."""
    return (np.arctan(np.asarray(w, dtype=float)) + math.pi / 2.0) / (math.pi - eps)


def _run_episode(w, horizon, x0, v0, wiring, log):
    """Simulate; ``log[t] = (position, action)`` is filled for each step."""
    x = x0
    v = v0
    x_prev = x0
    v_obs_prev = 0.0
    reward = 0.0
    for t in range(horizon):
        v_obs = x - x_prev
        dv = v_obs - v_obs_prev
        s = w[0] + w[1] * x + w[2] * v_obs + w[3] * dv + w[5] * math.tanh(w[4] * dv)
        if wiring == 0:
            a = math.tanh(w[6] * s)
        else:
            a = min(1.0, max(-1.0, w[6] * math.tanh(s)))
        v = v + 0.001 * a - 0.0025 * math.cos(3.0 * x)
        v = min(V_MAX, max(-V_MAX, v))
        x_prev = x
        v_obs_prev = v_obs
        x = x + v
        if x < X_MIN:
            x = X_MIN
            v = 0.0
        if x > X_MAX:
            x = X_MAX
        log[t, 0] = x
        log[t, 1] = a
        reward -= 1.0
        if x >= X_GOAL:
            return reward, t + 1, True
    return reward, horizon, False


_episode = pick(jit(_run_episode), _run_episode)


def mountain_car_episode(w01, horizon=HORIZON, rng=None, eps=EPSILON_PI, wiring="inner", start_noise=0.0, return_log=False):
    """Run one episode. The start state is fixed unless ``start_noise > 0``,
    in which case the start position is drawn from ``rng``. With
    ``return_log`` the per-step ``(position, action)`` rows come back too."""
    w = np.ascontiguousarray(map_policy_weights(w01, eps), dtype=float)
    if w.shape != (7,):
        raise ValueError("the policy has exactly 7 weights")
    x0 = X_START
    if start_noise > 0:
        rng = np.random.default_rng(rng)
        x0 += start_noise * (2.0 * rng.random() - 1.0)
    log = np.empty((max(int(horizon), 1), 2))
    reward, steps, reached = _episode(w, int(horizon), float(x0), 0.0, WIRINGS[wiring], log)
    result = EpisodeResult(float(reward), int(steps), bool(reached))
    return (result, log[:steps]) if return_log else result


def mountain_car_objective(w01, horizon=HORIZON, eps=EPSILON_PI, wiring="inner"):
    """Negated total reward, i.e. steps used (``horizon`` on failure)."""
    return -mountain_car_episode(w01, horizon, eps=eps, wiring=wiring).total_reward
