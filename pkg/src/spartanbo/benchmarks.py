"""Benchmark objectives with raw-space bounds and known optima.

All objectives are minimised. Points outside the declared bounds raise
``ValueError``.
"""

from dataclasses import dataclass
import math

import numpy as np

# Hartmann 6-D constants
HARTMANN_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
HARTMANN_A = np.array(
    [
        [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
        [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
        [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
        [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
    ]
)
HARTMANN_P = 1e-4 * np.array(
    [
        [1312, 1696, 5569, 124, 8283, 5886],
        [2329, 4135, 8307, 3736, 1004, 9991],
        [2348, 1451, 3522, 2883, 3047, 6650],
        [4047, 8828, 8732, 5743, 1091, 381],
    ]
)


def exp2d(x):
    x = np.asarray(x, dtype=float)
    return float(x[0] * math.exp(-x[0] ** 2 - x[1] ** 2))


def michalewicz(x, m=10, literal=False):
    """Michalewicz function; ``literal=True`` drops the conventional minus sign."""
    x = np.asarray(x, dtype=float)
    i = np.arange(1, x.size + 1)
    s = float(np.sum(np.sin(x) * np.sin(i * x * x / math.pi) ** (2 * m)))
    return s if literal else -s


def branin(x):
    x1, x2 = float(x[0]), float(x[1])
    a = x2 - 5.1 / (4.0 * math.pi**2) * x1 * x1 + 5.0 / math.pi * x1 - 6.0
    return a * a + 10.0 * (1.0 - 1.0 / (8.0 * math.pi)) * math.cos(x1) + 10.0


def hartmann6(x, alpha=HARTMANN_ALPHA):
    x = np.asarray(x, dtype=float)
    inner = np.sum(HARTMANN_A * (x - HARTMANN_P) ** 2, axis=1)
    return float(-np.sum(alpha * np.exp(-inner)))


MIXED_TOY_PENALTY = (4.0, 0.0, 9.0)


def mixed_toy(x_c, x_d):
    """Branin on the continuous part plus a per-category offset (best: 1)."""
    return branin(x_c) + MIXED_TOY_PENALTY[int(x_d[0])]


@dataclass(frozen=True)
class Benchmark:
    name: str
    func: object
    bounds: np.ndarray  # (d, 2)
    optimum_x: tuple = None
    optimum_value: float = None
    cardinalities: tuple = None  # discrete part, mixed objectives only
    params: tuple = ()

    @property
    def dim(self):
        return self.bounds.shape[0]

    @property
    def mixed(self):
        return self.cardinalities is not None

    def check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"{self.name} expects {self.dim} inputs, got shape {x.shape}")
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        tol = 1e-9 * (hi - lo)
        if np.any(x < lo - tol) or np.any(x > hi + tol):
            raise ValueError(f"point outside the bounds of {self.name}: {x}")
        return np.clip(x, lo, hi)

    def __call__(self, x, x_d=None):
        x = self.check(x)
        if self.mixed:
            x_d = np.asarray(x_d, dtype=int)
            if x_d.shape != (len(self.cardinalities),) or np.any(x_d < 0) or np.any(x_d >= self.cardinalities):
                raise ValueError(f"invalid discrete component {x_d} for {self.name}")
            return float(self.func(x, x_d))
        return float(self.func(x))


def _box(lo, hi, d):
    return np.tile([float(lo), float(hi)], (d, 1))


# Known optima, each confirmed by dense-grid search plus local polish
_BRANIN_X = (math.pi, 2.275)
_BRANIN_F = 0.39788735772973816
_EXP2D_X = (-1.0 / math.sqrt(2.0), 0.0)
_EXP2D_F = -math.exp(-0.5) / math.sqrt(2.0)
_HARTMANN_X = (0.20168951, 0.15001069, 0.47687398, 0.27533243, 0.31165162, 0.65730054)
_HARTMANN_F = -3.322368011415515
_MICHALEWICZ = {
    # (d, m): (location, value)
    (2, 10): ((2.202905520, 1.570796327), -1.801303410098554),
    (5, 10): ((2.202905520, 1.570796327, 1.284991564, 1.923058470, 1.720469850), -4.687658179088402),
}


def make_benchmark(name, **params):
    """Look up a benchmark by registry name.

    ``michalewicz`` takes ``d`` (default 10) and ``m`` (default 10);
    ``mountain_car`` takes ``horizon`` and ``eps``.
    """
    if name == "exp2d":
        return Benchmark("exp2d", exp2d, _box(-2, 18, 2), _EXP2D_X, _EXP2D_F)
    if name == "branin":
        return Benchmark("branin", branin, np.array([[-5.0, 10.0], [0.0, 15.0]]), _BRANIN_X, _BRANIN_F)
    if name == "hartmann6":
        return Benchmark("hartmann6", hartmann6, _box(0, 1, 6), _HARTMANN_X, _HARTMANN_F)
    if name == "michalewicz":
        d = int(params.get("d", 10))
        m = int(params.get("m", 10))
        literal = bool(params.get("literal", False))
        known = _MICHALEWICZ.get((d, m)) if not literal else None

        def func(x):
            return michalewicz(x, m, literal)

        return Benchmark(
            "michalewicz",
            func,
            _box(0, math.pi, d),
            known[0] if known else None,
            known[1] if known else None,
            params=(("d", d), ("m", m), ("literal", literal)),
        )
    if name == "mountain_car":
        from .mountain_car import EPSILON_PI, HORIZON, mountain_car_objective

        horizon = int(params.get("horizon", HORIZON))
        eps = float(params.get("eps", EPSILON_PI))
        wiring = params.get("wiring", "inner")

        def func(x):
            return mountain_car_objective(x, horizon=horizon, eps=eps, wiring=wiring)

        return Benchmark(
            "mountain_car", func, _box(0, 1, 7), params=(("horizon", horizon), ("eps", eps), ("wiring", wiring))
        )
    if name == "mixed_toy":
        return Benchmark(
            "mixed_toy",
            mixed_toy,
            np.array([[-5.0, 10.0], [0.0, 15.0]]),
            _BRANIN_X,
            _BRANIN_F + min(MIXED_TOY_PENALTY),
            cardinalities=(len(MIXED_TOY_PENALTY),),
        )
    raise KeyError(f"unknown benchmark {name!r}; known: {', '.join(BENCHMARKS)}")


BENCHMARKS = ("exp2d", "michalewicz", "branin", "hartmann6", "mountain_car", "mixed_toy")
