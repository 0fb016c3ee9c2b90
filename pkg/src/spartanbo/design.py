"""Initial experimental designs on the unit hypercube."""

import warnings

import numpy as np
from scipy.stats import qmc

DESIGNS = ("lhs", "sobol")


def latin_hypercube(p, d, rng):
    """One point per stratum ``[j/p, (j+1)/p)`` in every coordinate."""
    rng = np.random.default_rng(rng)
    return qmc.LatinHypercube(d, seed=rng).random(p)


def sobol(p, d):
    """First ``p`` points of the unscrambled Sobol sequence, skipping the origin."""
    with warnings.catch_warnings():
        # balance warning for non powers of two; the prefix is what we want
        warnings.simplefilter("ignore", UserWarning)
        return qmc.Sobol(d, scramble=False).random(p + 1)[1:]


def initial_design(kind, p, d, rng=None):
    if p < 1:
        raise ValueError("initial design needs at least one point")
    if kind == "lhs":
        return latin_hypercube(p, d, rng)
    if kind == "sobol":
        return sobol(p, d)
    raise ValueError(f"unknown design {kind!r}; choose from {DESIGNS}")
