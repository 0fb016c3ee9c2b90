"""Time the compiled and numpy paths of the hot routines.

Usage::

    python benchmarks/bench_accel.py [--repeat 5] [--end-to-end]

Each routine is timed in this process by calling both implementations
directly. ``--end-to-end`` also times one short SBO run per backend in a
subprocess, with ``SPARTANBO_DISABLE_NUMBA`` set accordingly.
"""

import argparse
import math
import os
import subprocess
import sys
import timeit

import numpy as np

from spartanbo import gp
from spartanbo.acquisition import _ensemble_moments_jit, _ensemble_moments_np, _packed
from spartanbo.gp import _loglik_blocks_jit, _loglik_blocks_np
from spartanbo.inference import sample_hyperparameters
from spartanbo.kernels import (
    KernelSpec,
    SpartanHyperparams,
    _block_kernel_jit,
    _block_kernel_np,
    _cross_jit,
    _cross_np,
    _gram_jit,
    _gram_np,
    _weights_np,
    sq_dist_stack,
)
from spartanbo.mountain_car import _run_episode, map_policy_weights
from spartanbo._accel import jit

END_TO_END = """
import time
from spartanbo import backend_name, make_benchmark, RunConfig, run_sbo
cfg = RunConfig(budget=20, n_init=10, seed=0)
t = time.process_time()
run_sbo(cfg, make_benchmark("branin"))
print(backend_name(), time.process_time() - t)
"""


def cases(rng):
    n, d = 40, 2
    X = rng.random((n, d))
    y = np.sin(5 * X).sum(axis=1)
    y = (y - y.mean()) / y.std()
    hp = SpartanHyperparams([0.3, 0.2], [[0.05, 0.04]], [0.4, 0.6])
    theta, geom = hp.theta(), hp.geometry()
    D = sq_dist_stack(X)
    blocks = np.stack([_block_kernel_np(D, theta[:2], 2), _block_kernel_np(D, theta[2:4], 2)])
    lam = _weights_np(X, geom, theta[4:], 1)
    data = gp.Dataset.from_raw(X, y)
    ens = sample_hyperparameters(data, KernelSpec("spartan"), m=10, burnin=5, rng=0)
    Q = np.ascontiguousarray(rng.random((64, d)))
    episode_jit = jit(_run_episode)
    w = np.ascontiguousarray(map_policy_weights(np.full(7, 0.6)))
    log = np.empty((500, 2))
    return {
        "gram (spartan, n=40)": (
            lambda: _gram_jit(X, 2, 1, theta, geom, 1e-6),
            lambda: _gram_np(X, 2, 1, theta, geom, 1e-6),
        ),
        "cross (spartan, 64x40)": (
            lambda: _cross_jit(Q, X, 2, 1, theta, geom),
            lambda: _cross_np(Q, X, 2, 1, theta, geom),
        ),
        "block kernel (n=40)": (
            lambda: _block_kernel_jit(D, theta[:2], 2),
            lambda: _block_kernel_np(D, theta[:2], 2),
        ),
        "block log-likelihood (n=40)": (
            lambda: _loglik_blocks_jit(blocks, lam, 1e-6, y, 0, 0.0),
            lambda: _loglik_blocks_np(blocks, lam, 1e-6, y, 0, 0.0),
        ),
        "ensemble moments (m=10, 64 points)": (
            lambda: _ensemble_moments_jit(Q, *_packed(ens)),
            lambda: _ensemble_moments_np(ens, Q),
        ),
        "mountain car episode": (
            lambda: episode_jit(w, 500, -0.5, 0.0, 0, log),
            lambda: _run_episode(w, 500, -0.5, 0.0, 0, log),
        ),
    }


def best_time(func, repeat):
    number = max(1, int(0.05 / max(timeit.timeit(func, number=1), 1e-7)))
    return min(timeit.repeat(func, number=number, repeat=repeat)) / number


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--end-to-end", action="store_true")
    args = parser.parse_args(argv)

    print(f"{'routine':38s} {'numba':>11s} {'numpy':>11s} {'speedup':>8s}")
    for name, (fast, slow) in cases(np.random.default_rng(0)).items():
        fast()  # compile
        t_jit, t_np = best_time(fast, args.repeat), best_time(slow, args.repeat)
        print(f"{name:38s} {t_jit * 1e6:9.1f}us {t_np * 1e6:9.1f}us {t_np / t_jit:7.1f}x")

    if args.end_to_end:
        for flag in ("0", "1"):
            env = dict(os.environ, SPARTANBO_DISABLE_NUMBA=flag)
            res = subprocess.run([sys.executable, "-c", END_TO_END], env=env, capture_output=True, text=True, check=True)
            backend, seconds = res.stdout.split()
            print(f"SBO on branin, 20 evaluations, {backend:5s}: {float(seconds):.1f}s CPU")


if __name__ == "__main__":
    main()
