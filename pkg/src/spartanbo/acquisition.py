"""Expected improvement over the MCMC mixture and its maximisation.

EI is the plain sum over the ``m`` posterior samples (no ``1/m`` factor);
this scales the criterion but leaves its maximiser unchanged.
"""

from dataclasses import dataclass
import math
import warnings

import numpy as np
from scipy.linalg import solve_triangular
from scipy.optimize import minimize
from scipy.special import ndtr
from scipy.stats import qmc

from ._accel import USE_NUMBA, jit
from .kernels import _cross_jit, cross_covariance

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
SMALL_BATCH = 32


@dataclass(frozen=True)
class AcquisitionBudget:
    global_evaluations: int = 1000  # per input dimension
    local_refinement_evaluations: int = 200
    n_refine: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.global_evaluations < 1 or self.local_refinement_evaluations < 1:
            raise ValueError("acquisition budgets must be positive")


def ei_terms(mu, sigma, rho):
    """Per-component EI for minimisation; handles ``sigma == 0`` exactly."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    gap = rho - mu
    out = np.maximum(gap, 0.0)
    pos = sigma > 0
    if np.any(pos):
        s = sigma[pos]
        with np.errstate(over="ignore"):  # huge or infinite z is handled by ndtr and exp
            z = gap[pos] / s
            out[pos] = gap[pos] * ndtr(z) + s * _INV_SQRT_2PI * np.exp(-0.5 * z * z)
    return np.maximum(out, 0.0)


@jit
def _ensemble_moments_jit(Xq, X, code, n_local, thetas, geoms, Ls, alphas, betas):
    m = thetas.shape[0]
    k = Xq.shape[0]
    n = X.shape[0]
    mu = np.empty((m, k))
    sd = np.empty((m, k))
    v = np.empty(n)
    for s in range(m):
        Ks = _cross_jit(Xq, X, code, n_local, thetas[s], geoms[s])
        L = Ls[s]
        for q in range(k):
            acc = betas[s]
            ss = 0.0
            for i in range(n):
                acc += Ks[q, i] * alphas[s, i]
                t = Ks[q, i]
                for j in range(i):
                    t -= L[i, j] * v[j]
                v[i] = t / L[i, i]
                ss += v[i] * v[i]
            mu[s, q] = acc
            var = 1.0 - ss
            sd[s, q] = math.sqrt(var) if var > 0.0 else 0.0
    return mu, sd


def _ensemble_moments_np(ensemble, Xq):
    mus, sds = [], []
    for model in ensemble.models:
        Ks = cross_covariance(Xq, model.data.X, model.spec, model.theta, model.geom)
        mus.append(model.beta + Ks @ model.alpha)
        v = solve_triangular(model.L, Ks.T, lower=True, check_finite=False)
        sds.append(np.sqrt(np.maximum(1.0 - np.sum(v * v, axis=0), 0.0)))
    return np.array(mus), np.array(sds)


def _packed(ensemble):
    packed = getattr(ensemble, "_packed", None)
    if packed is None:
        models = ensemble.models
        packed = (
            np.ascontiguousarray(models[0].data.X),
            models[0].spec.code,
            models[0].spec.spartan_m,
            np.ascontiguousarray(np.stack([m.theta for m in models])),
            np.ascontiguousarray(np.stack([m.geom for m in models])),
            np.ascontiguousarray(np.stack([m.L for m in models])),
            np.ascontiguousarray(np.stack([m.alpha for m in models])),
            np.array([m.beta for m in models]),
        )
        ensemble._packed = packed
    return packed


def ensemble_moments(ensemble, Xq):
    """Standardised per-sample predictive means and standard deviations."""
    Xq = np.ascontiguousarray(np.atleast_2d(Xq), dtype=float)
    if USE_NUMBA and Xq.shape[0] <= SMALL_BATCH and ensemble.models[0].spec.family != "hamming":
        return _ensemble_moments_jit(Xq, *_packed(ensemble))
    return _ensemble_moments_np(ensemble, Xq)


def _ei_standardized(ensemble, Xq, rho_std):
    mu, sd = ensemble_moments(ensemble, Xq)
    return ei_terms(mu, sd, rho_std).sum(axis=0)


def expected_improvement(ensemble, x, rho):
    """EI at normalised point(s) ``x`` for incumbent ``rho`` (objective units).

    Returns a float for a single point, an array for a batch.
    """
    x = np.asarray(x, dtype=float)
    data = ensemble.data
    rho_std = (rho - data.y_mean) / data.y_scale
    ei = data.y_scale * _ei_standardized(ensemble, np.atleast_2d(x), rho_std)
    return float(ei[0]) if x.ndim == 1 else ei


def candidate_set(d, n, seed):
    """Scrambled Sobol points in ``[0, 1]^d`` (deterministic per seed)."""
    sampler = qmc.Sobol(d, scramble=True, seed=seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return sampler.random(n)


def maximize_acquisition(ensemble, rho, budget=None):
    """Two-stage EI maximisation over ``[0, 1]^d``.

    A Sobol candidate set (``global_evaluations * d`` points) is scored, the
    best ``n_refine`` candidates are polished with bounded Nelder-Mead, and
    the best point seen is returned. Ties keep the lowest candidate index.
    """
    budget = budget or AcquisitionBudget()
    data = ensemble.data
    d = data.dim
    rho_std = (rho - data.y_mean) / data.y_scale
    cands = candidate_set(d, budget.global_evaluations * d, budget.seed)
    ei = _ei_standardized(ensemble, cands, rho_std)
    best_idx = int(np.argmax(ei))
    best_x, best_ei = cands[best_idx], float(ei[best_idx])
    if best_ei <= 0.0:
        return best_x.copy()

    order = np.argsort(-ei, kind="stable")[: budget.n_refine]
    bounds = [(0.0, 1.0)] * d

    def negative(x):
        return -float(_ei_standardized(ensemble, np.clip(x, 0.0, 1.0)[None, :], rho_std)[0]) / best_ei

    for idx in order:
        res = minimize(
            negative,
            cands[idx],
            method="Nelder-Mead",
            bounds=bounds,
            options={"maxfev": budget.local_refinement_evaluations, "xatol": 1e-7, "fatol": 1e-12},
        )
        x = np.clip(res.x, 0.0, 1.0)
        val = -negative(x) * best_ei
        if val > best_ei:
            best_x, best_ei = x, val
    return np.array(best_x, dtype=float)
