"""Gaussian-process regression on the unit hypercube.

Models always live in normalised coordinates: inputs are mapped to
``[0, 1]^d`` and outputs standardised before fitting. Every function here
takes *normalised* query points and returns means/variances in the
objective's own units.

The mean is a constant ``beta``. By default it is the generalised least
squares estimate ``beta = 1'K^-1 y / 1'K^-1 1`` recomputed at each fit;
passing a number pins it (``mean=1.0`` gives the literal unit mean).
"""

from dataclasses import dataclass, replace
import math

import numpy as np
from scipy.linalg import solve_triangular

from ._accel import jit, pick
from .kernels import KernelSpec, _gram_jit, _gram_np, cross_covariance, gram

DEFAULT_NUGGET = 1e-6
JITTERS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
_LOG_2PI = math.log(2.0 * math.pi)


class FactorizationError(np.linalg.LinAlgError):
    """Gram matrix not positive definite even after maximum jitter."""


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray  # (n, d) in [0, 1]^d
    y: np.ndarray  # (n,) standardised outcomes
    lower: np.ndarray
    upper: np.ndarray
    y_mean: float = 0.0
    y_scale: float = 1.0

    @classmethod
    def from_raw(cls, X, y, bounds=None, standardize=True):
        """Build from raw-space points; ``bounds`` is a ``(d, 2)`` array.

        Without bounds ``X`` is taken to be normalised already.
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if X.shape[0] != y.shape[0] or X.shape[0] < 1:
            raise ValueError("need as many outcomes as points, and at least one")
        if not np.all(np.isfinite(y)):
            raise ValueError("outcomes must be finite")
        if bounds is None:
            lower, upper = np.zeros(X.shape[1]), np.ones(X.shape[1])
        else:
            bounds = np.asarray(bounds, dtype=float)
            lower, upper = bounds[:, 0].copy(), bounds[:, 1].copy()
        Xn = (X - lower) / (upper - lower)
        if np.any(Xn < -1e-12) or np.any(Xn > 1 + 1e-12):
            raise ValueError("points outside the declared bounds")
        Xn = np.clip(Xn, 0.0, 1.0)
        mean, scale = 0.0, 1.0
        if standardize:
            mean = float(np.mean(y))
            scale = float(np.std(y))
            if not np.isfinite(scale) or scale < 1e-300:
                scale = 1.0
        return cls(Xn, (y - mean) / scale, lower, upper, mean, scale)

    @classmethod
    def from_unit(cls, X_unit, y, bounds=None, standardize=True):
        """Like :meth:`from_raw` for points already in ``[0, 1]^d``."""
        data = cls.from_raw(X_unit, y, None, standardize)
        if bounds is None:
            return data
        bounds = np.asarray(bounds, dtype=float)
        return replace(data, lower=bounds[:, 0].copy(), upper=bounds[:, 1].copy())

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def dim(self):
        return self.X.shape[1]

    @property
    def raw_y(self):
        return self.y * self.y_scale + self.y_mean

    def to_raw(self, x_unit):
        return self.lower + np.asarray(x_unit) * (self.upper - self.lower)

    def append(self, x_unit, y_raw):
        """New dataset with one more point; standardisation stats are kept."""
        x_unit = np.atleast_2d(np.asarray(x_unit, dtype=float))
        y_std = (np.atleast_1d(np.asarray(y_raw, dtype=float)) - self.y_mean) / self.y_scale
        return replace(self, X=np.vstack([self.X, x_unit]), y=np.concatenate([self.y, y_std]))


@dataclass(frozen=True)
class Prediction:
    mean: float
    variance: float


@dataclass(frozen=True)
class GPModel:
    data: Dataset
    spec: KernelSpec
    theta: np.ndarray
    geom: np.ndarray
    nugget: float
    mean: object  # "gls" or a pinned float (standardised units)
    beta: float  # standardised units
    L: np.ndarray
    alpha: np.ndarray
    jitter: float = 0.0

    @property
    def mean_constant(self):
        """The constant mean in objective units."""
        return self.data.y_mean + self.data.y_scale * self.beta

    def predict(self, Xq):
        """Vectorised prediction: ``(means, variances)`` in objective units."""
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        Ks = cross_covariance(Xq, self.data.X, self.spec, self.theta, self.geom)
        mu = self.beta + Ks @ self.alpha
        v = solve_triangular(self.L, Ks.T, lower=True, check_finite=False)
        var = np.maximum(1.0 - np.sum(v * v, axis=0), 0.0)
        s = self.data.y_scale
        return self.data.y_mean + s * mu, s * s * var


def _cholesky_with_jitter(K):
    for jitter in JITTERS:
        A = K if jitter == 0.0 else K + jitter * np.eye(K.shape[0])
        try:
            L = np.linalg.cholesky(A)
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(L)):
            return L, jitter
    raise FactorizationError("Gram matrix is not positive definite after maximum jitter")


def _has_duplicates(X):
    return np.unique(X, axis=0).shape[0] < X.shape[0]


def _solve_mean(L, y, mean):
    a = solve_triangular(L, np.ones_like(y), lower=True, check_finite=False)
    b = solve_triangular(L, y, lower=True, check_finite=False)
    beta = float(a @ b / (a @ a)) if mean == "gls" else float(mean)
    white = b - beta * a
    alpha = solve_triangular(L.T, white, lower=False, check_finite=False)
    return beta, alpha


def fit(data, spec, theta, nugget=DEFAULT_NUGGET, geom=None, mean="gls"):
    """Factorise ``K(X, X) + nugget I`` and precompute the predictor."""
    theta = np.asarray(theta, dtype=float)
    if geom is None:
        geom = spec.geometry(data.dim)
    if nugget < 0:
        raise ValueError("nugget must be nonnegative")
    if nugget == 0 and _has_duplicates(data.X):
        raise FactorizationError("duplicate inputs need a positive nugget")
    K = _gram_for(data.X, spec, theta, geom, nugget)
    L, jitter = _cholesky_with_jitter(K)
    beta, alpha = _solve_mean(L, data.y, mean)
    return GPModel(data, spec, theta, np.asarray(geom, float), nugget, mean, beta, L, alpha, jitter)


def _gram_for(X, spec, theta, geom, nugget):
    if spec.family == "hamming":
        K = cross_covariance(X, X, spec, theta)
        K[np.diag_indices_from(K)] += nugget
        return K
    return gram(np.ascontiguousarray(X), spec.code, spec.spartan_m, theta, np.ascontiguousarray(geom, float), nugget)


def predict(model, x_q):
    mu, var = model.predict(np.atleast_2d(x_q))
    return Prediction(float(mu[0]), float(var[0]))


def log_marginal_likelihood(model):
    """``log N(y; beta 1, K + nugget I)`` in standardised units."""
    r = model.data.y - model.beta
    white = solve_triangular(model.L, r, lower=True, check_finite=False)
    n = r.size
    return float(-0.5 * white @ white - np.sum(np.log(np.diag(model.L))) - 0.5 * n * _LOG_2PI)


def append_observation(model, x, y):
    """Add one observation with a rank-1 Cholesky extension.

    Hyperparameters and output standardisation stay fixed, so the result
    matches a full refit on ``model.data.append(x, y)``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    data = model.data.append(x, y)
    if model.nugget == 0 and np.any(np.all(model.data.X == x, axis=1)):
        raise FactorizationError("duplicate inputs need a positive nugget")
    k = cross_covariance(model.data.X, x, model.spec, model.theta, model.geom)[:, 0]
    l = solve_triangular(model.L, k, lower=True, check_finite=False)
    kxx = 1.0 + model.nugget + model.jitter
    d2 = kxx - l @ l
    if not d2 > 0:
        raise FactorizationError("appended point makes the Gram matrix singular")
    n = model.L.shape[0]
    L = np.zeros((n + 1, n + 1))
    L[:n, :n] = model.L
    L[n, :n] = l
    L[n, n] = math.sqrt(d2)
    beta, alpha = _solve_mean(L, data.y, model.mean)
    return replace(model, data=data, L=L, beta=beta, alpha=alpha)


# -- fast log-likelihood for the sampler ------------------------------------


@jit
def _chol_inplace(A):
    n = A.shape[0]
    for j in range(n):
        s = A[j, j]
        for k in range(j):
            s -= A[j, k] * A[j, k]
        if not s > 0.0:
            return False
        ljj = math.sqrt(s)
        A[j, j] = ljj
        for i in range(j + 1, n):
            s = A[i, j]
            for k in range(j):
                s -= A[i, k] * A[j, k]
            A[i, j] = s / ljj
    for i in range(n):
        for j in range(i + 1, n):
            A[i, j] = 0.0
    return True


@jit
def _loglik_from_gram(K, y, mean_mode, mean_value):
    n = K.shape[0]
    jitters = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
    L = np.empty_like(K)
    ok = False
    for jitter in jitters:
        for i in range(n):
            for j in range(n):
                L[i, j] = K[i, j]
            L[i, i] += jitter
        if _chol_inplace(L):
            ok = True
            break
    if not ok:
        return -np.inf
    # forward solves for the ones vector and y
    a = np.empty(n)
    b = np.empty(n)
    for i in range(n):
        sa = 1.0
        sb = y[i]
        for k in range(i):
            sa -= L[i, k] * a[k]
            sb -= L[i, k] * b[k]
        a[i] = sa / L[i, i]
        b[i] = sb / L[i, i]
    if mean_mode == 0:
        aa = 0.0
        ab = 0.0
        for i in range(n):
            aa += a[i] * a[i]
            ab += a[i] * b[i]
        beta = ab / aa
    else:
        beta = mean_value
    quad = 0.0
    logdet = 0.0
    for i in range(n):
        w = b[i] - beta * a[i]
        quad += w * w
        logdet += math.log(L[i, i])
    return -0.5 * quad - logdet - 0.5 * n * _LOG_2PI


@jit
def _loglik_jit(X, y, code, n_local, theta, geom, nugget, mean_mode, mean_value):
    K = _gram_jit(X, code, n_local, theta, geom, nugget)
    return _loglik_from_gram(K, y, mean_mode, mean_value)


def _loglik_np(X, y, code, n_local, theta, geom, nugget, mean_mode, mean_value):
    K = _gram_np(X, code, n_local, theta, geom, nugget)
    try:
        L, _ = _cholesky_with_jitter(K)
    except FactorizationError:
        return -np.inf
    beta, alpha = _solve_mean(L, y, "gls" if mean_mode == 0 else mean_value)
    white = solve_triangular(L, y - beta, lower=True, check_finite=False)
    return float(-0.5 * white @ white - np.sum(np.log(np.diag(L))) - 0.5 * y.size * _LOG_2PI)


_loglik = pick(_loglik_jit, _loglik_np)


def loglik(data, spec, theta, nugget=DEFAULT_NUGGET, geom=None, mean="gls"):
    """Log marginal likelihood for one hyperparameter setting, without
    building a model. Returns ``-inf`` when the factorisation fails."""
    theta = np.ascontiguousarray(theta, dtype=float)
    mean_mode, mean_value = (0, 0.0) if mean == "gls" else (1, float(mean))
    if spec.family == "hamming":
        K = cross_covariance(data.X, data.X, spec, theta)
        K[np.diag_indices_from(K)] += nugget
        try:
            L, _ = _cholesky_with_jitter(K)
        except FactorizationError:
            return -np.inf
        beta, _ = _solve_mean(L, data.y, mean)
        white = solve_triangular(L, data.y - beta, lower=True, check_finite=False)
        return float(-0.5 * white @ white - np.sum(np.log(np.diag(L))) - 0.5 * data.n * _LOG_2PI)
    if geom is None:
        geom = spec.geometry(data.dim)
    return float(
        _loglik(
            np.ascontiguousarray(data.X),
            np.ascontiguousarray(data.y),
            spec.code,
            spec.spartan_m,
            theta,
            np.ascontiguousarray(geom, dtype=float),
            float(nugget),
            mean_mode,
            mean_value,
        )
    )


@jit
def _factor_jit(K):
    """LAPACK Cholesky with the jitter ladder; returns (L, ok)."""
    n = K.shape[0]
    jitters = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
    A = K.copy()
    for jitter in jitters:
        if jitter > 0.0:
            for i in range(n):
                A[i, i] = K[i, i] + jitter
        try:
            L = np.linalg.cholesky(A)
        except Exception:
            continue
        return L, True
    return A, False


@jit
def _loglik_blocks_jit(blocks, lam, nugget, y, mean_mode, mean_value):
    nb, n, _ = blocks.shape
    K = np.empty((n, n))
    for i in range(n):
        for j in range(i + 1):
            s = 0.0
            for b in range(nb):
                s += lam[i, b] * lam[j, b] * blocks[b, i, j]
            K[i, j] = s
            K[j, i] = s
        K[i, i] += nugget
    L, ok = _factor_jit(K)
    if not ok:
        return -np.inf
    a = np.empty(n)
    c = np.empty(n)
    for i in range(n):
        sa = 1.0
        sc = y[i]
        for k in range(i):
            sa -= L[i, k] * a[k]
            sc -= L[i, k] * c[k]
        a[i] = sa / L[i, i]
        c[i] = sc / L[i, i]
    if mean_mode == 0:
        beta = np.dot(a, c) / np.dot(a, a)
    else:
        beta = mean_value
    quad = 0.0
    logdet = 0.0
    for i in range(n):
        w = c[i] - beta * a[i]
        quad += w * w
        logdet += math.log(L[i, i])
    return -0.5 * quad - logdet - 0.5 * n * _LOG_2PI


def _loglik_blocks_np(blocks, lam, nugget, y, mean_mode, mean_value):
    K = np.einsum("ib,jb,bij->ij", lam, lam, blocks)
    K = 0.5 * (K + K.T)
    K[np.diag_indices_from(K)] += nugget
    try:
        L, _ = _cholesky_with_jitter(K)
    except FactorizationError:
        return -np.inf
    beta, _ = _solve_mean(L, y, "gls" if mean_mode == 0 else mean_value)
    white = solve_triangular(L, y - beta, lower=True, check_finite=False)
    return float(-0.5 * white @ white - np.sum(np.log(np.diag(L))) - 0.5 * y.size * _LOG_2PI)


loglik_blocks = pick(_loglik_blocks_jit, _loglik_blocks_np)
