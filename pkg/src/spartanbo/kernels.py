"""Covariance functions.

Distances use the ARD form ``r**2 = sum((x - x')**2 / l)``: the length-scale
enters to the first power (``Lambda = diag(1 / l)``), not squared as in much
of the GP literature. All kernels have unit variance, ``k(x, x) = 1``.

The Spartan kernel mixes one global and ``M`` local stationary kernels,

    k(x, x') = lg(x) lg(x') kg(x, x') + sum_m lm(x) lm(x') kl_m(x, x'),

with weights ``l_j = sqrt(w_j / sum_p w_p)`` built from isotropic Gaussian
densities ``w_g = N(x; psi, var_g I)`` and ``w_m = N(x; center, var_m I)``.
All local kernels share one movable ``center`` (a hyperparameter).

Hyperparameter vectors are flat arrays in natural (unconstrained-free) space:

* ``matern`` / ``se``: ``[l_1..l_d]``
* ``spartan``: ``[l_global (d), l_local_1 (d), ..., l_local_M (d), center (d)]``
* ``hamming``: ``[theta]``

The Spartan weight geometry travels separately as
``geom = [psi (d), var_global, var_local_1..M]``.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from ._accel import jit, pick

FAMILIES = ("matern", "se", "spartan", "hamming")
MATERN_NUS = (0.5, 1.5, 2.5)

_SQRT3 = math.sqrt(3.0)
_SQRT5 = math.sqrt(5.0)
_LOG_2PI = math.log(2.0 * math.pi)


def base_code(family, nu=2.5):
    """Integer code used by the compiled kernels for a stationary family."""
    if family == "se":
        return 3
    if family == "matern":
        if nu not in MATERN_NUS:
            raise ValueError(f"unsupported Matern smoothness nu={nu}; use one of {MATERN_NUS}")
        return MATERN_NUS.index(nu)
    raise ValueError(f"{family!r} is not a stationary base family")


@dataclass(frozen=True)
class KernelSpec:
    """Which covariance function to use and its fixed (non-sampled) settings."""

    family: str = "matern"
    nu: float = 2.5
    # spartan only
    inner_family: str = "matern"
    inner_nu: float = 2.5
    n_local: int = 1
    global_center: float = 0.5
    global_variance: float = 10.0
    local_variances: tuple = (0.05,)
    adaptive_local_variance: bool = False
    # hamming only: number of values per categorical dimension, and the power
    # of the Hamming distance in the exponent. Power 2 is not positive
    # semi-definite with two or more categorical inputs; power 1 always is.
    cardinalities: tuple = None
    hamming_power: int = 2

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.family == "matern":
            base_code("matern", self.nu)
        if self.family == "hamming" and self.hamming_power not in (1, 2):
            raise ValueError("hamming_power must be 1 or 2")
        if self.family == "spartan":
            base_code(self.inner_family, self.inner_nu)
            if self.n_local < 1:
                raise ValueError("spartan kernel needs at least one local kernel")
            if len(self.local_variances) == 1 and self.n_local > 1:
                object.__setattr__(self, "local_variances", tuple(self.local_variances) * self.n_local)
            if len(self.local_variances) != self.n_local:
                raise ValueError("need one local weight variance per local kernel")
            if self.global_variance <= 0 or min(self.local_variances) <= 0:
                raise ValueError("weight variances must be positive")

    @property
    def code(self):
        if self.family == "spartan":
            return base_code(self.inner_family, self.inner_nu)
        if self.family == "hamming":
            return -1
        return base_code(self.family, self.nu)

    @property
    def spartan_m(self):
        """Number of local kernels (0 for stationary families)."""
        return self.n_local if self.family == "spartan" else 0

    def n_params(self, d):
        if self.family == "spartan":
            return (self.n_local + 2) * d
        if self.family == "hamming":
            return 1
        return d

    def geometry(self, d):
        """Fixed weight geometry ``[psi, var_g, var_1..M]`` (empty unless spartan)."""
        if self.family != "spartan":
            return np.zeros(0)
        psi = np.broadcast_to(np.asarray(self.global_center, dtype=float), (d,))
        return np.concatenate([psi, [self.global_variance], np.asarray(self.local_variances, float)])


@dataclass
class SpartanHyperparams:
    global_lengthscales: np.ndarray
    local_lengthscales: np.ndarray  # (M, d)
    funnel_center: np.ndarray
    global_center: np.ndarray = None
    global_variance: float = 10.0
    local_variances: np.ndarray = field(default_factory=lambda: np.array([0.05]))

    def __post_init__(self):
        self.global_lengthscales = _as_lengthscales(self.global_lengthscales)
        d = self.global_lengthscales.size
        self.local_lengthscales = np.atleast_2d(np.asarray(self.local_lengthscales, dtype=float))
        if self.local_lengthscales.shape[1] != d:
            raise ValueError("local length-scales must match the input dimension")
        for row in self.local_lengthscales:
            _as_lengthscales(row)
        self.funnel_center = np.atleast_1d(np.asarray(self.funnel_center, dtype=float))
        if self.global_center is None:
            self.global_center = np.full(d, 0.5)
        self.global_center = np.broadcast_to(np.asarray(self.global_center, float), (d,)).copy()
        self.local_variances = np.atleast_1d(np.asarray(self.local_variances, dtype=float))
        if self.local_variances.size == 1 and self.n_local > 1:
            self.local_variances = np.repeat(self.local_variances, self.n_local)
        if self.funnel_center.size != d:
            raise ValueError("funnel center must match the input dimension")
        if np.any(self.funnel_center < 0) or np.any(self.funnel_center > 1):
            raise ValueError("funnel center must lie in the unit hypercube")
        if self.local_variances.size != self.n_local:
            raise ValueError("need one local weight variance per local kernel")
        if self.global_variance <= 0 or np.any(self.local_variances <= 0):
            raise ValueError("weight variances must be positive")

    @property
    def n_local(self):
        return self.local_lengthscales.shape[0]

    @property
    def dim(self):
        return self.global_lengthscales.size

    def theta(self):
        return np.concatenate(
            [self.global_lengthscales, self.local_lengthscales.ravel(), self.funnel_center]
        )

    def geometry(self):
        return np.concatenate([self.global_center, [self.global_variance], self.local_variances])

    @classmethod
    def from_arrays(cls, theta, geom, d):
        theta = np.asarray(theta, dtype=float)
        geom = np.asarray(geom, dtype=float)
        n_local = theta.size // d - 2
        return cls(
            global_lengthscales=theta[:d],
            local_lengthscales=theta[d : (n_local + 1) * d].reshape(n_local, d),
            funnel_center=theta[(n_local + 1) * d :],
            global_center=geom[:d],
            global_variance=geom[d],
            local_variances=geom[d + 1 :],
        )


@dataclass(frozen=True)
class WeightProfile:
    global_weight: float
    local_weights: np.ndarray


def _as_lengthscales(values):
    ls = np.atleast_1d(np.asarray(values, dtype=float))
    if not np.all(np.isfinite(ls)) or np.any(ls <= 0):
        raise ValueError("length-scales must be positive and finite")
    return ls


# -- scalar reference operations ---------------------------------------------


def ard_distance(x, x2, lengthscales):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    ls = _as_lengthscales(lengthscales)
    if x.shape != x2.shape or x.shape != ls.shape:
        raise ValueError(f"dimension mismatch: {x.shape}, {x2.shape}, {ls.shape}")
    return float(np.sqrt(np.sum((x - x2) ** 2 / ls)))


def base_kernel(r, family="matern", nu=2.5):
    """Unit-variance stationary kernel as a function of the scaled distance."""
    if np.any(np.asarray(r) < 0):
        raise ValueError("distance must be nonnegative")
    return _base_np(np.asarray(r, dtype=float), base_code(family, nu))


def spartan_weights(x, hp):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lam = _weights_np(x[None, :], hp.geometry(), hp.funnel_center, hp.n_local)[0]
    return WeightProfile(float(lam[0]), lam[1:].copy())


def spartan_eval(x, x2, hp, family="matern", nu=2.5):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    code = base_code(family, nu)
    return float(_cross_np(x[None, :], x2[None, :], code, hp.n_local, hp.theta(), hp.geometry())[0, 0])


def discretize(x, cardinalities=None):
    """Map to category indices: scale by the cardinality and round half up.

    Without cardinalities the values are taken as category labels already and
    only rounded.
    """
    x = np.asarray(x, dtype=float)
    if cardinalities is None:
        return np.floor(x + 0.5)
    card = np.asarray(cardinalities, dtype=float)
    return np.floor(x * (card - 1.0) + 0.5)


def hamming_eval(x, x2, theta, cardinalities=None, power=2):
    if theta <= 0:
        raise ValueError("hamming kernel parameter must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if x.shape != x2.shape:
        raise ValueError("hamming kernel needs equal-length vectors")
    g = np.count_nonzero(discretize(x, cardinalities) != discretize(x2, cardinalities))
    return float(np.exp(-0.5 * theta * g**power))


def gram_matrix(X, spec, theta, nugget=0.0, geom=None):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    K = cross_covariance(X, X, spec, theta, geom)
    K[np.diag_indices_from(K)] += nugget
    return K


def cross_covariance(XA, XB, spec, theta, geom=None):
    """Covariance matrix between two point sets under ``spec``."""
    XA = np.ascontiguousarray(np.atleast_2d(XA), dtype=float)
    XB = np.ascontiguousarray(np.atleast_2d(XB), dtype=float)
    theta = np.ascontiguousarray(theta, dtype=float)
    if spec.family == "hamming":
        if spec.cardinalities is not None:
            XA = discretize(XA, spec.cardinalities)
            XB = discretize(XB, spec.cardinalities)
        return hamming_cross(XA, XB, float(theta[0]), float(spec.hamming_power))
    if geom is None:
        geom = spec.geometry(XA.shape[1])
    return cross_cov(XA, XB, spec.code, spec.spartan_m, theta, np.ascontiguousarray(geom, dtype=float))


# -- numpy implementations ---------------------------------------------------


def _base_np(r, code):
    if code == 0:
        return np.exp(-r)
    if code == 1:
        s = _SQRT3 * r
        return (1.0 + s) * np.exp(-s)
    if code == 2:
        s = _SQRT5 * r
        return (1.0 + s + s * s / 3.0) * np.exp(-s)
    return np.exp(-0.5 * r * r)


def _weights_np(X, geom, center, n_local):
    d = X.shape[1]
    logw = np.empty((X.shape[0], n_local + 1))
    var_g = geom[d]
    logw[:, 0] = -0.5 * d * (_LOG_2PI + np.log(var_g)) - 0.5 * np.sum((X - geom[:d]) ** 2, axis=1) / var_g
    sq = np.sum((X - center) ** 2, axis=1)
    for m in range(n_local):
        var = geom[d + 1 + m]
        logw[:, m + 1] = -0.5 * d * (_LOG_2PI + np.log(var)) - 0.5 * sq / var
    top = logw.max(axis=1, keepdims=True)
    logz = top + np.log(np.sum(np.exp(logw - top), axis=1, keepdims=True))
    return np.exp(0.5 * (logw - logz))


def _cross_np(XA, XB, code, n_local, theta, geom):
    d = XA.shape[1]
    diff2 = (XA[:, None, :] - XB[None, :, :]) ** 2
    if n_local == 0:
        return _base_np(np.sqrt(diff2 @ (1.0 / theta[:d])), code)
    center = theta[(n_local + 1) * d : (n_local + 2) * d]
    lam_a = _weights_np(XA, geom, center, n_local)
    lam_b = _weights_np(XB, geom, center, n_local)
    out = np.zeros((XA.shape[0], XB.shape[0]))
    for blk in range(n_local + 1):
        ls = theta[blk * d : (blk + 1) * d]
        k = _base_np(np.sqrt(diff2 @ (1.0 / ls)), code)
        out += lam_a[:, blk, None] * lam_b[None, :, blk] * k
    return out


def _hamming_np(XA, XB, theta, power):
    g = np.count_nonzero(XA[:, None, :] != XB[None, :, :], axis=2).astype(float)
    return np.exp(-0.5 * theta * g**power)


# -- compiled implementations ------------------------------------------------


@jit
def _base_scalar(r, code):
    if code == 0:
        return math.exp(-r)
    if code == 1:
        s = _SQRT3 * r
        return (1.0 + s) * math.exp(-s)
    if code == 2:
        s = _SQRT5 * r
        return (1.0 + s + s * s / 3.0) * math.exp(-s)
    return math.exp(-0.5 * r * r)


@jit
def _weights_jit(X, geom, center, n_local):
    n, d = X.shape
    out = np.empty((n, n_local + 1))
    logw = np.empty(n_local + 1)
    for i in range(n):
        sq_g = 0.0
        sq_l = 0.0
        for k in range(d):
            a = X[i, k] - geom[k]
            b = X[i, k] - center[k]
            sq_g += a * a
            sq_l += b * b
        var = geom[d]
        logw[0] = -0.5 * d * (_LOG_2PI + math.log(var)) - 0.5 * sq_g / var
        top = logw[0]
        for m in range(n_local):
            var = geom[d + 1 + m]
            logw[m + 1] = -0.5 * d * (_LOG_2PI + math.log(var)) - 0.5 * sq_l / var
            if logw[m + 1] > top:
                top = logw[m + 1]
        z = 0.0
        for j in range(n_local + 1):
            z += math.exp(logw[j] - top)
        logz = top + math.log(z)
        for j in range(n_local + 1):
            out[i, j] = math.exp(0.5 * (logw[j] - logz))
    return out


@jit
def _cross_jit(XA, XB, code, n_local, theta, geom):
    na, d = XA.shape
    nb = XB.shape[0]
    out = np.empty((na, nb))
    if n_local == 0:
        for i in range(na):
            for j in range(nb):
                r2 = 0.0
                for k in range(d):
                    t = XA[i, k] - XB[j, k]
                    r2 += t * t / theta[k]
                out[i, j] = _base_scalar(math.sqrt(r2), code)
        return out
    center = theta[(n_local + 1) * d : (n_local + 2) * d]
    lam_a = _weights_jit(XA, geom, center, n_local)
    lam_b = _weights_jit(XB, geom, center, n_local)
    for i in range(na):
        for j in range(nb):
            s = 0.0
            for blk in range(n_local + 1):
                r2 = 0.0
                off = blk * d
                for k in range(d):
                    t = XA[i, k] - XB[j, k]
                    r2 += t * t / theta[off + k]
                s += lam_a[i, blk] * lam_b[j, blk] * _base_scalar(math.sqrt(r2), code)
            out[i, j] = s
    return out


@jit
def _gram_jit(X, code, n_local, theta, geom, nugget):
    """Symmetric Gram matrix plus nugget; fills one triangle and mirrors."""
    n, d = X.shape
    out = np.empty((n, n))
    if n_local == 0:
        for i in range(n):
            out[i, i] = 1.0 + nugget
            for j in range(i):
                r2 = 0.0
                for k in range(d):
                    t = X[i, k] - X[j, k]
                    r2 += t * t / theta[k]
                v = _base_scalar(math.sqrt(r2), code)
                out[i, j] = v
                out[j, i] = v
        return out
    center = theta[(n_local + 1) * d : (n_local + 2) * d]
    lam = _weights_jit(X, geom, center, n_local)
    for i in range(n):
        diag = 0.0
        for blk in range(n_local + 1):
            diag += lam[i, blk] * lam[i, blk]
        out[i, i] = diag + nugget
        for j in range(i):
            s = 0.0
            for blk in range(n_local + 1):
                r2 = 0.0
                off = blk * d
                for k in range(d):
                    t = X[i, k] - X[j, k]
                    r2 += t * t / theta[off + k]
                s += lam[i, blk] * lam[j, blk] * _base_scalar(math.sqrt(r2), code)
            out[i, j] = s
            out[j, i] = s
    return out


def _gram_np(X, code, n_local, theta, geom, nugget):
    K = _cross_np(X, X, code, n_local, theta, geom)
    K = 0.5 * (K + K.T)
    K[np.diag_indices_from(K)] += nugget
    return K


@jit
def _hamming_jit(XA, XB, theta, power):
    na, d = XA.shape
    nb = XB.shape[0]
    out = np.empty((na, nb))
    for i in range(na):
        for j in range(nb):
            g = 0
            for k in range(d):
                if XA[i, k] != XB[j, k]:
                    g += 1
            out[i, j] = math.exp(-0.5 * theta * float(g) ** power)
    return out


cross_cov = pick(_cross_jit, _cross_np)
gram = pick(_gram_jit, _gram_np)
hamming_cross = pick(_hamming_jit, _hamming_np)


def adapt_local_variances(X, theta, spec, n_ref=5):
    """Shrink the local weight variances as samples pile up inside the funnel.

    Counts training points within two standard deviations of the funnel
    center; the variance is divided by ``count / n_ref`` once the count
    exceeds ``n_ref``.
    """
    X = np.atleast_2d(X)
    d = X.shape[1]
    geom = spec.geometry(d)
    center = theta[(spec.n_local + 1) * d :]
    sq = np.sum((X - center) ** 2, axis=1)
    for m in range(spec.n_local):
        var = geom[d + 1 + m]
        inside = int(np.count_nonzero(sq <= 4.0 * var))
        if inside > n_ref:
            geom[d + 1 + m] = var * n_ref / inside
    return geom


# -- block-cached pieces used by the hyperparameter sampler -------------------
#
# The Spartan Gram matrix is sum_b (lam_b lam_b') * K_b. A coordinate update
# of the sampler touches one length-scale block or only the weights, so the
# sampler keeps the per-block matrices and rebuilds just the changed part.


def sq_dist_stack(X):
    """Per-dimension squared differences, shape ``(d, n, n)``."""
    X = np.asarray(X, dtype=float)
    return np.ascontiguousarray(np.transpose((X[:, None, :] - X[None, :, :]) ** 2, (2, 0, 1)))


@jit
def _block_kernel_jit(D, lengthscales, code):
    d, n, _ = D.shape
    inv = 1.0 / lengthscales
    out = np.empty((n, n))
    for i in range(n):
        out[i, i] = 1.0
        for j in range(i):
            r2 = 0.0
            for k in range(d):
                r2 += D[k, i, j] * inv[k]
            v = _base_scalar(math.sqrt(r2), code)
            out[i, j] = v
            out[j, i] = v
    return out


def _block_kernel_np(D, lengthscales, code):
    r2 = np.tensordot(1.0 / lengthscales, D, axes=1)
    return _base_np(np.sqrt(r2), code)


def spartan_lambdas(X, theta, geom, n_local):
    d = X.shape[1]
    center = np.ascontiguousarray(theta[(n_local + 1) * d : (n_local + 2) * d])
    return weights(np.ascontiguousarray(X), np.ascontiguousarray(geom, dtype=float), center, n_local)


block_kernel = pick(_block_kernel_jit, _block_kernel_np)
weights = pick(_weights_jit, _weights_np)
