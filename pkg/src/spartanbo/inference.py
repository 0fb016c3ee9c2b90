"""Hyperparameter posterior sampling with univariate slice sampling.

Positive parameters (length-scales, the Hamming parameter, and any opted-in
variances) are sampled as logs under normal priors, i.e. log-normal priors
in natural space. The funnel center is sampled directly under a uniform
prior on the unit hypercube.

A refit runs ``burnin`` discarded sweeps, then keeps one sample every
``thin`` sweeps until ``m`` samples are collected.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from . import gp
from .kernels import KernelSpec, adapt_local_variances, block_kernel, cross_covariance, sq_dist_stack, weights

MAX_DOUBLINGS = 32
LOG_LIMIT = 500.0  # log-space parameters beyond this have zero prior mass
MAX_SHRINK = 200


@dataclass(frozen=True)
class HyperPrior:
    """Priors over the sampled hyperparameters.

    ``lengthscale_log_std = 0`` turns the length-scale prior into a point
    mass at ``exp(lengthscale_log_mean)`` (those coordinates are then not
    sampled). ``funnel_center=None`` means uniform on ``[0, 1]^d``; an array
    pins it.
    """

    lengthscale_log_mean: float = math.log(0.3)
    lengthscale_log_std: float = 1.0
    funnel_center: object = None
    sample_noise: bool = False
    sample_weight_variances: bool = False
    extra_log_std: float = 1.0


@dataclass
class PosteriorEnsemble:
    """``m`` hyperparameter samples, each with its fitted GP."""

    samples: list  # natural-space theta vectors
    geoms: list
    nuggets: list
    models: list
    seed: object = None
    state: np.ndarray = field(default=None, repr=False)  # last chain position

    @property
    def m(self):
        return len(self.models)

    @property
    def data(self):
        return self.models[0].data

    def predict_standardized(self, Xq):
        """Per-sample means and standard deviations in standardised units,
        each of shape ``(m, len(Xq))``."""
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        from .acquisition import ensemble_moments

        return ensemble_moments(self, Xq)

    def predict(self, Xq):
        mu, sd = self.predict_standardized(Xq)
        data = self.data
        return data.y_mean + data.y_scale * mu, data.y_scale * sd


# -- slice sampling ----------------------------------------------------------


def _slice_1d(logf, x0, f0, width, rng):
    """One univariate slice-sampling update: interval doubling, then
    shrinkage with the acceptance check that keeps doubling reversible.

    Returns ``(x, f(x))``. Keeps ``x0`` if the doubling or shrinkage budget
    runs out, which only happens for pathological densities.
    """
    cache = {x0: f0}

    def f(v):
        if v not in cache:
            cache[v] = logf(v)
        return cache[v]

    logy = f0 - rng.standard_exponential()
    left = x0 - width * rng.random()
    right = left + width
    doublings = 0
    while f(left) > logy or f(right) > logy:
        if doublings == MAX_DOUBLINGS:
            return x0, f0
        doublings += 1
        if rng.random() < 0.5:
            left -= right - left
        else:
            right += right - left
    lo, hi = left, right
    for _ in range(MAX_SHRINK):
        x1 = lo + rng.random() * (hi - lo)
        f1 = f(x1)
        if f1 > logy and (doublings == 0 or _acceptable(f, x0, x1, logy, left, right, width)):
            return x1, f1
        if x1 < x0:
            lo = x1
        else:
            hi = x1
    return x0, f0


def _acceptable(f, x0, x1, logy, left, right, width):
    """Could the doubling procedure started from ``x1`` have produced the
    same interval? Rejects ``x1`` otherwise."""
    differ = False
    while right - left > 1.1 * width:
        mid = 0.5 * (left + right)
        if (x0 < mid) != (x1 < mid):
            differ = True
        if x1 < mid:
            right = mid
        else:
            left = mid
        if differ and logy >= f(left) and logy >= f(right):
            return False
    return True


def slice_sample_step(logdensity, x0, widths, rng):
    """One coordinate-wise slice-sampling sweep over all entries of ``x0``."""
    x = np.array(x0, dtype=float)
    widths = np.broadcast_to(np.asarray(widths, dtype=float), x.shape)
    f = logdensity(x)
    if not np.isfinite(f):
        raise ValueError("log-density must be finite at the starting point")
    for c in range(x.size):

        def logf(v, c=c):
            x[c] = v
            return logdensity(x)

        old = x[c]
        new, f = _slice_1d(logf, old, f, widths[c], rng)
        x[c] = new
    return x


# -- hyperparameter posterior -------------------------------------------------


class _Posterior:
    """Log posterior over the transformed hyperparameter vector, with the
    per-block kernel matrices cached between coordinate updates."""

    def __init__(self, data, spec, prior, nugget, mean):
        self.data = data
        self.spec = spec
        self.prior = prior
        self.nugget = nugget
        self.mean_mode, self.mean_value = (0, 0.0) if mean == "gls" else (1, float(mean))
        d = data.dim
        self.d = d
        self.base_theta = self._default_theta()
        self.base_geom = spec.geometry(d)
        # which entries of the natural vectors get sampled
        layout = []  # (kind, index) with kind in ls/center/noise/var
        n_ls = spec.n_params(d) - (d if spec.family == "spartan" else 0)
        if prior.lengthscale_log_std > 0:
            layout += [("ls", i) for i in range(n_ls)]
        if spec.family == "spartan" and prior.funnel_center is None:
            layout += [("center", n_ls + k) for k in range(d)]
        if prior.sample_weight_variances and spec.family == "spartan":
            layout += [("var", d + j) for j in range(1 + spec.n_local)]
        if prior.sample_noise:
            layout.append(("noise", 0))
        self.layout = layout
        self.widths = np.ones(len(layout))
        self._D = None if spec.family == "hamming" else sq_dist_stack(data.X)
        self._blocks = None
        self._lam = None

    def _default_theta(self):
        spec, d, prior = self.spec, self.d, self.prior
        ls = math.exp(prior.lengthscale_log_mean)
        if spec.family == "spartan":
            center = np.full(d, 0.5) if prior.funnel_center is None else np.asarray(prior.funnel_center, float)
            return np.concatenate([np.full((spec.n_local + 1) * d, ls), np.broadcast_to(center, (d,))])
        return np.full(spec.n_params(d), ls)

    # transformed <-> natural
    def encode(self, theta, geom, nugget):
        u = np.empty(len(self.layout))
        for c, (kind, i) in enumerate(self.layout):
            if kind == "ls":
                u[c] = math.log(theta[i])
            elif kind == "center":
                u[c] = theta[i]
            elif kind == "var":
                u[c] = math.log(geom[i])
            else:
                u[c] = math.log(nugget)
        return u

    def decode(self, u, theta=None, geom=None):
        theta = self.base_theta.copy() if theta is None else theta.copy()
        geom = self.base_geom.copy() if geom is None else geom.copy()
        nugget = self.nugget
        for c, (kind, i) in enumerate(self.layout):
            if kind == "ls":
                theta[i] = math.exp(u[c])
            elif kind == "center":
                theta[i] = u[c]
            elif kind == "var":
                geom[i] = math.exp(u[c])
            else:
                nugget = math.exp(u[c])
        if self.spec.adaptive_local_variance and self.spec.family == "spartan":
            geom = adapt_local_variances(self.data.X, theta, self.spec)
        return theta, geom, nugget

    def logprior_coord(self, c, v):
        kind, i = self.layout[c]
        if kind == "center":
            return 0.0 if 0.0 <= v <= 1.0 else -np.inf
        if kind == "ls":
            mu, s = self.prior.lengthscale_log_mean, self.prior.lengthscale_log_std
        elif kind == "var":
            mu, s = math.log(self.base_geom[i]), self.prior.extra_log_std
        else:
            mu, s = math.log(self.nugget), self.prior.extra_log_std
        if not abs(v) <= LOG_LIMIT:  # also catches nan
            return -np.inf
        z = (v - mu) / s
        return -0.5 * z * z

    def logprior(self, u):
        return sum(self.logprior_coord(c, v) for c, v in enumerate(u))

    # likelihood with caching
    def _block_of(self, i):
        return i // self.d

    def _lambdas(self, theta, geom):
        X = self.data.X
        if self.spec.family != "spartan":
            return np.ones((X.shape[0], 1))
        d, nl = self.d, self.spec.n_local
        return weights(X, np.ascontiguousarray(geom), np.ascontiguousarray(theta[(nl + 1) * d :]), nl)

    def _blocks_for(self, theta):
        nb = self.spec.n_local + 1 if self.spec.family == "spartan" else 1
        code = self.spec.code
        return np.stack([block_kernel(self._D, np.ascontiguousarray(theta[b * self.d : (b + 1) * self.d]), code) for b in range(nb)])

    def reset(self, u):
        self.u = np.array(u, dtype=float)
        self.theta, self.geom, self.nug = self.decode(self.u)
        if self.spec.family != "hamming":
            self._blocks = self._blocks_for(self.theta)
            self._lam = self._lambdas(self.theta, self.geom)
        return self.logpost_full()

    def _loglik(self, blocks, lam, nugget):
        return gp.loglik_blocks(blocks, lam, nugget, self.data.y, self.mean_mode, self.mean_value)

    def _hamming_loglik(self, theta, nugget):
        return gp.loglik(self.data, self.spec, theta, nugget, mean="gls" if self.mean_mode == 0 else self.mean_value)

    def logpost_full(self):
        lp = self.logprior(self.u)
        if not np.isfinite(lp):
            return -np.inf
        if self.spec.family == "hamming":
            return lp + self._hamming_loglik(self.theta, self.nug)
        return lp + self._loglik(self._blocks, self._lam, self.nug)

    def coordinate_logf(self, c):
        """Log posterior as a function of coordinate ``c`` alone. Remembers
        the pieces of the last evaluation so an accepted value can be
        committed without recomputation."""
        kind, i = self.layout[c]
        rest = self.logprior(self.u) - self.logprior_coord(c, self.u[c])
        self._pending = {}

        def logf(v):
            lp = self.logprior_coord(c, v)
            if not np.isfinite(lp):
                return -np.inf
            u = self.u.copy()
            u[c] = v
            theta, geom, nugget = self.decode(u)
            blocks, lam = self._blocks, self._lam
            if self.spec.family == "hamming":
                ll = self._hamming_loglik(theta, nugget)
            else:
                if kind == "ls":
                    b = self._block_of(i)
                    blocks = blocks.copy()
                    blocks[b] = block_kernel(self._D, np.ascontiguousarray(theta[b * self.d : (b + 1) * self.d]), self.spec.code)
                elif kind in ("center", "var") or self.spec.adaptive_local_variance:
                    lam = self._lambdas(theta, geom)
                ll = self._loglik(blocks, lam, nugget)
            self._pending[v] = (theta, geom, nugget, blocks, lam)
            return rest + lp + ll

        return logf

    def commit(self, c, v):
        """Move coordinate ``c`` to ``v``, reusing the cached pieces from
        the evaluation at ``v``."""
        if v != self.u[c]:
            self.theta, self.geom, self.nug, self._blocks, self._lam = self._pending[v]
            self.u[c] = v
        self._pending = {}

    def sweep(self, f, rng):
        for c in range(len(self.layout)):
            logf = self.coordinate_logf(c)
            v, f = _slice_1d(logf, self.u[c], f, self.widths[c], rng)
            self.commit(c, v)
        return f


def sample_hyperparameters(
    data,
    spec,
    prior=None,
    m=10,
    burnin=100,
    rng=None,
    thin=10,
    init=None,
    nugget=gp.DEFAULT_NUGGET,
    mean="gls",
):
    """Draw ``m`` posterior hyperparameter samples and fit one GP per sample.

    ``init`` is an optional ``(theta, geom, nugget)`` starting point, e.g.
    the last sample of a previous ensemble (warm start).
    """
    if m < 1:
        raise ValueError("need at least one sample")
    prior = prior or HyperPrior()
    rng = np.random.default_rng(rng)
    post = _Posterior(data, spec, prior, nugget, mean)
    f = -np.inf
    if init is not None:
        theta0, geom0, nug0 = init
        f = post.reset(post.encode(np.asarray(theta0), np.asarray(geom0), nug0))
    if not np.isfinite(f):
        f = post.reset(post.encode(post.base_theta, post.base_geom, nugget))
    if not np.isfinite(f):
        raise gp.FactorizationError("no valid factorization at the initial hyperparameters")

    samples = []
    if post.layout:
        for _ in range(burnin):
            f = post.sweep(f, rng)
    for k in range(m):
        if post.layout and k > 0:
            for _ in range(thin):
                f = post.sweep(f, rng)
        samples.append((post.theta.copy(), post.geom.copy(), post.nug))

    models = []
    for theta, geom, nug in samples:
        models.append(gp.fit(data, spec, theta, nug, geom=geom, mean=mean))
    return PosteriorEnsemble(
        samples=[s[0] for s in samples],
        geoms=[s[1] for s in samples],
        nuggets=[s[2] for s in samples],
        models=models,
        state=post.u.copy(),
    )


def refit_ensemble(ensemble, data):
    """Refit every sample on new data without resampling hyperparameters."""
    models = []
    for model, theta, geom, nug in zip(ensemble.models, ensemble.samples, ensemble.geoms, ensemble.nuggets):
        models.append(gp.fit(data, model.spec, theta, nug, geom=geom, mean=model.mean))
    return PosteriorEnsemble(ensemble.samples, ensemble.geoms, ensemble.nuggets, models, ensemble.seed, ensemble.state)
