"""Optimisation loops: standard BO, Spartan BO and hierarchical BO.

Every run draws from independent child streams of one ``SeedSequence``
(design, sampler, acquisition, inner loop). Two methods run with the same
seed therefore see the same initial design.
"""

from dataclasses import asdict, dataclass, field, fields
import itertools
import math
import time

import numpy as np

from . import gp
from .acquisition import AcquisitionBudget, expected_improvement, maximize_acquisition
from .design import DESIGNS, initial_design
from .inference import HyperPrior, sample_hyperparameters
from .kernels import KernelSpec

METHODS = ("bo", "sbo", "hierarchical")
MAX_ENUMERATED = 4096


class ObjectiveError(RuntimeError):
    """The objective failed; ``trace`` holds everything evaluated before."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass
class RunConfig:
    method: str = "sbo"
    budget: int = 40
    design: str = "lhs"
    n_init: int = 10
    # sampler
    mcmc_samples: int = 10
    burnin: int = 100
    thin: int = 10
    lengthscale_log_mean: float = math.log(0.3)
    lengthscale_log_std: float = 1.0
    sample_noise: bool = False
    sample_weight_variances: bool = False
    refit_every: int = 1
    # surrogate
    kernel: str = "matern"
    nu: float = 2.5
    nugget: float = gp.DEFAULT_NUGGET
    mean: object = "gls"
    # spartan weights
    n_local: int = 1
    global_center: float = 0.5
    global_variance: float = 10.0
    local_variance: float = 0.05
    adaptive_local_variance: bool = False
    # acquisition
    acq_candidates_per_dim: int = 1000
    acq_local_evaluations: int = 200
    acq_refine: int = 5
    # hierarchical
    n_outer: int = 15
    n_inner: int = 6
    outer_method: str = "sbo"
    inner_design_size: int = 3
    hamming_power: int = 2
    seed: int = 0

    def validate(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.design not in DESIGNS:
            raise ValueError(f"design must be one of {DESIGNS}")
        counts = ("budget", "n_init", "mcmc_samples", "refit_every", "n_outer", "n_inner", "acq_candidates_per_dim",
                  "acq_local_evaluations", "acq_refine")
        for name in counts:
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.burnin < 0 or self.thin < 0:
            raise ValueError("burnin and thin must be nonnegative")
        if self.method == "hierarchical":
            if self.outer_method not in ("bo", "sbo"):
                raise ValueError("outer_method must be bo or sbo")
            if self.n_outer * self.n_inner != self.budget:
                raise ValueError("hierarchical budget must equal n_outer * n_inner")
            if self.n_init > self.n_outer:
                raise ValueError("n_init cannot exceed n_outer")
        elif self.n_init > self.budget:
            raise ValueError("n_init cannot exceed the budget")
        self.kernel_spec()
        return self

    def kernel_spec(self, method=None):
        method = method or (self.outer_method if self.method == "hierarchical" else self.method)
        if method == "sbo":
            return KernelSpec(
                family="spartan",
                inner_family=self.kernel,
                inner_nu=self.nu,
                n_local=self.n_local,
                global_center=self.global_center,
                global_variance=self.global_variance,
                local_variances=(self.local_variance,) * self.n_local,
                adaptive_local_variance=self.adaptive_local_variance,
            )
        return KernelSpec(family=self.kernel, nu=self.nu)

    def prior(self):
        return HyperPrior(
            lengthscale_log_mean=self.lengthscale_log_mean,
            lengthscale_log_std=self.lengthscale_log_std,
            sample_noise=self.sample_noise,
            sample_weight_variances=self.sample_weight_variances,
        )

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, values):
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown run settings: {sorted(unknown)}")
        return cls(**values).validate()


@dataclass
class EvalRecord:
    index: int
    x: list
    y: float
    y_best: float
    wall_time: float = 0.0
    cpu_time: float = 0.0

    def public(self):
        """The reproducible part of the record (no timings)."""
        return {"index": self.index, "x": self.x, "y": self.y, "y_best": self.y_best}


@dataclass
class Trace:
    method: str
    records: list = field(default_factory=list)
    centers: list = field(default_factory=list)  # funnel-center samples per refit (sbo)

    @property
    def best(self):
        if not self.records:
            return None
        return min(self.records, key=lambda r: (r.y, r.index))

    @property
    def best_x(self):
        return self.best.x

    @property
    def best_y(self):
        return self.best.y

    @property
    def incumbents(self):
        return np.array([r.y_best for r in self.records])

    @property
    def cpu_time(self):
        return float(sum(r.cpu_time for r in self.records))

    def summary(self):
        best = self.best
        return {"best_x": best.x, "best_y": best.y, "evaluations": len(self.records)}


class _Recorder:
    def __init__(self, method):
        self.trace = Trace(method)
        self._wall = time.perf_counter()
        self._cpu = time.process_time()

    def add(self, x, y):
        now_wall, now_cpu = time.perf_counter(), time.process_time()
        prev = self.trace.records[-1].y_best if self.trace.records else math.inf
        self.trace.records.append(
            EvalRecord(
                index=len(self.trace.records),
                x=[float(v) for v in x],
                y=float(y),
                y_best=float(min(prev, y)),
                wall_time=now_wall - self._wall,
                cpu_time=now_cpu - self._cpu,
            )
        )
        self._wall, self._cpu = now_wall, now_cpu


def _streams(seed):
    children = np.random.SeedSequence(seed).spawn(4)
    return [np.random.default_rng(c) for c in children]


def _resolve_seed(config, rng):
    if rng is None:
        return config.seed
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(2**63))
    return rng


def _evaluate(recorder, func, x_raw, *extra):
    try:
        y = float(func(x_raw, *extra))
    except Exception as exc:
        raise ObjectiveError(f"objective failed at {x_raw}: {exc}", recorder.trace) from exc
    if not math.isfinite(y):
        raise ObjectiveError(f"objective returned {y} at {x_raw}", recorder.trace)
    return y


class _Surrogate:
    """Keeps the MCMC ensemble of one BO loop and its warm start."""

    def __init__(self, config, spec, mcmc_rng, acq_rng, bounds):
        self.config = config
        self.spec = spec
        self.prior = config.prior()
        self.mcmc_rng = mcmc_rng
        self.acq_rng = acq_rng
        self.bounds = bounds
        self.ensemble = None
        self.since_refit = 0

    def propose(self, X_unit, y):
        cfg = self.config
        refit = self.ensemble is None or self.since_refit + 1 >= cfg.refit_every
        if refit:
            data = gp.Dataset.from_unit(np.array(X_unit), np.array(y), self.bounds)
            init = None
            if self.ensemble is not None:
                init = (self.ensemble.samples[-1], self.ensemble.geoms[-1], self.ensemble.nuggets[-1])
            self.ensemble = sample_hyperparameters(
                data, self.spec, self.prior, cfg.mcmc_samples, cfg.burnin, self.mcmc_rng,
                thin=cfg.thin, init=init, nugget=cfg.nugget, mean=cfg.mean,
            )
            self.since_refit = 0
        else:
            models = [gp.append_observation(mdl, X_unit[-1], y[-1]) for mdl in self.ensemble.models]
            self.ensemble.models = models
            self.ensemble.__dict__.pop("_packed", None)
            self.since_refit += 1
        budget = AcquisitionBudget(
            cfg.acq_candidates_per_dim, cfg.acq_local_evaluations, cfg.acq_refine,
            seed=int(self.acq_rng.integers(2**32)),
        )
        return maximize_acquisition(self.ensemble, float(np.min(y)), budget)

    def centers(self):
        if self.spec.family != "spartan" or self.ensemble is None:
            return None
        d = self.ensemble.data.dim
        return [s[-d:].tolist() for s in self.ensemble.samples]


def _run_sequential(config, objective, seed, method):
    config.validate()
    bounds = np.asarray(objective.bounds, dtype=float)
    d = bounds.shape[0]
    design_rng, mcmc_rng, acq_rng, _ = _streams(seed)
    spec = config.kernel_spec(method)
    recorder = _Recorder(method)
    to_raw = lambda u: bounds[:, 0] + u * (bounds[:, 1] - bounds[:, 0])

    X_unit, ys = [], []
    for u in initial_design(config.design, config.n_init, d, design_rng):
        ys.append(_evaluate(recorder, objective, to_raw(u)))
        X_unit.append(u)
        recorder.add(to_raw(u), ys[-1])

    surrogate = _Surrogate(config, spec, mcmc_rng, acq_rng, bounds)
    for _ in range(config.n_init, config.budget):
        u = surrogate.propose(X_unit, ys)
        centers = surrogate.centers()
        if centers is not None:
            recorder.trace.centers.append(centers)
        ys.append(_evaluate(recorder, objective, to_raw(u)))
        X_unit.append(u)
        recorder.add(to_raw(u), ys[-1])
    return recorder.trace


def run_bo(config, objective, rng=None):
    """Standard BO with a stationary kernel."""
    return _run_sequential(config, objective, _resolve_seed(config, rng), "bo")


def run_sbo(config, objective, rng=None):
    """BO with the Spartan kernel; the funnel center is sampled with the
    length-scales."""
    return _run_sequential(config, objective, _resolve_seed(config, rng), "sbo")


def run(config, objective, rng=None):
    if config.method == "hierarchical":
        return run_hierarchical(config, objective, rng)
    return _run_sequential(config, objective, _resolve_seed(config, rng), config.method)


# -- hierarchical BO ---------------------------------------------------------


def _discrete_candidates(cardinalities, rng, n_random=2048):
    total = math.prod(cardinalities)
    if total <= MAX_ENUMERATED:
        return np.array(list(itertools.product(*[range(c) for c in cardinalities])), dtype=float)
    draws = np.column_stack([rng.integers(0, c, size=n_random) for c in cardinalities]).astype(float)
    return np.unique(draws, axis=0)


def _codes_to_unit(codes, cardinalities):
    scale = np.maximum(np.asarray(cardinalities, dtype=float) - 1.0, 1.0)
    return np.asarray(codes, dtype=float) / scale


def _inner_loop(config, objective, x_c_raw, cardinalities, rng, recorder):
    """Optimise the discrete part for a fixed continuous point."""
    spec = KernelSpec(family="hamming", cardinalities=tuple(cardinalities), hamming_power=config.hamming_power)
    prior = config.prior()
    n_inner = config.n_inner
    codes, ys = [], []

    def evaluate(code):
        y = _evaluate(recorder, objective, x_c_raw, code.astype(int))
        codes.append(code)
        ys.append(y)
        recorder.add(np.concatenate([x_c_raw, code]), y)

    cands = _discrete_candidates(cardinalities, rng)
    n_start = min(config.inner_design_size, n_inner - 1, len(cands))
    for idx in rng.choice(len(cands), size=n_start, replace=False):
        evaluate(cands[idx])
    ensemble = None
    for _ in range(n_start, n_inner):
        if not ys:
            evaluate(cands[rng.integers(len(cands))])
            continue
        data = gp.Dataset.from_unit(_codes_to_unit(codes, cardinalities), np.array(ys))
        init = None if ensemble is None else (ensemble.samples[-1], ensemble.geoms[-1], ensemble.nuggets[-1])
        ensemble = sample_hyperparameters(
            data, spec, prior, config.mcmc_samples, config.burnin, rng, thin=config.thin, init=init,
            nugget=config.nugget, mean=config.mean,
        )
        ei = expected_improvement(ensemble, _codes_to_unit(cands, cardinalities), float(min(ys)))
        evaluate(cands[int(np.argmax(ei))])
    best = int(np.argmin(ys))
    return codes[best], ys[best]


def run_hierarchical(config, objective, rng=None):
    """Outer BO/SBO over the continuous part; each outer query runs an inner
    Hamming-kernel BO over the discrete part. Uses ``n_outer * n_inner``
    objective evaluations in total."""
    config.validate()
    seed = _resolve_seed(config, rng)
    bounds = np.asarray(objective.bounds, dtype=float)
    cardinalities = tuple(objective.cardinalities)
    d = bounds.shape[0]
    design_rng, mcmc_rng, acq_rng, inner_rng = _streams(seed)
    spec = config.kernel_spec(config.outer_method)
    recorder = _Recorder("hierarchical")
    to_raw = lambda u: bounds[:, 0] + u * (bounds[:, 1] - bounds[:, 0])

    design = initial_design(config.design, config.n_init, d, design_rng)
    surrogate = _Surrogate(config, spec, mcmc_rng, acq_rng, bounds)
    X_unit, outer_y = [], []
    for n in range(config.n_outer):
        if n < config.n_init:
            u = design[n]
        else:
            u = surrogate.propose(X_unit, outer_y)
            centers = surrogate.centers()
            if centers is not None:
                recorder.trace.centers.append(centers)
        _, y = _inner_loop(config, objective, to_raw(u), cardinalities, inner_rng, recorder)
        X_unit.append(u)
        outer_y.append(y)
    return recorder.trace
