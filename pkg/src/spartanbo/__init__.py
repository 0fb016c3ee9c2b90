"""Bayesian optimisation with a Spartan (locally nonstationary) kernel."""

from ._accel import backend_name
from .acquisition import AcquisitionBudget, expected_improvement, maximize_acquisition
from .benchmarks import BENCHMARKS, Benchmark, make_benchmark
from .driver import ObjectiveError, RunConfig, Trace, run, run_bo, run_hierarchical, run_sbo
from .gp import Dataset, FactorizationError, GPModel, fit, predict
from .inference import HyperPrior, PosteriorEnsemble, sample_hyperparameters
from .kernels import KernelSpec, SpartanHyperparams

__version__ = "0.1.0"

__all__ = [
    "AcquisitionBudget",
    "BENCHMARKS",
    "Benchmark",
    "Dataset",
    "FactorizationError",
    "GPModel",
    "HyperPrior",
    "KernelSpec",
    "ObjectiveError",
    "PosteriorEnsemble",
    "RunConfig",
    "SpartanHyperparams",
    "Trace",
    "backend_name",
    "expected_improvement",
    "fit",
    "make_benchmark",
    "maximize_acquisition",
    "predict",
    "run",
    "run_bo",
    "run_hierarchical",
    "run_sbo",
    "sample_hyperparameters",
]
