"""Seeded repeated experiments: traces, aggregate curves and a manifest.

Config schema (JSON)::

    {
      "benchmark": "branin",          # registry name
      "benchmark_params": {},         # e.g. {"d": 5, "m": 10} for michalewicz
      "methods": ["bo", "sbo"],       # or {"label": {RunConfig overrides}}
      "run": {"budget": 40, "n_init": 10},   # RunConfig fields shared by all methods
      "repeats": 20,
      "seed": 0,
      "output": "results/branin"      # relative to the config file
    }

Output layout::

    <output>/manifest.json
    <output>/traces/<label>/repeat_<i>.jsonl   # one record per evaluation
    <output>/aggregate_<label>.csv

Trace files hold no timings, so reruns of a config are byte-identical.
CPU times go to the manifest.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import hashlib
import json
import os
from pathlib import Path
import platform

import numpy as np

from . import __version__
from ._accel import backend_name
from .benchmarks import make_benchmark
from .driver import METHODS, ObjectiveError, RunConfig, run

WORKERS_ENV = "SPARTANBO_WORKERS"
CSV_HEADER = "eval_index,median,q25,q75,mean,std"


class ConfigError(ValueError):
    pass


class ExperimentFailure(RuntimeError):
    """An objective failed; partial artifacts were written to ``output``."""

    def __init__(self, message, output):
        super().__init__(message)
        self.output = output


@dataclass
class ExperimentConfig:
    benchmark: str
    runs: dict  # label -> RunConfig
    benchmark_params: dict = field(default_factory=dict)
    repeats: int = 20
    seed: int = 0
    output: Path = Path("results")
    raw: dict = field(default_factory=dict, repr=False)

    def repeat_seed(self, repeat):
        """Seed shared by every method for one repeat (common random numbers)."""
        state = np.random.SeedSequence([self.seed, repeat]).generate_state(2, np.uint32)
        return int(state[0]) << 32 | int(state[1])

    def make_objective(self):
        return make_benchmark(self.benchmark, **self.benchmark_params)


def parse_config(raw, base_dir=".", seed=None):
    """Validate a config dictionary. Raises :class:`ConfigError`."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    allowed = {"benchmark", "benchmark_params", "methods", "run", "repeats", "seed", "output"}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "benchmark" not in raw:
        raise ConfigError("config needs a benchmark")
    raw = dict(raw)
    if seed is not None:
        raw["seed"] = int(seed)
    params = raw.get("benchmark_params", {}) or {}
    try:
        objective = make_benchmark(raw["benchmark"], **params)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad benchmark: {exc}") from exc

    methods = raw.get("methods", ["sbo"])
    if isinstance(methods, list):
        methods = {name: {} for name in methods}
    if not isinstance(methods, dict) or not methods:
        raise ConfigError("methods must be a non-empty list or object")
    shared = raw.get("run", {}) or {}
    runs = {}
    for label, overrides in methods.items():
        settings = dict(shared)
        settings.update(overrides or {})
        settings.setdefault("method", label)
        if settings["method"] not in METHODS:
            raise ConfigError(f"method for {label!r} must be one of {METHODS}")
        settings.pop("seed", None)  # seeds come from the experiment
        try:
            runs[label] = RunConfig.from_dict(settings)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad run settings for {label!r}: {exc}") from exc
        if (runs[label].method == "hierarchical") != objective.mixed:
            raise ConfigError(f"{label!r}: hierarchical runs need a mixed benchmark and vice versa")
    budgets = {r.budget for r in runs.values()}
    if len(budgets) != 1:
        raise ConfigError("all methods must share the budget")

    repeats = raw.get("repeats", 20)
    if not isinstance(repeats, int) or repeats < 1:
        raise ConfigError("repeats must be a positive integer")
    base_seed = raw.get("seed", 0)
    if not isinstance(base_seed, int) or base_seed < 0:
        raise ConfigError("seed must be a nonnegative integer")
    output = Path(base_dir) / raw.get("output", "results")
    return ExperimentConfig(raw["benchmark"], runs, dict(params), repeats, base_seed, output, raw)


def load_config(path, seed=None):
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    return parse_config(raw, path.parent, seed)


def _config_hash(raw):
    return hashlib.sha256(json.dumps(raw, sort_keys=True).encode()).hexdigest()


def _job(args):
    config, label, repeat = args
    run_config = config.runs[label]
    seed = config.repeat_seed(repeat)
    run_config = RunConfig(**{**run_config.to_dict(), "seed": seed})
    try:
        trace = run(run_config, config.make_objective())
        error = None
    except ObjectiveError as exc:
        trace, error = exc.trace, str(exc)
    return label, repeat, seed, trace, error


def _write_trace(path, trace):
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [json.dumps(r.public()) for r in trace.records]
    path.write_text("".join(line + "\n" for line in lines))


def _trace_path(output, label, repeat):
    return output / "traces" / label / f"repeat_{repeat:03d}.jsonl"


def _versions():
    import numba
    import scipy

    return {
        "spartanbo": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
        "backend": backend_name(),
    }


def worker_count():
    value = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(value))
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {value!r}") from None


def run_experiment(config_path, seed=None, workers=None):
    """Run every method for every repeat and write all artifacts.

    Returns the output directory. Raises :class:`ConfigError` for invalid
    configs and :class:`ExperimentFailure` when an objective failed (after
    writing the partial traces and the manifest).
    """
    config = config_path if isinstance(config_path, ExperimentConfig) else load_config(config_path, seed)
    workers = worker_count() if workers is None else workers
    jobs = [(config, label, i) for label in config.runs for i in range(config.repeats)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_job, jobs))
    else:
        results = [_job(job) for job in jobs]

    out = config.output
    out.mkdir(parents=True, exist_ok=True)
    runs, failures = [], []
    for label, repeat, seed_i, trace, error in results:  # job order, so writing is deterministic
        path = _trace_path(out, label, repeat)
        _write_trace(path, trace)
        entry = {
            "method": label,
            "repeat": repeat,
            "seed": seed_i,
            "trace": str(path.relative_to(out)),
            "evaluations": len(trace.records),
            "best_y": trace.best_y if trace.records else None,
            "cpu_time": trace.cpu_time,
        }
        if error:
            entry["error"] = error
            failures.append(f"{label} repeat {repeat}: {error}")
        runs.append(entry)
    if not failures:
        for label in config.runs:
            curve = aggregate([_trace_path(out, label, i) for i in range(config.repeats)])
            write_curve(out / f"aggregate_{label}.csv", curve)
    manifest = {
        "config": config.raw,
        "config_hash": _config_hash(config.raw),
        "run_configs": {label: rc.to_dict() for label, rc in config.runs.items()},
        "base_seed": config.seed,
        "versions": _versions(),
        "runs": runs,
        "complete": not failures,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    if failures:
        raise ExperimentFailure("; ".join(failures), out)
    return out


# -- aggregation -------------------------------------------------------------


@dataclass
class AggregateCurve:
    median: np.ndarray
    q25: np.ndarray
    q75: np.ndarray
    mean: np.ndarray
    std: np.ndarray

    def __len__(self):
        return len(self.median)


def read_incumbents(path):
    with open(path) as fh:
        return np.array([json.loads(line)["y_best"] for line in fh if line.strip()])


def aggregate_incumbents(curves):
    """Statistics across runs at each evaluation index (quantiles by linear
    interpolation between order statistics)."""
    curves = [np.asarray(c, dtype=float) for c in curves]
    if not curves:
        raise ValueError("need at least one trace")
    if len({len(c) for c in curves}) != 1:
        raise ValueError("traces have different lengths")
    Y = np.vstack(curves)
    q25, median, q75 = np.quantile(Y, [0.25, 0.5, 0.75], axis=0, method="linear")
    return AggregateCurve(median, q25, q75, Y.mean(axis=0), Y.std(axis=0))


def aggregate(paths):
    """Aggregate trace files, or every method under an experiment directory.

    A list of files gives one :class:`AggregateCurve`; a directory gives a
    dict keyed by method label.
    """
    if isinstance(paths, (str, Path)) and Path(paths).is_dir():
        root = Path(paths) / "traces"
        if not root.is_dir():
            raise ValueError(f"no traces under {paths}")
        return {sub.name: aggregate(sorted(sub.glob("*.jsonl"))) for sub in sorted(root.iterdir()) if sub.is_dir()}
    return aggregate_incumbents([read_incumbents(p) for p in paths])


def write_curve(path, curve):
    rows = [CSV_HEADER]
    for i in range(len(curve)):
        vals = (curve.median[i], curve.q25[i], curve.q75[i], curve.mean[i], curve.std[i])
        rows.append(",".join([str(i)] + [repr(float(v)) for v in vals]))
    Path(path).write_text("\n".join(rows) + "\n")
