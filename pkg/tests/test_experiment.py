import json
import math
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spartanbo import cli, experiment
from spartanbo.benchmarks import Benchmark, branin
from spartanbo.experiment import (
    CSV_HEADER,
    ConfigError,
    ExperimentFailure,
    aggregate,
    aggregate_incumbents,
    load_config,
    parse_config,
    run_experiment,
)

FAST = {"mcmc_samples": 2, "burnin": 5, "thin": 1, "acq_candidates_per_dim": 50, "acq_local_evaluations": 30, "acq_refine": 2}


def write_config(tmp_path, **overrides):
    raw = {
        "benchmark": "branin",
        "methods": ["bo", "sbo"],
        "run": {"budget": 8, "n_init": 4, **FAST},
        "repeats": 2,
        "seed": 5,
        "output": "out",
    }
    raw.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(raw))
    return path


def read_trace(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


def tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_design_only_experiment(tmp_path):
    path = write_config(tmp_path, methods=["bo"], run={"budget": 3, "n_init": 3}, repeats=1)
    out = run_experiment(path)
    traces = list((out / "traces").rglob("*.jsonl"))
    assert len(traces) == 1 and len(read_trace(traces[0])) == 3
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["complete"] and len(manifest["runs"]) == 1
    assert set(manifest["versions"]) >= {"numpy", "scipy", "numba", "backend", "spartanbo"}
    assert (out / "aggregate_bo.csv").read_text().splitlines()[0] == CSV_HEADER


def test_reruns_are_byte_identical(tmp_path):
    path = write_config(tmp_path)
    out = run_experiment(path)
    first = {k: v for k, v in tree_bytes(out).items() if k != "manifest.json"}
    run_experiment(path)
    second = {k: v for k, v in tree_bytes(out).items() if k != "manifest.json"}
    assert first == second
    assert len(first) == 2 * 2 + 2


def test_common_random_numbers_in_experiment(tmp_path):
    out = run_experiment(write_config(tmp_path))
    for repeat in range(2):
        bo = read_trace(out / "traces" / "bo" / f"repeat_{repeat:03d}.jsonl")
        sbo = read_trace(out / "traces" / "sbo" / f"repeat_{repeat:03d}.jsonl")
        assert [r["x"] for r in bo[:4]] == [r["x"] for r in sbo[:4]]
    a = read_trace(out / "traces" / "bo" / "repeat_000.jsonl")
    b = read_trace(out / "traces" / "bo" / "repeat_001.jsonl")
    assert a[0]["x"] != b[0]["x"]


def test_worker_count_does_not_change_results(tmp_path):
    one = tmp_path / "one"
    two = tmp_path / "two"
    one.mkdir()
    two.mkdir()
    run_experiment(write_config(one), workers=1)
    run_experiment(write_config(two), workers=2)
    strip = lambda root: {k: v for k, v in tree_bytes(root / "out").items() if k != "manifest.json"}
    assert strip(one) == strip(two)


def test_seed_override(tmp_path):
    path = write_config(tmp_path)
    assert load_config(path, seed=11).seed == 11
    assert load_config(path).repeat_seed(0) != load_config(path, seed=11).repeat_seed(0)


@pytest.mark.parametrize(
    "bad",
    [
        {"benchmark": "nope"},
        {"methods": ["annealing"]},
        {"methods": []},
        {"repeats": 0},
        {"seed": -1},
        {"run": {"budget": 3, "n_init": 5}},
        {"run": {"learning_rate": 0.1}},
        {"methods": {"bo": {"budget": 10}, "sbo": {"budget": 12}}},
        {"methods": ["hierarchical"]},
        {"colour": "blue"},
    ],
)
def test_config_errors(tmp_path, bad):
    with pytest.raises(ConfigError):
        load_config(write_config(tmp_path, **bad))


def test_hierarchical_config_needs_mixed_benchmark():
    raw = {"benchmark": "mixed_toy", "methods": ["sbo"]}
    with pytest.raises(ConfigError):
        parse_config(raw)
    raw = {"benchmark": "mixed_toy", "methods": ["hierarchical"], "run": {"budget": 90}}
    assert parse_config(raw).runs["hierarchical"].n_outer == 15


# -- aggregation -------------------------------------------------------------


def oracle_quantile(values, q):
    """Linear interpolation between order statistics, written out by hand."""
    s = sorted(values)
    h = (len(s) - 1) * q
    lo = math.floor(h)
    hi = min(lo + 1, len(s) - 1)
    return s[lo] + (h - lo) * (s[hi] - s[lo])


def test_single_trace_aggregate():
    curve = aggregate_incumbents([[5.0, 3.0, 3.0]])
    assert curve.median.tolist() == [5.0, 3.0, 3.0]
    assert curve.q25.tolist() == curve.q75.tolist() == curve.median.tolist()
    assert curve.std.tolist() == [0.0] * 3


def test_two_constant_traces():
    curve = aggregate_incumbents([[1.0] * 4, [3.0] * 4])
    assert curve.median.tolist() == [2.0] * 4
    assert np.all((1.0 < curve.q25) & (curve.q25 < 2.0))
    assert curve.q25[0] == 1.5 and curve.q75[0] == 2.5


def test_aggregate_matches_hand_quantiles():
    rng = np.random.default_rng(0)
    curves = [np.minimum.accumulate(rng.normal(size=30)) for _ in range(20)]
    curve = aggregate_incumbents(curves)
    for i in range(30):
        column = [c[i] for c in curves]
        assert curve.median[i] == pytest.approx(oracle_quantile(column, 0.5), abs=1e-15)
        assert curve.q25[i] == pytest.approx(oracle_quantile(column, 0.25), abs=1e-15)
        assert curve.q75[i] == pytest.approx(oracle_quantile(column, 0.75), abs=1e-15)
        assert curve.mean[i] == pytest.approx(sum(column) / 20, abs=1e-14)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), runs=st.integers(1, 12), length=st.integers(1, 25))
def test_aggregate_properties(seed, runs, length):
    rng = np.random.default_rng(seed)
    curves = [np.minimum.accumulate(rng.normal(size=length)) for _ in range(runs)]
    curve = aggregate_incumbents(curves)
    assert np.all(np.diff(curve.median) <= 1e-12)
    assert np.all(curve.q25 <= curve.median) and np.all(curve.median <= curve.q75)


def test_aggregate_errors(tmp_path):
    with pytest.raises(ValueError):
        aggregate_incumbents([[1.0, 2.0], [1.0]])
    with pytest.raises(ValueError):
        aggregate_incumbents([])
    with pytest.raises(ValueError):
        aggregate(tmp_path)


def test_aggregate_directory_matches_written_csv(tmp_path):
    out = run_experiment(write_config(tmp_path))
    curves = aggregate(out)
    assert set(curves) == {"bo", "sbo"}
    rows = (out / "aggregate_sbo.csv").read_text().splitlines()[1:]
    assert [float(r.split(",")[1]) for r in rows] == curves["sbo"].median.tolist()


# -- command line -------------------------------------------------------------


def test_cli_run_and_aggregate(tmp_path, capsys):
    path = write_config(tmp_path, methods=["bo"], repeats=1)
    assert cli.main(["validate", str(path)]) == 0
    assert cli.main(["run", str(path), "--seed", "3"]) == 0
    out = tmp_path / "out"
    csv = (out / "aggregate_bo.csv").read_text()
    (out / "aggregate_bo.csv").unlink()
    assert cli.main(["aggregate", str(out)]) == 0
    assert (out / "aggregate_bo.csv").read_text() == csv
    assert cli.main(["list-benchmarks"]) == 0
    assert "mountain_car" in capsys.readouterr().out


def test_cli_config_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["run", str(bad)]) == 2
    assert cli.main(["validate", str(write_config(tmp_path, benchmark="nope"))]) == 2
    assert cli.main(["run", str(tmp_path / "missing.json")]) == 2
    assert cli.main(["aggregate", str(tmp_path)]) == 2


def test_cli_objective_failure_keeps_artifacts(tmp_path, monkeypatch):
    calls = {"n": 0}

    def fragile(x):
        calls["n"] += 1
        if calls["n"] == 6:
            raise RuntimeError("boom")
        return branin(x)

    real = experiment.make_benchmark

    def patched(name, **params):
        bench = real(name, **params)
        return Benchmark(bench.name, fragile, bench.bounds)

    monkeypatch.setattr(experiment, "make_benchmark", patched)
    path = write_config(tmp_path, methods=["bo"], repeats=1)
    assert cli.main(["run", str(path)]) == 3
    out = tmp_path / "out"
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["complete"] is False
    assert "boom" in manifest["runs"][0]["error"]
    assert len(read_trace(out / "traces" / "bo" / "repeat_000.jsonl")) == 5
    assert not (out / "aggregate_bo.csv").exists()
    with pytest.raises(ExperimentFailure):
        calls["n"] = 0
        run_experiment(path)


def test_console_script_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "spartanbo.cli", "list-benchmarks"], capture_output=True, text=True)
    assert res.returncode == 0 and "branin" in res.stdout
    res = subprocess.run([sys.executable, "-m", "spartanbo.cli", "run", str(tmp_path / "x.json")], capture_output=True, text=True)
    assert res.returncode == 2


def test_shipped_configs_validate():
    from pathlib import Path

    configs = sorted((Path(__file__).parent.parent / "configs").glob("*.json"))
    assert configs
    for path in configs:
        assert cli.main(["validate", str(path)]) == 0
