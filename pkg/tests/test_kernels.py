import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spartanbo.kernels import (
    KernelSpec,
    SpartanHyperparams,
    ard_distance,
    base_kernel,
    cross_covariance,
    discretize,
    gram_matrix,
    hamming_eval,
    spartan_eval,
    spartan_weights,
)

# Constants below were computed with 30-digit mpmath arithmetic written
# independently of the package.
MATERN52_AT_1 = 0.523994108831820310592713250761
SPARTAN_04_06 = 0.198744398540806248918512105729  # d=1, l_g=1, l_l=0.01, center 0.5
DEFAULT_WEIGHTS_AT_HALF = (0.25698420677409596, 0.96641560286901861)

STATIONARY = [KernelSpec("matern", nu=nu) for nu in (0.5, 1.5, 2.5)] + [KernelSpec("se")]


def random_spartan(rng, d, n_local=1):
    return SpartanHyperparams(
        global_lengthscales=rng.lognormal(math.log(0.3), 1.0, d),
        local_lengthscales=rng.lognormal(math.log(0.3), 1.0, (n_local, d)),
        funnel_center=rng.random(d),
        global_center=rng.random(d),
        global_variance=rng.uniform(0.01, 20.0),
        local_variances=rng.uniform(0.005, 1.0, n_local),
    )


def spartan_spec(hp, inner="matern", nu=2.5):
    return KernelSpec(
        "spartan",
        inner_family=inner,
        inner_nu=nu,
        n_local=hp.n_local,
        local_variances=tuple(hp.local_variances),
    )


# -- distance and base kernels ----------------------------------------------


def test_ard_distance_examples():
    assert ard_distance([0.3, 0.7], [0.3, 0.7], [0.2, 5.0]) == 0.0
    assert ard_distance([1, 0], [0, 0], [1, 1]) == 1.0
    assert ard_distance([1, 1], [0, 0], [4, 1]) == pytest.approx(math.sqrt(1.25), abs=1e-15)


def test_ard_distance_errors():
    with pytest.raises(ValueError):
        ard_distance([0, 0], [0, 0, 0], [1, 1])
    with pytest.raises(ValueError):
        ard_distance([0, 0], [1, 1], [1, 0])
    with pytest.raises(ValueError):
        ard_distance([0, 0], [1, 1], [1, -2])


def test_base_kernel_values():
    assert base_kernel(0.0) == 1.0
    assert base_kernel(1.0) == pytest.approx(MATERN52_AT_1, rel=1e-14)
    assert base_kernel(2.0, "se") == pytest.approx(math.exp(-2.0), rel=1e-14)
    assert base_kernel(1.0, "matern", 0.5) == pytest.approx(math.exp(-1.0), rel=1e-14)
    assert base_kernel(1.0, "matern", 1.5) == pytest.approx((1 + math.sqrt(3)) * math.exp(-math.sqrt(3)), rel=1e-14)
    with pytest.raises(ValueError):
        base_kernel(1.0, "matern", 2.0)
    with pytest.raises(ValueError):
        base_kernel(-0.1)


@pytest.mark.parametrize("spec", STATIONARY, ids=lambda s: f"{s.family}{s.nu}")
def test_base_kernel_decreasing(spec):
    r = np.linspace(0, 20, 2001)
    k = base_kernel(r, spec.family, spec.nu)
    assert k[0] == 1.0
    assert np.all(k > 0) or spec.family == "se"
    assert np.all(k <= 1.0)
    assert np.all(np.diff(k[k > 1e-300]) < 0)


# -- spartan weights and kernel ---------------------------------------------


def test_symmetric_weights():
    hp = SpartanHyperparams([1.0], [[1.0]], [0.5], [0.5], 0.05, [0.05])
    w = spartan_weights([0.5], hp)
    assert w.global_weight == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    assert w.local_weights[0] == pytest.approx(1 / math.sqrt(2), abs=1e-15)


def test_default_weight_geometry():
    hp = SpartanHyperparams([1.0], [[0.01]], [0.5])
    w = spartan_weights([0.5], hp)
    assert w.global_weight == pytest.approx(DEFAULT_WEIGHTS_AT_HALF[0], abs=1e-12)
    assert w.local_weights[0] == pytest.approx(DEFAULT_WEIGHTS_AT_HALF[1], abs=1e-12)


def test_spartan_regression_constant():
    hp = SpartanHyperparams([1.0], [[0.01]], [0.5])
    assert spartan_eval([0.4], [0.6], hp) == pytest.approx(SPARTAN_04_06, abs=1e-14)


def test_spartan_validation():
    with pytest.raises(ValueError):
        SpartanHyperparams([1.0], [[1.0]], [1.5])
    with pytest.raises(ValueError):
        SpartanHyperparams([1.0], [[1.0]], [0.5], global_variance=0.0)
    with pytest.raises(ValueError):
        SpartanHyperparams([1.0], [[-1.0]], [0.5])
    with pytest.raises(ValueError):
        KernelSpec("matern", nu=3.5)
    with pytest.raises(ValueError):
        KernelSpec("spartan", n_local=0)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 10), n_local=st.integers(1, 3))
def test_weight_normalization(seed, d, n_local):
    rng = np.random.default_rng(seed)
    hp = random_spartan(rng, d, n_local)
    x = rng.random(d)
    w = spartan_weights(x, hp)
    total = w.global_weight**2 + np.sum(w.local_weights**2)
    assert abs(total - 1.0) <= 1e-12
    assert 0 <= w.global_weight <= 1 and np.all((0 <= w.local_weights) & (w.local_weights <= 1))


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 6))
def test_spartan_symmetry_diagonal_bound(seed, d):
    rng = np.random.default_rng(seed)
    hp = random_spartan(rng, d, int(rng.integers(1, 3)))
    x, x2 = rng.random(d), rng.random(d)
    assert abs(spartan_eval(x, x2, hp) - spartan_eval(x2, x, hp)) <= 1e-14
    assert abs(spartan_eval(x, x, hp) - 1.0) <= 1e-12
    assert abs(spartan_eval(x, x2, hp)) <= 1.0 + 1e-12


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 6))
def test_spartan_stationary_degeneracy(seed, d):
    rng = np.random.default_rng(seed)
    ls = rng.lognormal(math.log(0.3), 1.0, d)
    center = rng.random(d)
    hp = SpartanHyperparams(ls, [ls], center, center, 0.05, [0.05])
    x, x2 = rng.random(d), rng.random(d)
    expected = base_kernel(ard_distance(x, x2, ls))
    assert abs(spartan_eval(x, x2, hp) - expected) <= 1e-12


# -- hamming ------------------------------------------------------------------


def test_hamming_examples():
    assert hamming_eval([1, 2, 3], [1, 2, 3], 0.7) == 1.0
    assert hamming_eval([1, 2, 3], [1, 5, 3], 2.0) == pytest.approx(math.exp(-1.0), rel=1e-15)
    assert hamming_eval([0, 0], [1, 1], 1.0) == pytest.approx(math.exp(-2.0), rel=1e-15)
    with pytest.raises(ValueError):
        hamming_eval([0], [1], 0.0)
    with pytest.raises(ValueError):
        hamming_eval([0, 1], [1], 1.0)


def test_discretize_rounds_half_up():
    assert discretize([0.25, 0.75], (3, 3)).tolist() == [1.0, 2.0]  # 0.5 -> 1, 1.5 -> 2
    assert discretize([0.0, 1.0, 0.49], (3, 3, 3)).tolist() == [0.0, 2.0, 1.0]
    assert discretize([2.5, 1.4]).tolist() == [3.0, 1.0]


def test_hamming_scaled_inputs_match_codes():
    spec = KernelSpec("hamming", cardinalities=(3, 4))
    codes = np.array([[0, 0], [1, 3], [2, 1]], float)
    unit = codes / (np.array([3, 4]) - 1)
    K = cross_covariance(unit, unit, spec, [0.8])
    for i in range(3):
        for j in range(3):
            assert K[i, j] == pytest.approx(hamming_eval(codes[i], codes[j], 0.8), abs=1e-15)


# -- gram matrices ----------------------------------------------------------


def test_gram_small_cases():
    spec = KernelSpec()
    assert gram_matrix([[0.3]], spec, [0.5], nugget=1e-3).tolist() == [[1.001]]
    assert np.array_equal(gram_matrix([[0.3, 0.2], [0.3, 0.2]], spec, [0.5, 0.5]), np.ones((2, 2)))


def test_gram_matern_psd():
    rng = np.random.default_rng(0)
    X = rng.random((50, 3))
    K = gram_matrix(X, KernelSpec(), rng.lognormal(math.log(0.3), 1, 3), nugget=1e-6)
    assert np.linalg.eigvalsh(K).min() >= -1e-8


def _random_family(rng, d):
    kind = int(rng.integers(0, 6))
    if kind < 4:
        spec = STATIONARY[kind]
        return spec, rng.lognormal(math.log(0.3), 1.0, d), None
    if kind == 4:
        hp = random_spartan(rng, d, int(rng.integers(1, 3)))
        inner = ("matern", 2.5) if rng.random() < 0.5 else ("se", 2.5)
        return spartan_spec(hp, *inner), hp.theta(), hp.geometry()
    # the squared Hamming distance is only PSD for one categorical input
    return KernelSpec("hamming", hamming_power=1 if d > 1 else 2), np.array([rng.lognormal(0, 1)]), None


def test_psd_all_families():
    rng = np.random.default_rng(12345)
    worst = 0.0
    for _ in range(200):
        d = int(rng.integers(1, 11))
        n = int(rng.integers(2, 61))
        spec, theta, geom = _random_family(rng, d)
        X = rng.random((n, d))
        if spec.family == "hamming":
            X = rng.integers(0, 3, (n, d)).astype(float)
        K = gram_matrix(X, spec, theta, geom=geom)
        assert np.max(np.abs(K - K.T)) <= 1e-14
        worst = min(worst, np.linalg.eigvalsh(K).min())
    assert worst >= -1e-8


def test_squared_hamming_indefinite_with_several_inputs():
    # all 27 codes over three ternary inputs
    X = np.array(np.meshgrid(*[range(3)] * 3)).reshape(3, -1).T.astype(float)
    squared = gram_matrix(X, KernelSpec("hamming"), [0.6])
    plain = gram_matrix(X, KernelSpec("hamming", hamming_power=1), [0.6])
    assert np.linalg.eigvalsh(squared).min() < -1e-3
    assert np.linalg.eigvalsh(plain).min() > 0
    assert hamming_eval([0, 0], [1, 1], 1.0, power=1) == pytest.approx(math.exp(-1.0), rel=1e-15)


@pytest.mark.parametrize("spec", STATIONARY, ids=lambda s: f"{s.family}{s.nu}")
def test_stationary_diagonal_exact(spec):
    rng = np.random.default_rng(3)
    X = rng.random((20, 4))
    K = gram_matrix(X, spec, rng.lognormal(-1, 1, 4))
    assert np.all(np.diag(K) == 1.0)


def test_cross_covariance_matches_scalar():
    rng = np.random.default_rng(7)
    hp = random_spartan(rng, 3, 2)
    spec = spartan_spec(hp)
    A, B = rng.random((4, 3)), rng.random((5, 3))
    K = cross_covariance(A, B, spec, hp.theta(), hp.geometry())
    for i in range(4):
        for j in range(5):
            assert K[i, j] == pytest.approx(spartan_eval(A[i], B[j], hp), abs=1e-14)
