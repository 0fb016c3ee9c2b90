import numpy as np
import pytest

from spartanbo.design import initial_design, latin_hypercube, sobol


def test_lhs_stratification_one_dimension():
    x = latin_hypercube(4, 1, 0)[:, 0]
    assert sorted(np.floor(x * 4).astype(int).tolist()) == [0, 1, 2, 3]


@pytest.mark.parametrize("p,d", [(10, 2), (7, 5), (100, 3)])
def test_lhs_every_coordinate_stratified(p, d):
    X = latin_hypercube(p, d, 3)
    assert X.shape == (p, d)
    for j in range(d):
        assert sorted(np.floor(X[:, j] * p).astype(int).tolist()) == list(range(p))


def test_lhs_deterministic():
    assert np.array_equal(latin_hypercube(10, 3, 5), latin_hypercube(10, 3, 5))
    assert not np.array_equal(latin_hypercube(10, 3, 5), latin_hypercube(10, 3, 6))


def test_sobol_prefix():
    assert sobol(1, 2).tolist() == [[0.5, 0.5]]
    assert sobol(3, 2).tolist() == [[0.5, 0.5], [0.75, 0.25], [0.25, 0.75]]
    assert np.array_equal(initial_design("sobol", 5, 3, rng=1), initial_design("sobol", 5, 3, rng=2))


def test_design_errors():
    with pytest.raises(ValueError):
        initial_design("grid", 4, 2)
    with pytest.raises(ValueError):
        initial_design("lhs", 0, 2)
