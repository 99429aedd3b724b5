import numpy as np
import pytest

from shrinkpred.canonical import as1_problem, canonicalize


@pytest.fixture(scope="session")
def as1_xtilde():
    rng = np.random.default_rng(424242)
    xt = rng.standard_normal((3, 3))
    assert np.linalg.matrix_rank(xt) == 3
    return xt


@pytest.fixture(scope="session")
def as1_problem_n12(as1_xtilde):
    """Replicated design with m = k = 3, N = 4, so n = 12 and D = I/4."""
    return as1_problem(as1_xtilde, 4)


def make_case2_design(d_target: float = 0.05, seed: int = 31415):
    """Fixed k=3, m=1, n=12 design scaled so the canonical eigenvalue is d_target."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((12, 3))
    xt0 = rng.standard_normal((1, 3))
    b = float((xt0 @ np.linalg.inv(X.T @ X) @ xt0.T).item())
    xt = xt0 * np.sqrt(d_target / b)
    return X, xt


@pytest.fixture(scope="session")
def case2_design():
    return make_case2_design()


@pytest.fixture(scope="session")
def case2_problem_n12(case2_design):
    """Case II problem: k = 3, m = 1 (l = 1, V* has dimension 2), n = 12."""
    X, xt = case2_design
    return canonicalize(X, xt)


@pytest.fixture
def rng():
    return np.random.default_rng(90210)
