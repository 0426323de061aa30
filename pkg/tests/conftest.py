import numpy as np
import pytest


def random_cov(rng, p, n=None):
    n = n or 3 * p
    X = rng.standard_normal((n, p)) * rng.uniform(0.5, 2.0, p)
    return X.T @ X / n


def random_problem_matrices(rng, p, shape="square"):
    """(A, B) pairs with full column/row rank p."""
    if shape == "square":
        return np.eye(p), np.eye(p)
    if shape == "tall_a":
        A = np.vstack([np.eye(p), rng.standard_normal((p // 2 + 1, p)) / np.sqrt(p)])
        return A, np.eye(p)
    if shape == "wide_b":
        B = np.hstack([np.eye(p) + 0.1 * rng.standard_normal((p, p)),
                       rng.standard_normal((p, 3))])
        return np.eye(p), B
    raise ValueError(shape)


def random_instance(seed, p, shape, lam):
    """Seeded problem with characteristic noise ``C``; ``shape`` as above."""
    from charshrink.admm import ProblemSpec

    rng = np.random.default_rng(seed)
    X = rng.standard_normal((3 * p, p)) * rng.uniform(0.5, 2.0, p)
    S = X.T @ X / (3 * p)
    A, B = random_problem_matrices(rng, p, shape)
    C = 0.1 * rng.standard_normal((A.shape[0], B.shape[1]))
    return ProblemSpec(S, A, B, C, lam)


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)
