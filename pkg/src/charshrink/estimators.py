"""Problem constructors for the applications, plus closed-form baselines."""
from itertools import combinations

import numpy as np

from .admm import ProblemSpec
from .exceptions import DegeneratePortfolioError, InvalidArgumentError
from .matrix_core import as_dense, as_symmetric, as_vector, spd_inverse_and_logdet

CHARACTERISTIC_KINDS = ("generic", "glasso", "lda", "portfolio", "regression")


def generic_problem(S, A, B, C, lam, weights=None):
    """Validated :class:`ProblemSpec` for user-supplied ``A``, ``B``, ``C``."""
    return ProblemSpec(S, A, B, C, lam, weights, kind="generic")


def glasso_problem(S, lam, penalize_diagonal=True):
    """L1-penalised likelihood: ``A = B = I``, ``C = 0``.

    With ``penalize_diagonal=False`` only off-diagonal entries are
    penalised, through a zero-diagonal weight mask.
    """
    S = as_symmetric(S, "S")
    p = S.shape[0]
    weights = None if penalize_diagonal else 1.0 - np.eye(p)
    return ProblemSpec(S, np.eye(p), np.eye(p), np.zeros((p, p)), lam, weights, kind="glasso")


def pair_index(j, k, J):
    """Column of the pair ``(j, k)``, ``1 <= j < k <= J``, in the LDA characteristic.

    Pairs are ordered lexicographically: ``(1,2), (1,3), ..., (J-1,J)``.
    """
    if not 1 <= j < k <= J:
        raise InvalidArgumentError(f"invalid class pair ({j}, {k}) for J={J}")
    return (j - 1) * (2 * J - j) // 2 + (k - j) - 1


def class_pairs(J):
    return list(combinations(range(1, J + 1), 2))


def mean_difference_matrix(class_means):
    """``p x J(J-1)/2`` matrix with columns ``xbar_j - xbar_k`` for ``j < k``."""
    means = [as_vector(m, "class mean") for m in class_means]
    J = len(means)
    if J < 2:
        raise InvalidArgumentError(f"need at least 2 classes, got {J}")
    p = means[0].size
    if any(m.size != p for m in means):
        raise InvalidArgumentError("class means have different lengths")
    return np.column_stack([means[j - 1] - means[k - 1] for j, k in class_pairs(J)])


def lda_characteristic_problem(S_pooled, class_means, lam):
    """``A = I``, ``C = 0`` and ``B`` the pairwise mean differences."""
    B = mean_difference_matrix(class_means)
    p = B.shape[0]
    return ProblemSpec(S_pooled, np.eye(p), B, np.zeros((p, B.shape[1])), lam, kind="lda")


def portfolio_problem(S, mu_hat, lam):
    """``A = I``, ``C = 0``, ``B`` the column of expected returns."""
    mu = as_vector(mu_hat, "mu_hat")
    S = as_symmetric(S, "S")
    if mu.size != S.shape[0]:
        raise InvalidArgumentError(f"mu_hat has length {mu.size}, S is {S.shape[0]}x{S.shape[0]}")
    p = mu.size
    return ProblemSpec(S, np.eye(p), mu.reshape(p, 1), np.zeros((p, 1)), lam, kind="portfolio")


def regression_problem(S_XX, S_XY, lam):
    """``A = I``, ``C = 0``, ``B`` the predictor/response cross-covariance."""
    S_XY = as_dense(S_XY, "S_XY")
    S_XX = as_symmetric(S_XX, "S_XX")
    if S_XY.shape[0] != S_XX.shape[0]:
        raise InvalidArgumentError(
            f"S_XY has {S_XY.shape[0]} rows but S_XX is {S_XX.shape[0]}x{S_XX.shape[0]}"
        )
    p = S_XX.shape[0]
    return ProblemSpec(S_XX, np.eye(p), S_XY, np.zeros_like(S_XY), lam, kind="regression")


def cross_covariance(X, Y):
    """Maximum-likelihood cross-covariance of column-centred ``X`` and ``Y``."""
    X = as_dense(X, "X")
    Y = as_dense(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise InvalidArgumentError("X and Y need the same number of rows")
    Xc = X - X.mean(axis=0)
    Yc = Y - Y.mean(axis=0)
    return Xc.T @ Yc / X.shape[0]


def ledoit_wolf_precision(S, alpha, gamma):
    """Inverse of the shrunk covariance ``alpha * S + gamma * (1 - alpha) * I``."""
    if not 0 < alpha < 1:
        raise InvalidArgumentError(f"alpha must lie in (0, 1), got {alpha}")
    if not gamma > 0:
        raise InvalidArgumentError(f"gamma must be positive, got {gamma}")
    S = as_symmetric(S, "S")
    shrunk = alpha * S + gamma * (1 - alpha) * np.eye(S.shape[0])
    inv, _ = spd_inverse_and_logdet(shrunk)
    return inv


def portfolio_weights(omega_hat, mu_hat):
    """Fully-invested weights ``W mu / sum(W mu)``.

    Entries of ``W mu`` that are exactly zero stay exactly zero.
    """
    omega = as_symmetric(omega_hat, "omega_hat")
    mu = as_vector(mu_hat, "mu_hat")
    if mu.size != omega.shape[0]:
        raise InvalidArgumentError(f"mu_hat has length {mu.size}, omega is {omega.shape[0]}")
    raw = omega @ mu
    total = raw.sum()
    if total == 0:
        raise DegeneratePortfolioError("sum of omega @ mu is zero")
    return raw / total


def regression_coefficients(omega_hat, S_XY):
    omega = as_symmetric(omega_hat, "omega_hat")
    S_XY = as_dense(S_XY, "S_XY")
    if S_XY.shape[0] != omega.shape[0]:
        raise InvalidArgumentError(
            f"S_XY has {S_XY.shape[0]} rows, omega is {omega.shape[0]}x{omega.shape[0]}"
        )
    return omega @ S_XY
