import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from charshrink.admm import SolverConfig, solve
from charshrink.estimators import (
    class_pairs,
    cross_covariance,
    generic_problem,
    glasso_problem,
    lda_characteristic_problem,
    ledoit_wolf_precision,
    mean_difference_matrix,
    pair_index,
    portfolio_problem,
    portfolio_weights,
    regression_coefficients,
    regression_problem,
)
from charshrink.exceptions import DegeneratePortfolioError, InvalidArgumentError

from conftest import random_cov


def test_glasso_shapes():
    prob = glasso_problem(np.eye(3), 0.1)
    np.testing.assert_array_equal(prob.A, np.eye(3))
    np.testing.assert_array_equal(prob.B, np.eye(3))
    np.testing.assert_array_equal(prob.C, np.zeros((3, 3)))
    assert prob.weights is None or np.all(prob.penalty_levels() == 0.1)


def test_glasso_offdiagonal_mask():
    prob = glasso_problem(np.eye(3), 0.1, penalize_diagonal=False)
    np.testing.assert_array_equal(prob.weights, 1 - np.eye(3))


def test_lda_column_order():
    means = [np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.array([2.0, 2.0])]
    B = mean_difference_matrix(means)
    # columns (1,2), (1,3), (2,3)
    np.testing.assert_array_equal(B, [[1.0, -1.0, -2.0], [-1.0, -2.0, -1.0]])
    prob = lda_characteristic_problem(np.eye(2), means, 0.1)
    assert prob.char_shape == (2, 3)


@given(st.integers(2, 12))
def test_pair_index_enumerates_columns(J):
    idx = [pair_index(j, k, J) for j, k in class_pairs(J)]
    assert idx == list(range(J * (J - 1) // 2))


def test_pair_index_invalid():
    with pytest.raises(InvalidArgumentError):
        pair_index(2, 2, 3)


def test_mean_difference_needs_two_classes():
    with pytest.raises(InvalidArgumentError):
        mean_difference_matrix([np.zeros(2)])


def test_generic_shape_error_names_dimensions():
    with pytest.raises(InvalidArgumentError, match="4"):
        generic_problem(np.eye(3), np.eye(3), np.eye(4), np.zeros((3, 4)), 0.1)


def test_portfolio_problem_shapes():
    prob = portfolio_problem(np.eye(3), [1.0, 2.0, 3.0], 0.2)
    assert prob.char_shape == (3, 1)
    with pytest.raises(InvalidArgumentError):
        portfolio_problem(np.eye(3), [1.0, 2.0], 0.2)


def test_regression_problem_shapes():
    prob = regression_problem(np.eye(3), np.ones((3, 2)), 0.2)
    assert prob.char_shape == (3, 2)
    with pytest.raises(InvalidArgumentError):
        regression_problem(np.eye(3), np.ones((2, 2)), 0.2)


class TestLedoitWolf:
    def test_diagonal_example(self):
        out = ledoit_wolf_precision(np.diag([4.0, 1.0]), 0.5, 2.0)
        # 0.5*diag(4,1) + 2*0.5*I = diag(3, 1.5)
        np.testing.assert_allclose(out, np.diag([1 / 3, 2 / 3]), rtol=1e-14)

    def test_near_one_alpha(self, rng):
        S = random_cov(rng, 4)
        out = ledoit_wolf_precision(S, 0.999, 1.0)
        np.testing.assert_allclose(out, np.linalg.inv(0.999 * S + 0.001 * np.eye(4)), rtol=1e-10)

    @pytest.mark.parametrize("alpha,gamma", [(0.0, 1.0), (1.0, 1.0), (0.5, 0.0)])
    def test_rejects_bad_params(self, alpha, gamma):
        with pytest.raises(InvalidArgumentError):
            ledoit_wolf_precision(np.eye(2), alpha, gamma)


class TestPortfolio:
    @pytest.mark.parametrize("omega,mu,expected", [
        (np.eye(2), [1.0, 1.0], [0.5, 0.5]),
        (np.eye(2), [1.0, 0.0], [1.0, 0.0]),
        (np.diag([1.0, 2.0]), [1.0, 1.0], [1 / 3, 2 / 3]),
    ])
    def test_examples(self, omega, mu, expected):
        w = portfolio_weights(omega, mu)
        np.testing.assert_allclose(w, expected, rtol=1e-15)
        assert w.sum() == pytest.approx(1.0)

    def test_degenerate(self):
        with pytest.raises(DegeneratePortfolioError):
            portfolio_weights(np.eye(2), [1.0, -1.0])

    def test_solved_weights_sum_to_one(self, rng):
        S = random_cov(rng, 5)
        mu = rng.uniform(0.5, 1.5, 5)
        sol = solve(portfolio_problem(S, mu, 0.05), SolverConfig(adaptive_rho=True))
        assert portfolio_weights(sol.omega_hat, mu).sum() == pytest.approx(1.0, abs=1e-12)


class TestRegression:
    def test_unpenalized_matches_least_squares(self, rng):
        X = rng.standard_normal((200, 4))
        Y = X @ rng.standard_normal((4, 2)) + 0.1 * rng.standard_normal((200, 2))
        Xc = X - X.mean(axis=0)
        S_XX = Xc.T @ Xc / 200
        S_XY = cross_covariance(X, Y)
        sol = solve(regression_problem(S_XX, S_XY, 0.0), SolverConfig(eps_abs=1e-10, eps_rel=1e-10))
        beta = regression_coefficients(sol.omega_hat, S_XY)
        ols = np.linalg.lstsq(Xc, Y - Y.mean(axis=0), rcond=None)[0]
        np.testing.assert_allclose(beta, ols, atol=1e-6)

    def test_shape_error(self):
        with pytest.raises(InvalidArgumentError):
            regression_coefficients(np.eye(3), np.ones((2, 1)))

    def test_cross_covariance_row_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            cross_covariance(np.ones((3, 2)), np.ones((4, 1)))
