"""Linear discriminant analysis fitted with a characteristic-penalised precision matrix."""
import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .admm import Solution, SolverConfig, solve
from .estimators import class_pairs, lda_characteristic_problem, mean_difference_matrix, pair_index
from .exceptions import InvalidArgumentError
from .matrix_core import as_dense, as_symmetric, as_vector

SUPPORT_TOL = 1e-8


@dataclass
class LabeledData:
    """Features ``X`` (n x p) with integer labels ``y`` in ``1..J``."""

    X: np.ndarray
    y: np.ndarray
    J: Optional[int] = None

    def __post_init__(self):
        self.X = as_dense(self.X, "X")
        y = np.asarray(self.y)
        if y.ndim != 1 or y.size != self.X.shape[0]:
            raise InvalidArgumentError(f"y must have length {self.X.shape[0]}")
        if not np.all(np.equal(np.mod(y, 1), 0)):
            raise InvalidArgumentError("labels must be integers")
        self.y = y.astype(int)
        if self.J is None:
            self.J = int(self.y.max()) if self.y.size else 0
        if np.any((self.y < 1) | (self.y > self.J)):
            raise InvalidArgumentError(f"labels must lie in 1..{self.J}")
        missing = sorted(set(range(1, self.J + 1)) - set(self.y.tolist()))
        if missing:
            raise InvalidArgumentError(f"classes {missing} have no observations")

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    def subset(self, idx):
        return LabeledData(self.X[idx], self.y[idx], self.J)


def read_labeled_csv(path, header=False):
    """Features in all but the last column, integer label in the last."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if header:
        rows = rows[1:]
    try:
        arr = np.array([[float(v) for v in r] for r in rows])
    except ValueError as exc:
        raise InvalidArgumentError(f"{path}: {exc}") from None
    if arr.ndim != 2 or arr.shape[1] < 2:
        raise InvalidArgumentError(f"{path}: need at least one feature column and a label column")
    return LabeledData(arr[:, :-1], arr[:, -1])


def class_means(data):
    return np.vstack([data.X[data.y == j].mean(axis=0) for j in range(1, data.J + 1)])


def class_priors(data):
    return np.array([(data.y == j).mean() for j in range(1, data.J + 1)])


def pooled_covariance(data):
    """Within-class scatter divided by ``n``."""
    means = class_means(data)
    centred = data.X - means[data.y - 1]
    return as_symmetric(centred.T @ centred / data.n)


@dataclass
class LdaModel:
    means: np.ndarray
    priors: np.ndarray
    omega_hat: np.ndarray
    pair_supports: dict
    characteristic: Optional[np.ndarray] = None
    lam: Optional[float] = None
    solution: Optional[Solution] = field(default=None, repr=False)

    @property
    def J(self):
        return self.means.shape[0]

    @property
    def p(self):
        return self.means.shape[1]

    def to_dict(self, omega_ref=None):
        """JSON-ready summary; ``omega_ref`` replaces the inline matrix by a path."""
        out = {
            "J": self.J,
            "p": self.p,
            "lambda": self.lam,
            "means": self.means.tolist(),
            "priors": self.priors.tolist(),
            "pair_supports": {f"{j},{k}": list(map(int, v))
                              for (j, k), v in sorted(self.pair_supports.items())},
        }
        if omega_ref is None:
            out["omega_hat"] = self.omega_hat.tolist()
        else:
            out["omega_hat_file"] = str(omega_ref)
        if self.solution is not None:
            out["converged"] = self.solution.converged
            out["iters_used"] = self.solution.iters_used
        return out

    @classmethod
    def from_dict(cls, d, omega=None):
        if omega is None:
            omega = np.asarray(d["omega_hat"], dtype=float)
        supports = {tuple(int(t) for t in key.split(",")): tuple(v)
                    for key, v in d.get("pair_supports", {}).items()}
        return cls(np.asarray(d["means"], dtype=float), np.asarray(d["priors"], dtype=float),
                   as_symmetric(omega), supports, lam=d.get("lambda"))


def supports_from_characteristic(char, J):
    """Nonzero rows of each pair column, exact-zero test."""
    return {(j, k): tuple(np.flatnonzero(char[:, pair_index(j, k, J)] != 0).tolist())
            for j, k in class_pairs(J)}


def fit(data, lam, cfg=None, init=None):
    """Fit class means, priors and a precision matrix whose products with
    every pairwise mean difference are shrunk toward sparsity.

    Parameters
    ----------
    data : LabeledData
    lam : float
        Penalty on ``|W (xbar_j - xbar_k)|_1`` summed over pairs.
    cfg : SolverConfig, optional
    init : Solution or SolverState, optional
        Warm start.

    Returns
    -------
    LdaModel
        ``pair_supports[(j, k)]`` holds the variables with a nonzero entry in
        the sparse characteristic column of that pair.
    """
    if data.J < 2:
        raise InvalidArgumentError("need at least two classes")
    means = class_means(data)
    S = pooled_covariance(data)
    prob = lda_characteristic_problem(S, list(means), lam)
    sol = solve(prob, cfg or SolverConfig(), init)
    return LdaModel(means, class_priors(data), sol.omega_hat,
                    supports_from_characteristic(sol.theta_hat, data.J),
                    characteristic=sol.theta_hat, lam=float(lam), solution=sol)


def model_from_precision(means, priors, omega, tol=SUPPORT_TOL):
    """LDA model for an externally estimated precision matrix.

    Such estimators are never exactly sparse in ``W (xbar_j - xbar_k)``, so
    a variable is in the support when that entry exceeds ``tol`` in size.
    """
    means = as_dense(means, "means")
    omega = as_symmetric(omega, "omega")
    char = omega @ mean_difference_matrix(list(means))
    char = np.where(np.abs(char) > tol, char, 0.0)
    J = means.shape[0]
    return LdaModel(means, as_vector(priors, "priors"), omega,
                    supports_from_characteristic(char, J), characteristic=char)


def discriminant_scores(model, X):
    """``x^T W xbar_j - xbar_j^T W xbar_j / 2 + log pi_j`` for each row and class."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.p:
        raise InvalidArgumentError(f"expected {model.p} features, got {X.shape[1]}")
    Wm = model.omega_hat @ model.means.T
    const = -0.5 * np.einsum("jp,pj->j", model.means, Wm) + np.log(model.priors)
    return X @ Wm + const


def predict(model, X):
    """Bayes-rule labels in ``1..J``; ties go to the smallest label.

    A single feature vector returns a single int, a matrix an int array.
    """
    single = np.ndim(X) == 1
    labels = np.argmax(discriminant_scores(model, X), axis=1) + 1
    return int(labels[0]) if single else labels


def selected_variables(model, j, k):
    """Variables informative for separating classes ``j < k``."""
    pair_index(j, k, model.J)
    return set(model.pair_supports[(j, k)])


def f_statistics(data):
    """One-way ANOVA F statistic of every column.

    Zero within-class variance gives ``inf`` when the between-class part is
    positive and ``0`` when it is zero too.
    """
    n, J = data.n, data.J
    if J < 2:
        raise InvalidArgumentError("F statistics need at least two classes")
    grand = data.X.mean(axis=0)
    means = class_means(data)
    counts = np.array([(data.y == j).sum() for j in range(1, J + 1)])
    between = (counts[:, None] * (means - grand) ** 2).sum(axis=0) / (J - 1)
    within_ss = ((data.X - means[data.y - 1]) ** 2).sum(axis=0)
    if n > J:
        within = within_ss / (n - J)
    else:
        within = np.where(within_ss > 0, np.inf, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        F = between / within
    F = np.where(within > 0, F, np.where(between > 0, np.inf, 0.0))
    return F


def f_statistic_screen(data, k):
    """Indices of the ``k`` columns with the largest F, in descending F order.

    Ties are broken toward the smaller column index.
    """
    if not 0 <= k <= data.p:
        raise InvalidArgumentError(f"k must lie in 0..{data.p}, got {k}")
    F = f_statistics(data)
    order = np.lexsort((np.arange(data.p), -F))
    return order[:k].tolist()
