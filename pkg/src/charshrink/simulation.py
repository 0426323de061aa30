"""Synthetic LDA models, replicated method comparisons and their metrics."""
import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import lda
from .admm import SolverConfig, solve
from .estimators import glasso_problem, ledoit_wolf_precision
from .exceptions import InvalidArgumentError, UndefinedRateError
from .matrix_core import format_float
from .tuning import FIT_ERRORS, LW_ALPHAS, LW_GAMMAS, default_grid, validation_select

logger = logging.getLogger(__name__)

METHODS = ("proposed", "glasso", "lw", "bayes")
STUDY_COLUMNS = ("model", "J", "method", "replication", "misclass", "frob_err", "tpr", "tnr",
                 "status")
METRICS = ("misclass", "frob_err", "tpr", "tnr")


@dataclass
class TrueParams:
    sigma: np.ndarray
    omega: np.ndarray
    betas: np.ndarray
    mus: np.ndarray
    priors: np.ndarray

    @property
    def J(self):
        return self.betas.shape[0]

    @property
    def p(self):
        return self.sigma.shape[0]

    def true_deltas(self):
        """Rows ``beta_1 - beta_m`` for ``m = 2..J``."""
        return self.betas[0] - self.betas[1:]


@dataclass
class SplitSizes:
    train: int
    validation: int
    test: int

    def __post_init__(self):
        if min(self.train, self.validation, self.test) < 1:
            raise InvalidArgumentError("split sizes must be positive")

    @classmethod
    def default(cls, J):
        return cls(25 * J, 200, 1000)


def ar1_covariance(p, phi):
    idx = np.arange(p)
    return phi ** np.abs(idx[:, None] - idx[None, :])


def ar1_precision(p, phi):
    """Closed-form tridiagonal inverse of :func:`ar1_covariance`."""
    omega = np.zeros((p, p))
    if p == 1:
        omega[0, 0] = 1.0
        return omega
    d = np.full(p, 1.0 + phi ** 2)
    d[0] = d[-1] = 1.0
    omega[np.diag_indices(p)] = d
    off = np.arange(p - 1)
    omega[off, off + 1] = omega[off + 1, off] = -phi
    return omega / (1.0 - phi ** 2)


def equicorrelation_precision(m, rho):
    """Inverse of ``(1 - rho) I + rho 11^T`` in closed form."""
    return (np.eye(m) - rho / (1.0 + (m - 1) * rho) * np.ones((m, m))) / (1.0 - rho)


def _params(sigma, omega, betas):
    J = betas.shape[0]
    mus = betas @ sigma  # sigma symmetric: row j is sigma @ beta_j
    return TrueParams(sigma, omega, betas, mus, np.full(J, 1.0 / J))


def model1_params(p, J):
    """AR(1) covariance ``0.9^|a-b|``; ``beta_j = 1.5`` on variables ``4(j-1)+1..4j``."""
    if p < 4 * J:
        raise InvalidArgumentError(f"Model 1 needs p >= 4J = {4 * J}, got p={p}")
    betas = np.zeros((J, p))
    for j in range(J):
        betas[j, 4 * j:4 * j + 4] = 1.5
    return _params(ar1_covariance(p, 0.9), ar1_precision(p, 0.9), betas)


def model2_params(p, J):
    """Block-diagonal covariance: equicorrelated 0.5 on the first ``5J``
    variables, AR(1) ``0.5^|a-b|`` on the rest; ``beta_j = 2`` on ``5(j-1)+1..5j``."""
    if p < 5 * J:
        raise InvalidArgumentError(f"Model 2 needs p >= 5J = {5 * J}, got p={p}")
    m = 5 * J
    sigma = np.zeros((p, p))
    omega = np.zeros((p, p))
    sigma[:m, :m] = 0.5 * np.ones((m, m)) + 0.5 * np.eye(m)
    omega[:m, :m] = equicorrelation_precision(m, 0.5)
    if p > m:
        sigma[m:, m:] = ar1_covariance(p - m, 0.5)
        omega[m:, m:] = ar1_precision(p - m, 0.5)
    betas = np.zeros((J, p))
    for j in range(J):
        betas[j, 5 * j:5 * j + 5] = 2.0
    return _params(sigma, omega, betas)


MODELS = {1: model1_params, 2: model2_params}


def generate_dataset(params, sizes, seed):
    """Draw ``train + validation + test`` observations and split them in order.

    ``seed`` is anything accepted by :func:`numpy.random.default_rng`
    (an int or a :class:`numpy.random.SeedSequence`).
    """
    rng = np.random.default_rng(seed)
    n = sizes.train + sizes.validation + sizes.test
    chol = np.linalg.cholesky(params.sigma)
    y = rng.integers(1, params.J + 1, size=n)
    X = params.mus[y - 1] + rng.standard_normal((n, params.p)) @ chol.T
    cuts = np.cumsum([sizes.train, sizes.validation])
    parts = np.split(np.arange(n), cuts)
    return tuple(lda.LabeledData(X[idx], y[idx], params.J) for idx in parts)


def misclassification_rate(predicted, truth):
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise InvalidArgumentError(f"length mismatch: {predicted.shape} vs {truth.shape}")
    if truth.size == 0:
        raise InvalidArgumentError("no labels")
    return float(np.mean(predicted != truth))


def frobenius_error(omega_bar, omega_star):
    a = np.asarray(omega_bar, dtype=float)
    b = np.asarray(omega_star, dtype=float)
    if a.shape != b.shape:
        raise InvalidArgumentError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


def tpr_tnr(estimated_supports, true_deltas):
    """True positive and true negative rates of a ``(J-1) x p`` support estimate.

    ``estimated_supports`` is a boolean (or numeric, nonzero = selected)
    array; ``true_deltas`` holds ``beta_1 - beta_m`` row by row.
    """
    est = np.asarray(estimated_supports) != 0
    truth = np.asarray(true_deltas) != 0
    if est.shape != truth.shape:
        raise InvalidArgumentError(f"shape mismatch: {est.shape} vs {truth.shape}")
    pos = truth.sum()
    neg = truth.size - pos
    if pos == 0 or neg == 0:
        raise UndefinedRateError("no true positives or no true negatives")
    return float((est & truth).sum() / pos), float((~est & ~truth).sum() / neg)


def support_matrix(model):
    """Rows ``m = 2..J``: variables selected for the pair ``(1, m)``."""
    out = np.zeros((model.J - 1, model.p), dtype=bool)
    for m in range(2, model.J + 1):
        out[m - 2, list(model.pair_supports[(1, m)])] = True
    return out


def _misclass(model, data):
    return misclassification_rate(lda.predict(model, data.X), data.y)


# -- method fitters: (train, value, init) -> LdaModel ------------------------

def _fit_proposed(cfg):
    def fit_fn(train, lam, init):
        return lda.fit(train, lam, cfg, init)
    return fit_fn


def _fit_glasso(cfg):
    def fit_fn(train, lam, init):
        S = lda.pooled_covariance(train)
        sol = solve(glasso_problem(S, lam, penalize_diagonal=True), cfg, init)
        model = lda.model_from_precision(lda.class_means(train), lda.class_priors(train),
                                         sol.omega_hat)
        model.lam, model.solution = lam, sol
        return model
    return fit_fn


def _fit_lw(train, ag, init):
    alpha, gamma = ag
    omega = ledoit_wolf_precision(lda.pooled_covariance(train), alpha, gamma)
    return lda.model_from_precision(lda.class_means(train), lda.class_priors(train), omega)


def lw_grid():
    return [(float(a), float(g)) for a in LW_ALPHAS for g in LW_GAMMAS]


def bayes_model(params):
    return lda.model_from_precision(params.mus, params.priors, params.omega)


@dataclass
class StudyConfig:
    model: int = 1
    p: int = 200
    J_list: tuple = tuple(range(3, 11))
    replications: int = 100
    methods: tuple = METHODS
    seed: int = 0
    sizes: tuple = None  # (train, validation, test); default (25J, 200, 1000)
    grid_len: int = 10
    grid_ratio: float = 1e-4
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(
        adaptive_rho=True, eps_abs=1e-6, eps_rel=1e-6, max_iters=5000))

    def __post_init__(self):
        if self.model not in MODELS:
            raise InvalidArgumentError(f"model must be 1 or 2, got {self.model}")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise InvalidArgumentError(
                f"unknown methods {bad}; valid methods are {', '.join(METHODS)}")
        if self.replications < 1:
            raise InvalidArgumentError("replications must be positive")

    def split_sizes(self, J):
        return SplitSizes(*self.sizes) if self.sizes else SplitSizes.default(J)


def replication_seed(seed, J, r):
    """Independent stream for replication ``r`` at class count ``J``."""
    return np.random.SeedSequence(seed, spawn_key=(J, r))


def evaluate_method(method, params, train, validation, test, cfg):
    """Tune one method on the validation split and score it on the test split."""
    if method == "bayes":
        model = bayes_model(params)
    elif method == "lw":
        _, model, _ = validation_select(train, validation, lw_grid(), _fit_lw, _misclass,
                                        warm_start=False)
    else:
        S = lda.pooled_covariance(train)
        p = S.shape[0]
        if method == "proposed":
            B = lda.mean_difference_matrix(lda.class_means(train))
            grid = default_grid(S, np.eye(p), B, np.zeros_like(B), cfg.grid_len, cfg.grid_ratio)
            fit_fn = _fit_proposed(cfg.solver)
        else:
            grid = default_grid(S, np.eye(p), np.eye(p), np.zeros((p, p)), cfg.grid_len,
                                cfg.grid_ratio)
            fit_fn = _fit_glasso(cfg.solver)
        _, model, _ = validation_select(train, validation, grid, fit_fn, _misclass)
    misclass = _misclass(model, test)
    frob = 0.0 if method == "bayes" else frobenius_error(model.omega_hat, params.omega)
    try:
        tpr, tnr = tpr_tnr(support_matrix(model), params.true_deltas())
    except UndefinedRateError:
        tpr = tnr = np.nan
    return {"misclass": misclass, "frob_err": frob, "tpr": tpr, "tnr": tnr}


def run_replication(cfg, J, r):
    """All methods on one simulated dataset; returns one row per method."""
    params = MODELS[cfg.model](cfg.p, J)
    rows = []
    try:
        train, validation, test = generate_dataset(params, cfg.split_sizes(J),
                                                   replication_seed(cfg.seed, J, r))
    except FIT_ERRORS as exc:
        logger.warning("J=%d rep=%d: data generation failed: %s", J, r, exc)
        return [_row(cfg, J, m, r, None, f"failed: {exc}") for m in cfg.methods]
    for method in cfg.methods:
        try:
            metrics = evaluate_method(method, params, train, validation, test, cfg)
            status = "ok"
        except FIT_ERRORS as exc:
            logger.warning("J=%d rep=%d method=%s failed: %s", J, r, method, exc)
            metrics, status = None, f"failed: {exc}"
        rows.append(_row(cfg, J, method, r, metrics, status))
    return rows


def _row(cfg, J, method, r, metrics, status):
    row = {"model": cfg.model, "J": J, "method": method, "replication": r, "status": status}
    for k in METRICS:
        row[k] = np.nan if metrics is None else metrics[k]
    return row


def _run_task(args):
    return run_replication(*args)


@dataclass
class StudyReport:
    config: StudyConfig
    rows: list

    def summary(self):
        """Mean and standard error of each metric per ``(J, method)``.

        Failed replications are excluded; the order of rows is fixed by
        ``J_list`` then ``methods``.
        """
        out = []
        for J in self.config.J_list:
            for method in self.config.methods:
                sel = [r for r in self.rows if r["J"] == J and r["method"] == method]
                ok = [r for r in sel if r["status"] == "ok"]
                entry = {"model": self.config.model, "J": J, "method": method,
                         "n_reps": len(ok), "n_failed": len(sel) - len(ok)}
                for k in METRICS:
                    vals = np.array([r[k] for r in ok], dtype=float)
                    vals = vals[np.isfinite(vals)]
                    entry[f"{k}_mean"] = float(np.mean(vals)) if vals.size else np.nan
                    entry[f"{k}_se"] = (float(np.std(vals, ddof=1) / np.sqrt(vals.size))
                                        if vals.size > 1 else np.nan)
                out.append(entry)
        return out

    def mean(self, method, metric, J=None):
        for entry in self.summary():
            if entry["method"] == method and (J is None or entry["J"] == J):
                return entry[f"{metric}_mean"]
        raise KeyError(method)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(STUDY_COLUMNS)
            for r in self.rows:
                writer.writerow([_fmt(r[c]) for c in STUDY_COLUMNS])

    def write_summary_csv(self, path):
        summary = self.summary()
        cols = ["model", "J", "method", "n_reps", "n_failed"]
        cols += [f"{k}_{s}" for k in METRICS for s in ("mean", "se")]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(cols)
            for entry in summary:
                writer.writerow([_fmt(entry[c]) for c in cols])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    return v


def run_study(cfg, workers=1):
    """Replicated comparison of the configured methods.

    Every replication is a pure function of ``(cfg, J, r)``, so the report is
    identical for any ``workers`` count.
    """
    tasks = [(cfg, J, r) for J in cfg.J_list for r in range(cfg.replications)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_task, tasks))
    else:
        results = [_run_task(t) for t in tasks]
    rows = [row for rep in results for row in rep]
    return StudyReport(cfg, rows)
