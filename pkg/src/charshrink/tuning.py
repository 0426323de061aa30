"""Tuning-parameter selection by validation set or k-fold cross-validation."""
import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .admm import default_init, ProblemSpec
from .exceptions import InvalidArgumentError
from .matrix_core import format_float

logger = logging.getLogger(__name__)

# choices for the shrunk-covariance baseline; no published grid exists
LW_ALPHAS = tuple(np.geomspace(0.01, 0.99, 10))
LW_GAMMAS = (0.1, 0.5, 1.0, 2.0, 5.0, 10.0)

# fit/solve failures that are recorded per grid point instead of aborting
FIT_ERRORS = (ArithmeticError, np.linalg.LinAlgError, InvalidArgumentError)


class LambdaGrid:
    """Strictly decreasing tuning values; all positive except an optional final 0."""

    def __init__(self, values):
        vals = np.asarray(values, dtype=float).reshape(-1)
        if vals.size == 0:
            raise InvalidArgumentError("grid must be nonempty")
        if not np.all(np.isfinite(vals)) or np.any(vals[:-1] <= 0) or vals[-1] < 0:
            raise InvalidArgumentError("grid values must be positive (0 allowed last)")
        if np.any(np.diff(vals) >= 0):
            raise InvalidArgumentError("grid must be strictly decreasing")
        self.values = vals

    def __iter__(self):
        return iter(self.values.tolist())

    def __len__(self):
        return self.values.size

    def __getitem__(self, i):
        return float(self.values[i])

    def __repr__(self):
        return f"LambdaGrid({self.values.tolist()!r})"


def lambda_max(S, A, B, C):
    """Largest entry of ``|A W0 B - C|`` at the default starting point."""
    prob = ProblemSpec(S, A, B, C, 0.0)
    return float(np.max(np.abs(default_init(prob).theta)))


def default_grid(S, A, B, C, length=10, ratio=1e-4):
    """Log-spaced grid from ``lambda_max`` down to ``lambda_max * ratio``.

    ``lambda_max`` is the level at which the first soft-threshold from the
    default start zeroes the whole characteristic.
    """
    if length < 2:
        raise InvalidArgumentError("grid length must be at least 2")
    top = lambda_max(S, A, B, C)
    if top <= 0:
        top = 1.0
    return LambdaGrid(np.geomspace(top, top * ratio, length))


@dataclass
class SelectionTable:
    """One row per grid point: ``lambda``, ``metric``, ``iters``, ``converged``."""

    rows: list = field(default_factory=list)
    stratified: bool = True
    failures: list = field(default_factory=list)

    @property
    def metrics(self):
        return [r["metric"] for r in self.rows]

    def best_index(self):
        """Index of the smallest finite metric; earliest (largest lambda) on ties."""
        best = None
        for i, r in enumerate(self.rows):
            m = r["metric"]
            if np.isfinite(m) and (best is None or m < self.rows[best]["metric"]):
                best = i
        return best

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["lambda", "metric", "iters", "converged"])
            for r in self.rows:
                lam = r["lambda"]
                lam = ";".join(format_float(v) for v in lam) if isinstance(lam, tuple) \
                    else format_float(lam)
                writer.writerow([lam, format_float(r["metric"]), r["iters"],
                                 str(bool(r["converged"])).lower()])


def _solution_info(model):
    sol = getattr(model, "solution", None)
    if sol is None:
        return 0, True
    return sol.iters_used, sol.converged


def _fit_path(train, grid, fit_fn, warm_start):
    """Fit along the grid in order; yield (value, model or None, error)."""
    prev = None
    for value in grid:
        try:
            model = fit_fn(train, value, prev if warm_start else None)
        except FIT_ERRORS as exc:
            logger.warning("fit failed at %r: %s", value, exc)
            yield value, None, exc
            continue
        sol = getattr(model, "solution", None)
        if sol is not None:
            prev = sol
        yield value, model, None


def validation_select(train, validation, grid, fit_fn, metric_fn, warm_start=True):
    """Pick the grid value minimising ``metric_fn(model, validation)``.

    Parameters
    ----------
    grid : LambdaGrid or sequence
        Values tried in order; on ties the earlier value wins, so a
        decreasing lambda grid prefers the sparser model.
    fit_fn : callable ``(train, value, init) -> model``
        ``init`` is the previous grid point's ``model.solution`` when
        warm-starting, else None.
    metric_fn : callable ``(model, data) -> float``

    Returns
    -------
    best_value, best_model, SelectionTable
    """
    values = list(grid)
    if not values:
        raise InvalidArgumentError("grid must be nonempty")
    table = SelectionTable()
    models = []
    for value, model, err in _fit_path(train, values, fit_fn, warm_start):
        if err is not None:
            table.failures.append((value, str(err)))
            table.rows.append({"lambda": value, "metric": np.nan, "iters": 0, "converged": False})
            models.append(None)
            continue
        iters, conv = _solution_info(model)
        table.rows.append({"lambda": value, "metric": float(metric_fn(model, validation)),
                           "iters": iters, "converged": conv})
        models.append(model)
    best = table.best_index()
    if best is None:
        raise ArithmeticError(f"all fits failed: {table.failures}")
    return values[best], models[best], table


def assign_folds(y, folds, seed=0):
    """Fold index per observation, and whether the assignment is stratified.

    After a seeded shuffle, members of each class are dealt round-robin with
    the counter carried across classes, so fold sizes differ by at most one.
    When some class has fewer members than folds the class structure is
    ignored.
    """
    y = np.asarray(y)
    n = y.size
    if not 2 <= folds <= n:
        raise InvalidArgumentError(f"folds must lie in 2..{n}, got {folds}")
    perm = np.random.default_rng(seed).permutation(n)
    fold_of = np.empty(n, dtype=int)
    labels, counts = np.unique(y, return_counts=True)
    if counts.min() < folds:
        fold_of[perm] = np.arange(n) % folds
        return fold_of, False
    counter = 0
    for lab in labels:
        members = perm[y[perm] == lab]
        fold_of[members] = (counter + np.arange(members.size)) % folds
        counter += members.size
    return fold_of, True


@dataclass
class LabeledDataView:
    """Validation split that may not contain every class."""

    X: np.ndarray
    y: np.ndarray


def kfold_select(data, folds, grid, fit_fn, metric_fn, seed=0, warm_start=True):
    """Cross-validated choice of the tuning value.

    Returns ``(best_value, SelectionTable)``; the table's ``metric`` column
    is the mean validation metric over folds and ``stratified`` is False if
    the class-stratified assignment had to be abandoned.  Folds whose
    training part misses a class are skipped and listed in ``failures``.
    """
    values = list(grid)
    if not values:
        raise InvalidArgumentError("grid must be nonempty")
    fold_of, stratified = assign_folds(data.y, folds, seed)
    if not stratified:
        logger.warning("a class has fewer than %d members; folds are not stratified", folds)
    scores = np.full((folds, len(values)), np.nan)
    iters = np.zeros(len(values), dtype=int)
    conv = np.ones(len(values), dtype=bool)
    table = SelectionTable(stratified=stratified)
    for f in range(folds):
        train_idx = np.flatnonzero(fold_of != f)
        val_idx = np.flatnonzero(fold_of == f)
        try:
            train = data.subset(train_idx)
        except InvalidArgumentError as exc:
            # a class missing from this training split
            table.failures.append((f, None, str(exc)))
            continue
        val = LabeledDataView(data.X[val_idx], data.y[val_idx])
        for i, (value, model, err) in enumerate(_fit_path(train, values, fit_fn, warm_start)):
            if err is not None:
                table.failures.append((f, value, str(err)))
                conv[i] = False
                continue
            it, c = _solution_info(model)
            iters[i] += it
            conv[i] &= c
            scores[f, i] = metric_fn(model, val)
    for i, value in enumerate(values):
        col = scores[:, i]
        ok = np.isfinite(col)
        metric = float(col[ok].mean()) if ok.any() else np.nan
        table.rows.append({"lambda": value, "metric": metric, "iters": int(iters[i]),
                           "converged": bool(conv[i])})
    best = table.best_index()
    if best is None:
        raise ArithmeticError(f"all fits failed: {table.failures}")
    return values[best], table
