"""Dense matrix validation and the numerical primitives shared by the solver.

Matrices are plain :class:`numpy.ndarray` objects.  The ``as_*`` helpers
validate (and symmetrise where relevant) their input and return a fresh
float64 array; every other module calls them at its boundary instead of
wrapping arrays in container classes.
"""
import csv
from typing import NamedTuple

import numpy as np

from .exceptions import InvalidArgumentError, NotPositiveDefiniteError

PD_TOL = 1e-12


class EigenPair(NamedTuple):
    """Eigendecomposition ``M = vectors @ diag(values) @ vectors.T``.

    ``values`` are sorted in descending order and each column of ``vectors``
    has its first nonzero component nonnegative.
    """

    values: np.ndarray
    vectors: np.ndarray

    def reconstruct(self):
        return (self.vectors * self.values) @ self.vectors.T


def as_dense(M, name="matrix"):
    """Return ``M`` as a finite 2-D float array (copied)."""
    arr = np.array(M, dtype=float, copy=True)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise InvalidArgumentError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} has non-finite entries")
    return arr


def as_vector(v, name="vector"):
    arr = np.array(v, dtype=float, copy=True).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} has non-finite entries")
    return arr


def as_symmetric(M, name="matrix"):
    """Return the symmetric part ``(M + M.T) / 2`` of a square matrix.

    The result satisfies ``out[i, j] == out[j, i]`` bitwise.
    """
    arr = as_dense(M, name)
    if arr.shape[0] != arr.shape[1]:
        raise InvalidArgumentError(f"{name} must be square, got shape {arr.shape}")
    upper = np.triu(arr + arr.T) / 2.0
    return upper + np.triu(upper, 1).T


def as_spd(M, name="matrix", tol=PD_TOL):
    """Symmetrise ``M`` and certify that its smallest eigenvalue exceeds ``tol``."""
    arr = as_symmetric(M, name)
    smallest = np.linalg.eigvalsh(arr)[0] if arr.size else np.inf
    if not smallest > tol:
        raise NotPositiveDefiniteError(
            f"{name} is not positive definite (smallest eigenvalue {smallest:.3e})"
        )
    return arr


def soft_threshold(M, t):
    """Elementwise soft-thresholding ``sign(m) * max(|m| - t, 0)``.

    ``t`` may be a scalar or an array broadcastable against ``M`` (used for
    per-entry penalty weights).  Thresholded entries are exact zeros.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or not np.all(np.isfinite(t)):
        raise InvalidArgumentError("threshold must be finite and nonnegative")
    M = np.asarray(M, dtype=float)
    out = np.sign(M) * np.maximum(np.abs(M) - t, 0.0)
    # avoid -0.0 so zero patterns compare bitwise
    out[out == 0] = 0.0
    return out


def sym_eigen(M):
    """Symmetric eigendecomposition with a deterministic sign convention.

    Parameters
    ----------
    M : array_like, shape (p, p)
        Symmetric matrix; it is symmetrised before decomposition.

    Returns
    -------
    EigenPair
        Eigenvalues in descending order; each eigenvector's first component
        larger than ``1e-12`` in magnitude is made positive.
    """
    arr = as_symmetric(M)
    values, vectors = np.linalg.eigh(arr)
    values = values[::-1].copy()
    vectors = vectors[:, ::-1].copy()
    for j in range(vectors.shape[1]):
        col = vectors[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size and col[nz[0]] < 0:
            vectors[:, j] = -col
    return EigenPair(values, vectors)


def largest_eigenvalue(M, tol=1e-10, max_iter=1000):
    """Largest eigenvalue of a symmetric PSD matrix by power iteration.

    Starts from the all-ones vector (deterministic) and stops when the
    Rayleigh quotient changes by less than ``tol`` relative to its size.
    """
    arr = as_symmetric(M)
    p = arr.shape[0]
    if not np.any(arr):
        return 0.0
    x = np.ones(p) / np.sqrt(p)
    est = float(x @ arr @ x)
    for _ in range(max_iter):
        y = arr @ x
        norm = np.linalg.norm(y)
        if norm == 0.0:
            # start vector orthogonal to the range; fall back to a dense solve
            return float(np.linalg.eigvalsh(arr)[-1])
        x = y / norm
        new = float(x @ arr @ x)
        if abs(new - est) <= tol * max(abs(new), 1.0):
            est = new
            break
        est = new
    return est


def sample_covariance(X, center=True):
    """Maximum-likelihood covariance ``n^{-1} sum_i x_i x_i^T``.

    With ``center=True`` the column means are subtracted first.  The divisor
    is always ``n``.
    """
    X = as_dense(X, "X")
    n = X.shape[0]
    if n == 0:
        raise InvalidArgumentError("sample_covariance needs at least one row")
    if center:
        X = X - X.mean(axis=0)
    return as_symmetric(X.T @ X / n)


def spd_inverse_and_logdet(M):
    """Inverse and log-determinant of a positive definite matrix.

    Both are computed from one eigendecomposition.

    Raises
    ------
    NotPositiveDefiniteError
        If the smallest eigenvalue is at most ``1e-12``.
    """
    arr = as_symmetric(M)
    values, vectors = np.linalg.eigh(arr)
    if not values[0] > PD_TOL:
        raise NotPositiveDefiniteError(
            f"matrix is not positive definite (smallest eigenvalue {values[0]:.3e})"
        )
    inv = as_symmetric((vectors / values) @ vectors.T)
    return inv, float(np.sum(np.log(values)))


def read_matrix_csv(path, header=False):
    """Read a numeric CSV into a 2-D array; skip the first row if ``header``."""
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if header:
        rows = rows[1:]
    if not rows:
        raise InvalidArgumentError(f"{path}: no numeric rows")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise InvalidArgumentError(f"{path}: ragged rows")
    try:
        data = [[float(v) for v in r] for r in rows]
    except ValueError as exc:
        raise InvalidArgumentError(f"{path}: {exc}") from None
    return as_dense(data, str(path))


def format_float(x):
    return format(float(x), ".17g")


def write_matrix_csv(path, M, header=None):
    """Write ``M`` as CSV with 17 significant digits per value."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if header is not None:
            writer.writerow(header)
        for row in M:
            writer.writerow([format_float(v) for v in row])
