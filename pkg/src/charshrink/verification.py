"""Optimality certificates and empirical checks of the estimator's theory."""
import csv
from dataclasses import dataclass

import numpy as np
from scipy.optimize import lsq_linear
from scipy.sparse.linalg import LinearOperator, lsmr

from .admm import ProblemSpec, SolverConfig, solve
from .exceptions import InvalidArgumentError
from .matrix_core import as_dense, as_spd, format_float, sample_covariance, spd_inverse_and_logdet


# penalty constant in lam_n = K sqrt(log p / n); minimises the n=200 error of a
# pilot run (p=20, AR(1) 0.9 truth, seed 12345). The rate check asserts the
# slope, not this constant.
RATE_K = 0.03


@dataclass
class KktReport:
    """First-order optimality summary.

    ``residual`` is the Frobenius norm of the symmetrised stationarity
    residual with the best subgradient in the box; ``max_subgradient_violation``
    is how far the unconstrained least-squares subgradient leaves ``[-1, 1]``;
    ``support_consistent`` says the sign pattern of ``A W B - C`` agrees with
    the nonzeros of Theta.
    """

    residual: float
    max_subgradient_violation: float
    support_consistent: bool


def _sym(M):
    return 0.5 * (M + M.T)


def kkt_residual(prob, omega, theta=None, support_tol=1e-6):
    """Stationarity residual of ``tr(S W) - log det W + lam |A W B - C|_1``.

    The condition checked is ``S - W^{-1} + lam * sym(A^T (w * Z) B^T) = 0``
    with ``Z_ij = sign(Theta_ij)`` where ``Theta_ij != 0`` and ``Z_ij`` free
    in ``[-1, 1]`` elsewhere.  Free entries are chosen by bounded least
    squares.  ``theta`` defaults to ``A W B - C`` with entries below
    ``support_tol`` treated as zero.

    Parameters
    ----------
    prob : ProblemSpec
    omega : array_like or Solution
        Positive definite candidate.  A :class:`Solution` supplies both
        ``omega_hat`` and ``theta_hat``.
    theta : array_like, optional
        Sparse characteristic.
    """
    if hasattr(omega, "omega_hat"):
        omega, theta = omega.omega_hat, omega.theta_hat if theta is None else theta
    omega = as_spd(omega, "omega")
    inv, _ = spd_inverse_and_logdet(omega)
    char = prob.characteristic(omega)
    if theta is None:
        theta = np.where(np.abs(char) > support_tol, char, 0.0)
    theta = as_dense(theta, "theta")
    w = np.ones(prob.char_shape) if prob.weights is None else prob.weights
    lam = prob.lam

    nz = theta != 0
    sign_ok = bool(np.all(np.sign(char[nz]) == np.sign(theta[nz])))
    free = (~nz) & (w > 0)

    Zfixed = np.where(nz, np.sign(theta), 0.0)
    R0 = prob.S - inv + lam * _sym(prob.A.T @ (w * Zfixed) @ prob.B.T)
    idx = np.flatnonzero(free)
    if lam == 0 or idx.size == 0:
        return KktReport(float(np.linalg.norm(R0)), 0.0, sign_ok)

    a, b = prob.char_shape
    p = prob.p
    wf = w.ravel()[idx]
    At, Bt = prob.A.T, prob.B.T

    def matvec(z):
        Z = np.zeros(a * b)
        Z[idx] = lam * wf * np.ravel(z)
        return _sym(At @ Z.reshape(a, b) @ Bt).ravel()

    def rmatvec(r):
        # adjoint of M -> sym(A^T M B^T) is R -> A sym(R) B
        R = _sym(np.reshape(r, (p, p)))
        return lam * wf * (prob.A @ R @ prob.B).ravel()[idx]

    op = LinearOperator((p * p, idx.size), matvec=matvec, rmatvec=rmatvec, dtype=float)
    rhs = -R0.ravel()
    res = lsq_linear(op, rhs, bounds=(-1.0, 1.0), lsq_solver="lsmr",
                     tol=1e-12, lsmr_tol=1e-12, max_iter=2000)
    resid = float(np.linalg.norm(op.matvec(res.x) - rhs))
    z_free = lsmr(op, rhs, atol=1e-12, btol=1e-12, maxiter=5000)[0]
    violation = float(max(np.max(np.abs(z_free)) - 1.0, 0.0))
    return KktReport(resid, violation, sign_ok)


def compatibility_constant_identity(omega_star):
    """``sqrt(number of nonzero entries)``: the compatibility constant when A = B = I."""
    return float(np.sqrt(np.count_nonzero(np.asarray(omega_star))))


def _support_mask(support, shape):
    mask = np.zeros(shape, dtype=bool)
    if isinstance(support, np.ndarray) and support.dtype == bool:
        if support.shape != shape:
            raise InvalidArgumentError(f"support mask shape {support.shape} != {shape}")
        return support.copy()
    for i, j in support:
        mask[i, j] = True
    return mask


def compatibility_constant_estimate(A, B, support, restarts=20, seed=0, max_iter=500):
    """Best-found value of ``sup_M |[A M B]_G|_1 / ||M||_F`` over symmetric M.

    Each restart runs the fixed-point ascent
    ``M <- normalise(sym(A^T (sign([A M B]_G)) B^T))`` from a random
    symmetric start; the objective never decreases along it.  The result is
    a lower bound on the supremum.  Restart ``i`` always uses the same start
    for a given seed, so more restarts never lower the value.

    Parameters
    ----------
    support : iterable of (row, col) or boolean mask of shape ``(a, b)``
    """
    A = as_dense(A, "A")
    B = as_dense(B, "B")
    p = A.shape[1]
    if B.shape[0] != p:
        raise InvalidArgumentError(f"A has {p} columns but B has {B.shape[0]} rows")
    mask = _support_mask(support, (A.shape[0], B.shape[1]))
    if not mask.any():
        raise InvalidArgumentError("support must be nonempty")

    def value(M):
        return np.abs((A @ M @ B)[mask]).sum() / np.linalg.norm(M)

    ss = np.random.SeedSequence(seed)
    best = 0.0
    for child in ss.spawn(restarts):
        rng = np.random.default_rng(child)
        M = _sym(rng.standard_normal((p, p)))
        M /= np.linalg.norm(M)
        cur = value(M)
        for _ in range(max_iter):
            Z = np.where(mask, np.sign(A @ M @ B), 0.0)
            # zero entries of [AMB]_G: any sign is a valid subgradient
            Z[mask & (Z == 0)] = 1.0
            D = _sym(A.T @ Z @ B.T)
            norm = np.linalg.norm(D)
            if norm == 0:
                break
            M_new = D / norm
            new = value(M_new)
            if new <= cur * (1 + 1e-13):
                if new > cur:
                    cur, M = new, M_new
                break
            cur, M = new, M_new
        best = max(best, cur)
    return float(best)


def loglog_slope(n_values, errors):
    """Least-squares slope of ``log(error)`` against ``log(n)``."""
    x = np.log(np.asarray(n_values, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    if np.ptp(x) == 0:
        return 0.0
    return float(np.polyfit(x, y, 1)[0])


@dataclass
class RateTable:
    n: list
    mean_frob: list
    stderr: list
    slope: float

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["n", "mean_frob", "stderr"])
            for n, m, s in zip(self.n, self.mean_frob, self.stderr):
                writer.writerow([n, format_float(m), format_float(s)])
            writer.writerow(["slope", format_float(self.slope), ""])


def rate_experiment(omega_star, n_list, replications, seed=0, K=RATE_K, A=None, B=None,
                    cfg=None):
    """Mean Frobenius error of the estimator as the sample size grows.

    For each ``n`` draws ``replications`` mean-zero Gaussian samples with
    covariance ``omega_star^{-1}``, forms ``S_n = n^{-1} sum x x^T`` and
    solves with ``lam_n = K sqrt(log p / n)``.  ``A`` and ``B`` default to
    the identity.  ``omega_star`` may also be a callable returning the
    matrix.  Replication ``r`` at sample-size index ``i`` uses the seed
    stream ``(seed, i, r)``.
    """
    if callable(omega_star):
        omega_star = omega_star()
    omega_star = as_spd(omega_star, "omega_star")
    p = omega_star.shape[0]
    A = np.eye(p) if A is None else as_dense(A, "A")
    B = np.eye(p) if B is None else as_dense(B, "B")
    C = np.zeros((A.shape[0], B.shape[1]))
    cfg = cfg or SolverConfig(adaptive_rho=True, eps_abs=1e-7, eps_rel=1e-7)
    sigma, _ = spd_inverse_and_logdet(omega_star)
    chol = np.linalg.cholesky(sigma)
    means, ses = [], []
    for i, n in enumerate(n_list):
        lam = K * np.sqrt(np.log(p) / n)
        errs = []
        for r in range(replications):
            rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i, r)))
            X = rng.standard_normal((n, p)) @ chol.T
            S = sample_covariance(X, center=False)
            sol = solve(ProblemSpec(S, A, B, C, lam), cfg)
            errs.append(np.linalg.norm(sol.omega_hat - omega_star))
        errs = np.asarray(errs)
        means.append(float(errs.mean()))
        ses.append(float(errs.std(ddof=1) / np.sqrt(len(errs))) if len(errs) > 1 else 0.0)
    return RateTable(list(n_list), means, ses, loglog_slope(n_list, means))
