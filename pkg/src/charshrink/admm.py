"""Prox-linear ADMM for the characteristic-penalised Gaussian likelihood.

Solves::

    minimise  tr(S W) - log det(W) + lam * sum_ij w_ij |(A W B - C)_ij|

over symmetric positive definite ``W`` by splitting ``Theta = A W B - C``.
The W-subproblem is linearised around the current iterate with a proximal
term ``(rho * tau / 2) ||W - W_k||_F^2`` so that it has a closed-form
eigendecomposition solution; the Theta-subproblem is a soft-threshold.
"""
import csv
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import DivergenceError, InvalidArgumentError, NotPositiveDefiniteError
from .matrix_core import (
    PD_TOL,
    as_dense,
    as_symmetric,
    format_float,
    largest_eigenvalue,
    soft_threshold,
    spd_inverse_and_logdet,
)

logger = logging.getLogger(__name__)

# Residual balancing can cycle when rho changes every iteration, so rho is
# revisited only every RHO_ADAPT_EVERY iterations and frozen after
# RHO_MAX_CHANGES changes; from then on the fixed-rho convergence theory applies.
RHO_ADAPT_EVERY = 10
RHO_MAX_CHANGES = 50

TAU_MARGIN = 1e-8


@dataclass
class ProblemSpec:
    """One instance of the estimator.

    ``weights`` is an optional nonnegative ``a x b`` mask multiplying ``lam``
    entrywise; a zero weight leaves that entry of ``A W B - C`` unpenalised.
    ``kind`` records which constructor built the instance.
    """

    S: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    lam: float
    weights: Optional[np.ndarray] = None
    kind: str = "generic"

    def __post_init__(self):
        self.S = as_symmetric(self.S, "S")
        self.A = as_dense(self.A, "A")
        self.B = as_dense(self.B, "B")
        self.C = as_dense(self.C, "C")
        p = self.S.shape[0]
        eig = np.linalg.eigvalsh(self.S)
        if eig[0] < -PD_TOL * max(1.0, abs(eig[-1])):
            raise NotPositiveDefiniteError(
                f"S is not positive semidefinite (smallest eigenvalue {eig[0]:.3g})")
        a, b = self.A.shape[0], self.B.shape[1]
        if self.A.shape[1] != p:
            raise InvalidArgumentError(f"A has {self.A.shape[1]} columns but S is {p}x{p}")
        if self.B.shape[0] != p:
            raise InvalidArgumentError(f"B has {self.B.shape[0]} rows but S is {p}x{p}")
        if self.C.shape != (a, b):
            raise InvalidArgumentError(
                f"C has shape {self.C.shape[0]}x{self.C.shape[1]}, expected {a}x{b}"
            )
        self.lam = float(self.lam)
        if not np.isfinite(self.lam) or self.lam < 0:
            raise InvalidArgumentError(f"lambda must be finite and >= 0, got {self.lam}")
        if self.weights is not None:
            self.weights = as_dense(self.weights, "weights")
            if self.weights.shape != (a, b):
                raise InvalidArgumentError(
                    f"weights has shape {self.weights.shape}, expected {(a, b)}"
                )
            if np.any(self.weights < 0):
                raise InvalidArgumentError("weights must be nonnegative")

    @property
    def p(self):
        return self.S.shape[0]

    @property
    def char_shape(self):
        return self.A.shape[0], self.B.shape[1]

    def characteristic(self, omega):
        """``A @ omega @ B - C``."""
        return self.A @ omega @ self.B - self.C

    def penalty_levels(self):
        """Per-entry penalty ``lam * w_ij`` (a scalar when unweighted)."""
        if self.weights is None:
            return self.lam
        return self.lam * self.weights


@dataclass
class SolverConfig:
    """ADMM hyperparameters.

    ``tau=None`` selects ``phi_1(A^T A) * phi_1(B B^T) + 1e-8`` at solve time.
    ``adaptive_rho`` turns on residual balancing (factor 10, scale 2).
    """

    rho: float = 1.0
    tau: Optional[float] = None
    max_iters: int = 5000
    eps_abs: float = 1e-8
    eps_rel: float = 1e-8
    adaptive_rho: bool = False

    def __post_init__(self):
        if not self.rho > 0:
            raise InvalidArgumentError(f"rho must be positive, got {self.rho}")
        if self.tau is not None and not self.tau > 0:
            raise InvalidArgumentError(f"tau must be positive, got {self.tau}")
        if self.max_iters < 1:
            raise InvalidArgumentError("max_iters must be at least 1")
        if not (self.eps_abs > 0 and self.eps_rel > 0):
            raise InvalidArgumentError("eps_abs and eps_rel must be positive")


@dataclass
class SolverState:
    omega: np.ndarray
    theta: np.ndarray
    gamma: np.ndarray
    iter: int = 0


@dataclass
class Solution:
    omega_hat: np.ndarray
    theta_hat: np.ndarray
    gamma_hat: np.ndarray
    iters_used: int
    primal_residual: float
    dual_residual: float
    objective: float
    converged: bool
    rho: float
    tau: float
    trace: list = field(default_factory=list, repr=False)

    def as_state(self):
        """Iterates as a :class:`SolverState`, for warm starts."""
        return SolverState(self.omega_hat.copy(), self.theta_hat.copy(),
                           self.gamma_hat.copy(), 0)


def default_tau(A, B, tol=1e-10, max_iter=1000):
    """Smallest safe proximal weight: ``phi_1(A^T A) * phi_1(B B^T) + 1e-8``."""
    A = as_dense(A, "A")
    B = as_dense(B, "B")
    return (largest_eigenvalue(A.T @ A, tol, max_iter)
            * largest_eigenvalue(B @ B.T, tol, max_iter) + TAU_MARGIN)


def resolve_tau(prob, cfg):
    if cfg.tau is None:
        return default_tau(prob.A, prob.B)
    bound = np.linalg.eigvalsh(prob.A.T @ prob.A)[-1] * np.linalg.eigvalsh(prob.B @ prob.B.T)[-1]
    if not cfg.tau > bound:
        raise InvalidArgumentError(
            f"tau={cfg.tau} does not exceed phi_1(A^T A) phi_1(B B^T)={bound}"
        )
    return float(cfg.tau)


def default_init(prob):
    """``W0 = diag(1 / (S_ii + 1e-8))``, ``Theta0 = A W0 B - C``, ``Gamma0 = 0``."""
    omega = np.diag(1.0 / (np.diag(prob.S) + 1e-8))
    theta = prob.characteristic(omega)
    return SolverState(omega, theta, np.zeros_like(theta), 0)


def linearization(state, prob, rho):
    """``G_k = rho A^T (A W_k B - Gamma_k / rho - Theta_k - C) B^T``."""
    inner = prob.A @ state.omega @ prob.B - state.gamma / rho - state.theta - prob.C
    return rho * prob.A.T @ inner @ prob.B.T


def omega_update(state, prob, cfg, tau=None):
    """Closed-form minimiser of the linearised W-subproblem.

    Solves ``S - W^{-1} + (G + G^T)/2 + rho*tau (W - W_k) = 0`` via the
    eigendecomposition ``S + (G + G^T)/2 - rho*tau*W_k = U diag(psi) U^T``:
    ``W = U diag((-psi + sqrt(psi^2 + 4 rho tau)) / (2 rho tau)) U^T``.
    """
    rho = cfg.rho
    if tau is None:
        tau = resolve_tau(prob, cfg)
    G = linearization(state, prob, rho)
    M = prob.S + 0.5 * (G + G.T) - rho * tau * state.omega
    M = 0.5 * (M + M.T)
    # sign/order of eigenvectors does not affect U f(psi) U^T
    psi, U = np.linalg.eigh(M)
    rt = rho * tau
    # (-psi + sqrt(psi^2 + 4rt)) / 2rt rewritten as 2 / (psi + sqrt(psi^2 + 4rt))
    # to avoid cancellation when psi >> 0
    root = np.sqrt(psi * psi + 4.0 * rt)
    vals = np.where(psi > 0, 2.0 / (psi + root), (root - psi) / (2.0 * rt))
    omega = (U * vals) @ U.T
    return 0.5 * (omega + omega.T)


def theta_update(omega_next, state, prob, cfg):
    """``soft(A W_{k+1} B - Gamma_k / rho - C, lam * w / rho)``."""
    arg = prob.A @ omega_next @ prob.B - state.gamma / cfg.rho - prob.C
    return soft_threshold(arg, np.asarray(prob.penalty_levels()) / cfg.rho)


def dual_update(gamma, omega_next, theta_next, prob, cfg):
    """``Gamma - rho (A W_{k+1} B - Theta_{k+1} - C)``."""
    return gamma - cfg.rho * (prob.A @ omega_next @ prob.B - theta_next - prob.C)


def objective(prob, omega):
    """Penalised negative log-likelihood at a positive definite ``omega``."""
    omega = as_symmetric(omega, "omega")
    _, logdet = spd_inverse_and_logdet(omega)
    char = prob.characteristic(omega)
    if prob.weights is None:
        pen = prob.lam * np.abs(char).sum()
    else:
        pen = prob.lam * (prob.weights * np.abs(char)).sum()
    return float(np.sum(prob.S * omega) - logdet + pen)


def _finite(*arrays):
    return all(np.all(np.isfinite(a)) for a in arrays)


def solve(prob, cfg=None, init=None, record_trace=False):
    """Run the prox-linear ADMM until the residual test passes.

    Parameters
    ----------
    prob : ProblemSpec
    cfg : SolverConfig, optional
    init : SolverState or Solution, optional
        Starting iterates; defaults to :func:`default_init`.  Passing a
        previous :class:`Solution` warm-starts from its iterates.
    record_trace : bool
        Keep ``(iter, objective, primal, dual)`` per iteration in
        ``Solution.trace``.

    Returns
    -------
    Solution
        ``converged`` is False when ``max_iters`` ran out.

    Raises
    ------
    DivergenceError
        If an iterate becomes non-finite.

    Notes
    -----
    Convergence is declared when
    ``||A W B - Theta - C||_F <= sqrt(ab) eps_abs + eps_rel max(||A W B||, ||Theta||, ||C||)``
    and ``||rho A^T (Theta_k - Theta_{k-1}) B^T||_F <= p eps_abs + eps_rel ||A^T Gamma B^T||``.
    """
    cfg = cfg or SolverConfig()
    tau = resolve_tau(prob, cfg)
    if init is None:
        state = default_init(prob)
    elif isinstance(init, Solution):
        state = init.as_state()
    else:
        state = SolverState(as_symmetric(init.omega), as_dense(init.theta),
                            as_dense(init.gamma), 0)
    a, b = prob.char_shape
    p = prob.p
    A, B, C = prob.A, prob.B, prob.C
    rho = cfg.rho
    run_cfg = SolverConfig(rho=rho, tau=tau, max_iters=cfg.max_iters,
                           eps_abs=cfg.eps_abs, eps_rel=cfg.eps_rel)
    trace = []
    converged = False
    r_norm = s_norm = np.inf
    k = 0
    changes = 0
    for k in range(1, cfg.max_iters + 1):
        omega = omega_update(state, prob, run_cfg, tau)
        theta = theta_update(omega, state, prob, run_cfg)
        AWB = A @ omega @ B
        gamma = state.gamma - rho * (AWB - theta - C)
        if not _finite(omega, theta, gamma):
            raise DivergenceError(k)

        r_norm = float(np.linalg.norm(AWB - theta - C))
        s_norm = float(np.linalg.norm(rho * A.T @ (theta - state.theta) @ B.T))
        eps_pri = np.sqrt(a * b) * cfg.eps_abs + cfg.eps_rel * max(
            np.linalg.norm(AWB), np.linalg.norm(theta), np.linalg.norm(C))
        eps_dual = p * cfg.eps_abs + cfg.eps_rel * np.linalg.norm(A.T @ gamma @ B.T)
        state = SolverState(omega, theta, gamma, k)
        if record_trace:
            trace.append((k, objective(prob, omega), r_norm, s_norm))
        if r_norm <= eps_pri and s_norm <= eps_dual:
            converged = True
            break
        if cfg.adaptive_rho and changes < RHO_MAX_CHANGES and k % RHO_ADAPT_EVERY == 0:
            if r_norm > 10.0 * s_norm:
                rho *= 2.0
                changes += 1
            elif s_norm > 10.0 * r_norm:
                rho /= 2.0
                changes += 1
            run_cfg.rho = rho

    if not converged:
        logger.info("ADMM stopped at max_iters=%d (primal %.3e, dual %.3e)",
                    cfg.max_iters, r_norm, s_norm)
    return Solution(
        omega_hat=state.omega,
        theta_hat=state.theta,
        gamma_hat=state.gamma,
        iters_used=k,
        primal_residual=r_norm,
        dual_residual=s_norm,
        objective=objective(prob, state.omega),
        converged=converged,
        rho=rho,
        tau=tau,
        trace=trace,
    )


def write_trace_csv(path, trace):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iter", "objective", "primal_residual", "dual_residual"])
        for it, obj, r, s in trace:
            writer.writerow([it, format_float(obj), format_float(r), format_float(s)])
