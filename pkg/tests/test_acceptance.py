"""End-to-end acceptance criteria, one test per criterion.

Each test prints a single ``ACCEPTANCE <n> PASS|FAIL: ...`` line.  The
Model 2 study (criteria 4 and 5) takes about three minutes on one core and is
shared between the two tests.
"""
import time

import mpmath
import numpy as np
import pytest

from charshrink.admm import ProblemSpec, SolverConfig, SolverState, omega_update, solve
from charshrink.cli import main
from charshrink.matrix_core import soft_threshold, sym_eigen
from charshrink.simulation import StudyConfig, ar1_precision, misclassification_rate, run_study, \
    tpr_tnr
from charshrink.verification import (
    compatibility_constant_estimate,
    compatibility_constant_identity,
    kkt_residual,
    rate_experiment,
)

from conftest import random_instance

SOLVER = SolverConfig(adaptive_rho=True, eps_abs=1e-9, eps_rel=1e-9, max_iters=5000)
STUDY_SEED = 2026
RATE_SEED = 0


def report(pytestconfig, number, ok, detail):
    capman = pytestconfig.pluginmanager.getplugin("capturemanager")
    with capman.global_and_fixture_disabled():
        print(f"\nACCEPTANCE {number} {'PASS' if ok else 'FAIL'}: {detail}", flush=True)
    assert ok, detail


def test_1_optimality_certificate(pytestconfig):
    sizes, shapes, lams = (5, 10, 25, 50), ("square", "tall_a", "wide_b"), (0.01, 0.1, 1.0)
    start = time.perf_counter()
    failures = []
    worst = 0.0
    for k in range(50):
        p, shape, lam = sizes[k % 4], shapes[(k // 4) % 3], lams[(k // 12) % 3]
        prob = random_instance(1000 + k, p, shape, lam)
        sol = solve(prob, SOLVER)
        kkt = kkt_residual(prob, sol).residual
        worst = max(worst, kkt / p)
        ok = (sol.converged and sol.primal_residual <= 1e-6 and sol.dual_residual <= 1e-6
              and kkt <= 1e-4 * p)
        if not ok:
            failures.append((k, p, shape, lam, sol.iters_used, sol.primal_residual,
                             sol.dual_residual, kkt))
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 120
    report(pytestconfig, 1, ok, f"50 problems, failures={failures}, max kkt/p={worst:.2e}, "
                                f"{elapsed:.1f}s")


def test_2_unpenalized_exactness(pytestconfig):
    errs = []
    for p in (2, 5, 10, 25, 50):
        rng = np.random.default_rng(p)
        X = rng.standard_normal((4 * p, p))
        S = X.T @ X / (4 * p)
        sol = solve(ProblemSpec(S, np.eye(p), np.eye(p), np.zeros((p, p)), 0.0), SOLVER)
        errs.append(np.linalg.norm(sol.omega_hat - np.linalg.inv(S)))
    report(pytestconfig, 2, max(errs) <= 1e-6, f"max ||W - S^-1||_F = {max(errs):.2e}")


def test_3_analytic_updates(pytestconfig):
    mpmath.mp.dps = 50
    worst = 0.0
    rng = np.random.default_rng(3)
    for _ in range(50):
        s, w_k, rho = rng.uniform(0.1, 5), rng.uniform(0.1, 5), rng.uniform(0.2, 5)
        a, b, c = rng.uniform(0.5, 2), rng.uniform(0.5, 2), rng.normal()
        th, g = rng.normal(), rng.normal()
        prob = ProblemSpec([[s]], [[a]], [[b]], [[c]], 0.1)
        tau = (a * b) ** 2 + 1e-8
        out = omega_update(SolverState(np.array([[w_k]]), np.array([[th]]), np.array([[g]])),
                           prob, SolverConfig(rho=rho), tau)[0, 0]
        G = rho * a * b * (a * w_k * b - g / rho - th - c)
        # zero-gradient equation s - 1/w + G + rho tau (w - w_k) = 0, times w
        roots = mpmath.polyroots([rho * tau, s + G - rho * tau * w_k, -1])
        exact = float(max(r.real for r in roots))
        worst = max(worst, abs(out - exact))

    pair = sym_eigen([[2.0, 1.0], [1.0, 2.0]])
    eigen_ok = np.allclose(pair.values, [3.0, 1.0], rtol=0, atol=1e-15)
    M = np.random.default_rng(4).standard_normal((100, 100))
    M = (M + M.T) / 2
    rt = sym_eigen(M)
    round_trip = np.linalg.norm(rt.reconstruct() - M) / np.linalg.norm(M)
    st_ok = (soft_threshold([[2.0]], 0.5).tolist() == [[1.5]]
             and soft_threshold([[-0.3, 0.0]], 0.5).tolist() == [[0.0, 0.0]]
             and soft_threshold([[-2.0]], 0.5).tolist() == [[-1.5]])
    ok = worst <= 1e-10 and eigen_ok and round_trip <= 1e-10 and st_ok
    report(pytestconfig, 3, ok, f"max |update - root| = {worst:.1e}, eigen example {eigen_ok}, "
                                f"round trip {round_trip:.1e}, soft-threshold {st_ok}")


@pytest.fixture(scope="module")
def model2_study():
    cfg = StudyConfig(model=2, p=60, J_list=(3,), replications=20, seed=STUDY_SEED,
                      grid_len=10)
    start = time.perf_counter()
    rep = run_study(cfg)
    return rep, time.perf_counter() - start


@pytest.mark.slow
def test_4_model2_trend(pytestconfig, model2_study):
    rep, elapsed = model2_study
    mis_p, mis_g = rep.mean("proposed", "misclass"), rep.mean("glasso", "misclass")
    frob_p, frob_g = rep.mean("proposed", "frob_err"), rep.mean("glasso", "frob_err")
    failed = sum(r["status"] != "ok" for r in rep.rows)
    ok = mis_p < mis_g and frob_g < frob_p and elapsed < 15 * 60
    report(pytestconfig, 4, ok,
           f"misclass proposed {mis_p:.4f} vs glasso {mis_g:.4f}; frobenius glasso "
           f"{frob_g:.3f} vs proposed {frob_p:.3f}; failed fits {failed}; {elapsed:.0f}s")


@pytest.mark.slow
def test_5_bayes_dominance(pytestconfig, model2_study):
    rep, _ = model2_study
    means = {m: rep.mean(m, "misclass") for m in rep.config.methods}
    best = min(means, key=means.get)
    detail = ", ".join(f"{m} {v:.4f}" for m, v in means.items())
    report(pytestconfig, 5, best == "bayes" and all(means["bayes"] < v for m, v in means.items()
                                                     if m != "bayes"), detail)


@pytest.mark.slow
def test_6_rate_slope(pytestconfig):
    start = time.perf_counter()
    table = rate_experiment(lambda: ar1_precision(20, 0.9), [200, 400, 800, 1600], 20,
                            seed=RATE_SEED)
    elapsed = time.perf_counter() - start
    ok = -0.65 <= table.slope <= -0.35 and elapsed < 300
    errs = ", ".join(f"{e:.3f}" for e in table.mean_frob)
    report(pytestconfig, 6, ok, f"slope {table.slope:.3f}, mean errors [{errs}], "
                                f"{elapsed:.0f}s")


def test_7_compatibility_oracle(pytestconfig):
    rng = np.random.default_rng(7)
    worst = 0.0
    cases = 0
    for p in range(1, 11):
        truths = [np.eye(p), ar1_precision(p, 0.5)]
        R = np.triu(rng.random((p, p)) < 0.3, 1)
        truths.append(np.eye(p) + 0.1 * (R + R.T))
        for omega in truths:
            support = np.abs(omega) > 0
            est = compatibility_constant_estimate(np.eye(p), np.eye(p), support, seed=p)
            exact = compatibility_constant_identity(omega)
            worst = max(worst, abs(est - exact) / exact)
            cases += 1
    report(pytestconfig, 7, worst <= 0.01, f"{cases} supports, max relative gap {worst:.2e}")


def test_8_metric_oracles(pytestconfig):
    rng = np.random.default_rng(8)
    mismatches = 0
    for _ in range(100):
        n = int(rng.integers(1, 30))
        pred, truth = rng.integers(1, 5, n), rng.integers(1, 5, n)
        wrong = 0
        for a, b in zip(pred, truth):
            wrong += a != b
        if misclassification_rate(pred, truth) != wrong / n:
            mismatches += 1

        rows, cols = int(rng.integers(1, 5)), int(rng.integers(2, 8))
        est = rng.random((rows, cols)) < 0.5
        true = rng.random((rows, cols)) < 0.5
        true[0, 0], true[0, 1] = True, False
        tp = tn = pos = neg = 0
        for i in range(rows):
            for j in range(cols):
                if true[i, j]:
                    pos += 1
                    tp += bool(est[i, j])
                else:
                    neg += 1
                    tn += not est[i, j]
        if tpr_tnr(est, true) != (tp / pos, tn / neg):
            mismatches += 1
    report(pytestconfig, 8, mismatches == 0, f"200 comparisons, {mismatches} mismatches")


@pytest.mark.slow
def test_9_determinism(pytestconfig, tmp_path):
    args = ["simulate", "--model", "2", "--p", "20", "--J", "3,4", "--reps", "4", "--seed", "9",
            "--grid-len", "5"]
    outputs = []
    for name, threads in (("a", "1"), ("b", "1"), ("c", "4")):
        out = tmp_path / name
        assert main(args + ["--threads", threads, "--out", str(out)]) == 0
        outputs.append((out / "study.csv").read_bytes())
    same_runs = outputs[0] == outputs[1]
    same_threads = outputs[0] == outputs[2]
    n_rows = len(outputs[0].splitlines()) - 1
    report(pytestconfig, 9, same_runs and same_threads,
           f"repeat identical {same_runs}, threads 1 vs 4 identical {same_threads}, "
           f"{n_rows} rows")
