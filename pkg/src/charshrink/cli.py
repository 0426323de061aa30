"""Command-line interface: ``charshrink estimate|lda|simulate|verify``.

Exit codes: 0 success, 2 usage or input error, 3 numerical failure.
"""
import argparse
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, lda
from .admm import ProblemSpec, SolverConfig, solve, write_trace_csv
from .exceptions import DivergenceError, InvalidArgumentError
from .matrix_core import format_float, read_matrix_csv, write_matrix_csv
from .simulation import METHODS, MODELS, StudyConfig, run_study
from .tuning import default_grid, kfold_select
from .verification import RATE_K, compatibility_constant_estimate, kkt_residual, rate_experiment

logger = logging.getLogger("charshrink")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
THREADS_ENV = "CHARSHRINK_THREADS"


class UsageError(Exception):
    pass


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(v):
    if isinstance(v, Path):
        return str(v)
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def write_manifest(out_dir, args, inputs, started):
    config = {k: _jsonable(v) for k, v in vars(args).items() if k != "func"}
    manifest = {
        "command": args.command + (f" {args.subcommand}" if getattr(args, "subcommand", None)
                                   else ""),
        "argv": sys.argv[1:],
        "config": config,
        "seed": config.get("seed"),
        "version": __version__,
        "inputs": {str(p): _sha256(p) for p in inputs if p is not None},
        "timing": {"started": started, "elapsed_seconds": time.time() - started},
    }
    write_json(Path(out_dir) / "manifest.json", manifest)


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _solver_config(args):
    return SolverConfig(rho=args.rho, tau=args.tau, max_iters=args.max_iters,
                        eps_abs=args.tol_abs, eps_rel=args.tol_rel,
                        adaptive_rho=args.adaptive_rho)


def _read(path, header):
    if not Path(path).is_file():
        raise UsageError(f"input file not found: {path}")
    return read_matrix_csv(path, header=header)


# -- estimate ---------------------------------------------------------------

def cmd_estimate(args):
    started = time.time()
    S = _read(args.cov, args.header)
    A = _read(args.A, args.header)
    B = _read(args.B, args.header)
    C = _read(args.C, args.header) if args.C else np.zeros((A.shape[0], B.shape[1]))
    prob = ProblemSpec(S, A, B, C, args.lam)
    sol = solve(prob, _solver_config(args), record_trace=bool(args.trace))
    out = _out_dir(args)
    write_matrix_csv(out / "omega_hat.csv", sol.omega_hat)
    write_matrix_csv(out / "theta_hat.csv", sol.theta_hat)
    write_json(out / "diagnostics.json", {
        "objective": sol.objective,
        "primal_residual": sol.primal_residual,
        "dual_residual": sol.dual_residual,
        "iters": sol.iters_used,
        "converged": sol.converged,
        "rho": sol.rho,
        "tau": sol.tau,
    })
    if args.trace:
        write_trace_csv(args.trace, sol.trace)
    write_manifest(out, args, [args.cov, args.A, args.B, args.C], started)
    print(f"objective={format_float(sol.objective)} iters={sol.iters_used} "
          f"converged={str(sol.converged).lower()}")
    return EXIT_OK


# -- lda --------------------------------------------------------------------

def _read_labeled(path, header):
    if not Path(path).is_file():
        raise UsageError(f"input file not found: {path}")
    return lda.read_labeled_csv(path, header=header)


def _misclass(model, data):
    return float(np.mean(lda.predict(model, data.X) != data.y))


def cmd_lda_fit(args):
    started = time.time()
    data = _read_labeled(args.data, args.header)
    cfg = _solver_config(args)
    out = _out_dir(args)
    if args.cv is not None:
        S = lda.pooled_covariance(data)
        B = lda.mean_difference_matrix(lda.class_means(data))
        grid = default_grid(S, np.eye(data.p), B, np.zeros_like(B), args.grid_len)
        lam, table = kfold_select(data, args.cv, grid,
                                  lambda tr, v, init: lda.fit(tr, v, cfg, init),
                                  _misclass, seed=args.seed)
        table.write_csv(out / "selection.csv")
        if not table.stratified:
            print("warning: folds are not stratified (a class has fewer members than folds)",
                  file=sys.stderr)
    elif args.lam is not None:
        lam = args.lam
    else:
        raise UsageError("lda fit needs --lambda or --cv")
    model = lda.fit(data, lam, cfg)
    write_matrix_csv(out / "omega_hat.csv", model.omega_hat)
    write_json(out / "model.json", model.to_dict(omega_ref="omega_hat.csv"))
    with open(out / "supports.csv", "w") as fh:
        fh.write("j,k,variable\n")
        for (j, k), vars_ in sorted(model.pair_supports.items()):
            for v in vars_:
                fh.write(f"{j},{k},{v + 1}\n")
    write_manifest(out, args, [args.data], started)
    print(f"lambda={format_float(lam)} converged={str(model.solution.converged).lower()}")
    return EXIT_OK


def cmd_lda_predict(args):
    started = time.time()
    if not Path(args.model).is_file():
        raise UsageError(f"model file not found: {args.model}")
    with open(args.model) as fh:
        d = json.load(fh)
    omega = None
    if "omega_hat_file" in d:
        omega = read_matrix_csv(Path(args.model).parent / d["omega_hat_file"])
    model = lda.LdaModel.from_dict(d, omega)
    X = _read(args.data, args.header)
    if X.shape[1] == model.p + 1:
        X = X[:, :-1]  # labelled file: drop the label column
    if X.shape[1] != model.p:
        raise InvalidArgumentError(f"data has {X.shape[1]} features, model expects {model.p}")
    labels = lda.predict(model, X)
    out = _out_dir(args)
    with open(out / "labels.csv", "w") as fh:
        fh.write("".join(f"{int(v)}\n" for v in labels))
    write_manifest(out, args, [args.model, args.data], started)
    return EXIT_OK


def cmd_lda_screen(args):
    started = time.time()
    data = _read_labeled(args.data, args.header)
    idx = lda.f_statistic_screen(data, args.top)
    out = _out_dir(args)
    with open(out / "indices.csv", "w") as fh:
        fh.write("".join(f"{i + 1}\n" for i in idx))
    write_manifest(out, args, [args.data], started)
    return EXIT_OK


# -- simulate ---------------------------------------------------------------

def _int_list(text):
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _default_threads():
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def cmd_simulate(args):
    started = time.time()
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise UsageError(f"unknown method(s) {', '.join(bad)}; valid: {', '.join(METHODS)}")
    if args.sizes is not None and len(args.sizes) != 3:
        raise UsageError("--sizes needs train,validation,test")
    cfg = StudyConfig(model=args.model, p=args.p, J_list=args.J, replications=args.reps,
                      methods=methods, seed=args.seed, sizes=args.sizes,
                      grid_len=args.grid_len)
    threads = args.threads if args.threads is not None else _default_threads()
    report = run_study(cfg, workers=threads)
    out = _out_dir(args)
    report.write_csv(out / "study.csv")
    report.write_summary_csv(out / "study_summary.csv")
    write_manifest(out, args, [], started)
    failed = sum(r["status"] != "ok" for r in report.rows)
    print(f"rows={len(report.rows)} failed={failed}")
    return EXIT_OK


# -- verify -----------------------------------------------------------------

def cmd_verify_kkt(args):
    S = _read(args.cov, args.header)
    A = _read(args.A, args.header)
    B = _read(args.B, args.header)
    C = _read(args.C, args.header) if args.C else np.zeros((A.shape[0], B.shape[1]))
    omega = _read(args.omega, args.header)
    theta = _read(args.theta, args.header) if args.theta else None
    report = kkt_residual(ProblemSpec(S, A, B, C, args.lam), omega, theta)
    result = {"residual": report.residual,
              "max_subgradient_violation": report.max_subgradient_violation,
              "support_consistent": report.support_consistent}
    print(json.dumps(result, sort_keys=True))
    if args.out:
        write_json(Path(_out_dir(args)) / "kkt.json", result)
    return EXIT_OK


def cmd_verify_rate(args):
    started = time.time()
    truth = MODELS[args.model](args.p, 1).omega
    table = rate_experiment(truth, args.n_list, args.reps, seed=args.seed, K=args.K)
    for n, m, s in zip(table.n, table.mean_frob, table.stderr):
        print(f"n={n} mean_frob={format_float(m)} stderr={format_float(s)}")
    print(f"slope={format_float(table.slope)}")
    if args.out:
        out = _out_dir(args)
        table.write_csv(out / "rate.csv")
        write_manifest(out, args, [], started)
    return EXIT_OK


def _parse_support(text, shape):
    if text == "diagonal":
        return [(i, i) for i in range(min(shape))]
    if text == "all":
        return [(i, j) for i in range(shape[0]) for j in range(shape[1])]
    if not Path(text).is_file():
        raise UsageError(f"--support must be 'diagonal', 'all' or a CSV of 1-based pairs: {text}")
    pairs = read_matrix_csv(text)
    if pairs.shape[1] != 2:
        raise InvalidArgumentError("support CSV needs two columns (row, col)")
    out = [(int(i) - 1, int(j) - 1) for i, j in pairs]
    if any(not (0 <= i < shape[0] and 0 <= j < shape[1]) for i, j in out):
        raise InvalidArgumentError(f"support index outside {shape[0]}x{shape[1]}")
    return out


def cmd_verify_xi(args):
    A = _read(args.A, args.header)
    B = _read(args.B, args.header)
    support = _parse_support(args.support, (A.shape[0], B.shape[1]))
    xi = compatibility_constant_estimate(A, B, support, restarts=args.restarts, seed=args.seed)
    print(f"xi_lower_bound={format_float(xi)}")
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def _add_solver_flags(p):
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--tol-abs", type=float, default=1e-8)
    p.add_argument("--tol-rel", type=float, default=1e-8)
    p.add_argument("--adaptive-rho", action="store_true")


def _add_io_flags(p, out_default="."):
    p.add_argument("--header", action="store_true", help="input CSVs carry a header row")
    p.add_argument("--out", default=out_default, help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(prog="charshrink", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="solve one penalised likelihood problem")
    p.add_argument("--cov", required=True)
    p.add_argument("--A", required=True)
    p.add_argument("--B", required=True)
    p.add_argument("--C")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--trace", help="per-iteration CSV")
    _add_solver_flags(p)
    _add_io_flags(p)
    p.set_defaults(func=cmd_estimate)

    p_lda = sub.add_parser("lda", help="discriminant analysis")
    lsub = p_lda.add_subparsers(dest="subcommand", required=True)
    p = lsub.add_parser("fit")
    p.add_argument("--data", required=True)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--cv", type=int, help="number of folds for cross-validation")
    p.add_argument("--grid-len", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    _add_solver_flags(p)
    _add_io_flags(p)
    p.set_defaults(func=cmd_lda_fit)
    p = lsub.add_parser("predict")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    _add_io_flags(p)
    p.set_defaults(func=cmd_lda_predict)
    p = lsub.add_parser("screen")
    p.add_argument("--data", required=True)
    p.add_argument("--top", type=int, required=True)
    _add_io_flags(p)
    p.set_defaults(func=cmd_lda_screen)

    p = sub.add_parser("simulate", help="replicated simulation study")
    p.add_argument("--model", type=int, choices=sorted(MODELS), required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--J", type=_int_list, required=True)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--methods", default=",".join(METHODS))
    p.add_argument("--sizes", type=_int_list, help="train,validation,test")
    p.add_argument("--grid-len", type=int, default=10)
    p.add_argument("--threads", type=int, help=f"worker processes (default ${THREADS_ENV} or 1)")
    _add_io_flags(p)
    p.set_defaults(func=cmd_simulate)

    p_ver = sub.add_parser("verify", help="optimality and rate checks")
    vsub = p_ver.add_subparsers(dest="subcommand", required=True)
    p = vsub.add_parser("kkt")
    p.add_argument("--cov", required=True)
    p.add_argument("--A", required=True)
    p.add_argument("--B", required=True)
    p.add_argument("--C")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--omega", required=True)
    p.add_argument("--theta")
    _add_io_flags(p, out_default=None)
    p.set_defaults(func=cmd_verify_kkt)
    p = vsub.add_parser("rate")
    p.add_argument("--n-list", type=_int_list, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--K", type=float, default=RATE_K)
    p.add_argument("--model", type=int, choices=sorted(MODELS), default=1)
    _add_io_flags(p, out_default=None)
    p.set_defaults(func=cmd_verify_rate)
    p = vsub.add_parser("xi")
    p.add_argument("--A", required=True)
    p.add_argument("--B", required=True)
    p.add_argument("--support", required=True,
                   help="'diagonal', 'all', or CSV of 1-based (row, col) pairs")
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    _add_io_flags(p, out_default=None)
    p.set_defaults(func=cmd_verify_xi)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    # LinAlgError subclasses ValueError, so it is caught first
    except (DivergenceError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"charshrink: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, InvalidArgumentError, OSError, ValueError, KeyError) as exc:
        print(f"charshrink: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
