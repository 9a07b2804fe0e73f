"""Experiment runner: solver sweeps, per-epoch convergence CSVs, and the
analytic-bound subcommand."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import math
import sys
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .dataset import generate_synthetic_dense, generate_synthetic_sparse, load_libsvm
from .objective import GlmProblem, SmoothLoss, full_objective
from .solvers import SolverConfig, run_sequential_scd, run_solver
from .theory import RateParams, rate_bound

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DIVERGED = 3


@dataclass
class ExperimentSpec:
    solver: str
    libsvm_path: str | None
    synthetic_shape: tuple | None  # (n_examples, n_features)
    density: float | None
    loss: str
    lam: float
    nodes: int
    thread_counts: list
    bucket_sizes: list
    base: SolverConfig
    out_path: str
    summary_path: str
    verify: bool = False
    reference: str = "closed-form"  # closed-form | run | none

    def __post_init__(self):
        if (self.libsvm_path is None) == (self.synthetic_shape is None):
            raise ValueError("exactly one dataset source must be given")
        if not self.thread_counts or not self.bucket_sizes:
            raise ValueError("sweep lists must be nonempty")


@dataclass
class TheorySpec:
    params: RateParams
    rounds: int
    out_path: str | None


def _loss_from_name(name):
    if name == "squared":
        return SmoothLoss.squared_error()
    if name == "logistic":
        return SmoothLoss.logistic()
    raise ValueError(f"unknown loss: {name}")


def load_spec_dataset(spec):
    if spec.libsvm_path is not None:
        return load_libsvm(spec.libsvm_path)
    n_ex, n_feat = spec.synthetic_shape
    if spec.density is not None:
        return generate_synthetic_sparse(n_ex, n_feat, spec.density, spec.base.seed)
    return generate_synthetic_dense(n_ex, n_feat, spec.base.seed)


def compute_reference_optimum(problem, mode="closed-form", max_epochs=100_000):
    """High-accuracy minimizer and optimal objective value.

    Squared loss: solve the regularized normal equations, densely for small
    coordinate counts, otherwise by conjugate gradients to residual 1e-12.
    Logistic (or mode="run"): sequential SCD until the relative model change
    drops below 1e-12.
    """
    m = problem.data.matrix
    y = problem.data.labels
    lam = problem.reg.lam
    if problem.loss.kind == "squared_error" and mode != "run":
        aty = m.rmatvec(y)
        if m.n_cols <= 2000:
            a_dense = m.to_dense()
            gram = a_dense.T @ a_dense + lam * np.eye(m.n_cols)
            alpha_star = np.linalg.solve(gram, aty)
        else:
            op = LinearOperator(
                (m.n_cols, m.n_cols),
                matvec=lambda x: m.rmatvec(m.matvec(x)) + lam * x,
            )
            alpha_star, info = cg(op, aty, rtol=1e-14, atol=0.0, maxiter=50_000)
            if info != 0:
                raise RuntimeError("conjugate gradients failed to reach tolerance")
            resid = op.matvec(alpha_star) - aty
            if np.linalg.norm(resid) > 1e-12 * max(1.0, np.linalg.norm(aty)):
                raise RuntimeError("reference solve residual above tolerance")
    else:
        cfg = SolverConfig(
            algorithm="sequential", seed=problem.n_coordinates,
            max_epochs=max_epochs, tolerance=1e-12,
        )
        result = run_sequential_scd(problem, cfg)
        if not result.converged:
            raise RuntimeError("reference run did not reach oracle tolerance")
        alpha_star = result.alpha
    return alpha_star, full_objective(problem, alpha_star)


def _split_threads(solver, total, nodes):
    if solver == "sequential":
        if total != 1:
            raise ValueError("sequential solver runs on one thread")
        return 1, 1
    if solver == "wild":
        if nodes != 1:
            raise ValueError("wild solver is flat (K must be 1)")
        return 1, total
    if total % nodes != 0 or total < nodes:
        raise ValueError(f"thread count {total} is not divisible by {nodes} nodes")
    return nodes, total // nodes


def run_experiment(spec):
    """Execute the sweep and write per-epoch metrics plus a summary CSV.

    Returns (metric_rows, summary_rows).  Solver divergence becomes a row
    with converged=False and reason="diverged", never a crash.
    """
    dataset = load_spec_dataset(spec)
    problem = GlmProblem.build(dataset, _loss_from_name(spec.loss), spec.lam)
    f_star = None
    if spec.reference != "none":
        _, f_star = compute_reference_optimum(problem, spec.reference)

    rows = []
    summaries = []
    exp_id = 0
    for threads in spec.thread_counts:
        for bucket in spec.bucket_sizes:
            K, P = _split_threads(spec.solver, threads, spec.nodes)
            cfg = dataclasses.replace(
                spec.base, algorithm=spec.solver, K=K, P=P,
                bucket_size=bucket, verify=spec.verify,
            )
            result = run_solver(problem, cfg, f_star=f_star)
            epochs = result.metrics[1:]  # row 0 is the initial state
            for em in epochs:
                rows.append({
                    "experiment_id": exp_id,
                    "algorithm": spec.solver,
                    "threads": K * P,
                    "epoch": em.epoch,
                    "seconds": em.seconds,
                    "objective": em.objective,
                    "suboptimality": em.suboptimality,
                    "rel_change": em.rel_change,
                    "converged": result.converged,
                    "reason": result.reason or "",
                })
            total_time = sum(em.seconds for em in epochs)
            summaries.append({
                "experiment_id": exp_id,
                "algorithm": spec.solver,
                "threads": K * P,
                "bucket_size": cfg.resolved_bucket_size(),
                "epochs": len(epochs),
                "time_per_epoch": total_time / len(epochs) if epochs else "",
                "epochs_to_tolerance": len(epochs) if result.converged else "",
                "total_time": total_time,
                "converged": result.converged,
                "reason": result.reason or "",
            })
            exp_id += 1

    _write_csv(spec.out_path, rows, [
        "experiment_id", "algorithm", "threads", "epoch", "seconds",
        "objective", "suboptimality", "rel_change", "converged", "reason",
    ])
    _write_csv(spec.summary_path, summaries, [
        "experiment_id", "algorithm", "threads", "bucket_size", "epochs",
        "time_per_epoch", "epochs_to_tolerance", "total_time", "converged",
        "reason",
    ])
    return rows, summaries


def _write_csv(path, rows, fields):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        for row in rows:
            out = {}
            for key in fields:
                val = row[key]
                if isinstance(val, float) and not math.isfinite(val):
                    val = ""  # non-finite values are flagged via the reason column
                if val is None:
                    val = ""
                out[key] = val
            w.writerow(out)


def _parse_shape(text):
    try:
        a, b = text.lower().split("x")
        return int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected ROWSxCOLS, e.g. 1000x50, got {text!r}"
        ) from None


def _int_list(text):
    return [int(t) for t in text.split(",") if t]


def build_parser():
    parser = argparse.ArgumentParser(
        prog="syscd",
        description="Coordinate-descent GLM training benchmarks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("train", help="run a training experiment sweep")
    tr.add_argument("--solver", choices=["sequential", "wild", "syscd"], default="syscd")
    src = tr.add_mutually_exclusive_group(required=True)
    src.add_argument("--libsvm", help="path to a LIBSVM text file")
    src.add_argument("--synthetic", type=_parse_shape, metavar="ROWSxCOLS",
                     help="generate uniform synthetic data, e.g. 1000x50")
    tr.add_argument("--density", type=float,
                    help="make the synthetic dataset sparse with this density")
    tr.add_argument("--loss", choices=["squared", "logistic"], default="squared")
    tr.add_argument("--lambda", dest="lam", type=float, default=1.0)
    tr.add_argument("--threads", type=_int_list, default=[1],
                    help="comma-separated total thread counts to sweep (K*P)")
    tr.add_argument("--nodes", type=int, default=1, help="node groups K")
    tr.add_argument("--bucket-size", type=_int_list, default=None,
                    help="comma-separated bucket sizes to sweep")
    tr.add_argument("--cache-line-bytes", type=int, default=64)
    tr.add_argument("--sampling", choices=["perm", "iid"], default="perm")
    tr.add_argument("--repartition", choices=["dynamic", "static"], default="dynamic")
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--max-epochs", type=int, default=100)
    tr.add_argument("--tol", type=float, default=1e-5)
    tr.add_argument("--t2", type=int, default=1)
    tr.add_argument("--t3", type=int, default=None)
    tr.add_argument("--t4", type=int, default=None)
    tr.add_argument("--out", default="metrics.csv")
    tr.add_argument("--summary-out", default="summary.csv")
    tr.add_argument("--verify", action="store_true",
                    help="assert solver debug invariants during the run")
    tr.add_argument("--reference", choices=["closed-form", "run", "none"],
                    default="closed-form")

    th = sub.add_parser("theory", help="print the analytic bound sequence as CSV")
    th.add_argument("--gamma", type=float, required=True)
    th.add_argument("--mu", type=float, required=True)
    th.add_argument("--cA", type=float, required=True)
    th.add_argument("--n", type=int, required=True)
    th.add_argument("--B", type=int, required=True)
    th.add_argument("--K", type=int, default=1)
    th.add_argument("--P", type=int, default=1)
    th.add_argument("--T2", type=int, default=1)
    th.add_argument("--T3", type=int, default=None)
    th.add_argument("--T4", type=int, default=None)
    th.add_argument("--eps0", type=float, default=1.0)
    th.add_argument("--rounds", type=int, default=20)
    th.add_argument("--out", default=None)
    return parser


def parse_args(argv):
    """Parse argv into an ExperimentSpec or TheorySpec (usage errors exit 2)."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "theory":
        t4 = args.T4 if args.T4 is not None else args.B
        t3 = args.T3 if args.T3 is not None else max(
            1, args.n // (args.P * args.B * args.K))
        params = RateParams(
            gamma=args.gamma, mu=args.mu, c_A=args.cA, n=args.n, B=args.B,
            K=args.K, P=args.P, T1=1, T2=args.T2, T3=t3, T4=t4, eps0=args.eps0,
        )
        return TheorySpec(params, args.rounds, args.out)

    base = SolverConfig(
        algorithm=args.solver, seed=args.seed, max_epochs=args.max_epochs,
        tolerance=args.tol, T2=args.t2, T3=args.t3, T4=args.t4,
        sampling=args.sampling, repartition=args.repartition,
        cache_line_bytes=args.cache_line_bytes,
    )
    try:
        spec = ExperimentSpec(
            solver=args.solver,
            libsvm_path=args.libsvm,
            synthetic_shape=args.synthetic,
            density=args.density,
            loss=args.loss,
            lam=args.lam,
            nodes=args.nodes,
            thread_counts=args.threads,
            bucket_sizes=args.bucket_size if args.bucket_size else [None],
            base=base,
            out_path=args.out,
            summary_path=args.summary_out,
            verify=args.verify,
            reference=args.reference,
        )
        for threads in spec.thread_counts:
            _split_threads(spec.solver, threads, spec.nodes)
    except ValueError as exc:
        parser.error(str(exc))
    return spec


def run_theory(spec):
    lines = ["round,bound"]
    for t1 in range(spec.rounds + 1):
        params = dataclasses.replace(spec.params, T1=t1)
        lines.append(f"{t1},{rate_bound(params):.17g}")
    text = "\n".join(lines) + "\n"
    if spec.out_path:
        with open(spec.out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main(argv=None):
    spec = parse_args(sys.argv[1:] if argv is None else argv)
    if isinstance(spec, TheorySpec):
        return run_theory(spec)
    rows, summaries = run_experiment(spec)
    if summaries and all(s["reason"] == "diverged" for s in summaries):
        return EXIT_DIVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
