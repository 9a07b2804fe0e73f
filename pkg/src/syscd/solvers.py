"""The three trainers: sequential SCD, wild asynchronous SCD, and the
hierarchical bucketized solver with node-group and thread replicas.

Determinism contract: the hierarchical solver draws every random decision
from streams keyed by (purpose, node, thread, round, bucket) and reduces
replicas in fixed index order, so a fixed (seed, config) reproduces results
bitwise regardless of thread scheduling.  The wild solver is intentionally
nondeterministic for P > 1.
"""

from __future__ import annotations

import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .objective import (
    NonFiniteUpdateError,
    exact_coordinate_update,
    full_objective,
    grad_f,
    surrogate_delta,
)
from .partitioning import (
    COORD_PERM,
    DEFAULT_CACHE_LINE_BYTES,
    IID_DRAW,
    NODE_PARTITION,
    REPARTITION,
    RngStream,
    build_buckets,
    default_bucket_size,
    dynamic_repartition,
    permute_within_bucket,
    static_node_partition,
)

DIVERGENCE_FACTOR = 1e6


@dataclass
class SolverConfig:
    algorithm: str = "syscd"
    K: int = 1                      # node groups
    P: int = 1                      # threads per group
    bucket_size: int | None = None  # None: cache_line_bytes / 8
    cache_line_bytes: int = DEFAULT_CACHE_LINE_BYTES
    T1: int | None = None           # fixed outer round count; None: run to tolerance
    T2: int = 1                     # node-local rounds per global round
    T3: int | None = None           # buckets per thread per round; None: all assigned
    T4: int | None = None           # updates per bucket; None: bucket length (perm) / B (iid)
    sampling: str = "perm"
    repartition: str = "dynamic"
    seed: int = 0
    max_epochs: int = 100
    tolerance: float = 1e-5
    verify: bool = False
    record_alpha: bool = False

    def __post_init__(self):
        if self.algorithm not in ("sequential", "wild", "syscd"):
            raise ValueError(f"unknown algorithm: {self.algorithm}")
        if self.K < 1 or self.P < 1 or self.T2 < 1:
            raise ValueError("K, P and T2 must be >= 1")
        if self.T3 is not None and self.T3 < 1:
            raise ValueError("T3 must be >= 1")
        if self.T4 is not None and self.T4 < 1:
            raise ValueError("T4 must be >= 1")
        if self.sampling not in ("perm", "iid"):
            raise ValueError(f"unknown sampling mode: {self.sampling}")
        if self.repartition not in ("dynamic", "static"):
            raise ValueError(f"unknown repartition mode: {self.repartition}")
        if self.tolerance <= 0.0:
            raise ValueError("tolerance must be > 0")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")

    def resolved_bucket_size(self):
        if self.bucket_size is not None:
            return self.bucket_size
        return default_bucket_size(self.cache_line_bytes)

    @property
    def n_rounds(self):
        return self.T1 if self.T1 is not None else self.max_epochs


@dataclass
class EpochMetrics:
    epoch: int
    objective: float
    suboptimality: float | None
    seconds: float
    updates: int
    rel_change: float


@dataclass
class TrainResult:
    alpha: np.ndarray
    metrics: list
    converged: bool
    total_updates: int
    diverged: bool = False
    reason: str | None = None
    alpha_snapshots: list = field(default_factory=list)


def reduce_replicas(base, replicas):
    """base + sum_r (replica_r - base), summed in ascending replica index."""
    base = np.asarray(base, dtype=np.float64)
    if not replicas:
        raise ValueError("need at least one replica")
    for r in replicas:
        if np.shape(r) != base.shape:
            raise ValueError("replica length mismatch")
    if len(replicas) == 1:
        return np.array(replicas[0], dtype=np.float64)
    acc = np.zeros_like(base)
    for r in replicas:
        acc += np.asarray(r, dtype=np.float64) - base
    return base + acc


def _rel_model_change(alpha, prev):
    return float(
        np.max(np.abs(alpha - prev)) / max(1.0, np.max(np.abs(alpha)))
    )


def _metrics_row(problem, alpha, epoch, seconds, updates, rel, f_star):
    obj = full_objective(problem, alpha)
    sub = obj - f_star if f_star is not None else None
    return EpochMetrics(epoch, obj, sub, seconds, updates, rel)


def _exact_worker_pass(problem, layout, buckets, alpha, v, cfg, round_id, node, thread):
    """Exact-update pass of a single worker over its buckets for one round."""
    m = problem.data.matrix
    updates = 0
    if cfg.sampling == "perm":
        t3 = len(buckets) if cfg.T3 is None else min(cfg.T3, len(buckets))
        for b in buckets[:t3]:
            lo, hi = layout.range_of(b)
            coords = permute_within_bucket(
                (lo, hi), RngStream(cfg.seed, (COORD_PERM, round_id, b))
            )
            t4 = (hi - lo) if cfg.T4 is None else min(cfg.T4, hi - lo)
            for j in coords[:t4]:
                j = int(j)
                delta = exact_coordinate_update(problem, j, alpha[j], v)
                alpha[j] += delta
                m.col_axpy(v, j, delta)
                updates += 1
    else:
        g = RngStream(cfg.seed, (IID_DRAW, node, thread, round_id)).generator()
        t3 = len(buckets) if cfg.T3 is None else cfg.T3
        t4 = cfg.T4 if cfg.T4 is not None else layout.bucket_size
        for _ in range(t3):
            b = buckets[int(g.integers(len(buckets)))]
            lo, hi = layout.range_of(b)
            for _ in range(t4):
                j = int(g.integers(lo, hi))
                delta = exact_coordinate_update(problem, j, alpha[j], v)
                alpha[j] += delta
                m.col_axpy(v, j, delta)
                updates += 1
    return updates


def _worker_bucket_order(node_buckets, n_threads, cfg, node, round_id):
    order_round = round_id if cfg.repartition == "dynamic" else 0
    return dynamic_repartition(
        node_buckets, n_threads, RngStream(cfg.seed, (REPARTITION, node, order_round))
    )


def run_sequential_scd(problem, cfg, f_star=None):
    """Single-threaded SCD over shuffled buckets with exact 1-D minimization."""
    if cfg.algorithm != "sequential":
        raise ValueError("config.algorithm must be 'sequential'")
    n = problem.n_coordinates
    layout = build_buckets(n, cfg.resolved_bucket_size())
    node_part = static_node_partition(layout, 1, RngStream(cfg.seed, (NODE_PARTITION,)))
    alpha = np.zeros(n)
    v = np.zeros(problem.n_shared)
    metrics = [_metrics_row(problem, alpha, 0, 0.0, 0, np.inf, f_star)]
    snapshots = []
    prev = alpha.copy()
    converged = False
    total = 0
    for epoch in range(cfg.n_rounds):
        t0 = time.perf_counter()
        assign = _worker_bucket_order(node_part.assignment[0], 1, cfg, 0, epoch)
        upd = _exact_worker_pass(
            problem, layout, assign.assignment[0], alpha, v, cfg, epoch, 0, 0
        )
        elapsed = time.perf_counter() - t0
        total += upd
        rel = _rel_model_change(alpha, prev)
        prev = alpha.copy()
        metrics.append(_metrics_row(problem, alpha, epoch + 1, elapsed, upd, rel, f_star))
        if cfg.record_alpha:
            snapshots.append(alpha.copy())
        if cfg.T1 is None and rel < cfg.tolerance:
            converged = True
            break
    return TrainResult(alpha, metrics, converged, total, alpha_snapshots=snapshots)


def run_wild_parallel_scd(problem, cfg, f_star=None):
    """Asynchronous parallel SCD: P threads share one model and one shared
    vector, writing updates without synchronization (staleness tolerated)."""
    if cfg.algorithm != "wild":
        raise ValueError("config.algorithm must be 'wild'")
    if cfg.K != 1:
        raise ValueError("wild solver uses a flat thread pool (K must be 1)")
    m = problem.data.matrix
    n = problem.n_coordinates
    alpha = np.zeros(n)
    v = np.zeros(problem.n_shared)
    init_obj = full_objective(problem, alpha)
    metrics = [EpochMetrics(0, init_obj, init_obj - f_star if f_star is not None else None,
                            0.0, 0, np.inf)]
    snapshots = []
    prev = alpha.copy()
    converged = False
    diverged = False
    total = 0

    def worker(chunk, counter, failures):
        upd = 0
        try:
            for j in chunk:
                j = int(j)
                aj = alpha[j]
                delta = exact_coordinate_update(problem, j, aj, v)
                alpha[j] = aj + delta
                m.col_axpy(v, j, delta)
                upd += 1
        except NonFiniteUpdateError:
            failures.append(True)
        counter.append(upd)

    for epoch in range(cfg.n_rounds):
        t0 = time.perf_counter()
        perm = permute_within_bucket((0, n), RngStream(cfg.seed, (COORD_PERM, epoch, 0)))
        counter, failures = [], []
        if cfg.P == 1:
            worker(perm, counter, failures)
        else:
            chunks = np.array_split(perm, cfg.P)
            threads = [
                threading.Thread(target=worker, args=(c, counter, failures))
                for c in chunks
            ]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
        elapsed = time.perf_counter() - t0
        upd = sum(counter)
        total += upd
        with np.errstate(over="ignore", invalid="ignore"):
            obj = full_objective(problem, alpha) if np.all(np.isfinite(alpha)) else np.inf
        if failures or not np.isfinite(obj) or obj > DIVERGENCE_FACTOR * max(init_obj, 1e-300):
            metrics.append(EpochMetrics(epoch + 1, obj, None, elapsed, upd, np.inf))
            diverged = True
            break
        rel = _rel_model_change(alpha, prev)
        prev = alpha.copy()
        sub = obj - f_star if f_star is not None else None
        metrics.append(EpochMetrics(epoch + 1, obj, sub, elapsed, upd, rel))
        if cfg.record_alpha:
            snapshots.append(alpha.copy())
        if cfg.T1 is None and rel < cfg.tolerance:
            converged = True
            break
    return TrainResult(
        alpha, metrics, converged, total,
        diverged=diverged, reason="diverged" if diverged else None,
        alpha_snapshots=snapshots,
    )


def _surrogate_thread_round(problem, layout, buckets, lin_vec, v_node, alpha, cfg,
                            round_id, node, thread, scale_a, census):
    """One thread's local optimization round on its replica.

    The thread owns the model entries of its assigned buckets for this round,
    so the in-place writes to alpha are free of write conflicts.  Progress is
    accumulated in dv = v_thread - v_node and folded back by the reduction.
    """
    m = problem.data.matrix
    lam = problem.reg.lam
    sq = problem.stats.column_sq_norms
    dv = np.zeros(v_node.shape[0])
    updates = 0

    def step(j):
        nonlocal updates
        lin = m.col_dot(j, lin_vec) + scale_a * m.col_dot(j, dv)
        delta = surrogate_delta(lin, scale_a, sq[j], lam, alpha[j])
        if not np.isfinite(delta):
            raise NonFiniteUpdateError(f"coordinate {j}: non-finite update")
        alpha[j] += delta
        m.col_axpy(dv, j, delta)
        updates += 1
        if census is not None:
            census.append(j)

    if cfg.sampling == "perm":
        t3 = len(buckets) if cfg.T3 is None else min(cfg.T3, len(buckets))
        for b in buckets[:t3]:
            lo, hi = layout.range_of(b)
            coords = permute_within_bucket(
                (lo, hi), RngStream(cfg.seed, (COORD_PERM, round_id, b))
            )
            t4 = (hi - lo) if cfg.T4 is None else min(cfg.T4, hi - lo)
            for j in coords[:t4]:
                step(int(j))
    else:
        g = RngStream(cfg.seed, (IID_DRAW, node, thread, round_id)).generator()
        t3 = len(buckets) if cfg.T3 is None else cfg.T3
        t4 = cfg.T4 if cfg.T4 is not None else layout.bucket_size
        for _ in range(t3):
            b = buckets[int(g.integers(len(buckets)))]
            lo, hi = layout.range_of(b)
            for _ in range(t4):
                step(int(g.integers(lo, hi)))
    return v_node + dv, updates


def run_syscd(problem, cfg, f_star=None):
    """Hierarchical bucketized solver: K node groups of P threads, each thread
    optimizing a local quadratic surrogate on its own shared-vector replica,
    with deterministic node-level and global reductions.

    With K = P = 1 the replicas all coincide, so the single worker applies
    exact coordinate updates directly; for a quadratic loss this is identical
    to the surrogate path and it reproduces the sequential solver bitwise.
    """
    if cfg.algorithm != "syscd":
        raise ValueError("config.algorithm must be 'syscd'")
    n = problem.n_coordinates
    layout = build_buckets(n, cfg.resolved_bucket_size())
    if cfg.K * cfg.P > layout.n_buckets:
        raise ValueError(
            f"K*P={cfg.K * cfg.P} exceeds the bucket count {layout.n_buckets}"
        )
    node_part = static_node_partition(
        layout, cfg.K, RngStream(cfg.seed, (NODE_PARTITION,))
    )
    m = problem.data.matrix
    gamma = problem.loss.gamma
    scale_a = gamma * cfg.P * cfg.K
    alpha = np.zeros(n)
    v = np.zeros(problem.n_shared)
    single = cfg.K == 1 and cfg.P == 1
    metrics = [_metrics_row(problem, alpha, 0, 0.0, 0, np.inf, f_star)]
    snapshots = []
    prev = alpha.copy()
    converged = False
    diverged = False
    total = 0

    thread_pool = None if single else ThreadPoolExecutor(max_workers=cfg.K * cfg.P)
    node_pool = None if (single or cfg.K == 1) else ThreadPoolExecutor(max_workers=cfg.K)

    def node_task(k, t1, grad):
        v_node = v.copy()
        updates = 0
        for t2 in range(cfg.T2):
            rid = t1 * cfg.T2 + t2
            assign = _worker_bucket_order(node_part.assignment[k], cfg.P, cfg, k, rid)
            if t2 == 0:
                lin_vec = grad  # node replica still equals the synced vector
            else:
                lin_vec = grad + (cfg.K * gamma) * (v_node - v)
            census = [] if (cfg.verify and cfg.sampling == "perm") else None
            futures = [
                thread_pool.submit(
                    _surrogate_thread_round, problem, layout,
                    assign.assignment[p], lin_vec, v_node, alpha, cfg,
                    rid, k, p, scale_a, census,
                )
                for p in range(cfg.P)
            ]
            results = [f.result() for f in futures]
            v_node = reduce_replicas(v_node, [r[0] for r in results])
            updates += sum(r[1] for r in results)
            # ownership: within one round no model entry may see two writers
            if census is not None and len(census) != len(set(census)):
                raise AssertionError("write census: coordinate updated twice in one round")
        return v_node, updates

    try:
        for t1 in range(cfg.n_rounds):
            t0 = time.perf_counter()
            if single:
                upd = 0
                for t2 in range(cfg.T2):
                    rid = t1 * cfg.T2 + t2
                    assign = _worker_bucket_order(node_part.assignment[0], 1, cfg, 0, rid)
                    upd += _exact_worker_pass(
                        problem, layout, assign.assignment[0], alpha, v, cfg, rid, 0, 0
                    )
            else:
                grad = grad_f(problem, v)
                if cfg.K == 1:
                    results = [node_task(0, t1, grad)]
                else:
                    results = [
                        f.result()
                        for f in [
                            node_pool.submit(node_task, k, t1, grad)
                            for k in range(cfg.K)
                        ]
                    ]
                v = reduce_replicas(v, [r[0] for r in results])
                upd = sum(r[1] for r in results)
            elapsed = time.perf_counter() - t0
            total += upd
            if cfg.verify:
                vv = m.matvec(alpha)
                scale = max(1.0, float(np.max(np.abs(vv))))
                if float(np.max(np.abs(vv - v))) > 1e-8 * scale:
                    raise AssertionError("replica consistency: v != A @ alpha after reduction")
            if not np.all(np.isfinite(alpha)):
                metrics.append(EpochMetrics(t1 + 1, np.inf, None, elapsed, upd, np.inf))
                diverged = True
                break
            rel = _rel_model_change(alpha, prev)
            prev = alpha.copy()
            metrics.append(_metrics_row(problem, alpha, t1 + 1, elapsed, upd, rel, f_star))
            if cfg.record_alpha:
                snapshots.append(alpha.copy())
            if cfg.T1 is None and rel < cfg.tolerance:
                converged = True
                break
    finally:
        if thread_pool is not None:
            thread_pool.shutdown(wait=True)
        if node_pool is not None:
            node_pool.shutdown(wait=True)
    return TrainResult(
        alpha, metrics, converged, total,
        diverged=diverged, reason="diverged" if diverged else None,
        alpha_snapshots=snapshots,
    )


def run_solver(problem, cfg, f_star=None):
    """Dispatch on cfg.algorithm."""
    if cfg.algorithm == "sequential":
        return run_sequential_scd(problem, cfg, f_star=f_star)
    if cfg.algorithm == "wild":
        return run_wild_parallel_scd(problem, cfg, f_star=f_star)
    return run_syscd(problem, cfg, f_star=f_star)
