"""GLM objective F(alpha) = f(A alpha) + sum_i g_i(alpha_i) and coordinate updates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .dataset import COORDINATES_ARE_FEATURES, DatasetStats, LabeledDataset, compute_stats


class NonFiniteUpdateError(ValueError):
    """A coordinate update produced a non-finite intermediate value."""


@dataclass(frozen=True)
class SmoothLoss:
    """Smooth data-fit term; gamma is the smoothness of the scalar component."""

    kind: str
    gamma: float

    @staticmethod
    def squared_error():
        return SmoothLoss("squared_error", 1.0)

    @staticmethod
    def logistic():
        return SmoothLoss("logistic", 0.25)

    def value(self, v, y):
        if self.kind == "squared_error":
            r = v - y
            return 0.5 * float(np.dot(r, r))
        # log(1 + exp(-y v)) evaluated overflow-safely
        return float(np.sum(np.logaddexp(0.0, -y * v)))

    def grad(self, v, y):
        if self.kind == "squared_error":
            return v - y
        return -y * expit(-y * v)


@dataclass(frozen=True)
class Regularizer:
    """Separable penalty; only the strongly convex l2 form is supported."""

    kind: str = "l2"
    lam: float = 1.0

    def __post_init__(self):
        if self.kind != "l2":
            raise ValueError(f"unsupported regularizer: {self.kind}")
        if self.lam <= 0.0:
            raise ValueError("lambda must be > 0")

    @property
    def mu(self):
        return self.lam

    def value(self, alpha):
        return 0.5 * self.lam * float(np.dot(alpha, alpha))


@dataclass
class GlmProblem:
    data: LabeledDataset
    loss: SmoothLoss
    reg: Regularizer
    stats: DatasetStats

    def __post_init__(self):
        if self.data.orientation != COORDINATES_ARE_FEATURES:
            raise ValueError(
                "label-coupled losses need the coordinates_are_features orientation"
            )
        if self.loss.kind == "logistic" and not np.all(np.abs(self.data.labels) == 1.0):
            raise ValueError("logistic loss requires labels in {-1, +1}")

    @staticmethod
    def build(data, loss, lam):
        """Attach a loss and l2 penalty to a dataset, computing stats."""
        return GlmProblem(data, loss, Regularizer("l2", lam), compute_stats(data.matrix))

    @property
    def n_coordinates(self):
        return self.data.matrix.n_cols

    @property
    def n_shared(self):
        return self.data.matrix.n_rows


def full_objective(problem, alpha):
    """F(alpha), with the shared vector materialized fresh from alpha."""
    m = problem.data.matrix
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (m.n_cols,):
        raise ValueError("alpha length does not match coordinate count")
    v = m.matvec(alpha)
    return problem.loss.value(v, problem.data.labels) + problem.reg.value(alpha)


def grad_f(problem, v):
    """Componentwise derivative of the smooth term at the shared vector v."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (problem.n_shared,):
        raise ValueError("v length does not match shared dimension")
    return problem.loss.grad(v, problem.data.labels)


def exact_coordinate_update(problem, j, alpha_j, v):
    """One-dimensional exact minimization over coordinate j at shared state v."""
    m = problem.data.matrix
    lam = problem.reg.lam
    sq = problem.stats.column_sq_norms[j]
    if problem.loss.kind == "squared_error":
        t = m.col_dot(j, problem.data.labels - v)
        delta = (t - lam * alpha_j) / (sq + lam)
    else:
        delta = _logistic_newton(problem, j, alpha_j, v, sq)
    if not np.isfinite(delta):
        raise NonFiniteUpdateError(f"coordinate {j}: non-finite update")
    return delta


def _logistic_newton(problem, j, alpha_j, v, sq, max_iter=20, step_tol=1e-12):
    """Safeguarded Newton on phi(d) = f(v + x_j d) + lam/2 (alpha_j + d)^2.

    Only the support of x_j contributes to the data-fit derivative.  If a
    Newton step leaves the bracket or stalls, fall back to bisection on phi'.
    """
    m = problem.data.matrix
    lam = problem.reg.lam
    col = m.column(j)
    if m.storage_kind == "dense":
        xs = col
        vs = v
        ys = problem.data.labels
    else:
        idx, xs = col
        vs = v[idx]
        ys = problem.data.labels[idx]

    def dphi(d):
        s = expit(-ys * (vs + d * xs))
        g = -float(np.dot(xs, ys * s)) + lam * (alpha_j + d)
        h = float(np.dot(xs * xs, s * (1.0 - s))) + lam
        return g, h

    rad = 10.0 / max(np.sqrt(sq), 1e-30) + abs(alpha_j)
    lo, hi = -rad, rad
    glo, _ = dphi(lo)
    ghi, _ = dphi(hi)
    # lam > 0 makes phi' increasing and eventually sign-changing; widen if needed
    widen = 0
    while glo > 0.0 and widen < 60:
        lo *= 2.0
        glo, _ = dphi(lo)
        widen += 1
    while ghi < 0.0 and widen < 120:
        hi *= 2.0
        ghi, _ = dphi(hi)
        widen += 1

    d = 0.0
    for _ in range(max_iter):
        g, h = dphi(d)
        if g > 0.0:
            hi = d
        elif g < 0.0:
            lo = d
        else:
            break
        step = -g / h
        nd = d + step
        if not (lo < nd < hi) or not np.isfinite(nd):
            nd = 0.5 * (lo + hi)
            step = nd - d
        d = nd
        if abs(step) < step_tol:
            break
    return d


@dataclass
class SurrogateContext:
    """Read-only quantities fixed at the last node synchronization.

    ``scale_a`` is the surrogate curvature gamma * P * K; ``shift_scale`` is
    K * gamma, the weight of the node-replica drift term.  The combined linear
    vector is built once: the drift contribution is skipped entirely while the
    node replica still aliases the globally synced vector.
    """

    grad_at_sync: np.ndarray
    v_global: np.ndarray
    v_node: np.ndarray
    scale_a: float
    shift_scale: float
    linear: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.v_node is self.v_global:
            self.linear = self.grad_at_sync
        else:
            self.linear = self.grad_at_sync + self.shift_scale * (
                self.v_node - self.v_global
            )


def surrogate_delta(lin, scale_a, sq, lam, alpha_j):
    """Closed-form l2 minimizer of the local quadratic surrogate in delta."""
    return -(lin + lam * alpha_j) / (scale_a * sq + lam)


def surrogate_coordinate_update(ctx, problem, j, alpha_j, v_thread):
    """Minimize the separable quadratic surrogate over coordinate j.

    The linear coefficient combines the stale synced gradient, the node drift
    term, and the locally accumulated thread progress v_thread - v_node.
    """
    m = problem.data.matrix
    lin = m.col_dot(j, ctx.linear)
    if v_thread is not ctx.v_node:
        lin += ctx.scale_a * m.col_dot(j, v_thread - ctx.v_node)
    delta = surrogate_delta(
        lin, ctx.scale_a, problem.stats.column_sq_norms[j], problem.reg.lam, alpha_j
    )
    if not np.isfinite(delta):
        raise NonFiniteUpdateError(f"coordinate {j}: non-finite update")
    return delta
