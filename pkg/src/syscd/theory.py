"""Analytic convergence-rate bounds for the hierarchical solver.

All formulas are evaluated literally.  The spectral constant ``c_A`` is the
squared operator norm max_x ||Ax||^2 / ||x||^2 (the form the nested-rate
derivation uses; an operator-norm reading would only rescale the bound).
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class RateParams:
    gamma: float   # smoothness of f
    mu: float      # strong convexity of the g_i
    c_A: float     # squared operator norm of the data matrix
    n: int         # coordinates
    B: int         # bucket size
    K: int         # node groups
    P: int         # threads per group
    T1: int
    T2: int
    T3: int
    T4: int
    eps0: float = 1.0  # initial suboptimality

    def __post_init__(self):
        if min(self.gamma, self.mu, self.eps0) <= 0.0 or self.c_A < 0.0:
            raise ValueError("gamma, mu, eps0 must be > 0 and c_A >= 0")
        if min(self.n, self.B, self.K, self.P) < 1:
            raise ValueError("n, B, K, P must be >= 1")
        if min(self.T1, self.T2, self.T3, self.T4) < 0:
            raise ValueError("loop counts must be >= 0")


def sdca_step_rate(params):
    """Per-step linear rate of the innermost coordinate solver.

    The local subproblem seen by one thread has curvature K*P*gamma, so one
    step contracts suboptimality by 1 - rho with
    rho = (1/n) * mu / (K*P*gamma + mu).
    """
    p = params
    return (1.0 / p.n) * p.mu / (p.K * p.P * p.gamma + p.mu)


def theta_bound(params):
    """Approximation quality of one thread's local round (T3 buckets, T4
    steps per bucket); 1 means no progress."""
    p = params
    inner = (1.0 - (1.0 / p.n) * p.mu / (p.mu + p.gamma * p.K * p.P)) ** p.T4
    block = (1.0 - inner) * (p.B / p.n) * p.mu / (p.mu + p.c_A * p.gamma * p.K * p.P)
    return (1.0 - block) ** p.T3


def rate_bound(params):
    """Expected suboptimality bound after T1 outer rounds."""
    p = params
    theta = theta_bound(params)
    ratio = (p.gamma * p.K * p.c_A + p.mu) / (p.gamma * p.K * p.P * p.c_A + p.mu)
    bracket = 1.0 - (1.0 - (1.0 - theta) * ratio) ** p.T2
    factor = 1.0 - bracket * p.mu / (p.mu + p.K * p.gamma * p.c_A)
    return factor ** p.T1 * p.eps0


def round_factor(params):
    """Per-outer-round contraction factor of the bound."""
    p = params
    theta = theta_bound(params)
    ratio = (p.gamma * p.K * p.c_A + p.mu) / (p.gamma * p.K * p.P * p.c_A + p.mu)
    bracket = 1.0 - (1.0 - (1.0 - theta) * ratio) ** p.T2
    return 1.0 - bracket * p.mu / (p.mu + p.K * p.gamma * p.c_A)


def epochs_to_epsilon(params, target):
    """Smallest outer-round count whose bound is <= target."""
    p = params
    if target <= 0.0:
        raise ValueError("target must be > 0")
    if target >= p.eps0:
        return 0
    factor = round_factor(params)
    if factor >= 1.0:
        raise ValueError("bound does not contract")
    t1 = math.ceil(math.log(target / p.eps0) / math.log(factor))
    t1 = max(t1, 0)
    # logarithm rounding can be off by one; settle by direct evaluation
    def bound_at(t):
        return factor ** t * p.eps0
    while t1 > 0 and bound_at(t1 - 1) <= target:
        t1 -= 1
    while bound_at(t1) > target:
        t1 += 1
    return t1
