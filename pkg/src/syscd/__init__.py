"""Shared-memory coordinate descent trainers for generalized linear models."""

from .dataset import (
    ColumnMatrix,
    DatasetStats,
    LabeledDataset,
    compute_stats,
    generate_synthetic_dense,
    generate_synthetic_sparse,
    load_libsvm,
    save_libsvm,
)
from .objective import (
    GlmProblem,
    NonFiniteUpdateError,
    Regularizer,
    SmoothLoss,
    SurrogateContext,
    exact_coordinate_update,
    full_objective,
    grad_f,
    surrogate_coordinate_update,
)
from .partitioning import (
    BucketLayout,
    NodePartition,
    RngStream,
    ThreadAssignment,
    build_buckets,
    dynamic_repartition,
    permute_within_bucket,
    static_node_partition,
)
from .solvers import (
    EpochMetrics,
    SolverConfig,
    TrainResult,
    reduce_replicas,
    run_sequential_scd,
    run_solver,
    run_syscd,
    run_wild_parallel_scd,
)
from .theory import (
    RateParams,
    epochs_to_epsilon,
    rate_bound,
    sdca_step_rate,
    theta_bound,
)

__all__ = [
    "BucketLayout",
    "ColumnMatrix",
    "DatasetStats",
    "EpochMetrics",
    "GlmProblem",
    "LabeledDataset",
    "NodePartition",
    "NonFiniteUpdateError",
    "RateParams",
    "Regularizer",
    "RngStream",
    "SmoothLoss",
    "SolverConfig",
    "SurrogateContext",
    "ThreadAssignment",
    "TrainResult",
    "build_buckets",
    "compute_stats",
    "dynamic_repartition",
    "epochs_to_epsilon",
    "exact_coordinate_update",
    "full_objective",
    "generate_synthetic_dense",
    "generate_synthetic_sparse",
    "grad_f",
    "load_libsvm",
    "permute_within_bucket",
    "rate_bound",
    "reduce_replicas",
    "run_sequential_scd",
    "run_solver",
    "run_syscd",
    "run_wild_parallel_scd",
    "save_libsvm",
    "sdca_step_rate",
    "static_node_partition",
    "surrogate_coordinate_update",
    "theta_bound",
]
