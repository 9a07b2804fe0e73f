"""Bucket layout, node/thread bucket assignment, and reproducible RNG streams.

Every random draw in the solvers goes through an RngStream keyed by purpose
plus the relevant (node, thread, round, bucket) coordinates, so assignments
and sampling orders are a pure function of the seed and the configuration,
independent of thread scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_CACHE_LINE_BYTES = 64
MODEL_ENTRY_BYTES = 8

# stream purposes
NODE_PARTITION = 0
REPARTITION = 1
COORD_PERM = 2
IID_DRAW = 3


def default_bucket_size(cache_line_bytes=DEFAULT_CACHE_LINE_BYTES):
    """One cache line worth of model entries per bucket."""
    return max(1, cache_line_bytes // MODEL_ENTRY_BYTES)


@dataclass(frozen=True)
class RngStream:
    """A named, splittable stream: same (seed, key) -> identical sequence."""

    seed: int
    key: tuple

    def generator(self):
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=self.key))


@dataclass(frozen=True)
class BucketLayout:
    """Consecutive coordinate blocks; only the last bucket may be partial."""

    n_coordinates: int
    bucket_size: int

    @property
    def n_buckets(self):
        return -(-self.n_coordinates // self.bucket_size)

    def range_of(self, b):
        lo = b * self.bucket_size
        hi = min(lo + self.bucket_size, self.n_coordinates)
        return lo, hi

    def bucket_of(self, j):
        return j // self.bucket_size


@dataclass(frozen=True)
class NodePartition:
    """Static, balanced assignment of buckets to the K node groups."""

    n_nodes: int
    assignment: tuple  # per node: tuple of bucket ids


@dataclass(frozen=True)
class ThreadAssignment:
    """Per-round balanced assignment of a node's buckets to its P threads."""

    n_threads: int
    assignment: tuple


def build_buckets(n, bucket_size):
    if n < 1:
        raise ValueError("need at least one coordinate")
    if bucket_size < 1:
        raise ValueError("bucket size must be >= 1")
    return BucketLayout(n, bucket_size)


def _deal(items, groups):
    return tuple(tuple(items[g::groups]) for g in range(groups))


def static_node_partition(layout, n_nodes, rng):
    """Shuffle all buckets once and deal them round-robin to the nodes."""
    if n_nodes < 1:
        raise ValueError("need at least one node group")
    if n_nodes > layout.n_buckets:
        raise ValueError("more node groups than buckets")
    order = rng.generator().permutation(layout.n_buckets)
    return NodePartition(n_nodes, _deal([int(b) for b in order], n_nodes))


def dynamic_repartition(node_buckets, n_threads, rng):
    """Freshly shuffle a node's buckets and deal them round-robin to threads."""
    if n_threads < 1:
        raise ValueError("need at least one thread")
    if not node_buckets:
        raise ValueError("empty bucket list")
    if n_threads > len(node_buckets):
        raise ValueError("more threads than buckets on this node")
    order = rng.generator().permutation(len(node_buckets))
    shuffled = [node_buckets[i] for i in order]
    return ThreadAssignment(n_threads, _deal(shuffled, n_threads))


def permute_within_bucket(coord_range, rng):
    """Uniform permutation of the coordinates in [lo, hi)."""
    lo, hi = coord_range
    if hi <= lo:
        raise ValueError("empty coordinate range")
    return lo + rng.generator().permutation(hi - lo)
