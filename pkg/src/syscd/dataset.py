"""Column-major training data: loading, synthetic generation, spectral stats.

All solvers access the data one coordinate (column) at a time, so both the
dense and the sparse representation keep columns contiguous.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg.blas import daxpy

COORDINATES_ARE_FEATURES = "coordinates_are_features"
COORDINATES_ARE_EXAMPLES = "coordinates_are_examples"

# Stream-id tags for the synthetic generators (see partitioning.RngStream for
# the solver-side streams).
_SYNTH_DENSE = 100
_SYNTH_SPARSE = 101
_SYNTH_LABELS = 102


class ColumnMatrix:
    """Training data matrix stored column by column.

    Dense data lives in a single Fortran-ordered ``(n_rows, n_cols)`` array so
    that every column is a contiguous view.  Sparse data is a list of
    ``(indices, values)`` pairs per column, indices strictly increasing.
    """

    def __init__(self, n_rows, n_cols, dense=None, sparse_cols=None):
        if (dense is None) == (sparse_cols is None):
            raise ValueError("exactly one of dense / sparse_cols must be given")
        self.n_rows = int(n_rows)
        self.n_cols = int(n_cols)
        if dense is not None:
            dense = np.asfortranarray(dense, dtype=np.float64)
            if dense.shape != (self.n_rows, self.n_cols):
                raise ValueError("dense array shape does not match dims")
            if not np.all(np.isfinite(dense)):
                raise ValueError("non-finite entries in data matrix")
            self.storage_kind = "dense"
            self._dense = dense
            self._sparse = None
        else:
            if len(sparse_cols) != self.n_cols:
                raise ValueError("sparse column count does not match n_cols")
            cols = []
            for j, (idx, vals) in enumerate(sparse_cols):
                idx = np.asarray(idx, dtype=np.intp)
                vals = np.ascontiguousarray(vals, dtype=np.float64)
                if idx.shape != vals.shape:
                    raise ValueError(f"column {j}: index/value length mismatch")
                if idx.size:
                    if idx[0] < 0 or idx[-1] >= self.n_rows:
                        raise ValueError(f"column {j}: row index out of range")
                    if np.any(np.diff(idx) <= 0):
                        raise ValueError(f"column {j}: indices not strictly increasing")
                if not np.all(np.isfinite(vals)):
                    raise ValueError(f"column {j}: non-finite values")
                cols.append((idx, vals))
            self.storage_kind = "sparse"
            self._dense = None
            self._sparse = cols

    def column(self, j):
        """Dense column view, or the (indices, values) pair for sparse data."""
        if self._dense is not None:
            return self._dense[:, j]
        return self._sparse[j]

    def col_dot(self, j, vec):
        """Inner product of column j with a length-n_rows vector."""
        if self._dense is not None:
            return float(np.dot(self._dense[:, j], vec))
        idx, vals = self._sparse[j]
        return float(np.dot(vals, vec[idx]))

    def col_axpy(self, out, j, scale):
        """In-place ``out += scale * x_j``.

        Each float64 component is updated with a single read-modify-write; no
        value is ever observed torn.  Cross-component ordering is up to the
        caller's synchronization.
        """
        if self._dense is not None:
            daxpy(self._dense[:, j], out, a=scale)
        else:
            idx, vals = self._sparse[j]
            out[idx] += scale * vals

    def col_sq_norm(self, j):
        if self._dense is not None:
            c = self._dense[:, j]
            return float(np.dot(c, c))
        _, vals = self._sparse[j]
        return float(np.dot(vals, vals))

    def matvec(self, x):
        """Compute A @ x for a length-n_cols vector."""
        if self._dense is not None:
            return self._dense @ np.asarray(x, dtype=np.float64)
        out = np.zeros(self.n_rows)
        for j in range(self.n_cols):
            xj = x[j]
            if xj != 0.0:
                idx, vals = self._sparse[j]
                out[idx] += xj * vals
        return out

    def rmatvec(self, y):
        """Compute A.T @ y for a length-n_rows vector."""
        if self._dense is not None:
            return self._dense.T @ np.asarray(y, dtype=np.float64)
        return np.array([self.col_dot(j, y) for j in range(self.n_cols)])

    def to_dense(self):
        if self._dense is not None:
            return self._dense.copy()
        out = np.zeros((self.n_rows, self.n_cols), order="F")
        for j, (idx, vals) in enumerate(self._sparse):
            out[idx, j] = vals
        return out

    def nnz(self):
        if self._dense is not None:
            return int(np.count_nonzero(self._dense))
        return sum(idx.size for idx, _ in self._sparse)


@dataclass
class LabeledDataset:
    """A ColumnMatrix paired with one label per entry of the shared vector.

    In the default feature orientation the shared-vector dimension is the
    example axis, so ``len(labels) == matrix.n_rows``.  In the example
    orientation labels stay attached to the examples, which are then the
    columns; label-coupled losses reject that orientation at problem build
    time.
    """

    matrix: ColumnMatrix
    labels: np.ndarray
    orientation: str = COORDINATES_ARE_FEATURES

    def __post_init__(self):
        self.labels = np.ascontiguousarray(self.labels, dtype=np.float64)
        expected = (
            self.matrix.n_rows
            if self.orientation == COORDINATES_ARE_FEATURES
            else self.matrix.n_cols
        )
        if self.labels.shape != (expected,):
            raise ValueError("label count does not match dataset orientation")
        if not np.all(np.isfinite(self.labels)):
            raise ValueError("non-finite labels")


@dataclass
class DatasetStats:
    """Per-column squared norms plus the spectral constant of the data matrix."""

    column_sq_norms: np.ndarray
    c_A: float
    max_col_sq_norm: float


def load_libsvm(path, n_features=None, orientation=COORDINATES_ARE_FEATURES):
    """Parse a LIBSVM text file (1-based ascending feature indices).

    Returns a LabeledDataset in the requested orientation.  With
    ``coordinates_are_features`` (the default) the columns are features and the
    shared vector runs over examples.
    """
    if orientation not in (COORDINATES_ARE_FEATURES, COORDINATES_ARE_EXAMPLES):
        raise ValueError(f"unknown orientation: {orientation}")
    labels = []
    rows = []  # per example: list of (0-based feature, value)
    max_feat = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            try:
                label = float(parts[0])
            except ValueError:
                raise ValueError(f"line {lineno}: bad label {parts[0]!r}") from None
            entries = []
            prev = 0
            for tok in parts[1:]:
                try:
                    idx_s, val_s = tok.split(":", 1)
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise ValueError(f"line {lineno}: bad entry {tok!r}") from None
                if idx < 1:
                    raise ValueError(f"line {lineno}: index {idx} is not 1-based")
                if idx <= prev:
                    raise ValueError(f"line {lineno}: indices not ascending")
                prev = idx
                entries.append((idx - 1, val))
            max_feat = max(max_feat, prev)
            labels.append(label)
            rows.append(entries)
    if not rows:
        raise ValueError("empty dataset")
    nfeat = max(max_feat, n_features or 0)
    if nfeat == 0:
        raise ValueError("dataset has no features")
    nex = len(rows)
    labels = np.array(labels)

    if orientation == COORDINATES_ARE_FEATURES:
        per_col = [([], []) for _ in range(nfeat)]
        for i, entries in enumerate(rows):
            for j, val in entries:
                per_col[j][0].append(i)
                per_col[j][1].append(val)
        cols = [(np.array(idx, dtype=np.intp), np.array(vals)) for idx, vals in per_col]
        matrix = ColumnMatrix(nex, nfeat, sparse_cols=cols)
        return LabeledDataset(matrix, labels, orientation)

    cols = []
    for entries in rows:
        idx = np.array([j for j, _ in entries], dtype=np.intp)
        vals = np.array([v for _, v in entries])
        cols.append((idx, vals))
    matrix = ColumnMatrix(nfeat, nex, sparse_cols=cols)
    return LabeledDataset(matrix, labels, orientation)


def save_libsvm(dataset, path):
    """Write a feature-oriented LabeledDataset as LIBSVM text.

    Values are rendered with 17 significant digits so a reload reproduces the
    float64 payload exactly.
    """
    if dataset.orientation != COORDINATES_ARE_FEATURES:
        raise ValueError("save_libsvm expects the feature orientation")
    m = dataset.matrix
    per_row = [[] for _ in range(m.n_rows)]
    for j in range(m.n_cols):
        col = m.column(j)
        if m.storage_kind == "dense":
            for i in np.nonzero(col)[0]:
                per_row[i].append((j, col[i]))
        else:
            idx, vals = col
            for i, v in zip(idx, vals):
                per_row[i].append((j, v))
    with open(path, "w") as fh:
        for i in range(m.n_rows):
            toks = ["%.17g" % dataset.labels[i]]
            toks += ["%d:%.17g" % (j + 1, v) for j, v in per_row[i]]
            fh.write(" ".join(toks) + "\n")


def _rng(seed, tag):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(tag,)))


def generate_synthetic_dense(n_examples, n_features, seed):
    """Dense data with i.i.d. uniform [0,1] entries and uniform ±1 labels."""
    if n_examples < 1 or n_features < 1:
        raise ValueError("n_examples and n_features must be >= 1")
    g = _rng(seed, _SYNTH_DENSE)
    data = np.asfortranarray(g.random((n_examples, n_features)))
    labels = _random_labels(seed, n_examples)
    return LabeledDataset(ColumnMatrix(n_examples, n_features, dense=data), labels)


def generate_synthetic_sparse(n_examples, n_features, density, seed):
    """Sparse data: each entry present independently with probability density."""
    if n_examples < 1 or n_features < 1:
        raise ValueError("n_examples and n_features must be >= 1")
    if not (0.0 < density <= 1.0):
        raise ValueError("density must be in (0, 1]")
    g = _rng(seed, _SYNTH_SPARSE)
    cols = []
    for _ in range(n_features):
        mask = g.random(n_examples) < density
        idx = np.nonzero(mask)[0]
        vals = g.random(idx.size)
        cols.append((idx, vals))
    labels = _random_labels(seed, n_examples)
    return LabeledDataset(ColumnMatrix(n_examples, n_features, sparse_cols=cols), labels)


def _random_labels(seed, n):
    g = _rng(seed, _SYNTH_LABELS)
    return g.integers(0, 2, size=n).astype(np.float64) * 2.0 - 1.0


def compute_stats(matrix, power_iters=200, tol=1e-9):
    """Exact column norms plus a power-iteration estimate of lambda_max(A^T A).

    The iteration runs on A^T A with a deterministic normalized all-ones start
    vector and stops when the Rayleigh quotient's relative change drops below
    ``tol``; the returned constant is the Rayleigh quotient at termination.
    """
    if matrix.n_rows < 1 or matrix.n_cols < 1:
        raise ValueError("empty matrix")
    sq = np.array([matrix.col_sq_norm(j) for j in range(matrix.n_cols)])
    x = np.full(matrix.n_cols, 1.0 / np.sqrt(matrix.n_cols))
    est = 0.0
    for _ in range(power_iters):
        z = matrix.rmatvec(matrix.matvec(x))
        new_est = float(np.dot(x, z))
        nz = float(np.linalg.norm(z))
        if nz == 0.0:
            est = 0.0
            break
        x = z / nz
        if est > 0.0 and abs(new_est - est) <= tol * abs(new_est):
            est = new_est
            break
        est = new_est
    return DatasetStats(
        column_sq_norms=sq,
        c_A=max(est, 0.0),
        max_col_sq_norm=float(sq.max()),
    )
