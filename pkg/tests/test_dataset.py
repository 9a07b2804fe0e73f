"""Data containers, LIBSVM IO, synthetic generators and spectral stats."""

import numpy as np
import pytest

from syscd import (
    ColumnMatrix,
    LabeledDataset,
    compute_stats,
    generate_synthetic_dense,
    generate_synthetic_sparse,
    load_libsvm,
    save_libsvm,
)
from syscd.dataset import COORDINATES_ARE_EXAMPLES, COORDINATES_ARE_FEATURES


def random_dense(n_rows, n_cols, seed=0):
    g = np.random.default_rng(seed)
    return ColumnMatrix(n_rows, n_cols, dense=g.standard_normal((n_rows, n_cols)))


def random_sparse(n_rows, n_cols, seed=0, density=0.3):
    g = np.random.default_rng(seed)
    cols = []
    for _ in range(n_cols):
        idx = np.nonzero(g.random(n_rows) < density)[0]
        cols.append((idx, g.standard_normal(idx.size)))
    return ColumnMatrix(n_rows, n_cols, sparse_cols=cols)


@pytest.mark.parametrize("make", [random_dense, random_sparse])
def test_column_ops_against_dense_oracle(make):
    m = make(17, 9, seed=4)
    a = m.to_dense()
    vec = np.random.default_rng(1).standard_normal(17)
    x = np.random.default_rng(2).standard_normal(9)
    for j in range(9):
        assert m.col_dot(j, vec) == pytest.approx(float(a[:, j] @ vec), rel=1e-12, abs=1e-12)
        assert m.col_sq_norm(j) == pytest.approx(float(a[:, j] @ a[:, j]), rel=1e-12)
    np.testing.assert_allclose(m.matvec(x), a @ x, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(m.rmatvec(vec), a.T @ vec, rtol=1e-12, atol=1e-12)
    out = vec.copy()
    m.col_axpy(out, 3, -2.5)
    np.testing.assert_allclose(out, vec - 2.5 * a[:, 3], rtol=1e-12, atol=1e-12)


def test_nnz():
    m = random_sparse(20, 5, seed=3)
    assert m.nnz() == sum(np.count_nonzero(m.to_dense()[:, j]) for j in range(5))
    d = ColumnMatrix(2, 2, dense=np.array([[1.0, 0.0], [0.0, 3.0]]))
    assert d.nnz() == 2


def test_matrix_validation():
    with pytest.raises(ValueError):
        ColumnMatrix(2, 2)  # neither storage given
    with pytest.raises(ValueError):
        ColumnMatrix(2, 2, dense=np.zeros((3, 2)))
    with pytest.raises(ValueError):
        ColumnMatrix(2, 1, dense=np.array([[np.nan], [0.0]]))
    with pytest.raises(ValueError):
        ColumnMatrix(4, 1, sparse_cols=[(np.array([2, 1]), np.array([1.0, 2.0]))])
    with pytest.raises(ValueError):
        ColumnMatrix(4, 1, sparse_cols=[(np.array([1, 1]), np.array([1.0, 2.0]))])
    with pytest.raises(ValueError):
        ColumnMatrix(4, 1, sparse_cols=[(np.array([5]), np.array([1.0]))])
    with pytest.raises(ValueError):
        ColumnMatrix(4, 2, sparse_cols=[(np.array([0]), np.array([1.0]))])


def test_labeled_dataset_orientation_shapes():
    m = random_dense(6, 3)
    LabeledDataset(m, np.zeros(6))  # feature orientation: one label per row
    with pytest.raises(ValueError):
        LabeledDataset(m, np.zeros(3))
    LabeledDataset(m, np.zeros(3), COORDINATES_ARE_EXAMPLES)
    with pytest.raises(ValueError):
        LabeledDataset(m, np.array([1.0, np.inf, 0.0, 0.0, 0.0, 0.0]))


LIBSVM_TEXT = """\
1 1:0.5 3:-1.25
-1 2:2
1 1:1e-3 2:0.25 3:3.5
"""


def test_load_libsvm_feature_orientation(tmp_path):
    path = tmp_path / "toy.libsvm"
    path.write_text(LIBSVM_TEXT)
    ds = load_libsvm(path)
    assert ds.orientation == COORDINATES_ARE_FEATURES
    assert ds.matrix.n_rows == 3 and ds.matrix.n_cols == 3
    np.testing.assert_array_equal(ds.labels, [1.0, -1.0, 1.0])
    expected = np.array([
        [0.5, 0.0, -1.25],
        [0.0, 2.0, 0.0],
        [1e-3, 0.25, 3.5],
    ])
    np.testing.assert_array_equal(ds.matrix.to_dense(), expected)


def test_load_libsvm_example_orientation(tmp_path):
    path = tmp_path / "toy.libsvm"
    path.write_text(LIBSVM_TEXT)
    ds = load_libsvm(path, orientation=COORDINATES_ARE_EXAMPLES)
    # transposed: columns are examples, labels stay per example (per column)
    assert ds.matrix.n_rows == 3 and ds.matrix.n_cols == 3
    np.testing.assert_array_equal(ds.labels, [1.0, -1.0, 1.0])
    feat = load_libsvm(path)
    np.testing.assert_array_equal(ds.matrix.to_dense(), feat.matrix.to_dense().T)


def test_load_libsvm_feature_padding(tmp_path):
    path = tmp_path / "toy.libsvm"
    path.write_text("1 1:2\n")
    ds = load_libsvm(path, n_features=5)
    assert ds.matrix.n_cols == 5
    assert ds.matrix.nnz() == 1


@pytest.mark.parametrize("text,fragment", [
    ("x 1:1\n", "bad label"),
    ("1 0:1\n", "not 1-based"),
    ("1 2:1 1:2\n", "not ascending"),
    ("1 2:1 2:2\n", "not ascending"),
    ("1 1:abc\n", "bad entry"),
    ("1 12\n", "bad entry"),
    ("", "empty dataset"),
])
def test_load_libsvm_rejects(tmp_path, text, fragment):
    path = tmp_path / "bad.libsvm"
    path.write_text(text)
    with pytest.raises(ValueError, match=fragment):
        load_libsvm(path)


def test_libsvm_roundtrip_exact(tmp_path):
    ds = generate_synthetic_sparse(40, 12, 0.35, seed=5)
    path = tmp_path / "rt.libsvm"
    save_libsvm(ds, path)
    back = load_libsvm(path, n_features=12)
    np.testing.assert_array_equal(back.labels, ds.labels)
    # %.17g rendering makes the float64 payload survive the text round trip
    np.testing.assert_array_equal(back.matrix.to_dense(), ds.matrix.to_dense())


def test_generate_dense():
    ds = generate_synthetic_dense(200, 30, seed=1)
    a = ds.matrix.to_dense()
    assert a.shape == (200, 30)
    assert a.min() >= 0.0 and a.max() < 1.0
    assert set(np.unique(ds.labels)) <= {-1.0, 1.0}
    again = generate_synthetic_dense(200, 30, seed=1)
    np.testing.assert_array_equal(a, again.matrix.to_dense())
    other = generate_synthetic_dense(200, 30, seed=2)
    assert not np.array_equal(a, other.matrix.to_dense())


def test_generate_sparse_density():
    n, p, dens = 500, 40, 0.1
    ds = generate_synthetic_sparse(n, p, dens, seed=9)
    total = n * p
    nnz = ds.matrix.nnz()
    sigma = np.sqrt(total * dens * (1 - dens))
    assert abs(nnz - total * dens) < 5 * sigma
    again = generate_synthetic_sparse(n, p, dens, seed=9)
    np.testing.assert_array_equal(ds.matrix.to_dense(), again.matrix.to_dense())
    with pytest.raises(ValueError):
        generate_synthetic_sparse(10, 10, 0.0, seed=0)


@pytest.mark.parametrize("make", [random_dense, random_sparse])
def test_spectral_constant_against_eigh(make):
    m = make(30, 20, seed=8)
    a = m.to_dense()
    exact = float(np.linalg.eigvalsh(a.T @ a).max())
    stats = compute_stats(m)
    assert stats.c_A == pytest.approx(exact, rel=1e-6)
    np.testing.assert_allclose(
        stats.column_sq_norms, (a * a).sum(axis=0), rtol=1e-12)
    assert stats.max_col_sq_norm == stats.column_sq_norms.max()


def test_spectral_constant_zero_matrix():
    m = ColumnMatrix(4, 3, dense=np.zeros((4, 3)))
    assert compute_stats(m).c_A == 0.0


def test_spectral_constant_rank_one():
    # a rank-one matrix has c_A = ||u||^2 ||w||^2 exactly
    u = np.arange(1.0, 6.0)
    w = np.array([2.0, -1.0, 0.5])
    m = ColumnMatrix(5, 3, dense=np.outer(u, w))
    expected = float((u @ u) * (w @ w))
    assert compute_stats(m).c_A == pytest.approx(expected, rel=1e-9)
