import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kgarrote.data import (
    Dataset,
    DistanceStack,
    build_distance_stack,
    load_dataset,
    standardize_columns,
    standardize_dataset,
)
from kgarrote.errors import DataError

from conftest import seeded_rng


def random_dataset(seed, n, p):
    rng = seeded_rng(700, seed)
    X = rng.standard_normal((n, p))
    y = rng.standard_normal(n)
    return standardize_dataset(y, X)


def test_standardize_simple_column():
    Xs, means, scales = standardize_columns(np.array([[1.0], [2.0], [3.0]]))
    root2 = np.sqrt(2.0)
    assert np.allclose(Xs[:, 0], [-1.0 / root2, 0.0, 1.0 / root2])
    assert means[0] == 2.0
    assert np.isclose(scales[0], root2)


def test_standardized_columns_are_centered_unit_norm():
    rng = seeded_rng(701)
    Xs, _, _ = standardize_columns(rng.uniform(-5.0, 5.0, size=(40, 7)))
    assert np.allclose(Xs.sum(axis=0), 0.0, atol=1e-10)
    assert np.allclose((Xs * Xs).sum(axis=0), 1.0, atol=1e-10)


def test_constant_column_rejected():
    X = np.column_stack([np.ones(5), np.arange(5.0)])
    with pytest.raises(DataError, match="constant"):
        standardize_columns(X)


def test_constant_response_rejected():
    rng = seeded_rng(702)
    with pytest.raises(DataError):
        standardize_dataset(np.full(6, 5.0), rng.standard_normal((6, 2)))


def test_round_trip_recovers_input():
    rng = seeded_rng(703)
    X = rng.uniform(-3.0, 9.0, size=(25, 4))
    y = rng.standard_normal(25) * 4.0 + 2.0
    ds = standardize_dataset(y, X)
    y_back, X_back = ds.original()
    assert np.allclose(X_back, X, rtol=1e-9)
    assert np.allclose(y_back, y, rtol=1e-9)


def test_validate_catches_tampering():
    ds = random_dataset(1, 12, 3)
    ds.validate()
    bad = Dataset(ds.y + 1.0, ds.X, ds.standardization, ds.column_names)
    with pytest.raises(DataError):
        bad.validate()


def test_select_predictors_keeps_columns_and_names():
    rng = seeded_rng(700, 2)
    ds = standardize_dataset(
        rng.standard_normal(15), rng.standard_normal((15, 5)), ("a", "b", "c", "d", "e")
    )
    sub = ds.select_predictors([4, 1])
    assert sub.p == 2
    assert np.allclose(sub.X[:, 0], ds.X[:, 4])
    assert sub.column_names == ("e", "b")


def test_load_dataset_by_name_and_index(tmp_path):
    f = tmp_path / "toy.csv"
    f.write_text("y,a,b\n1.0,2.0,0.5\n2.0,4.0,0.25\n3.0,6.0,0.125\n")
    ds = load_dataset(f, "y")
    assert (ds.n, ds.p) == (3, 2)
    assert ds.column_names == ("a", "b")
    ds_ix = load_dataset(f, 0)
    assert np.allclose(ds_ix.y, ds.y)


def test_load_dataset_reports_bad_cell_position(tmp_path):
    f = tmp_path / "bad.csv"
    f.write_text("y,a\n1.0,2.0\n3.0,oops\n4.0,5.0\n")
    with pytest.raises(DataError, match="row 3.*'a'"):
        load_dataset(f, "y")


def test_load_dataset_missing_cell_is_error(tmp_path):
    f = tmp_path / "gap.csv"
    f.write_text("y,a,b\n1.0,2.0,3.0\n4.0,,6.0\n7.0,8.0,9.0\n")
    with pytest.raises(DataError):
        load_dataset(f, "y")


def test_load_dataset_missing_file_is_data_error(tmp_path):
    with pytest.raises(DataError, match="cannot read"):
        load_dataset(tmp_path / "nope.csv", "y")


def test_load_dataset_unknown_response(tmp_path):
    f = tmp_path / "t.csv"
    f.write_text("y,a\n1,2\n3,4\n5,6\n")
    with pytest.raises(DataError, match="response column"):
        load_dataset(f, "z")


def test_gaussian_stack_small_example():
    # column (1,2,3) standardizes to (-1/r2, 0, 1/r2); the squared gap
    # between the extremes is 2
    ds = standardize_dataset(np.array([1.0, -2.0, 1.0]), np.array([[1.0], [2.0], [3.0]]))
    stack = build_distance_stack(ds, "gaussian")
    D = stack.matrix(0)
    assert np.allclose(np.diag(D), 0.0)
    assert np.isclose(D[0, 2], -2.0)
    assert np.allclose(D, D.T)


def test_linear_stack_trace_one():
    ds = standardize_dataset(np.array([1.0, -2.0, 1.0]), np.array([[1.0], [2.0], [3.0]]))
    stack = build_distance_stack(ds, "linear-polynomial")
    D = stack.matrix(0)
    assert np.isclose(np.trace(D), 1.0)
    assert np.linalg.matrix_rank(D) == 1


def test_gaussian_absolute_mass_identity():
    # on a centered unit-norm column the total absolute mass of the
    # squared-difference matrix is exactly 2n
    ds = random_dataset(3, 30, 4)
    stack = build_distance_stack(ds, "gaussian")
    for j in range(4):
        total = np.abs(stack.matrix(j)).sum() / ds.n
        assert np.isclose(total, 2.0, atol=1e-10)


def test_gaussian_stack_sum_matches_pairwise_distances():
    ds = random_dataset(4, 18, 5)
    stack = build_distance_stack(ds, "gaussian")
    total = sum(stack.matrix(j) for j in range(ds.p))
    # oracle: direct pairwise computation, no stack involved
    for k in range(ds.n):
        for l in range(ds.n):
            gap = ds.X[k] - ds.X[l]
            assert np.isclose(total[k, l], -(gap @ gap), atol=1e-12)


@pytest.mark.parametrize("kind", ["gaussian", "linear-polynomial"])
def test_weighted_sum_matches_explicit_sum(kind):
    ds = random_dataset(5, 22, 6)
    stack = build_distance_stack(ds, kind)
    rng = seeded_rng(704)
    for _ in range(5):
        w = rng.uniform(0.0, 3.0, size=6)
        explicit = sum(w[j] * stack.matrix(j) for j in range(6))
        assert np.allclose(stack.weighted_sum(w), explicit, atol=1e-12)


def test_unknown_kind_rejected():
    ds = random_dataset(6, 10, 2)
    with pytest.raises(DataError):
        build_distance_stack(ds, "cubic")


@settings(max_examples=100, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    n=st.integers(3, 50),
    p=st.integers(1, 10),
)
def test_stack_invariants_random_data(seed, n, p):
    rng = np.random.default_rng(seed)
    ds = standardize_dataset(rng.standard_normal(n), rng.standard_normal((n, p)))
    gaussian = build_distance_stack(ds, "gaussian")
    linear = build_distance_stack(ds, "linear-polynomial")
    for j in range(p):
        D = gaussian.matrix(j)
        assert np.all(D <= 0.0)
        assert np.allclose(np.diag(D), 0.0)
        assert np.array_equal(D, D.T)
        assert np.isclose(np.abs(D).sum(), 2.0 * n, rtol=1e-10)
        L = linear.matrix(j)
        assert np.allclose(L, np.outer(ds.X[:, j], ds.X[:, j]), atol=1e-12)
        assert np.isclose(np.trace(L), 1.0, atol=1e-10)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_standardize_round_trip_property(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 40))
    p = int(rng.integers(1, 8))
    X = rng.uniform(-10.0, 10.0, size=(n, p)) * rng.uniform(0.1, 100.0)
    y = rng.standard_normal(n) + rng.uniform(-5.0, 5.0)
    try:
        ds = standardize_dataset(y, X)
    except DataError:
        return  # degenerate draw (constant response is possible at n=2)
    y_back, X_back = ds.original()
    assert np.allclose(X_back, X, rtol=1e-9, atol=1e-12)
    assert np.allclose(y_back, y, rtol=1e-9, atol=1e-12)
    ds.validate()
