import numpy as np
import pytest

from conftest import dense_projection, random_design
from nestavg.design import build, group_sums, load_csv, project, project_increment, quad_form_increments
from nestavg.errors import DimensionMismatch, IndexOutOfRange, RankDeficient


def test_increments_match_dense_hat_matrices(rng):
    d = random_design(rng)
    v = rng.standard_normal(d.n)
    prev = np.zeros((d.n, d.n))
    for m in range(1, d.q + 1):
        P = dense_projection(d.X[:, : d.nu[m - 1]])
        np.testing.assert_allclose(project(d, m, v), P @ v, atol=1e-10)
        np.testing.assert_allclose(project_increment(d, m, v), (P - prev) @ v, atol=1e-10)
        prev = P


def test_increments_are_mutually_orthogonal_projections(rng):
    d = random_design(rng)
    blocks = d.Q_blocks
    for a, A in enumerate(blocks):
        for b, B in enumerate(blocks):
            G = A.T @ B
            expected = np.eye(A.shape[1]) if a == b else np.zeros_like(G)
            np.testing.assert_allclose(G, expected, atol=1e-12)


def test_quad_form_increments_sum_to_projection_norm(rng):
    d = random_design(rng)
    mu = rng.standard_normal(d.n)
    inc = quad_form_increments(d, mu)
    P = dense_projection(d.X)
    assert inc.shape == (d.q,)
    assert np.all(inc >= 0)
    np.testing.assert_allclose(inc.sum(), mu @ P @ mu, rtol=1e-12)


def test_project_zero_and_bounds(rng):
    d = random_design(rng)
    v = rng.standard_normal(d.n)
    np.testing.assert_array_equal(project(d, 0, v), np.zeros(d.n))
    with pytest.raises(IndexOutOfRange):
        project_increment(d, d.q + 1, v)
    with pytest.raises(IndexOutOfRange):
        project_increment(d, 0, v)


def test_duplicate_column_is_rank_deficient():
    x = np.array([1.0, 1.0]) / np.sqrt(2)
    with pytest.raises(RankDeficient) as info:
        build(np.column_stack([x, x]), [1, 2])
    assert info.value.group == 2


def test_dependent_later_group_reported(rng):
    X = rng.standard_normal((30, 4))
    X = np.column_stack([X, X[:, 0] - 2 * X[:, 3]])
    with pytest.raises(RankDeficient) as info:
        build(X, [2, 4, 5])
    assert info.value.group == 3


@pytest.mark.parametrize("nu", [[2, 2, 5], [0, 5], [2, 4]])
def test_bad_boundaries(rng, nu):
    with pytest.raises(DimensionMismatch):
        build(rng.standard_normal((10, 5)), nu)


def test_too_many_columns(rng):
    with pytest.raises(DimensionMismatch):
        build(rng.standard_normal((4, 6)), [3, 6])


def test_design_is_read_only(rng):
    d = random_design(rng)
    with pytest.raises(ValueError):
        d.Q[0, 0] = 1.0


def test_truncate_keeps_leading_groups(rng):
    d = random_design(rng)
    t = d.truncate(2)
    assert t.q == 2 and t.p == d.nu[1]
    np.testing.assert_array_equal(t.Q, d.Q[:, : d.nu[1]])


def test_group_sums_and_csv_roundtrip(rng, tmp_path):
    d = random_design(rng)
    np.testing.assert_allclose(group_sums(d, np.ones(d.p)), d.group_sizes)
    path = tmp_path / "x.csv"
    np.savetxt(path, d.X, delimiter=",", header="a,b,c,d,e,f,g,h", comments="")
    np.testing.assert_allclose(load_csv(path), d.X)
