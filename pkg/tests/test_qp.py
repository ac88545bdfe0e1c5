import itertools

import numpy as np
import pytest

from nestavg.errors import DimensionMismatch, InvalidN, NotPsd, TooLargeGrid
from nestavg.qp import QpProblem, grid_size, kkt_residual, solve


def _random_psd(rng, M, rank=None):
    A = rng.standard_normal((rank or M, M))
    return A.T @ A


def _simplex_grid(M, step):
    k = int(round(1 / step))
    for c in itertools.combinations(range(k + M - 1), M - 1):
        parts = np.diff((-1,) + c + (k + M - 1,)) - 1
        yield parts / k


def test_worked_examples():
    # identity Hessian, linear term pulls toward coordinate 1
    res = solve(QpProblem(np.eye(2), [-0.5, 0.0]))
    np.testing.assert_allclose(res.w, [0.75, 0.25], atol=1e-12)
    res = solve(QpProblem(np.eye(3), [0.0, 0.0, 0.0]))
    np.testing.assert_allclose(res.w, np.full(3, 1 / 3), atol=1e-12)
    # vertex solution
    res = solve(QpProblem(np.eye(2), [-5.0, 0.0]))
    np.testing.assert_allclose(res.w, [1.0, 0.0], atol=1e-12)


def test_simplex_against_dense_grid_search(rng):
    pts = np.array(list(_simplex_grid(3, 2e-3)))
    for _ in range(10):
        H = _random_psd(rng, 3)
        g = rng.standard_normal(3)
        res = solve(QpProblem(H, g))
        vals = 0.5 * np.einsum("ij,jk,ik->i", pts, H, pts) + pts @ g
        assert res.objective <= vals.min() + 1e-12
        assert vals.min() - res.objective < 1e-4
        assert res.kkt_residual < 1e-8


@pytest.mark.parametrize("M", [2, 5, 12, 40])
def test_box_and_simplex_kkt(rng, M):
    for fs in ("simplex", "box"):
        H = _random_psd(rng, M, rank=max(1, M // 2))
        g = 3 * rng.standard_normal(M)
        res = solve(QpProblem(H, g, fs))
        assert np.all(res.w >= 0) and np.all(res.w <= 1)
        if fs == "simplex":
            assert res.w.sum() == pytest.approx(1.0, abs=1e-12)
        assert kkt_residual(H, g, res.w, fs) < 1e-7


def test_diagonal_box_closed_form(rng):
    for _ in range(20):
        d = rng.uniform(0.1, 3.0, 6)
        g = rng.uniform(-4, 2, 6)
        res = solve(QpProblem(np.diag(d), g, "box"))
        np.testing.assert_allclose(res.w, np.clip(-g / d, 0, 1), atol=1e-10)


def test_frank_wolfe_path_matches_active_set(rng):
    M = 210
    d = rng.uniform(0.5, 2.0, M)
    g = -rng.uniform(0.0, 1.0, M)
    res = solve(QpProblem(np.diag(d), g, "box"))
    assert res.method == "frank-wolfe"
    assert res.kkt_residual < 1e-8
    np.testing.assert_allclose(res.w, np.clip(-g / d, 0, 1), atol=1e-10)


def test_grid_enumeration_is_exhaustive(rng):
    H = _random_psd(rng, 4)
    g = rng.standard_normal(4)
    prob = QpProblem(H, g, "grid", 5)
    res = solve(prob)
    assert res.method == "enumeration" and res.iterations == grid_size(5, 4) == 56
    best = min(prob.objective(w) for w in _simplex_grid(4, 1 / 5))
    assert res.objective == pytest.approx(best, abs=1e-12)
    np.testing.assert_allclose(res.w * 5, np.round(res.w * 5), atol=1e-12)


def test_grid_ties_pick_lexicographically_smallest():
    res = solve(QpProblem(np.zeros((3, 3)), np.zeros(3), "grid", 2))
    np.testing.assert_array_equal(res.w, [0.0, 0.0, 1.0])


def test_grid_budget():
    prob = QpProblem(np.eye(30), np.zeros(30), "grid", 10)
    with pytest.raises(TooLargeGrid):
        solve(prob, allow_heuristic=False)
    res = solve(prob)
    assert res.heuristic and res.w.sum() == pytest.approx(1.0)


def test_errors():
    with pytest.raises(NotPsd):
        solve(QpProblem(np.diag([1.0, -1.0]), np.zeros(2)))
    with pytest.raises(DimensionMismatch):
        QpProblem(np.eye(2), np.zeros(3))
    with pytest.raises(InvalidN):
        QpProblem(np.eye(2), np.zeros(2), "grid", 0)


def test_deterministic(rng):
    H = _random_psd(rng, 8, rank=3)
    g = rng.standard_normal(8)
    a, b = solve(QpProblem(H, g)), solve(QpProblem(H.copy(), g.copy()))
    np.testing.assert_array_equal(a.w, b.w)


def test_large_simplex_reaches_kkt(rng):
    M = 230
    A = rng.standard_normal((40, M))
    H = A.T @ A + np.diag(rng.uniform(0.1, 1.0, M))
    g = rng.standard_normal(M)
    res = solve(QpProblem(H, g, "simplex"))
    assert res.method == "frank-wolfe"
    assert res.kkt_residual < 1e-8
