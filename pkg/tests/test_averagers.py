import itertools

import numpy as np
import pytest

from conftest import random_design
from nestavg.averagers import fit_jma, fit_mma, jma_criterion, mma_criterion
from nestavg.selectors import fit_cache, scores


def _simplex_points(M, k):
    for c in itertools.product(range(k + 1), repeat=M):
        if sum(c) == k:
            yield np.array(c) / k


def _direct_mma(cache, w):
    r = cache.y - cache.fitted @ w
    return r @ r + 2 * cache.sigma2_hat * cache.nu @ w


def _direct_jma(cache, w):
    Yt = cache.y[:, None] - cache.loo_resid
    r = cache.y - Yt @ w
    return r @ r


@pytest.fixture
def problem(rng):
    d = random_design(rng, n=50, sizes=(1, 2, 2))
    y = d.X @ np.array([2.0, 1.0, 0.5, 0.3, 0.1]) + rng.standard_normal(d.n)
    return d, y, fit_cache(y, d, d.q)


def test_criteria_match_direct_formulas(problem, rng):
    d, y, cache = problem
    mma, jma = mma_criterion(cache), jma_criterion(cache)
    for w in rng.dirichlet(np.ones(d.q), 10):
        assert mma.value(w) == pytest.approx(_direct_mma(cache, w), rel=1e-10)
        assert jma.value(w) == pytest.approx(_direct_jma(cache, w), rel=1e-10)


def test_mma_at_vertices_is_cp(problem):
    d, y, cache = problem
    crit = mma_criterion(cache)
    vertex = [crit.value(e) for e in np.eye(d.q)]
    np.testing.assert_allclose(vertex, scores(cache, "cp"), rtol=1e-10)


def test_weights_beat_grid_search(problem):
    d, y, cache = problem
    pts = list(_simplex_points(d.q, 200))
    mma = fit_mma(y, d, d.q, cache=cache)
    assert mma.criterion_value <= min(_direct_mma(cache, w) for w in pts) + 1e-9
    jma = fit_jma(y, d, d.q, cache=cache)
    assert jma.criterion_value <= min(_direct_jma(cache, w) for w in pts) + 1e-9
    np.testing.assert_allclose(mma.mu_hat, cache.fitted @ mma.w)


def test_box_jackknife_is_no_worse(rng):
    for _ in range(20):
        d = random_design(rng, n=40)
        y = d.X @ rng.standard_normal(d.p) + rng.standard_normal(d.n)
        a = fit_jma(y, d, d.q)
        b = fit_jma(y, d, d.q, weight_set="box")
        assert b.criterion_value <= a.criterion_value + 1e-9 * abs(a.criterion_value)
        assert np.all((b.w >= 0) & (b.w <= 1))


def test_noiseless_mma_puts_mass_on_true_model(rng):
    d = random_design(rng, n=60, sizes=(2, 2, 2))
    y = d.X[:, :4] @ np.array([1.0, -1.0, 2.0, 0.5])
    # sigma2_hat = 0, so the criterion is the residual norm and any mass on model 1 costs
    fit = fit_mma(y, d, d.q)
    assert fit.w[0] == pytest.approx(0.0, abs=1e-8)
    np.testing.assert_allclose(fit.mu_hat, y, atol=1e-8)


def test_unknown_weight_set(problem):
    d, y, cache = problem
    with pytest.raises(ValueError):
        fit_jma(y, d, d.q, weight_set="grid")
