"""Data-driven averaging weights: Mallows (MMA) and jackknife (JMA, JMA2).

Both criteria are convex quadratics in ``w`` and are handed to
:func:`nestavg.qp.solve`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qp
from .design import NestedDesign
from .oracle import WeightVector
from .selectors import FitCache, fit_cache


@dataclass(frozen=True, eq=False)
class MaCriterion:
    method: str
    weight_set: str
    H: np.ndarray
    g: np.ndarray
    const: float
    sigma2_hat: float | None = None

    def value(self, w) -> float:
        w = np.asarray(w, dtype=float)
        return float(0.5 * w @ self.H @ w + self.g @ w + self.const)


@dataclass(frozen=True, eq=False)
class MaFit:
    weights: WeightVector
    criterion_value: float
    mu_hat: np.ndarray
    criterion: MaCriterion

    @property
    def w(self) -> np.ndarray:
        return self.weights.w


def mma_criterion(cache: FitCache) -> MaCriterion:
    """``||y - F w||^2 + 2 s2 nu^T w`` with ``F`` the stacked fits.

    Nesting gives ``F^T F = S_{min(m, l)}`` and ``F^T y = S`` with
    ``S_m = ||P_m y||^2``, so the Gram matrix is never formed from ``F``.
    """
    S = cache.coef_sq
    idx = np.arange(cache.M)
    G = S[np.minimum.outer(idx, idx)]
    s2 = cache.sigma2_hat
    H = 2.0 * G
    g = -2.0 * S + 2.0 * s2 * cache.nu.astype(float)
    return MaCriterion("mma", "simplex", H, g, float(cache.y @ cache.y), s2)


def jma_criterion(cache: FitCache, weight_set: str = "simplex") -> MaCriterion:
    """``||y - Yt w||^2`` where column ``m`` of ``Yt`` holds leave-one-out predictions."""
    Yt = cache.y[:, None] - cache.loo_resid
    H = 2.0 * Yt.T @ Yt
    g = -2.0 * Yt.T @ cache.y
    return MaCriterion("jma", weight_set, H, g, float(cache.y @ cache.y))


def _fit(crit: MaCriterion, cache: FitCache) -> MaFit:
    res = qp.solve(qp.QpProblem(crit.H, crit.g, crit.weight_set))
    w = WeightVector(res.w, crit.weight_set)
    return MaFit(w, crit.value(w.w), cache.fitted @ w.w, crit)


def fit_mma(y, d: NestedDesign, M: int, cache: FitCache | None = None) -> MaFit:
    if cache is None:
        cache = fit_cache(y, d, M, loo=False)
    return _fit(mma_criterion(cache), cache)


def fit_jma(y, d: NestedDesign, M: int, weight_set: str = "simplex", cache: FitCache | None = None) -> MaFit:
    """Jackknife weights; ``weight_set='box'`` drops the sum-to-one constraint (JMA2)."""
    if weight_set not in ("simplex", "box"):
        raise ValueError(f"weight_set must be 'simplex' or 'box', got {weight_set!r}")
    if cache is None or cache.loo_resid is None:
        cache = fit_cache(y, d, M, loo=True)
    return _fit(jma_criterion(cache, weight_set), cache)
