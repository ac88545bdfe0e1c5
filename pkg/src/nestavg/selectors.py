"""Model-selection criteria over nested candidates: AIC, BIC, Mallows Cp, LOO-CV."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .design import NestedDesign
from .errors import DimensionMismatch, IndexOutOfRange, LeverageOne

CRITERIA = ("aic", "bic", "cp", "loocv")
LEVERAGE_TOL = 1e-12
# relative floor on residual sums so that exact fits tie and the penalty decides
RSS_FLOOR = 1e-20


@dataclass(frozen=True, eq=False)
class FitCache:
    """Fits of the first ``M`` nested models to one response vector.

    Attributes
    ----------
    fitted : (n, M) array, column ``m`` is ``P_m y``.
    resid : (n, M) array, ``y - P_m y``.
    rss : (M,) residual sums of squares.
    nu : (M,) column counts of the candidates.
    lev : (n, M) leverages ``diag(P_m)``, or None when not requested.
    loo_resid : (n, M) leave-one-out residuals ``e / (1 - h)``, or None.
    """

    y: np.ndarray
    fitted: np.ndarray
    resid: np.ndarray
    rss: np.ndarray
    nu: np.ndarray
    coef_sq: np.ndarray
    lev: np.ndarray | None = None
    loo_resid: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def M(self) -> int:
        return self.nu.size

    @property
    def cv(self) -> np.ndarray:
        if self.loo_resid is None:
            raise ValueError("cache was built without leave-one-out quantities")
        return np.sum(self.loo_resid**2, axis=0)

    @property
    def sigma2_hat(self) -> float:
        """Residual variance of the largest candidate."""
        return float(self.rss[-1] / (self.n - self.nu[-1]))


def fit_cache(y, d: NestedDesign, M: int, loo: bool = True) -> FitCache:
    y = np.asarray(y, dtype=float).ravel()
    if y.size != d.n:
        raise DimensionMismatch(f"y has length {y.size}, design has {d.n} rows")
    if not 1 <= M <= d.q:
        raise IndexOutOfRange(f"M={M} outside 1..{d.q}")
    p = int(d.nu[M - 1])
    Q = d.Q[:, :p]
    c = Q.T @ y
    fitted = np.empty((d.n, M))
    acc = np.zeros(d.n)
    lo = 0
    for m in range(M):
        hi = int(d.nu[m])
        acc = acc + Q[:, lo:hi] @ c[lo:hi]
        fitted[:, m] = acc
        lo = hi
    resid = y[:, None] - fitted
    rss = np.sum(resid**2, axis=0)
    # cumulative squared coordinates, S_m = ||P_m y||^2
    coef_sq = np.cumsum(c**2)[d.nu[:M] - 1]
    lev = loo_resid = None
    if loo:
        lev = np.cumsum(Q**2, axis=1)[:, d.nu[:M] - 1]
        if np.any(lev >= 1 - LEVERAGE_TOL):
            i, m = np.unravel_index(int(np.argmax(lev)), lev.shape)
            raise LeverageOne(f"observation {i} has leverage {lev[i, m]:.15f} in model {m + 1}")
        loo_resid = resid / (1 - lev)
    return FitCache(y, fitted, resid, rss, np.asarray(d.nu[:M]), coef_sq, lev, loo_resid)


@dataclass(frozen=True)
class Selection:
    m_hat: int
    scores: np.ndarray
    criterion: str


def scores(cache: FitCache, criterion: str) -> np.ndarray:
    n = cache.n
    nu = cache.nu.astype(float)
    floor = RSS_FLOOR * float(cache.y @ cache.y)
    rss = np.maximum(cache.rss, floor)
    if criterion == "aic":
        return n * np.log(rss / n) + 2 * nu
    if criterion == "bic":
        return n * np.log(rss / n) + np.log(n) * nu
    if criterion == "cp":
        s2 = rss[-1] / (n - nu[-1])
        return rss + 2 * s2 * nu
    if criterion == "loocv":
        return np.maximum(cache.cv, floor)
    raise ValueError(f"unknown criterion {criterion!r}; expected one of {CRITERIA}")


def select(y, d: NestedDesign, M: int, criterion: str, cache: FitCache | None = None) -> Selection:
    """Pick the candidate minimizing ``criterion``; the smallest index wins ties."""
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}; expected one of {CRITERIA}")
    if cache is None:
        cache = fit_cache(y, d, M, loo=criterion == "loocv")
    s = scores(cache, criterion)
    return Selection(int(np.argmin(s)) + 1, s, criterion)
