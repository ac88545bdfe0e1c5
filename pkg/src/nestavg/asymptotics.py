"""Limiting oracle risks for algebraic and exponential coefficient decay.

Two coefficient families on an orthonormal design with noise ``sigma2``:

* algebraic, ``beta_m = m**-alpha`` (``alpha > 1/2``), optimal size
  ``m** ~ (n / sigma2)**(1 / (2 alpha))``
* exponential, ``beta_m = exp(-c m)`` (``c > 0``), ``m** ~ log(n / sigma2) / (2 c)``

``kappa`` is the limit of ``M_n / m**``.  ``kappa = math.inf`` selects the
exact infinite-ratio formulas (terms in ``kappa**(1 - 2 alpha)`` vanish and
``i*_N = 0``); it is not approximated by a large float.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import zeta

from .errors import DomainError, KindMismatch, RegimeUndetermined, TooShort

_CF_EPS = 1e-16
_CF_TINY = 1e-300
_CF_MAXIT = 10000


def _betacf(x: float, a: float, b: float) -> float:
    """Continued fraction for the incomplete beta, modified Lentz evaluation."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = _CF_TINY if abs(d) < _CF_TINY else d
        c = 1.0 + aa / c
        c = _CF_TINY if abs(c) < _CF_TINY else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = _CF_TINY if abs(d) < _CF_TINY else d
        c = 1.0 + aa / c
        c = _CF_TINY if abs(c) < _CF_TINY else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise RuntimeError(f"incomplete beta continued fraction did not converge (x={x}, a={a}, b={b})")


def complete_beta(a: float, b: float) -> float:
    return math.exp(math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))


def inc_beta(x: float, a: float, b: float) -> float:
    """Non-regularized incomplete beta ``int_0^x t**(a-1) (1-t)**(b-1) dt``."""
    if not (a > 0 and b > 0):
        raise DomainError(f"need a, b > 0, got a={a}, b={b}")
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"need 0 <= x <= 1, got {x}")
    if x == 0.0:
        return 0.0
    full = complete_beta(a, b)
    if x == 1.0:
        return full
    if x < (a + 1.0) / (a + b + 2.0):
        front = math.exp(a * math.log(x) + b * math.log1p(-x))
        return front * _betacf(x, a, b) / a
    # symmetry B(x; a, b) = B(a, b) - B(1 - x; b, a) where the fraction converges fast
    front = math.exp(b * math.log1p(-x) + a * math.log(x))
    return full - front * _betacf(1.0 - x, b, a) / b


@dataclass(frozen=True)
class DecayModel:
    """Coefficient decay family with its candidate-count ratio and grid size.

    ``rate`` is ``alpha`` for the algebraic family and ``c`` for the
    exponential family.
    """

    kind: str
    rate: float
    sigma2: float = 1.0
    kappa: float = 1.0
    N: int = 1

    def __post_init__(self):
        if self.kind not in ("algebraic", "exponential"):
            raise DomainError(f"unknown decay kind {self.kind!r}")
        if self.kind == "algebraic" and not self.rate > 0.5:
            raise DomainError(f"algebraic decay needs alpha > 1/2, got {self.rate}")
        if self.kind == "exponential" and not self.rate > 0:
            raise DomainError(f"exponential decay needs c > 0, got {self.rate}")
        if not self.kappa > 0:
            raise DomainError(f"kappa must be positive, got {self.kappa}")
        if not self.sigma2 > 0:
            raise DomainError("sigma2 must be positive")
        if int(self.N) != self.N or self.N < 1:
            raise DomainError(f"N must be a positive integer, got {self.N}")

    def m_star_star(self, n: float) -> float:
        if self.kind == "algebraic":
            return (n / self.sigma2) ** (1.0 / (2.0 * self.rate))
        return math.log(n / self.sigma2) / (2.0 * self.rate)

    def theta(self, m) -> np.ndarray:
        m = np.asarray(m, dtype=float)
        if self.kind == "algebraic":
            return m ** (-2.0 * self.rate) / self.sigma2
        return np.exp(-2.0 * self.rate * m) / self.sigma2


def i_star(N: int, alpha: float, kappa: float) -> int:
    if math.isinf(kappa):
        return 0
    return math.ceil(N / (1.0 + kappa ** (2.0 * alpha)) - 0.5)


def psi_star(N: int, alpha: float, kappa: float) -> float:
    """Limit of the normalized grid-risk term for grid resolution ``N``."""
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    if not alpha > 0.5:
        raise DomainError(f"alpha must exceed 1/2, got {alpha}")
    a = 1.0 / (2.0 * alpha)
    i0 = i_star(N, alpha, kappa)
    z = (2.0 * np.arange(i0, N) + 1.0) / (2.0 * N)
    total = (2.0 / N) * float(np.sum(z ** (1.0 - a) * (1.0 - z) ** a))
    if not math.isinf(kappa):
        total += (2 * alpha - 1) / (2 * alpha) * (i0 / N) ** 2 * kappa
        total -= a * (1.0 - i0 / N) ** 2 * kappa ** (1.0 - 2.0 * alpha)
    return total


def psi_limit(alpha: float, kappa: float) -> float:
    """``lim_{N -> inf} psi_star``, written with the incomplete beta."""
    a = 1.0 / (2.0 * alpha)
    lo = 0.0 if math.isinf(kappa) else 1.0 / (1.0 + kappa ** (2.0 * alpha))
    return (2 * alpha - 1) / (4 * alpha**2) * (math.pi / math.sin(math.pi * a) - inc_beta(lo, 1.0 - a, a))


def _kappa_term(alpha: float, kappa: float) -> float:
    return 0.0 if math.isinf(kappa) else kappa ** (1.0 - 2.0 * alpha) / (2.0 * alpha)


def limit_ratio(model: DecayModel) -> float:
    """Limiting ratio of the simplex-optimal risk to the grid-optimal risk."""
    if model.kind == "exponential":
        raise KindMismatch("the ratio tends to 1 under exponential decay; no curve to evaluate")
    alpha, kappa = model.rate, model.kappa
    t = _kappa_term(alpha, kappa)
    return (psi_limit(alpha, kappa) + t) / (psi_star(model.N, alpha, kappa) + t)


def limit_ratio_at_infinity(alpha: float, kappa: float) -> float:
    """The ``N -> inf`` endpoint of :func:`limit_ratio` (identically 1)."""
    t = _kappa_term(alpha, kappa)
    return (psi_limit(alpha, kappa) + t) / (psi_limit(alpha, kappa) + t)


def grid_gap_lower_bound(alpha: float, sigma2: float, n: float, N: int, c_low: float) -> float:
    """Lower bound on the grid-minus-simplex oracle risk when ``M_n >= c_low m**``."""
    varpi = min(c_low, (2 * N - 1) ** (-1.0 / (2 * alpha)))
    return varpi * sigma2 / (2 ** (2 * alpha + 1) * varpi ** (-2 * alpha) + 2) * (n / sigma2) ** (1 / (2 * alpha))


@dataclass(frozen=True)
class MRule:
    """How the candidate count grows with ``n``.

    kind
        ``fixed`` (``M`` constant), ``ratio`` (``M = kappa m**``, kappa may be
        inf), ``power`` (``M = coef * n**exp``) or ``log`` (``M = coef * log n``).
    """

    kind: str
    value: float = 1.0
    exp: float = 0.0

    @classmethod
    def parse(cls, spec) -> "MRule":
        if isinstance(spec, MRule):
            return spec
        if isinstance(spec, dict):
            kind = spec.get("kind")
            if kind == "fixed":
                return cls("fixed", float(spec["M"]))
            if kind == "ratio":
                return cls("ratio", float(spec["kappa"]))
            if kind == "power":
                return cls("power", float(spec["coef"]), float(spec["exp"]))
            if kind == "log":
                return cls("log", float(spec["coef"]))
        raise RegimeUndetermined(f"cannot classify candidate-count rule {spec!r}")

    def M(self, model: DecayModel, n: float) -> float:
        if self.kind == "fixed":
            return self.value
        if self.kind == "ratio":
            return self.value * model.m_star_star(n)
        if self.kind == "power":
            return self.value * n**self.exp
        return self.value * math.log(n)


@dataclass(frozen=True)
class AsymptoticRisk:
    simplex: float
    grid: float
    ms: float
    regime: str


def _classify(model: DecayModel, rule: MRule) -> tuple[str, float]:
    """Regime label and the effective ``kappa`` (nan when not used)."""
    if rule.kind == "fixed":
        return "fixed", 0.0
    if model.kind == "algebraic":
        if rule.kind == "ratio":
            return ("small", 0.0) if rule.value == 0 else ("proportional", rule.value)
        if rule.kind == "log":
            return "small", 0.0
        if rule.kind == "power":
            crit = 1.0 / (2.0 * model.rate)
            if rule.exp <= 0:
                return "fixed", 0.0
            if rule.exp < crit:
                return "small", 0.0
            if rule.exp > crit:
                return "proportional", math.inf
            return "proportional", rule.value * model.sigma2 ** (1.0 / (2.0 * model.rate))
    else:
        if rule.kind == "ratio":
            kappa = rule.value
        elif rule.kind == "log":
            kappa = 2.0 * model.rate * rule.value
        elif rule.kind == "power":
            if rule.exp <= 0:
                return "fixed", 0.0
            kappa = math.inf
        else:
            kappa = math.nan
        if kappa < 1:
            return "below", kappa
        if kappa == 1:
            return "boundary", kappa
        if kappa > 1:
            return "above", kappa
    raise RegimeUndetermined(f"cannot classify rule {rule} under {model.kind} decay")


def asymptotic_risk(model: DecayModel, n: float, M_rule) -> AsymptoticRisk:
    """Leading-order ``R / n`` for the simplex, grid-``N`` and selection oracles."""
    rule = MRule.parse(M_rule)
    regime, kappa = _classify(model, rule)
    mss = model.m_star_star(n)
    if mss < 2:
        raise DomainError(f"n={n} too small: optimal model size {mss:.3g} < 2")
    s2n = model.sigma2 / n
    M = rule.M(model, n)

    if model.kind == "algebraic":
        alpha = model.rate
        if regime == "fixed":
            r = float(zeta(2 * alpha, int(M) + 1))
            return AsymptoticRisk(r, r, r, regime)
        if regime == "small":
            r = M ** (1 - 2 * alpha) / (2 * alpha - 1)
            return AsymptoticRisk(r, r, r, regime)
        s = (n / model.sigma2) ** (1 / (2 * alpha) - 1)
        tail = 0.0 if math.isinf(kappa) else kappa ** (1 - 2 * alpha) / (2 * alpha - 1)
        a = 1 / (2 * alpha)
        lo = 0.0 if math.isinf(kappa) else 1 / (1 + kappa ** (2 * alpha))
        simplex = s * (a * (math.pi / math.sin(math.pi * a) - inc_beta(lo, 1 - a, a)) + tail)
        grid = s * (2 * alpha / (2 * alpha - 1) * psi_star(model.N, alpha, kappa) + tail)
        k = min(kappa, 1.0)
        ms = s * (k + k ** (1 - 2 * alpha) / (2 * alpha - 1))
        return AsymptoticRisk(simplex, grid, ms, regime)

    c = model.rate
    if regime == "fixed" or regime == "below":
        r = math.exp(-2 * c * M) / math.expm1(2 * c)
    elif regime == "boundary":
        r = s2n * math.log(n / model.sigma2) / (2 * c) + math.exp(-2 * c * M) / math.expm1(2 * c)
    else:
        r = s2n * math.log(n / model.sigma2) / (2 * c)
    return AsymptoticRisk(r, r, r, regime)


@dataclass(frozen=True)
class DecayReport:
    label: str
    ratios: np.ndarray


def decay_classify(theta, k: float = 2.0) -> DecayReport:
    """Diagnose slow (ratio bounded away from 0 and 1) versus fast (ratio to 0) decay.

    Uses ``theta[floor(k m)] / theta[m]`` over the second half of the usable
    indices of the positive prefix.
    """
    if not k > 1:
        raise DomainError(f"k must exceed 1, got {k}")
    theta = np.asarray(theta, dtype=float).ravel()
    nonpos = np.flatnonzero(~(theta > 1e-14))
    L = int(nonpos[0]) if nonpos.size else theta.size
    if L < 10:
        raise TooShort(f"only {L} positive leading entries; need at least 10")
    t = theta[:L]
    ms = np.arange(1, L + 1)
    km = np.floor(k * ms).astype(int)
    ok = km <= L
    ratios = t[km[ok] - 1] / t[ms[ok] - 1]
    tail = ratios[len(ratios) // 2 :]
    hi, lo = float(tail.max()), float(tail.min())
    if hi >= 1 - 1e-3:
        label = "inconclusive"
    elif tail[-1] < 1e-3 or tail[-1] < 0.1 * tail[0]:
        label = "A2-like"
    elif hi / max(lo, 1e-300) < 2 and k * hi < 1:
        label = "A1-like"
    else:
        label = "inconclusive"
    return DecayReport(label, ratios)
