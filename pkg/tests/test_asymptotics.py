import math

import numpy as np
import pytest
from scipy import integrate, special

from nestavg import asymptotics as A
from nestavg import oracle
from nestavg.errors import DomainError, KindMismatch, RegimeUndetermined, TooShort


@pytest.mark.parametrize("x,a,b", [(0.5, 2, 3), (0.1, 0.3, 0.7), (0.9, 0.375, 0.625), (0.999, 5, 0.5), (1e-6, 0.2, 4), (1.0, 0.6, 0.4)])
def test_inc_beta_against_scipy(x, a, b):
    expected = special.betainc(a, b, x) * special.beta(a, b)
    assert A.inc_beta(x, a, b) == pytest.approx(expected, rel=1e-12)


def test_inc_beta_quadrature_and_closed_form():
    assert A.inc_beta(0.5, 2, 3) == pytest.approx(11 / 192, rel=1e-14)
    q, _ = integrate.quad(lambda t: t ** (-0.4) * (1 - t) ** (-0.6), 0, 0.3)
    assert A.inc_beta(0.3, 0.6, 0.4) == pytest.approx(q, rel=1e-9)


def test_inc_beta_complement():
    a, b = 0.7, 1.8
    for x in (0.05, 0.4, 0.8):
        total = A.inc_beta(x, a, b) + A.inc_beta(1 - x, b, a)
        assert total == pytest.approx(A.complete_beta(a, b), rel=1e-13)


def test_inc_beta_domain():
    with pytest.raises(DomainError):
        A.inc_beta(1.5, 1, 1)
    with pytest.raises(DomainError):
        A.inc_beta(0.5, 0, 1)


@pytest.mark.parametrize("alpha", [0.6, 0.8, 1.0, 2.0])
@pytest.mark.parametrize("kappa", [0.5, 1.0, 2.0, math.inf])
def test_psi_converges_to_limit(alpha, kappa):
    a = 1 / (2 * alpha)
    lo = 0.0 if math.isinf(kappa) else 1 / (1 + kappa ** (2 * alpha))
    # Riemann-sum limit plus the two boundary terms evaluated at i/N -> lo
    q, _ = integrate.quad(lambda z: z ** (1 - a) * (1 - z) ** a, lo, 1)
    if not math.isinf(kappa):
        q += 0.5 * ((2 * alpha - 1) / (2 * alpha) * lo**2 * kappa - a * (1 - lo) ** 2 * kappa ** (1 - 2 * alpha))
    assert A.psi_limit(alpha, kappa) == pytest.approx(2 * q, rel=1e-9)
    assert A.psi_star(100000, alpha, kappa) == pytest.approx(A.psi_limit(alpha, kappa), abs=1e-6)


def test_limit_ratio_endpoint_is_one():
    for kappa in (0.5, 1.0, 2.0, math.inf):
        assert A.limit_ratio_at_infinity(0.8, kappa) == 1.0
        model = A.DecayModel("algebraic", 0.8, kappa=kappa, N=100000)
        assert A.limit_ratio(model) == pytest.approx(1.0, abs=1e-6)


def test_limit_ratio_increases_in_N_for_kappa_at_least_one():
    for kappa in (1.0, 2.0, math.inf):
        r = [A.limit_ratio(A.DecayModel("algebraic", 0.8, kappa=kappa, N=N)) for N in range(1, 11)]
        assert np.all(np.diff(r) > 0) and r[-1] < 1


def test_limit_ratio_rejects_exponential():
    with pytest.raises(KindMismatch):
        A.limit_ratio(A.DecayModel("exponential", 0.5))


def test_grid_gap_lower_bound_positive():
    assert A.grid_gap_lower_bound(0.8, 1.0, 1e4, 2, 0.5) > 0


def _exact_algebraic(alpha, n, kappa, N):
    mss = n ** (1 / (2 * alpha))
    M = max(2, int(round(kappa * mss)))
    q = int(40 * mss)
    m = np.arange(1, q + 1.0)
    prof = oracle.RiskProfile.from_increments(n * m ** (-2 * alpha), np.ones(q), n, M,
                                              resid=n * float(special.zeta(2 * alpha, q + 1)))
    ms = oracle.risk_ms(prof)
    return (oracle.oracle_simplex(prof).risk / n, oracle.oracle_grid(prof, N).risk / n,
            prof.R_ms[ms.m_star - 1] / n)


@pytest.mark.parametrize("kappa", [0.5, 1.0, 2.0])
def test_exact_risk_approaches_asymptote(kappa):
    n = 1e6
    model = A.DecayModel("algebraic", 0.8, kappa=kappa, N=3)
    ar = A.asymptotic_risk(model, n, {"kind": "ratio", "kappa": kappa})
    assert ar.regime == "proportional"
    exact = _exact_algebraic(0.8, n, kappa, 3)
    for e, a in zip(exact, (ar.simplex, ar.grid, ar.ms)):
        assert e / a == pytest.approx(1.0, abs=0.01)


def test_exponential_above_regime_matches_exact():
    c, n = 0.5, 1e8
    model = A.DecayModel("exponential", c)
    ar = A.asymptotic_risk(model, n, {"kind": "log", "coef": 3.0})
    assert ar.regime == "above"
    q = 400
    m = np.arange(1, q + 1.0)
    prof = oracle.RiskProfile.from_increments(n * np.exp(-2 * c * m), np.ones(q), n, int(3 * math.log(n)))
    exact = oracle.oracle_simplex(prof).risk / n
    assert exact / ar.simplex == pytest.approx(1.0, abs=0.15)


@pytest.mark.parametrize("rule,model,regime", [
    ({"kind": "fixed", "M": 5}, A.DecayModel("algebraic", 1.0), "fixed"),
    ({"kind": "log", "coef": 1.0}, A.DecayModel("algebraic", 1.0), "small"),
    ({"kind": "power", "coef": 1.0, "exp": 0.2}, A.DecayModel("algebraic", 1.0), "small"),
    ({"kind": "power", "coef": 1.0, "exp": 0.8}, A.DecayModel("algebraic", 1.0), "proportional"),
    ({"kind": "ratio", "kappa": 0.5}, A.DecayModel("exponential", 1.0), "below"),
    ({"kind": "ratio", "kappa": 1.0}, A.DecayModel("exponential", 1.0), "boundary"),
    ({"kind": "log", "coef": 1.0}, A.DecayModel("exponential", 1.0), "above"),
])
def test_regimes(rule, model, regime):
    assert A.asymptotic_risk(model, 1e6, rule).regime == regime


def test_regime_errors():
    with pytest.raises(RegimeUndetermined):
        A.asymptotic_risk(A.DecayModel("algebraic", 1.0), 1e6, {"kind": "sqrt"})
    with pytest.raises(DomainError):
        A.asymptotic_risk(A.DecayModel("algebraic", 1.0), 2.0, {"kind": "fixed", "M": 3})
    with pytest.raises(DomainError):
        A.DecayModel("algebraic", 0.4)


def test_fixed_regime_is_zeta_tail():
    ar = A.asymptotic_risk(A.DecayModel("algebraic", 1.0), 1e6, {"kind": "fixed", "M": 4})
    assert ar.simplex == pytest.approx(math.pi**2 / 6 - (1 + 1 / 4 + 1 / 9 + 1 / 16))


def test_decay_classification():
    m = np.arange(1, 201.0)
    assert A.decay_classify(m ** -1.6).label == "A1-like"
    assert A.decay_classify(np.exp(-0.5 * m)).label == "A2-like"
    assert A.decay_classify(np.ones(50)).label == "inconclusive"
    with pytest.raises(TooShort):
        A.decay_classify(m[:9] ** -2.0)
    # zeros end the usable prefix
    with pytest.raises(TooShort):
        A.decay_classify(np.concatenate((m[:5] ** -2.0, np.zeros(30))))


def test_limit_ratio_matches_exact_grid_ratios_below_kappa_one():
    # for kappa < 1 the first grid level is never used, so N = 1 and N = 2 tie
    alpha, kappa, n = 0.8, 0.5, 1e6
    mss = n ** (1 / (2 * alpha))
    q = int(40 * mss)
    m = np.arange(1, q + 1.0)
    prof = oracle.RiskProfile.from_increments(n * m ** (-2 * alpha), np.ones(q), n, int(round(kappa * mss)),
                                              resid=n * float(special.zeta(2 * alpha, q + 1)))
    s = oracle.oracle_simplex(prof).risk
    for N in (1, 2, 3):
        exact = s / oracle.oracle_grid(prof, N).risk
        assert exact == pytest.approx(A.limit_ratio(A.DecayModel("algebraic", alpha, kappa=kappa, N=N)), abs=1e-4)
    assert A.psi_star(1, alpha, kappa) == A.psi_star(2, alpha, kappa)
