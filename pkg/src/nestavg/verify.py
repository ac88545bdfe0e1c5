"""Seeded battery of random nested instances and the oracle inequalities they must satisfy."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import oracle, qp
from .covariance import AR1, Diagonal, Scalar, Sum, trace_increments
from .design import build

TOL = 1e-10


def random_covariance(rng: np.random.Generator, n: int):
    kind = rng.integers(4)
    if kind == 0:
        return Scalar(float(rng.uniform(0.5, 2.0)))
    if kind == 1:
        return Diagonal(tuple(rng.uniform(0.2, 3.0, n)))
    if kind == 2:
        return AR1(float(rng.uniform(-0.7, 0.7)), float(rng.uniform(0.5, 2.0)))
    return Sum((Diagonal(tuple(rng.uniform(0.2, 2.0, n))), AR1(float(rng.uniform(-0.5, 0.5)))))


def random_instance(rng: np.random.Generator, n_range=(20, 80), M_max: int = 6, log_range=3.0):
    """Random design, covariance and mean with a prescribed nonincreasing GVI.

    The mean is assembled group by group from the orthonormal blocks so that
    ``n * theta_m`` equals a sorted log-uniform draw exactly.
    """
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    M = int(rng.integers(2, M_max + 1))
    q = M + int(rng.integers(0, 3))
    sizes = rng.integers(1, 4, q)
    nu = np.cumsum(sizes)
    X = rng.standard_normal((n, int(nu[-1])))
    d = build(X, nu)
    cov = random_covariance(rng, n)
    v = trace_increments(cov, d)
    ntheta = np.sort(np.exp(rng.uniform(-log_range, log_range, q)))[::-1]
    mu = np.zeros(n)
    for m in range(q):
        B = d.block(m + 1)
        u = rng.standard_normal(B.shape[1])
        u /= np.linalg.norm(u)
        mu += B @ u * np.sqrt(ntheta[m] * v[m])
    # a component outside every candidate span
    out = rng.standard_normal(n)
    out -= d.Q @ (d.Q.T @ out)
    mu += out * rng.uniform(0, 1)
    return oracle.RiskProfile.from_design(d, cov, mu, M)


def enumerate_grid_risk(profile: oracle.RiskProfile, N: int) -> tuple[float, np.ndarray]:
    """Brute-force minimum of the exact risk over every grid weight vector."""
    H, g, c = oracle.ma_quadratic(profile)
    res = qp.solve(qp.QpProblem(H, g, "grid", N), allow_heuristic=False)
    return oracle.risk_ma(profile, res.w), res.w


@dataclass
class Check:
    name: str
    checked: int = 0
    violations: int = 0
    worst: float = -np.inf

    def record(self, value: float, tol: float = TOL) -> None:
        """Count a violation when the (relative) ``value`` exceeds ``tol``."""
        self.checked += 1
        if value > tol:
            self.violations += 1
        self.worst = max(self.worst, value)

    @property
    def passed(self) -> bool:
        return self.checked > 0 and self.violations == 0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name}: {self.checked} checks, {self.violations} violations, worst {self.worst:.3e}"


def run_battery(seed: int = 7, instances: int = 200, Ns=(1, 2, 3, 4)) -> list[Check]:
    rng = np.random.default_rng(seed)
    checks = {k: Check(k) for k in (
        "grid closed form = enumeration",
        "grid double-sum form = enumeration",
        "grid N=1 = best single model",
        "box <= simplex <= grid N",
        "grid N - simplex <= R(m*)/(2N)",
        "simplex - box = v1^2/(b1+v1)",
        "delta decomposition = direct",
    )}
    for _ in range(instances):
        prof = random_instance(rng)
        r_box = oracle.oracle_box(prof).risk
        r_sx = oracle.oracle_simplex(prof).risk
        ms = oracle.risk_ms(prof)
        r_ms = float(prof.R_ms[ms.m_star - 1])
        scale = max(1.0, r_ms)
        checks["simplex - box = v1^2/(b1+v1)"].record(abs(r_sx - r_box - oracle.box_gap(prof)) / scale)
        gap = oracle.delta_gap(prof)
        checks["delta decomposition = direct"].record(abs(gap.delta - gap.delta_direct) / scale)
        for N in Ns:
            r_grid = oracle.oracle_grid(prof, N).risk
            r_enum, _ = enumerate_grid_risk(prof, N)
            checks["grid closed form = enumeration"].record(abs(r_grid - r_enum) / scale)
            checks["grid double-sum form = enumeration"].record(abs(oracle.grid_risk_double_sum(prof, N) - r_enum) / scale)
            if N == 1:
                checks["grid N=1 = best single model"].record(abs(r_grid - r_ms) / scale, 1e-12)
            checks["box <= simplex <= grid N"].record(max(r_box - r_sx, r_sx - r_grid) / scale)
            checks["grid N - simplex <= R(m*)/(2N)"].record((r_grid - r_sx - r_ms / (2 * N)) / scale)
    return list(checks.values())
