"""Exact oracle risks for nested selection and averaging.

Everything here is a function of two per-group sequences

    b_m = mu^T (P_m - P_{m-1}) mu        (bias decrement)
    v_m = tr{(P_m - P_{m-1}) Omega}      (variance increment)

plus the part of ``mu`` outside the largest model.  With
``gamma_m = sum_{j >= m} w_j`` the averaging risk separates over groups:

    R(w) = sum_m [(b_m + v_m) gamma_m^2 - 2 b_m gamma_m + b_m] + tail

so all three oracle weight sets reduce to coordinatewise problems in
``gamma`` whenever the unconstrained minimizers are nonincreasing.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import qp
from .covariance import CovarianceSpec, trace_increments
from .design import NestedDesign, quad_form_increments
from .errors import DimensionMismatch, IndexOutOfRange, InvalidN, ZeroVariance

MONO_RTOL = 1e-12
POSITIVE_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class RiskProfile:
    """Per-group risk ingredients for the first ``M`` of ``q`` nested models.

    Arrays of length ``q`` are kept in full because the global optimum
    ``m_star_star`` ranges over every group, not just the candidates.
    """

    n: int
    M: int
    bias_all: np.ndarray
    var_all: np.ndarray
    resid: float = 0.0
    theta_all: np.ndarray = field(init=False, repr=False)
    R_all: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        b = np.asarray(self.bias_all, dtype=float).ravel()
        v = np.asarray(self.var_all, dtype=float).ravel()
        if b.shape != v.shape:
            raise DimensionMismatch("bias and variance increments differ in length")
        if not 1 <= self.M <= b.size:
            raise IndexOutOfRange(f"M={self.M} outside 1..{b.size}")
        if np.any(v <= 0):
            raise ZeroVariance(f"variance increment is zero at group {int(np.argmax(v <= 0)) + 1}")
        b = np.maximum(b, 0.0)
        theta = b / (self.n * v)
        # tail[m] = mu^T (I - P_m) mu, summed from the right for accuracy
        tail = self.resid + np.concatenate((np.cumsum(b[::-1])[::-1][1:], [0.0]))
        R = tail + np.cumsum(v)
        for name, arr in (("bias_all", b), ("var_all", v), ("theta_all", theta), ("R_all", R)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_design(cls, d: NestedDesign, cov: CovarianceSpec, mu, M: int | None = None) -> "RiskProfile":
        mu = np.asarray(mu, dtype=float)
        c = d.coords(mu)
        resid = float(np.sum((mu - d.Q @ c) ** 2))
        return cls(d.n, d.q if M is None else int(M), quad_form_increments(d, mu), trace_increments(cov, d), resid)

    @classmethod
    def from_increments(cls, bias_inc, var_inc, n: int, M: int | None = None, resid: float = 0.0) -> "RiskProfile":
        b = np.asarray(bias_inc, dtype=float)
        return cls(int(n), b.size if M is None else int(M), b, var_inc, float(resid))

    # candidate-range views
    @property
    def q(self) -> int:
        return self.bias_all.size

    @property
    def bias_inc(self) -> np.ndarray:
        return self.bias_all[: self.M]

    @property
    def var_inc(self) -> np.ndarray:
        return self.var_all[: self.M]

    @property
    def theta(self) -> np.ndarray:
        return self.theta_all[: self.M]

    @property
    def tail_bias(self) -> float:
        return float(self.resid + self.bias_all[self.M :].sum())

    @property
    def gamma_raw(self) -> np.ndarray:
        """``b/(b+v)`` for every candidate, including the first."""
        return self.bias_inc / (self.bias_inc + self.var_inc)

    @property
    def gamma_star(self) -> np.ndarray:
        g = self.gamma_raw.copy()
        g[0] = 1.0
        return g

    @property
    def R_ms(self) -> np.ndarray:
        return self.R_all[: self.M]

    @property
    def d_n(self) -> int:
        pos = np.flatnonzero(self.theta_all > POSITIVE_TOL)
        return int(pos[-1]) + 1 if pos.size else 0

    def truncate(self, M: int) -> "RiskProfile":
        return RiskProfile(self.n, M, self.bias_all, self.var_all, self.resid)

    def to_rows(self) -> list[dict]:
        return [
            {"m": m + 1, "bias_inc": self.bias_all[m], "var_inc": self.var_all[m], "theta": self.theta_all[m],
             "gamma_star": 1.0 if m == 0 else self.bias_all[m] / (self.bias_all[m] + self.var_all[m]),
             "R_ms": self.R_all[m]}
            for m in range(self.q)
        ]

    def write_csv(self, path) -> None:
        cols = ["m", "bias_inc", "var_inc", "theta", "gamma_star", "R_ms"]
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(cols)
            for row in self.to_rows():
                wr.writerow([row["m"]] + [f"{row[c]:.16e}" for c in cols[1:]])


@dataclass(frozen=True, eq=False)
class WeightVector:
    w: np.ndarray
    set_tag: str

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float).ravel()
        object.__setattr__(self, "w", w)
        if np.any(w < -1e-12) or np.any(w > 1 + 1e-12):
            raise ValueError(f"weights outside [0, 1]: {w}")
        if self.set_tag != "box" and abs(w.sum() - 1.0) > 1e-10:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        if self.set_tag.startswith("grid"):
            N = self.N
            if not np.allclose(w * N, np.round(w * N), atol=1e-9):
                raise ValueError(f"weights are not multiples of 1/{N}")

    @property
    def N(self) -> int | None:
        if self.set_tag.startswith("grid("):
            return int(self.set_tag[5:-1])
        return None

    @property
    def gamma(self) -> np.ndarray:
        return np.cumsum(self.w[::-1])[::-1]


@dataclass(frozen=True, eq=False)
class OracleResult:
    weights: WeightVector
    risk: float
    method: str  # "closed-form", "qp" or "enumeration"

    @property
    def w(self) -> np.ndarray:
        return self.weights.w


@dataclass(frozen=True)
class MsResult:
    R: np.ndarray
    m_star: int
    m_star_star: int
    consistent: bool  # m_star == min(M, m_star_star)


def gvi(d: NestedDesign, cov: CovarianceSpec, mu) -> np.ndarray:
    """Grouped variable importance for every group of ``d``."""
    b = quad_form_increments(d, np.asarray(mu, dtype=float))
    v = trace_increments(cov, d)
    if np.any(v <= 0):
        raise ZeroVariance(f"variance increment is zero at group {int(np.argmax(v <= 0)) + 1}")
    return b / (d.n * v)


def risk_ms(profile: RiskProfile) -> MsResult:
    m_star = int(np.argmin(profile.R_ms)) + 1
    m_ss = int(np.argmin(profile.R_all)) + 1
    return MsResult(profile.R_ms.copy(), m_star, m_ss, m_star == min(profile.M, m_ss))


def risk_ma(profile: RiskProfile, w) -> float:
    """Exact risk of the averaged fit with weights ``w`` (any real vector)."""
    w = w.w if isinstance(w, WeightVector) else np.asarray(w, dtype=float)
    if w.shape != (profile.M,):
        raise DimensionMismatch(f"expected {profile.M} weights, got shape {w.shape}")
    gam = np.cumsum(w[::-1])[::-1]
    return risk_from_gamma(profile, gam)


def risk_from_gamma(profile: RiskProfile, gam) -> float:
    b, v = profile.bias_inc, profile.var_inc
    terms = (b + v) * gam**2 - 2 * b * gam + b
    return float(np.sum(terms) + profile.tail_bias)


def _is_nonincreasing(x: np.ndarray) -> bool:
    return bool(np.all(x[1:] <= x[:-1] * (1 + MONO_RTOL) + 1e-300))


def _weights_from_gamma(gam: np.ndarray) -> np.ndarray:
    return gam - np.concatenate((gam[1:], [0.0]))


def ma_quadratic(profile: RiskProfile) -> tuple[np.ndarray, np.ndarray, float]:
    """``(H, g, c)`` with ``R(w) = 0.5 w^T H w + g^T w + c``."""
    M = profile.M
    U = np.triu(np.ones((M, M)))
    b, v = profile.bias_inc, profile.var_inc
    H = 2.0 * U.T @ ((b + v)[:, None] * U)
    g = -2.0 * U.T @ b
    return H, g, float(b.sum() + profile.tail_bias)


def _qp_oracle(profile: RiskProfile, fs: str, N: int | None = None) -> OracleResult:
    H, g, c = ma_quadratic(profile)
    res = qp.solve(qp.QpProblem(H, g, fs, N), allow_heuristic=False)
    tag = f"grid({N})" if fs == "grid" else fs
    w = WeightVector(res.w, tag)
    return OracleResult(w, risk_ma(profile, w), "enumeration" if fs == "grid" else "qp")


def oracle_simplex(profile: RiskProfile) -> OracleResult:
    """Risk-minimizing weights over the unit simplex."""
    gam = profile.gamma_star
    if not _is_nonincreasing(gam[1:]):
        return _qp_oracle(profile, "simplex")
    w = WeightVector(np.maximum(_weights_from_gamma(gam), 0.0), "simplex")
    b, v = profile.bias_inc, profile.var_inc
    risk = v[0] + float(np.sum(v[1:] * b[1:] / (b[1:] + v[1:]))) + profile.tail_bias
    return OracleResult(w, risk, "closed-form")


def oracle_box(profile: RiskProfile) -> OracleResult:
    """Risk-minimizing weights over ``[0, 1]^M`` (no sum constraint)."""
    gam = profile.gamma_raw
    if not _is_nonincreasing(gam):
        return _qp_oracle(profile, "box")
    w = WeightVector(np.clip(_weights_from_gamma(gam), 0.0, 1.0), "box")
    b, v = profile.bias_inc, profile.var_inc
    return OracleResult(w, float(np.sum(v * b / (b + v))) + profile.tail_bias, "closed-form")


def box_gap(profile: RiskProfile) -> float:
    """``v_1^2 / (b_1 + v_1)``: the price of the sum-to-one constraint."""
    b1, v1 = profile.bias_inc[0], profile.var_inc[0]
    return float(v1 * v1 / (b1 + v1))


def round_gamma(gam: np.ndarray, N: int) -> np.ndarray:
    """Nearest level ``i/N``; exact midpoints go down."""
    return np.ceil(N * gam - 0.5) / N


def m_n(profile: RiskProfile, z: float) -> int:
    """Largest index whose GVI exceeds ``z / ((1 - z) n)``, at least 1."""
    if z >= 1:
        return 1
    thr = z / ((1 - z) * profile.n)
    return max(1, int(np.count_nonzero(profile.theta_all > thr)))


def grid_risk_double_sum(profile: RiskProfile, N: int) -> float:
    """Optimal grid risk written as a double sum over levels and threshold indices."""
    if N < 1:
        raise InvalidN(f"N must be >= 1, got {N}")
    b, v = profile.bias_inc, profile.var_inc
    M = profile.M
    i_nN = math.ceil(N * profile.gamma_star[M - 1] - 0.5) if M > 1 else N

    def block(lo, hi, i):
        # groups lo..hi (1-based, inclusive) all rounded to level i/N
        if hi < lo:
            return 0.0
        s = slice(lo - 1, hi)
        return float(np.sum((i / N) ** 2 * v[s] + (1 - i / N) ** 2 * b[s]))

    total = v[0] + profile.tail_bias
    for i in range(i_nN + 1, N + 1):
        lo = m_n(profile, (2 * i + 1) / (2 * N)) + 1
        hi = min(m_n(profile, (2 * i - 1) / (2 * N)), M)
        total += block(lo, hi, i)
    if M > 1:
        total += block(m_n(profile, (2 * i_nN + 1) / (2 * N)) + 1, M, i_nN)
    return total


def grid_risk_excess(profile: RiskProfile, N: int) -> float:
    """Optimal grid risk as the simplex optimum plus per-group rounding penalties."""
    gam = profile.gamma_star[1:]
    pen = (profile.bias_inc[1:] + profile.var_inc[1:]) * (round_gamma(gam, N) - gam) ** 2
    b, v = profile.bias_inc, profile.var_inc
    base = v[0] + float(np.sum(v[1:] * b[1:] / (b[1:] + v[1:]))) + profile.tail_bias
    return base + float(np.sum(pen))


def oracle_grid(profile: RiskProfile, N: int) -> OracleResult:
    """Risk-minimizing weights over simplex points with coordinates in ``{0, 1/N, ..., 1}``."""
    if int(N) != N or N < 1:
        raise InvalidN(f"N must be a positive integer, got {N}")
    N = int(N)
    gam = profile.gamma_star
    if not _is_nonincreasing(gam[1:]):
        return _qp_oracle(profile, "grid", N)
    rg = gam.copy()
    rg[1:] = round_gamma(gam[1:], N)
    w = _weights_from_gamma(rg)
    w = np.round(w * N) / N
    return OracleResult(WeightVector(w, f"grid({N})"), grid_risk_excess(profile, N), "closed-form")


@dataclass(frozen=True)
class DeltaGap:
    delta: float
    ratio: float
    delta_direct: float
    m_star: int
    below_half: bool  # the averaging optimum keeps at least half of the selection risk


def delta_gap(profile: RiskProfile) -> DeltaGap:
    """Oracle improvement of averaging over selection, by decomposition and directly."""
    ms = risk_ms(profile)
    k = ms.m_star
    b, v = profile.bias_inc, profile.var_inc
    first = v[1:k] - v[1:k] * b[1:k] / (b[1:k] + v[1:k])
    second = b[k:] ** 2 / (b[k:] + v[k:])
    delta = float(first.sum() + second.sum())
    r_ms = float(profile.R_ms[k - 1])
    direct = r_ms - oracle_simplex(profile).risk
    return DeltaGap(delta, delta / r_ms, direct, k, delta <= 0.5 * r_ms * (1 + 1e-12))
