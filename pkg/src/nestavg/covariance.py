"""Error covariance models and the traces the risk formulas need.

Every model exposes a structured matvec, so ``tr{(P_m - P_{m-1}) Omega}`` is
computed as ``sum(B * (Omega @ B))`` over the orthonormal block ``B`` of
group ``m`` without materializing ``Omega``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .design import NestedDesign
from .errors import ConfigError, DimensionMismatch


class CovarianceSpec:
    """Base class. Subclasses implement ``matvec``, ``dense`` and ``sample``."""

    kind = "abstract"

    def matvec(self, V: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def dense(self, n: int) -> np.ndarray:
        raise NotImplementedError

    def sample(self, n: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Scalar(CovarianceSpec):
    sigma2: float = 1.0
    kind = "scalar"

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ConfigError(f"sigma2 must be positive, got {self.sigma2}")

    def matvec(self, V):
        return self.sigma2 * np.asarray(V, dtype=float)

    def dense(self, n):
        return self.sigma2 * np.eye(n)

    def sample(self, n, rng, size=None):
        shape = (n,) if size is None else (size, n)
        return np.sqrt(self.sigma2) * rng.standard_normal(shape)

    def to_dict(self):
        return {"kind": "scalar", "sigma2": self.sigma2}


@dataclass(frozen=True, eq=False)
class Diagonal(CovarianceSpec):
    d: tuple
    kind = "diagonal"

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        if d.ndim != 1 or np.any(d <= 0):
            raise ConfigError("diagonal entries must be positive")
        object.__setattr__(self, "d", d)

    def _check(self, n):
        if n != self.d.size:
            raise DimensionMismatch(f"diagonal covariance has size {self.d.size}, asked for {n}")

    def matvec(self, V):
        V = np.asarray(V, dtype=float)
        self._check(V.shape[0])
        return V * self.d.reshape((-1,) + (1,) * (V.ndim - 1))

    def dense(self, n):
        self._check(n)
        return np.diag(self.d)

    def sample(self, n, rng, size=None):
        self._check(n)
        shape = (n,) if size is None else (size, n)
        return np.sqrt(self.d) * rng.standard_normal(shape)

    def to_dict(self):
        return {"kind": "diagonal", "d": self.d.tolist()}


@dataclass(frozen=True)
class AR1(CovarianceSpec):
    """Stationary AR(1): ``Omega[k, l] = variance * rho**|k - l|``."""

    rho: float
    variance: float = 1.0
    kind = "ar1"

    def __post_init__(self):
        if not -1 < self.rho < 1:
            raise ConfigError(f"AR(1) needs |rho| < 1, got {self.rho}")
        if not self.variance > 0:
            raise ConfigError("AR(1) variance must be positive")

    def matvec(self, V):
        V = np.asarray(V, dtype=float)
        a = [1.0, -self.rho]
        fwd = lfilter([1.0], a, V, axis=0)
        bwd = lfilter([1.0], a, V[::-1], axis=0)[::-1]
        return self.variance * (fwd + bwd - V)

    def dense(self, n):
        idx = np.arange(n)
        return self.variance * self.rho ** np.abs(idx[:, None] - idx[None, :])

    def sample(self, n, rng, size=None):
        rows = 1 if size is None else size
        e = rng.standard_normal((rows, n))
        e[:, 1:] *= np.sqrt(1.0 - self.rho**2)
        # e[:, 0] is the stationary start, the rest are innovations
        out = np.sqrt(self.variance) * lfilter([1.0], [1.0, -self.rho], e, axis=1)
        return out[0] if size is None else out

    def to_dict(self):
        return {"kind": "ar1", "rho": self.rho, "variance": self.variance}


@dataclass(frozen=True)
class Sum(CovarianceSpec):
    terms: tuple
    kind = "sum"

    def __post_init__(self):
        if len(self.terms) == 0:
            raise ConfigError("sum covariance needs at least one term")
        object.__setattr__(self, "terms", tuple(self.terms))

    def matvec(self, V):
        return sum(t.matvec(V) for t in self.terms)

    def dense(self, n):
        return sum(t.dense(n) for t in self.terms)

    def sample(self, n, rng, size=None):
        return sum(t.sample(n, rng, size) for t in self.terms)

    def to_dict(self):
        return {"kind": "sum", "terms": [t.to_dict() for t in self.terms]}


def from_dict(cfg: dict) -> CovarianceSpec:
    """Inverse of ``to_dict``; used by the JSON run configs."""
    try:
        kind = cfg["kind"]
        if kind == "scalar":
            return Scalar(float(cfg.get("sigma2", 1.0)))
        if kind == "diagonal":
            return Diagonal(tuple(cfg["d"]))
        if kind == "ar1":
            return AR1(float(cfg["rho"]), float(cfg.get("variance", 1.0)))
        if kind == "sum":
            return Sum(tuple(from_dict(t) for t in cfg["terms"]))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad covariance spec {cfg!r}: {exc}") from exc
    raise ConfigError(f"unknown covariance kind {cfg.get('kind')!r}")


def trace_increments(cov: CovarianceSpec, d: NestedDesign) -> np.ndarray:
    """``tr{(P_m - P_{m-1}) Omega}`` for every group ``m = 1..q``."""
    if isinstance(cov, Scalar):
        return cov.sigma2 * d.group_sizes.astype(float)
    if isinstance(cov, Sum):
        return sum(trace_increments(t, d) for t in cov.terms)
    per_col = np.einsum("ij,ij->j", d.Q, cov.matvec(d.Q))
    starts = np.concatenate(([0], d.nu[:-1]))
    return np.add.reduceat(per_col, starts)


def trace_increment(cov: CovarianceSpec, d: NestedDesign, m: int) -> float:
    B = d.block(m)
    if isinstance(cov, Scalar):
        return cov.sigma2 * B.shape[1]
    if isinstance(cov, Sum):
        return sum(trace_increment(t, d, m) for t in cov.terms)
    return float(np.einsum("ij,ij->", B, cov.matvec(B)))


def trace_hat(cov: CovarianceSpec, d: NestedDesign, m: int) -> float:
    """``tr(P_m Omega)``; zero for ``m = 0``."""
    if m == 0:
        return 0.0
    d._bounds(m)
    return float(np.sum(trace_increments(cov, d)[:m]))


def sample_noise(cov: CovarianceSpec, n: int, rng: np.random.Generator, size: int | None = None):
    """Draw ``eps`` with covariance ``Omega``; ``size`` stacks independent draws as rows."""
    return cov.sample(n, rng, size)
