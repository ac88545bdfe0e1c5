"""Monte Carlo comparison of selection and averaging on three synthetic designs.

``ex1``
    intercept plus iid N(0, 1) predictors, groups of size 2, 3, 2, 3, ...,
    iid N(0, sigma2) errors with sigma2 set from a target R^2.
``ex2``
    one predictor per group, errors ``N(0, x_i2^2)`` plus a unit AR(1).
``ex3``
    one predictor per group, Toeplitz-correlated predictors, iid errors.
"""
from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.signal import lfilter

from . import averagers, oracle, selectors
from .covariance import AR1, CovarianceSpec, Diagonal, Scalar, Sum
from .design import NestedDesign, build
from .errors import ConfigError, NegativeBeta, NestavgError, SimulationFailed

log = logging.getLogger(__name__)

EXAMPLES = ("ex1", "ex2", "ex3")
DECAYS = ("algebraic", "exponential")
SELECTION_METHODS = ("aic", "bic", "cp", "loocv")
AVERAGING_METHODS = ("mma", "jma", "jma2")
DIAGNOSTIC_METHODS = ("oracle_ma", "oracle_ms")
DEFAULT_METHODS = {
    "ex1": ("aic", "bic", "loocv", "mma"),
    "ex2": ("aic", "bic", "loocv", "jma2", "jma"),
    "ex3": ("aic", "bic", "loocv", "mma"),
}
NORMALIZER = {"ex1": "mma", "ex2": "jma", "ex3": "mma"}
ABORT_LIMIT = 0.01


def nearest_int(x: float) -> int:
    """Round half up, the usual reading of "nearest integer"."""
    return int(math.floor(x + 0.5))


def p_rule(n: int) -> int:
    # the small guard keeps exact cubes (n = 1000, 8000, ...) from flooring one short
    return int(math.floor(5.0 * n ** (2.0 / 3.0) + 1e-9))


def m_rule(n: int) -> int:
    return nearest_int(3.0 * n ** (1.0 / 3.0))


def ex1_boundaries(p: int) -> np.ndarray:
    nu = []
    m = 1
    while True:
        v = 5 * (m // 2) + 2 if m % 2 else 5 * (m // 2)
        if v >= p:
            break
        nu.append(v)
        m += 1
    nu.append(p)
    return np.asarray(nu)


@dataclass(frozen=True)
class DgpConfig:
    example: str = "ex1"
    n: int = 500
    decay: str = "algebraic"
    decay_param: float = 1.0
    r2: float = 0.75
    rho1: float = 0.5
    rho2: float = 0.5
    replications: int = 1000
    seed: int = 0
    methods: tuple | None = None
    fixed_design: bool = False
    M: int | None = None
    p: int | None = None
    sigma2: float | None = None

    def __post_init__(self):
        if self.example not in EXAMPLES:
            raise ConfigError(f"example must be one of {EXAMPLES}, got {self.example!r}")
        if self.decay not in DECAYS:
            raise ConfigError(f"decay must be one of {DECAYS}, got {self.decay!r}")
        if not 0 < self.r2 < 1:
            raise ConfigError(f"r2 must lie in (0, 1), got {self.r2}")
        if not self.decay_param > 0:
            raise ConfigError("decay_param must be positive")
        if self.n < 5:
            raise ConfigError(f"n={self.n} is too small")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.methods is not None:
            object.__setattr__(self, "methods", tuple(self.methods))
            bad = set(self.methods) - set(SELECTION_METHODS + AVERAGING_METHODS + DIAGNOSTIC_METHODS)
            if bad:
                raise ConfigError(f"unknown methods {sorted(bad)}")
            if not self.methods:
                raise ConfigError("methods list is empty")

    @property
    def p_n(self) -> int:
        return self.p if self.p is not None else p_rule(self.n)

    @property
    def M_n(self) -> int:
        return self.M if self.M is not None else m_rule(self.n)

    @property
    def method_list(self) -> tuple:
        return self.methods if self.methods is not None else DEFAULT_METHODS[self.example]

    @property
    def normalizer(self) -> str:
        return NORMALIZER[self.example]

    @property
    def boundaries(self) -> np.ndarray:
        return ex1_boundaries(self.p_n) if self.example == "ex1" else np.arange(1, self.p_n + 1)

    def decay_values(self, m) -> np.ndarray:
        m = np.asarray(m, dtype=float)
        if self.decay == "algebraic":
            return m ** (-self.decay_param)
        return np.exp(-self.decay_param * m)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["methods"] = list(self.method_list)
        return d


@dataclass(frozen=True, eq=False)
class Dgp:
    design: NestedDesign  # first M candidate groups only
    mu: np.ndarray
    cov: CovarianceSpec
    beta: np.ndarray
    sigma2: float | None


def zeta_ex2(p: int, rho1: float) -> np.ndarray:
    z = np.full(p, 2.0)
    z[0] = 2.0 / (1.0 - rho1)
    if p > 1:
        z[1] = 4.0
    return z


def beta_from_xi(xi: np.ndarray, rho: float) -> np.ndarray:
    """Invert the per-column signal shares of an AR(1)-correlated design."""
    r = np.sqrt(xi)
    s = math.sqrt(1.0 - rho**2)
    beta = np.empty_like(r[:-1])
    beta[0] = r[0] - rho * r[1] / s
    beta[1:] = (r[1:-1] - rho * r[2:]) / s
    if np.any(beta < 0):
        j = int(np.argmax(beta < 0)) + 1
        raise NegativeBeta(f"coefficient {j} is {beta[j - 1]:.3e} < 0")
    return beta


def coefficients(cfg: DgpConfig) -> np.ndarray:
    p = cfg.p_n
    if cfg.example == "ex1":
        group = np.searchsorted(cfg.boundaries, np.arange(p), side="right") + 1
        return cfg.decay_values(group)
    m = np.arange(1, p + 2)
    if cfg.example == "ex2":
        c = math.sqrt(cfg.r2 / (1.0 - cfg.r2))
        return c * np.sqrt(zeta_ex2(p, cfg.rho1)) * cfg.decay_values(m[:p])
    xi = cfg.decay_values(m) ** 2
    return beta_from_xi(xi, cfg.rho2)


def make_dgp(cfg: DgpConfig, rng: np.random.Generator) -> Dgp:
    """Draw one design and return the candidate design, mean, and error covariance."""
    n, M = cfg.n, cfg.M_n
    nu = cfg.boundaries
    if M > nu.size:
        raise ConfigError(f"M={M} exceeds the {nu.size} available groups")
    k = int(nu[M - 1])
    if k >= n:
        raise ConfigError(f"candidate models need {k} columns but n={n}")
    beta = coefficients(cfg)

    if cfg.example in ("ex1", "ex2"):
        X = np.empty((n, k))
        X[:, 0] = 1.0
        X[:, 1:] = rng.standard_normal((n, k - 1))
        # the remaining columns are iid N(0, 1), so their joint contribution is N(0, |beta_rest|^2)
        rest = float(np.sqrt(np.sum(beta[k:] ** 2)))
        mu = X @ beta[:k] + rest * rng.standard_normal(n)
    else:
        p = cfg.p_n
        z = rng.standard_normal((n, p))
        z[:, 1:] *= math.sqrt(1.0 - cfg.rho2**2)
        Xfull = lfilter([1.0], [1.0, -cfg.rho2], z, axis=1)
        mu = Xfull @ beta
        X = Xfull[:, :k]

    d = build(X, nu[:M])
    sigma2 = None
    if cfg.example == "ex2":
        cov = Sum((Diagonal(tuple(X[:, 1] ** 2)), AR1(cfg.rho1)))
    else:
        sigma2 = cfg.sigma2 if cfg.sigma2 is not None else float(np.var(mu, ddof=1) * (1 - cfg.r2) / cfg.r2)
        cov = Scalar(sigma2)
    return Dgp(d, mu, cov, beta, sigma2)


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def design_rng(seed: int) -> np.random.Generator:
    return _rng(seed, 1)


def replicate_rng(seed: int, rep: int) -> np.random.Generator:
    return _rng(seed, 0, rep)


@dataclass(frozen=True, eq=False)
class ReplicateOutcome:
    rep: int
    losses: np.ndarray | None
    error: str | None = None
    audit: dict | None = None


def _estimate(method: str, cache: selectors.FitCache, dgp: Dgp, oracle_w=None, oracle_m=None):
    if method in SELECTION_METHODS:
        s = selectors.scores(cache, method)
        m = int(np.argmin(s))
        return cache.fitted[:, m], {"m_hat": m + 1}
    if method == "mma":
        fit = averagers._fit(averagers.mma_criterion(cache), cache)
        return fit.mu_hat, {"w": fit.w.tolist()}
    if method in ("jma", "jma2"):
        fit = averagers._fit(averagers.jma_criterion(cache, "box" if method == "jma2" else "simplex"), cache)
        return fit.mu_hat, {"w": fit.w.tolist()}
    if method == "oracle_ma":
        return cache.fitted @ oracle_w, {}
    if method == "oracle_ms":
        return cache.fitted[:, oracle_m - 1], {}
    raise ConfigError(f"unknown method {method!r}")


def run_replicate(cfg: DgpConfig, rep: int, fixed: Dgp | None = None, audit: bool = False) -> ReplicateOutcome:
    rng = replicate_rng(cfg.seed, rep)
    try:
        dgp = fixed if fixed is not None else make_dgp(cfg, rng)
        y = dgp.mu + dgp.cov.sample(cfg.n, rng)
        methods = cfg.method_list
        need_loo = any(m in ("loocv", "jma", "jma2") for m in methods)
        cache = selectors.fit_cache(y, dgp.design, dgp.design.q, loo=need_loo)
        ow = om = None
        if any(m in DIAGNOSTIC_METHODS for m in methods):
            prof = oracle.RiskProfile.from_design(dgp.design, dgp.cov, dgp.mu)
            ow = oracle.oracle_simplex(prof).w
            om = oracle.risk_ms(prof).m_star
        losses = np.empty(len(methods))
        info = {}
        for j, m in enumerate(methods):
            mu_hat, extra = _estimate(m, cache, dgp, ow, om)
            losses[j] = float(np.sum((mu_hat - dgp.mu) ** 2))
            info[m] = extra
        return ReplicateOutcome(rep, losses, None, info if audit else None)
    except (NestavgError, np.linalg.LinAlgError, RuntimeError) as exc:
        return ReplicateOutcome(rep, None, f"{type(exc).__name__}: {exc}")


def _run_chunk(args):
    cfg, reps, fixed, audit = args
    return [run_replicate(cfg, r, fixed, audit) for r in reps]


@dataclass(frozen=True, eq=False)
class SimResult:
    cfg: DgpConfig
    methods: tuple
    mean_loss: np.ndarray
    se: np.ndarray
    normalized: np.ndarray
    n_ok: int
    aborted: list = field(default_factory=list)
    losses: np.ndarray | None = None
    audit: list | None = None

    @property
    def normalizer(self) -> str:
        return self.cfg.normalizer

    def rows(self) -> list[dict]:
        return [
            {"method": m, "n": self.cfg.n, "r2": self.cfg.r2, "decay_param": self.cfg.decay_param,
             "mean_loss": self.mean_loss[j], "se": self.se[j], "normalized": self.normalized[j]}
            for j, m in enumerate(self.methods)
        ]


def run_study(cfg: DgpConfig, jobs: int = 1, audit: bool = False, keep_losses: bool = False) -> SimResult:
    """Run ``cfg.replications`` replicates and summarize losses per method.

    Results depend only on ``(cfg, seed)``: each replicate owns a counter-based
    stream and the summary is taken over replicates in index order.
    """
    methods = cfg.method_list
    if cfg.normalizer not in methods:
        methods = methods + (cfg.normalizer,)
        cfg = replace(cfg, methods=methods)
    fixed = make_dgp(cfg, design_rng(cfg.seed)) if cfg.fixed_design else None
    reps = list(range(cfg.replications))
    if jobs <= 1:
        outcomes = _run_chunk((cfg, reps, fixed, audit))
    else:
        chunks = [reps[i::jobs] for i in range(jobs)]
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            outcomes = [o for part in ex.map(_run_chunk, [(cfg, c, fixed, audit) for c in chunks]) for o in part]
    outcomes.sort(key=lambda o: o.rep)

    aborted = [(o.rep, o.error) for o in outcomes if o.losses is None]
    for rep, err in aborted:
        log.warning("replicate %d aborted: %s", rep, err)
    if len(aborted) > ABORT_LIMIT * cfg.replications:
        raise SimulationFailed(f"{len(aborted)} of {cfg.replications} replicates aborted; first: {aborted[0][1]}")
    L = np.array([o.losses for o in outcomes if o.losses is not None])
    mean = L.mean(axis=0)
    se = L.std(axis=0, ddof=1) / math.sqrt(L.shape[0]) if L.shape[0] > 1 else np.full(len(methods), np.nan)
    norm = mean / mean[methods.index(cfg.normalizer)]
    aud = [{"rep": o.rep, **o.audit} for o in outcomes if o.audit is not None] if audit else None
    return SimResult(cfg, methods, mean, se, norm, L.shape[0], aborted, L if keep_losses else None, aud)


SIM_COLUMNS = ("method", "n", "r2", "decay_param", "mean_loss", "se", "normalized")


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.16e}"


def write_sim_csv(path, results) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(SIM_COLUMNS)
        for res in results:
            for row in res.rows():
                wr.writerow([_fmt(row[c]) for c in SIM_COLUMNS])


# ----------------------------------------------------------------------------
# exact oracle quantities over an n-grid


def shortcut_profile(cfg: DgpConfig) -> oracle.RiskProfile:
    """Risk profile for an orthonormal design (``X^T X = n I``), no matrix work.

    Bias decrements are ``n * sum(beta_j^2)`` over each group's columns and
    variance increments are the limiting per-group traces.
    """
    n = cfg.n
    nu = cfg.boundaries
    starts = np.concatenate(([0], nu[:-1]))
    if cfg.example == "ex3":
        xi = cfg.decay_values(np.arange(1, nu.size + 1)) ** 2
        b = n * xi
    else:
        beta = coefficients(cfg)
        b = n * np.add.reduceat(beta**2, starts)
    if cfg.example == "ex2":
        v = zeta_ex2(nu.size, cfg.rho1)
    else:
        s2 = cfg.sigma2 if cfg.sigma2 is not None else 1.0
        v = s2 * np.diff(np.concatenate(([0], nu))).astype(float)
    return oracle.RiskProfile.from_increments(b, v, n, min(cfg.M_n, nu.size))


def design_profile(cfg: DgpConfig) -> oracle.RiskProfile:
    dgp = make_dgp(cfg, design_rng(cfg.seed))
    return oracle.RiskProfile.from_design(dgp.design, dgp.cov, dgp.mu)


@dataclass(frozen=True)
class DiagnosticRow:
    n: int
    M: int
    m_star: int
    m_star_star: int
    R_ms: float
    R_ma: float
    delta: float
    ratio: float
    regime: str  # "M<m**" or "M>=m**"


def oracle_diagnostics(cfg: DgpConfig, n_grid, shortcut: bool = True) -> list[DiagnosticRow]:
    rows = []
    for n in n_grid:
        c = replace(cfg, n=int(n))
        prof = shortcut_profile(c) if shortcut else design_profile(c)
        ms = oracle.risk_ms(prof)
        gap = oracle.delta_gap(prof)
        r_ma = oracle.oracle_simplex(prof).risk
        R = float(prof.R_ms[ms.m_star - 1])
        regime = "M<m**" if prof.M < ms.m_star_star else "M>=m**"
        rows.append(DiagnosticRow(int(n), prof.M, ms.m_star, ms.m_star_star, R, r_ma, gap.delta, gap.ratio, regime))
    return rows


DIAG_COLUMNS = ("n", "M", "m_star", "m_star_star", "R_ms", "R_ma", "delta", "ratio", "regime")


def write_diagnostics_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(DIAG_COLUMNS)
        for r in rows:
            wr.writerow([_fmt(getattr(r, c)) for c in DIAG_COLUMNS])


def default_jobs() -> int:
    env = os.environ.get("NESTAVG_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"NESTAVG_JOBS must be an integer, got {env!r}") from exc
    return os.cpu_count() or 1
