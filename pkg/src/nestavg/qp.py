"""Convex quadratic minimization over the weight sets used for averaging.

Minimizes ``0.5 * w^T H w + g^T w`` over

* ``simplex``: ``w >= 0, sum(w) = 1``
* ``box``: ``0 <= w <= 1``
* ``grid``: simplex points whose coordinates are multiples of ``1/N``

The continuous sets use a primal active-set method.  Steps inside the free
subspace are taken in the eigenbasis of the reduced Hessian, so a singular
``H`` is handled by moving along null directions until a bound blocks.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space

from .errors import DimensionMismatch, InvalidN, NotPsd, TooLargeGrid

FEASIBLE_SETS = ("simplex", "box", "grid")
ENUM_BUDGET = 10**6
FW_THRESHOLD = 200


@dataclass(frozen=True)
class QpProblem:
    H: np.ndarray
    g: np.ndarray
    feasible_set: str = "simplex"
    N: int | None = None

    def __post_init__(self):
        H = np.asarray(self.H, dtype=float)
        g = np.asarray(self.g, dtype=float).ravel()
        if H.ndim != 2 or H.shape[0] != H.shape[1] or H.shape[0] != g.size:
            raise DimensionMismatch(f"H {H.shape} and g {g.shape} do not agree")
        if self.feasible_set not in FEASIBLE_SETS:
            raise ValueError(f"unknown feasible set {self.feasible_set!r}")
        if self.feasible_set == "grid" and (self.N is None or int(self.N) < 1):
            raise InvalidN(f"grid needs N >= 1, got {self.N}")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "g", g)

    @property
    def M(self) -> int:
        return self.g.size

    def objective(self, w) -> float:
        w = np.asarray(w, dtype=float)
        return float(0.5 * w @ self.H @ w + self.g @ w)


@dataclass(frozen=True)
class QpResult:
    w: np.ndarray
    objective: float
    feasible_set: str
    kkt_residual: float
    iterations: int
    method: str
    heuristic: bool = False


def _scale(H, g) -> float:
    return max(float(np.max(np.abs(H))) if H.size else 0.0, float(np.max(np.abs(g))) if g.size else 0.0, 1e-300)


def prepare_hessian(H: np.ndarray) -> np.ndarray:
    """Symmetrize, check PSD and clip mildly negative eigenvalues."""
    H = 0.5 * (H + H.T)
    norm = np.linalg.norm(H, 2) if H.size else 0.0
    lam, V = np.linalg.eigh(H)
    if lam.size and lam[0] < -1e-8 * max(norm, 1e-300):
        raise NotPsd(f"smallest eigenvalue {lam[0]:.3e} relative to norm {norm:.3e}")
    if lam.size and lam[0] < 0:
        H = (V * np.maximum(lam, 0.0)) @ V.T
        H = 0.5 * (H + H.T)
    return H


def kkt_residual(H, g, w, feasible_set: str) -> float:
    """Relative violation of the first-order optimality conditions at ``w``."""
    r = H @ w + g
    tol = 1e-12
    if feasible_set == "simplex":
        free = w > tol
        lam = -np.mean(r[free]) if free.any() else -np.min(r)
        s = r + lam
        viol = np.where(free, np.abs(s), np.maximum(-s, 0.0))
    else:
        lower = w <= tol
        upper = w >= 1 - tol
        viol = np.where(lower, np.maximum(-r, 0.0), np.where(upper, np.maximum(r, 0.0), np.abs(r)))
    return float(np.max(viol)) / _scale(H, g) if viol.size else 0.0


def _active_set(H, g, simplex: bool, max_iter: int | None = None, x0=None):
    """Primal active-set method; ``x0`` (feasible) seeds the working set."""
    M = g.size
    scale = _scale(H, g)
    eig_tol = 1e-13 * scale
    mult_tol = 1e-13 * scale
    if max_iter is None:
        max_iter = 50 * M + 200

    if x0 is not None:
        x = np.clip(np.asarray(x0, dtype=float), 0.0, 1.0)
        at_lower = x <= 1e-12
        at_upper = np.zeros(M, dtype=bool) if simplex else x >= 1 - 1e-12
        if simplex:
            x[at_lower] = 0.0
            x /= x.sum()
    elif simplex:
        k = int(np.argmin(0.5 * np.diag(H) + g))
        x = np.zeros(M)
        x[k] = 1.0
        at_lower = np.ones(M, dtype=bool)
        at_lower[k] = False
        at_upper = np.zeros(M, dtype=bool)
    else:
        x = np.zeros(M)
        at_lower = np.ones(M, dtype=bool)
        at_upper = np.zeros(M, dtype=bool)
    x[at_upper] = 1.0
    # a full unblocked Newton step lands on the working-set minimizer exactly,
    # so the next iteration goes straight to the multiplier test
    solved = False

    for it in range(1, max_iter + 1):
        F = np.flatnonzero(~(at_lower | at_upper))
        r = H @ x + g
        p = np.zeros(M)
        unbounded = False
        if F.size and not solved:
            Z = null_space(np.ones((1, F.size))) if simplex else np.eye(F.size)
            if Z.shape[1]:
                Hr = Z.T @ H[np.ix_(F, F)] @ Z
                lam, V = np.linalg.eigh(0.5 * (Hr + Hr.T))
                gv = V.T @ (Z.T @ r[F])
                flat = lam <= eig_tol
                if np.any(flat & (np.abs(gv) > mult_tol)):
                    unbounded = True
                    dv = np.where(flat, -gv, 0.0)
                else:
                    dv = np.where(flat, 0.0, -gv / np.where(flat, 1.0, lam))
                p[F] = Z @ (V @ dv)

        if solved or np.max(np.abs(p), initial=0.0) <= 1e-14 * (1.0 + np.max(np.abs(x))):
            solved = False
            # stationary on the working set: inspect multipliers of active bounds
            if simplex:
                lam_eq = -np.mean(r[F]) if F.size else 0.0
                viol = np.where(at_lower, -(r + lam_eq), -np.inf)
            else:
                viol = np.where(at_lower, -r, np.where(at_upper, r, -np.inf))
            j = int(np.argmax(viol))
            if viol[j] <= mult_tol:
                return x, it
            at_lower[j] = False
            at_upper[j] = False
            continue

        alpha = np.inf if unbounded else 1.0
        block, block_upper = -1, False
        for i in F:
            if p[i] < 0:
                a = -x[i] / p[i]
                if a < alpha:
                    alpha, block, block_upper = a, i, False
            elif not simplex and p[i] > 0:
                a = (1.0 - x[i]) / p[i]
                if a < alpha:
                    alpha, block, block_upper = a, i, True
        if not np.isfinite(alpha):
            raise RuntimeError("unbounded direction without a blocking bound")
        x = x + alpha * p
        solved = block < 0 and not unbounded
        if block >= 0:
            if block_upper:
                x[block] = 1.0
                at_upper[block] = True
            else:
                x[block] = 0.0
                at_lower[block] = True
        x[at_lower] = 0.0
        x[at_upper] = 1.0
    raise RuntimeError(f"active-set did not converge in {max_iter} iterations")


def _frank_wolfe(H, g, simplex: bool, iters: int = 20000, tol: float = 1e-12):
    M = g.size
    x = np.full(M, 1.0 / M) if simplex else np.zeros(M)
    for it in range(1, iters + 1):
        r = H @ x + g
        if simplex:
            s = np.zeros(M)
            s[int(np.argmin(r))] = 1.0
        else:
            s = (r < 0).astype(float)
        d = s - x
        gap = -float(r @ d)
        if gap <= tol * _scale(H, g):
            return x, it
        curv = float(d @ H @ d)
        step = 1.0 if curv <= 0 else min(1.0, gap / curv)
        x = x + step * d
    return x, iters


def _compositions(N: int, M: int):
    """All length-``M`` nonnegative integer vectors summing to ``N``, lexicographically."""
    for bars in itertools.combinations(range(N + M - 1), M - 1):
        prev = -1
        out = []
        for b in bars:
            out.append(b - prev - 1)
            prev = b
        out.append(N + M - 2 - prev)
        yield out


def grid_size(N: int, M: int) -> int:
    return math.comb(N + M - 1, M - 1)


def _enumerate_grid(prob: QpProblem, chunk: int = 1 << 15):
    N, M = int(prob.N), prob.M
    best_val, best_w = np.inf, None
    gen = _compositions(N, M)
    while True:
        rows = list(itertools.islice(gen, chunk))
        if not rows:
            break
        W = np.asarray(rows, dtype=float) / N
        vals = 0.5 * np.einsum("ij,ij->i", W @ prob.H, W) + W @ prob.g
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best_val, best_w = float(vals[k]), W[k].copy()
    return best_w


def _round_to_grid(w: np.ndarray, N: int) -> np.ndarray:
    """Largest-remainder rounding of a simplex point to multiples of ``1/N``."""
    scaled = w * N
    base = np.floor(scaled + 1e-12)
    short = int(N - base.sum())
    order = np.argsort(-(scaled - base), kind="stable")
    base[order[:short]] += 1
    return base / N


def solve(prob: QpProblem, allow_heuristic: bool = True, enum_budget: int = ENUM_BUDGET) -> QpResult:
    """Minimize the problem's objective over its feasible set."""
    H = prepare_hessian(prob.H)
    g = prob.g
    M = prob.M
    fs = prob.feasible_set

    if fs == "grid":
        N = int(prob.N)
        if grid_size(N, M) <= enum_budget:
            w = _enumerate_grid(QpProblem(H, g, "grid", N))
            return QpResult(w, prob.objective(w), fs, float("nan"), grid_size(N, M), "enumeration")
        if not allow_heuristic:
            raise TooLargeGrid(f"{grid_size(N, M)} grid points exceed budget {enum_budget}")
        cont = solve(QpProblem(H, g, "simplex"))
        w = _round_to_grid(cont.w, N)
        return QpResult(w, prob.objective(w), fs, float("nan"), cont.iterations, "rounding", heuristic=True)

    simplex = fs == "simplex"
    lam_min = np.linalg.eigvalsh(H)[0] if M else 0.0
    Hs = H
    if lam_min < 1e-10 * _scale(H, g):
        # Tikhonov nudge picks the minimum-norm point among the minimizers
        Hs = H + 1e-10 * _scale(H, g) * np.eye(M)
    if M > FW_THRESHOLD:
        # conditional gradient finds the active face cheaply; the active-set
        # pass then removes its slow sublinear tail
        w0, it0 = _frank_wolfe(Hs, g, simplex, iters=2000, tol=1e-10)
        w, it = _active_set(Hs, g, simplex, x0=w0)
        it += it0
        method = "frank-wolfe"
    else:
        w, it = _active_set(Hs, g, simplex)
        method = "active-set"
    w = np.clip(w, 0.0, 1.0)
    if simplex:
        w = w / w.sum()
    return QpResult(w, prob.objective(w), fs, kkt_residual(H, g, w, fs), it, method)
