"""Nested candidate designs and their incremental projections.

Model ``m`` uses the first ``nu[m-1]`` columns of ``X``.  The design keeps a
single orthonormal basis ``Q`` whose leading ``nu[m-1]`` columns span the
columns of model ``m``, so that ``P_m - P_{m-1}`` is ``Q_m Q_m^T`` for the
column block ``Q_m`` of group ``m``.  No ``n x n`` matrix is ever formed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange, RankDeficient

RANK_TOL = 1e-10


@dataclass(frozen=True)
class NestedDesign:
    """Immutable nested design. Build it with :func:`build`."""

    X: np.ndarray
    nu: np.ndarray
    Q: np.ndarray
    rank_flags: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return int(self.nu[-1])

    @property
    def q(self) -> int:
        return len(self.nu)

    @property
    def group_sizes(self) -> np.ndarray:
        return np.diff(np.concatenate(([0], self.nu)))

    @property
    def max_group_size(self) -> int:
        return int(self.group_sizes.max())

    def _bounds(self, m: int) -> tuple[int, int]:
        if not 1 <= m <= self.q:
            raise IndexOutOfRange(f"group index {m} outside 1..{self.q}")
        lo = 0 if m == 1 else int(self.nu[m - 2])
        return lo, int(self.nu[m - 1])

    def block(self, m: int) -> np.ndarray:
        """Orthonormal columns spanning group ``m`` after removing groups ``< m``."""
        lo, hi = self._bounds(m)
        return self.Q[:, lo:hi]

    @property
    def Q_blocks(self) -> list[np.ndarray]:
        return [self.block(m) for m in range(1, self.q + 1)]

    def coords(self, v: np.ndarray) -> np.ndarray:
        """Coordinates ``Q^T v`` of ``v`` (vector or ``n x k`` matrix)."""
        v = np.asarray(v, dtype=float)
        if v.shape[0] != self.n:
            raise DimensionMismatch(f"expected leading dimension {self.n}, got {v.shape[0]}")
        return self.Q.T @ v

    def truncate(self, M: int) -> "NestedDesign":
        """Design restricted to the first ``M`` groups."""
        if not 1 <= M <= self.q:
            raise IndexOutOfRange(f"cannot keep {M} of {self.q} groups")
        k = int(self.nu[M - 1])
        return NestedDesign(self.X[:, :k], self.nu[:M].copy(), self.Q[:, :k], self.rank_flags[:M])


def build(X, nu) -> NestedDesign:
    """Build a nested design from ``X`` and group boundaries ``nu``.

    ``nu`` lists the cumulative column counts ``nu_1 < ... < nu_q = p``.  A
    group whose columns add (relatively) less than ``1e-10`` of new norm to
    the span of all earlier columns raises :class:`RankDeficient`.
    """
    X = np.array(X, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch("X must be a 2-d array")
    n, p = X.shape
    nu = np.asarray(nu, dtype=int).ravel()
    if nu.size == 0 or nu[0] <= 0 or np.any(np.diff(nu) <= 0):
        raise DimensionMismatch(f"boundaries must be strictly increasing and positive: {nu.tolist()}")
    if nu[-1] != p:
        raise DimensionMismatch(f"last boundary {nu[-1]} does not match column count {p}")
    if p > n:
        raise DimensionMismatch(f"need p < n, got p={p}, n={n}")

    # Householder QR: the leading k columns of Q span the leading k columns of X.
    Q, R = np.linalg.qr(X, mode="reduced")
    col_norms = np.linalg.norm(X, axis=0)
    dependent = np.abs(np.diag(R)) < RANK_TOL * np.where(col_norms > 0, col_norms, 1.0)
    group_of = np.searchsorted(nu, np.arange(p), side="right") + 1
    if dependent.any():
        raise RankDeficient(int(group_of[np.argmax(dependent)]))
    if p == n:
        raise DimensionMismatch(f"need p < n, got p={p}, n={n}")
    Q.setflags(write=False)
    X.setflags(write=False)
    nu.setflags(write=False)
    return NestedDesign(X, nu, Q, np.ones(len(nu), dtype=bool))


def project_increment(d: NestedDesign, m: int, v) -> np.ndarray:
    """Return ``(P_m - P_{m-1}) v``."""
    B = d.block(m)
    v = np.asarray(v, dtype=float)
    if v.shape[0] != d.n:
        raise DimensionMismatch(f"expected length {d.n}, got {v.shape[0]}")
    return B @ (B.T @ v)


def project(d: NestedDesign, m: int, v) -> np.ndarray:
    """Return ``P_m v`` (``m = 0`` gives zero)."""
    v = np.asarray(v, dtype=float)
    if m == 0:
        return np.zeros_like(v)
    _, hi = d._bounds(m)
    B = d.Q[:, :hi]
    return B @ (B.T @ v)


def group_sums(d: NestedDesign, values: np.ndarray) -> np.ndarray:
    """Sum a per-column array (length ``p``, leading axis) within each group."""
    starts = np.concatenate(([0], d.nu[:-1]))
    return np.add.reduceat(values, starts, axis=0)


def quad_form_increments(d: NestedDesign, mu) -> np.ndarray:
    """Per-group ``mu^T (P_m - P_{m-1}) mu`` for ``m = 1..q``."""
    c = d.coords(mu)
    return group_sums(d, c * c)


def load_csv(path, delimiter=",") -> np.ndarray:
    """Read a row-major design matrix, skipping a header row if present."""
    with open(path) as fh:
        first = fh.readline()
    try:
        [float(tok) for tok in first.strip().split(delimiter)]
        skip = 0
    except ValueError:
        skip = 1
    return np.loadtxt(path, delimiter=delimiter, skiprows=skip, ndmin=2)
