"""Column-compressed non-negative sparse matrices and the vector helpers
shared by the diffusion engine, the baselines and the simulator.
"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class DimensionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CscMatrix:
    """Square non-negative matrix stored by column.

    ``col_ptr[j]:col_ptr[j + 1]`` delimits the stored entries of column ``j``
    in ``row_idx`` / ``values``. Rows are strictly increasing within a column.
    Instances are immutable; the arrays are flagged read-only.
    """

    n: int
    col_ptr: np.ndarray
    row_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        col_ptr = np.ascontiguousarray(self.col_ptr, dtype=np.int64)
        row_idx = np.ascontiguousarray(self.row_idx, dtype=np.int64)
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        n = int(self.n)
        if n < 0:
            raise ValueError(f"dimension must be >= 0, got {n}")
        if col_ptr.shape != (n + 1,):
            raise ValueError(f"col_ptr must have length n+1={n + 1}")
        if col_ptr[0] != 0 or np.any(np.diff(col_ptr) < 0):
            raise ValueError("col_ptr must start at 0 and be non-decreasing")
        nnz = int(col_ptr[-1])
        if row_idx.shape != (nnz,) or values.shape != (nnz,):
            raise ValueError("row_idx/values length must equal col_ptr[n]")
        if nnz:
            if row_idx.min() < 0 or row_idx.max() >= n:
                raise ValueError("row index out of range")
            cols = np.repeat(np.arange(n), np.diff(col_ptr))
            same = cols[1:] == cols[:-1]
            if np.any(row_idx[1:][same] <= row_idx[:-1][same]):
                raise ValueError("row indices must strictly increase within a column")
            if not np.all(np.isfinite(values)) or values.min() < 0:
                raise ValueError("matrix entries must be finite and non-negative")
        for a in (col_ptr, row_idx, values):
            a.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "col_ptr", col_ptr)
        object.__setattr__(self, "row_idx", row_idx)
        object.__setattr__(self, "values", values)

    @property
    def nnz(self) -> int:
        return int(self.col_ptr[-1])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    def col_of_entry(self) -> np.ndarray:
        """Column index of every stored entry (length nnz)."""
        return np.repeat(np.arange(self.n), np.diff(self.col_ptr))

    def scaled(self, factor: float) -> CscMatrix:
        if factor < 0:
            raise ValueError("scale factor must be non-negative")
        return CscMatrix(self.n, self.col_ptr, self.row_idx, self.values * factor)

    def toarray(self) -> np.ndarray:
        dense = np.zeros((self.n, self.n))
        dense[self.row_idx, self.col_of_entry()] = self.values
        return dense

    def transpose(self) -> CscMatrix:
        return csc_from_arrays(self.col_of_entry(), self.row_idx, self.values, self.n)

    @classmethod
    def from_dense(cls, a) -> CscMatrix:
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError(f"expected a square matrix, got shape {a.shape}")
        cols, rows = np.nonzero(a.T)
        return csc_from_arrays(rows, cols, a[rows, cols], a.shape[0])


class ColumnView(NamedTuple):
    rows: np.ndarray
    values: np.ndarray


def csc_from_arrays(rows, cols, weights, n: int) -> CscMatrix:
    """Vectorised construction; duplicates are summed, zeros dropped."""
    rows = np.asarray(rows, dtype=np.int64).ravel()
    cols = np.asarray(cols, dtype=np.int64).ravel()
    weights = np.asarray(weights, dtype=np.float64).ravel()
    if not (rows.shape == cols.shape == weights.shape):
        raise DimensionError("rows, cols and weights must have equal length")
    if rows.size:
        bad = (rows < 0) | (rows >= n) | (cols < 0) | (cols >= n)
        if bad.any():
            k = int(np.flatnonzero(bad)[0])
            raise IndexError(
                f"edge #{k} ({rows[k]}, {cols[k]}) out of range for n={n}"
            )
        neg = (weights < 0) | ~np.isfinite(weights)
        if neg.any():
            k = int(np.flatnonzero(neg)[0])
            raise ValueError(
                f"edge #{k} ({rows[k]}, {cols[k]}) has invalid weight {weights[k]!r}"
            )
    order = np.lexsort((rows, cols))
    rows, cols, weights = rows[order], cols[order], weights[order]
    if rows.size:
        first = np.ones(rows.size, dtype=bool)
        first[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
        starts = np.flatnonzero(first)
        weights = np.add.reduceat(weights, starts)
        rows, cols = rows[starts], cols[starts]
        keep = weights != 0
        rows, cols, weights = rows[keep], cols[keep], weights[keep]
    col_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(cols, minlength=n), out=col_ptr[1:])
    return CscMatrix(n, col_ptr, rows, weights)


def csc_from_edges(edges: Iterable[tuple[int, int, float]], n: int) -> CscMatrix:
    """Build a matrix from ``(row, col, weight)`` triples.

    Duplicate ``(row, col)`` pairs are summed and zero weights dropped.
    Raises ``IndexError`` for out-of-range indices and ``ValueError`` for
    negative weights.
    """
    edges = list(edges)
    if not edges:
        return csc_from_arrays([], [], [], n)
    rows, cols, weights = zip(*edges)
    return csc_from_arrays(rows, cols, weights, n)


def column(m: CscMatrix, j: int) -> ColumnView:
    """Stored entries of column ``j`` as read-only views (no copy)."""
    if not 0 <= j < m.n:
        raise IndexError(f"column {j} out of range for n={m.n}")
    lo, hi = m.col_ptr[j], m.col_ptr[j + 1]
    return ColumnView(m.row_idx[lo:hi], m.values[lo:hi])


def _check_vec(x, n: int, name: str = "x") -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (n,):
        raise DimensionError(f"{name} has shape {x.shape}, expected ({n},)")
    return x


def apply(m: CscMatrix, x) -> np.ndarray:
    """Return ``P @ x`` by scattering each column scaled by ``x[j]``."""
    x = _check_vec(x, m.n)
    contrib = m.values * x[m.col_of_entry()]
    return np.bincount(m.row_idx, weights=contrib, minlength=m.n).astype(np.float64)


def apply_transpose(m: CscMatrix, v) -> np.ndarray:
    """Return ``P.T @ v`` (i.e. the row vector ``v^T P``)."""
    v = _check_vec(v, m.n, "v")
    prod = m.values * v[m.row_idx]
    out = np.zeros(m.n)
    nonempty = np.flatnonzero(np.diff(m.col_ptr))
    if nonempty.size:
        out[nonempty] = np.add.reduceat(prod, m.col_ptr[nonempty])
    return out


def weighted_l1(x, v) -> float:
    """``sum(|v_i * x_i|)``; the plain L1 norm when ``v`` is all ones."""
    x = np.asarray(x, dtype=np.float64)
    v = _check_vec(v, x.shape[0], "v")
    return float(np.abs(v * x).sum())


def sigma_v(x, v) -> float:
    """Signed weighted sum ``sum(v_i * x_i)``."""
    x = np.asarray(x, dtype=np.float64)
    v = _check_vec(v, x.shape[0], "v")
    return float(np.dot(v, x))


def out_degrees(m: CscMatrix) -> np.ndarray:
    return np.diff(m.col_ptr)


def column_sums(m: CscMatrix) -> np.ndarray:
    return apply_transpose(m, np.ones(m.n))


class PerronResult(NamedTuple):
    rho: float
    v: np.ndarray
    residual: float
    iterations: int
    converged: bool


def left_perron(m: CscMatrix, tol: float = 1e-12, max_iter: int = 100_000) -> PerronResult:
    """Dominant left eigenpair of a non-negative matrix by power iteration.

    Iterates ``v <- (v^T P + v^T) / 2`` from the uniform vector, normalised
    in L1 at every step. The identity shift keeps periodic irreducible
    matrices from oscillating and does not move the eigenvector; the
    eigenvalue is recovered as ``rho = 2 * mu - 1``.

    On non-convergence the partial result is returned with
    ``converged=False`` and the achieved residual ``||v^T P - rho v^T||_1``.
    """
    n = m.n
    if n == 0:
        return PerronResult(0.0, np.zeros(0), 0.0, 0, True)
    v = np.full(n, 1.0 / n)
    rho, residual = 0.0, np.inf
    for it in range(1, max_iter + 1):
        w = apply_transpose(m, v)
        rho = float(w.sum())  # sum(v) == 1 so this is the Rayleigh-type estimate
        residual = float(np.abs(w - rho * v).sum())
        if residual <= tol:
            return PerronResult(rho, v, residual, it, True)
        s = 0.5 * (w + v)
        total = s.sum()
        if total == 0.0:
            return PerronResult(0.0, v, residual, it, False)
        v = s / total
    return PerronResult(rho, v, residual, max_iter, False)
