"""Baseline iterations and a dense direct solver used as an oracle."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .sparse import CscMatrix, DimensionError, apply

DIRECT_SOLVE_MAX_N = 2000


class BaselineKind(enum.Enum):
    SPI_R = "sPI-R"
    SPI_C = "sPI-C"
    SPI_CR = "sPI-Cr"
    API_R = "aPI-R"


class SingularSystemError(np.linalg.LinAlgError):
    pass


def direct_solve(m: CscMatrix, b) -> np.ndarray:
    """Solve ``(I - P) x = b`` densely (LU with partial pivoting)."""
    n = m.n
    if n > DIRECT_SOLVE_MAX_N:
        raise ValueError(f"direct_solve limited to n <= {DIRECT_SOLVE_MAX_N}, got {n}")
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (n,):
        raise DimensionError(f"b has shape {b.shape}, expected ({n},)")
    a = np.eye(n) - m.toarray()
    try:
        x = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"I - P is singular: {exc}") from exc
    res = np.abs(a @ x - b).sum()
    if not np.isfinite(res) or res > 1e-10 * (1.0 + np.abs(b).sum()):
        raise SingularSystemError(f"I - P is numerically singular (residual {res:.3g})")
    return x


def power_sweep(m: CscMatrix, x, b) -> np.ndarray:
    """One synchronised sweep ``P x + b``."""
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (m.n,):
        raise DimensionError(f"b has shape {b.shape}, expected ({m.n},)")
    return apply(m, x) + b


@dataclass
class SweepResult:
    x: np.ndarray
    sweeps: int
    residual_l1: float
    converged: bool
    history: list


def iterate_sweeps(m: CscMatrix, b, x0=None, epsilon: float = 1e-9,
                   max_sweeps: int = 100_000) -> SweepResult:
    """Repeat :func:`power_sweep` until ``|x_{k+1} - x_k|_1 <= eps * max(1, |b|_1)``.

    ``|x_{k+1} - x_k|`` is the equation residual at ``x_k``; the returned
    ``x`` is the last sweep and ``sweeps`` counts every sweep computed.
    """
    b = np.asarray(b, dtype=np.float64)
    x = np.zeros(m.n) if x0 is None else np.array(x0, dtype=np.float64)
    thr = epsilon * max(1.0, float(np.abs(b).sum()))
    history = []
    for k in range(1, max_sweeps + 1):
        y = power_sweep(m, x, b)
        res = float(np.abs(y - x).sum())
        history.append((k, res))
        x = y
        if res <= thr:
            return SweepResult(x, k, res, True, history)
    return SweepResult(x, max_sweeps, res, False, history)
