"""The D-iteration: fluid/history diffusion for ``X = P X + B``.

A state holds the residual fluid ``f`` and the accumulated history ``h``.
Diffusing node ``i`` moves its fluid into ``h_i`` and scatters it along
column ``i`` of ``P``; at every step ``h + f = P h + b + injected``.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .sparse import (
    CscMatrix,
    DimensionError,
    apply,
    left_perron,
    out_degrees,
)

log = logging.getLogger(__name__)

#: above this size ``run``/``eigenvector_rho1`` trust the caller's
#: precondition instead of checking it with ``left_perron``
VALIDATION_CUTOFF = 2000


class StrategyKind(enum.IntEnum):
    CYC = K.CYC
    MAX = K.MAX
    COST = K.COST
    EXPLICIT = K.EXPLICIT


class DiffusionMode(enum.IntEnum):
    ALL = K.ALL
    NEGATIVE_ONLY = K.NEGATIVE_ONLY
    POSITIVE_ONLY = K.POSITIVE_ONLY


@dataclass
class Strategy:
    """Node selection policy.

    ``EXPLICIT`` replays ``sequence`` cyclically; a run checks that every
    node occurs in it (fairness over one period).
    """

    kind: StrategyKind
    sequence: np.ndarray | None = None
    cursor: int = 0

    @classmethod
    def cyc(cls) -> Strategy:
        return cls(StrategyKind.CYC)

    @classmethod
    def max(cls) -> Strategy:
        return cls(StrategyKind.MAX)

    @classmethod
    def cost(cls) -> Strategy:
        return cls(StrategyKind.COST)

    @classmethod
    def explicit(cls, sequence) -> Strategy:
        seq = np.asarray(sequence, dtype=np.int64)
        if seq.ndim != 1 or seq.size == 0:
            raise ValueError("explicit sequence must be a non-empty 1-d list")
        return cls(StrategyKind.EXPLICIT, seq)

    @classmethod
    def parse(cls, name: str) -> Strategy:
        try:
            return {"cyc": cls.cyc, "max": cls.max, "cost": cls.cost}[name.lower()]()
        except KeyError:
            raise ValueError(f"unknown strategy {name!r}") from None

    def check_fair(self, n: int) -> None:
        if self.kind is StrategyKind.EXPLICIT:
            seq = self.sequence
            if seq.min() < 0 or seq.max() >= n:
                raise IndexError("explicit sequence refers to a node out of range")
            if np.unique(seq).size != n:
                missing = np.setdiff1d(np.arange(n), seq)
                raise ValueError(
                    f"explicit sequence is not fair: nodes {missing[:10].tolist()} never visited"
                )


def parse_mode(name: str) -> DiffusionMode:
    table = {"all": DiffusionMode.ALL, "neg": DiffusionMode.NEGATIVE_ONLY,
             "pos": DiffusionMode.POSITIVE_ONLY}
    try:
        return table[name.lower()]
    except KeyError:
        raise ValueError(f"unknown mode {name!r}") from None


@dataclass
class DiffusionState:
    f: np.ndarray
    h: np.ndarray
    b: np.ndarray
    injected_total: np.ndarray
    diffusion_count: int = 0
    link_ops: int = 0

    @classmethod
    def initial(cls, b) -> DiffusionState:
        b = np.array(b, dtype=np.float64)
        if b.ndim != 1 or not np.all(np.isfinite(b)):
            raise ValueError("b must be a finite 1-d vector")
        return cls(f=b.copy(), h=np.zeros_like(b), b=b, injected_total=np.zeros_like(b))

    @property
    def n(self) -> int:
        return self.f.shape[0]

    def residual(self) -> float:
        return float(np.abs(self.f).sum())

    def fundamental_violation(self, m: CscMatrix) -> float:
        """``max |h + f - P h - b - injected|``."""
        lhs = self.h + self.f
        rhs = apply(m, self.h) + self.b + self.injected_total
        return float(np.abs(lhs - rhs).max(initial=0.0))


@dataclass
class Solution:
    h: np.ndarray
    residual_l1: float
    residual_history: list[tuple[int, int, float]] = field(default_factory=list)
    converged: bool = False
    diffusion_count: int = 0
    link_ops: int = 0
    status: str = ""
    f: np.ndarray | None = None
    #: largest fundamental-equation violation seen (debug runs only)
    max_violation: float | None = None


def diffuse_once(state: DiffusionState, i: int, alpha: float, m: CscMatrix) -> DiffusionState:
    """Diffuse the fraction ``alpha`` of node ``i``'s fluid (in place).

    ``alpha = 1`` is the ordinary step, ``alpha = 0`` the identity (only the
    step counter moves).
    """
    if not 0 <= i < state.n:
        raise IndexError(f"node {i} out of range for n={state.n}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if m.n != state.n:
        raise DimensionError("matrix and state sizes differ")
    phi = state.f[i]
    state.diffusion_count += 1
    if phi == 0.0 or alpha == 0.0:
        return state
    amount = alpha * phi
    state.h[i] += amount
    state.f[i] = (1.0 - alpha) * phi
    lo, hi = m.col_ptr[i], m.col_ptr[i + 1]
    rows = m.row_idx[lo:hi]
    # rows are unique within a column, so fancy-index += is safe
    state.f[rows] += m.values[lo:hi] * amount
    state.link_ops += int(hi - lo)
    return state


def inject_fluid(state: DiffusionState, g) -> DiffusionState:
    g = np.asarray(g, dtype=np.float64)
    if g.shape != state.f.shape:
        raise DimensionError(f"injection has shape {g.shape}, state has {state.f.shape}")
    state.f += g
    state.injected_total += g
    return state


def _score_vector(f: np.ndarray, out: np.ndarray, kind: StrategyKind,
                  mode: DiffusionMode) -> np.ndarray:
    s = np.abs(f)
    if kind is StrategyKind.COST:
        with np.errstate(divide="ignore"):
            s = np.where(out == 0, np.inf, s / np.maximum(out, 1))
        s[f == 0] = 0.0
    if mode is DiffusionMode.NEGATIVE_ONLY:
        s[f > 0] = 0.0
    elif mode is DiffusionMode.POSITIVE_ONLY:
        s[f < 0] = 0.0
    return s


def next_index(state: DiffusionState, strategy: Strategy, mode: DiffusionMode,
               out) -> int | None:
    """Pick the next node by linear scan; ``None`` if nothing is eligible.

    This is the reference selector; ``run`` uses an indexed heap that
    makes the same choices.
    """
    out = np.asarray(out)
    scores = _score_vector(state.f, out, strategy.kind, mode)
    if not np.any(scores > 0):
        return None
    if strategy.kind in (StrategyKind.MAX, StrategyKind.COST):
        return int(np.argmax(scores))  # first maximum -> lowest index
    if strategy.kind is StrategyKind.CYC:
        i = strategy.cursor % state.n
        strategy.cursor = (i + 1) % state.n
        return i
    seq = strategy.sequence
    i = int(seq[strategy.cursor % seq.size])
    strategy.cursor = (strategy.cursor + 1) % seq.size
    return i


def _eligible(fi: float, mode: DiffusionMode) -> bool:
    if mode is DiffusionMode.NEGATIVE_ONLY:
        return fi < 0
    if mode is DiffusionMode.POSITIVE_ONLY:
        return fi > 0
    return fi != 0


def _threshold(b: np.ndarray, epsilon: float) -> float:
    return epsilon * max(1.0, float(np.abs(b).sum()))


class _Worker:
    """Kernel-side buffers for one set of owned nodes."""

    def __init__(self, m: CscMatrix, f: np.ndarray, out: np.ndarray, owner: np.ndarray,
                 wid: int, block: np.ndarray, kind: int, mode: int,
                 key: np.ndarray, pos: np.ndarray, seq: np.ndarray | None = None):
        n = m.n
        self.wid = wid
        self.kind = int(kind)
        self.mode = int(mode)
        self.seq = np.zeros(1, dtype=np.int64) if seq is None else seq
        self.ctr = np.zeros(6, dtype=np.int64)
        self.outbox = np.zeros(n)
        self.ob_mark = np.zeros(n, dtype=np.bool_)
        self.ob_list = np.zeros(n, dtype=np.int64)
        self.key = key
        self.pos = pos
        self.set_block(block, f, out)

    def set_block(self, block: np.ndarray, f: np.ndarray, out: np.ndarray) -> None:
        self.block = np.ascontiguousarray(block, dtype=np.int64)
        self.heap = np.zeros(max(self.block.size, 1), dtype=np.int64)
        K.rebuild(self.block, f, out, self.key, self.heap, self.pos, self.ctr,
                  self.kind, self.mode)
        if self.block.size:
            self.ctr[K.C_CURSOR] %= self.block.size

    def drain_outbox(self) -> tuple[np.ndarray, np.ndarray]:
        cnt = int(self.ctr[K.C_OBCOUNT])
        idx = self.ob_list[:cnt].copy()
        vals = self.outbox[idx].copy()
        self.outbox[idx] = 0.0
        self.ob_mark[idx] = False
        self.ctr[K.C_OBCOUNT] = 0
        keep = vals != 0.0
        return idx[keep], vals[keep]


def _validate_rho1(m: CscMatrix, b: np.ndarray) -> None:
    if m.n > VALIDATION_CUTOFF:
        return
    res = left_perron(m, tol=1e-11, max_iter=200_000)
    v = res.v
    # coordinates below the iteration tolerance cannot be told apart from 0
    if not res.converged or abs(res.rho - 1.0) > 1e-8 or v.min() <= 1e-9 * v.max():
        raise ValueError(
            "matrix must have a strictly positive left eigenvector for eigenvalue 1 "
            f"(got rho={res.rho:.6g}, min v={v.min():.3g}, converged={res.converged})"
        )
    s = float(v @ b)
    if abs(s) > 1e-9 * max(1.0, float(np.abs(b).sum())):
        raise ValueError(f"sigma_v(b) must be 0 for negative-only diffusion, got {s:.3g}")


def run(m: CscMatrix, b, strategy: Strategy, mode: DiffusionMode = DiffusionMode.ALL,
        epsilon: float = 1e-9, max_link_ops: int = 10**12, *,
        max_diffusions: int = 10**15, history_every: int | None = None,
        debug: bool = False, debug_tol: float = 1e-12, validate: bool = True,
        diverge_factor: float = 10.0) -> Solution:
    """Iterate selection and full diffusion until ``|F|_1 <= eps * max(1, |B|_1)``.

    ``history_every`` (default ``n``) sets the sampling period of
    ``residual_history``. With ``debug=True`` the pure-Python path is used
    and the fundamental equation is checked after every step; a violation
    above ``debug_tol * (1 + |b|_1)`` raises ``AssertionError``.

    Non-convergence is reported through ``Solution.converged`` and
    ``Solution.status``: ``"budget"``, ``"stalled"`` (no eligible node
    left) or ``"diverged"`` (residual above ``diverge_factor * |b|_1``).
    """
    b = np.array(b, dtype=np.float64)
    n = m.n
    if b.shape != (n,):
        raise DimensionError(f"b has shape {b.shape}, expected ({n},)")
    strategy.check_fair(n)
    mode = DiffusionMode(mode)
    if validate and mode is DiffusionMode.NEGATIVE_ONLY:
        _validate_rho1(m, b)
    history_every = n if history_every is None else max(1, int(history_every))
    thr = _threshold(b, epsilon)
    b_l1 = float(np.abs(b).sum())
    diverge_limit = diverge_factor * b_l1 if b_l1 > 0 else np.inf
    if debug:
        return _run_debug(m, b, strategy, mode, thr, max_link_ops, max_diffusions,
                          history_every, debug_tol, diverge_limit)

    out = out_degrees(m)
    f = b.copy()
    h = np.zeros(n)
    owner = np.zeros(n, dtype=np.int64)
    key = np.full(n, -1.0)
    pos = np.full(n, -1, dtype=np.int64)
    w = _Worker(m, f, out, owner, 0, np.arange(n), strategy.kind, mode, key, pos,
                seq=strategy.sequence)
    w.ctr[K.C_CURSOR] = strategy.cursor
    acc = np.array([float(np.abs(f).sum()), 0.0])
    sync = np.zeros(1, dtype=np.int64)
    history = [(0, 0, acc[0])]
    status = "budget"
    if acc[0] <= thr:
        status = "converged"
    else:
        # history is buffered inside the kernel; Python only drains it
        cap = 4096
        hd = np.zeros(cap, dtype=np.int64)
        hl = np.zeros(cap, dtype=np.int64)
        hr = np.zeros(cap)
        cnt = np.zeros(1, dtype=np.int64)
        while True:
            code = K.run_sampled(
                m.col_ptr, m.row_idx, m.values, out, f, h, owner,
                w.block, w.seq, key, w.heap, pos, w.ctr, acc,
                w.outbox, w.ob_mark, w.ob_list, w.kind, w.mode,
                history_every, thr, max_link_ops, max_diffusions,
                n, sync, diverge_limit, hd, hl, hr, cnt)
            c = int(cnt[0])
            history.extend(zip(hd[:c].tolist(), hl[:c].tolist(), hr[:c].tolist()))
            cnt[0] = 0
            if code == 0:
                continue
            status = {1: "converged", 2: "stalled", 3: "budget", 4: "diverged"}[code]
            break
    strategy.cursor = int(w.ctr[K.C_CURSOR])
    return _finish(m, b, f, h, history, status, thr, int(w.ctr[K.C_DIFF]),
                   int(w.ctr[K.C_LINKS]))


def _finish(m, b, f, h, history, status, thr, diffusions, links) -> Solution:
    res = float(np.abs(f).sum())
    if status == "stalled" and res <= thr:
        status = "converged"
    converged = status == "converged"
    if status == "diverged":
        log.warning("residual grew past the divergence limit; spectral radius is "
                    "probably >= 1 for mode ALL")
    elif not converged:
        log.info("D-iteration stopped without converging (%s), residual %.3g", status, res)
    return Solution(h=h, residual_l1=res, residual_history=history, converged=converged,
                    diffusion_count=diffusions, link_ops=links, status=status, f=f)


def _run_debug(m, b, strategy, mode, thr, max_link_ops, max_diffusions,
               history_every, debug_tol, diverge_limit) -> Solution:
    state = DiffusionState.initial(b)
    out = out_degrees(m)
    scale = 1.0 + float(np.abs(b).sum())
    history = [(0, 0, state.residual())]
    status = "converged" if state.residual() <= thr else "budget"
    worst = 0.0
    while status == "budget":
        if state.link_ops >= max_link_ops or state.diffusion_count >= max_diffusions:
            break
        i = next_index(state, strategy, mode, out)
        if i is None:
            status = "stalled"
            break
        alpha = 1.0 if _eligible(state.f[i], mode) else 0.0
        diffuse_once(state, i, alpha, m)
        viol = state.fundamental_violation(m)
        worst = max(worst, viol)
        if viol > debug_tol * scale:
            raise AssertionError(
                f"fundamental equation violated by {viol:.3e} at step {state.diffusion_count}"
            )
        res = state.residual()
        if state.diffusion_count % history_every == 0:
            history.append((state.diffusion_count, state.link_ops, res))
        if res <= thr:
            status = "converged"
        elif res > diverge_limit:
            status = "diverged"
    if history[-1][0] != state.diffusion_count:
        history.append((state.diffusion_count, state.link_ops, state.residual()))
    sol = _finish(m, b, state.f, state.h, history, status, thr,
                  state.diffusion_count, state.link_ops)
    sol.max_violation = worst
    return sol


def trace_residuals(m: CscMatrix, b, strategy: Strategy,
                    mode: DiffusionMode = DiffusionMode.ALL, n_steps: int = 10_000):
    """Exact ``|F|_1`` after each of up to ``n_steps`` steps.

    Returns ``(residual, diffusions, link_ops)`` arrays, each prefixed with
    the initial state. Used to audit the rate bounds step by step.
    """
    b = np.array(b, dtype=np.float64)
    n = m.n
    strategy.check_fair(n)
    out = out_degrees(m)
    f = b.copy()
    h = np.zeros(n)
    owner = np.zeros(n, dtype=np.int64)
    key = np.full(n, -1.0)
    pos = np.full(n, -1, dtype=np.int64)
    w = _Worker(m, f, out, owner, 0, np.arange(n), strategy.kind, mode, key, pos,
                seq=strategy.sequence)
    acc = np.array([K.l1(f), 0.0])
    tr = np.full(n_steps, np.nan)
    td = np.zeros(n_steps, dtype=np.int64)
    tl = np.zeros(n_steps, dtype=np.int64)
    K.run_sequential(m.col_ptr, m.row_idx, m.values, out, f, h, owner,
                     w.block, w.seq, key, w.heap, pos, w.ctr, acc,
                     w.outbox, w.ob_mark, w.ob_list, w.kind, int(mode),
                     n_steps, -1.0, 2**62, 2**62, 2**62, np.zeros(1, dtype=np.int64),
                     np.inf, tr, td, tl)
    done = ~np.isnan(tr)
    res = np.concatenate([[K.l1(b)], tr[done]])
    return res, np.concatenate([[0], td[done]]), np.concatenate([[0], tl[done]])


def rate_bound_violations(residuals, counts, f0_l1: float, d: float, period: int) -> int:
    """Number of samples with ``|F| > d**floor(count/period) * |F_0|``."""
    counts = np.asarray(counts)
    bound = d ** (counts // period) * f0_l1
    return int(np.count_nonzero(np.asarray(residuals) > bound))


def rho1_seed(m: CscMatrix) -> np.ndarray:
    """``P e - e`` with ``e`` the uniform vector of mass one."""
    n = m.n
    e = np.full(n, 1.0 / n)
    return apply(m, e) - e


def eigenvector_rho1(m: CscMatrix, epsilon: float = 1e-10, budget: int = 10**12,
                     strategy: Strategy | None = None, validate: bool = True) -> Solution:
    """Eigenvector for eigenvalue 1 via negative-only diffusion of ``P e - e``.

    The returned ``h`` satisfies ``P(h + e) = h + e`` up to ``epsilon`` and
    ``h + e`` peaks at ``1/N`` on every strongly connected component of
    spectral radius one.
    """
    b = rho1_seed(m)
    strategy = Strategy.max() if strategy is None else strategy
    return run(m, b, strategy, DiffusionMode.NEGATIVE_ONLY, epsilon, budget,
               validate=validate)


def pagerank_system(adjacency: CscMatrix, d: float = 0.85) -> tuple[CscMatrix, np.ndarray]:
    """Column-normalise ``adjacency`` and damp it by ``d``.

    Dangling columns stay empty, so their fluid is absorbed. Returns
    ``(d * P_s, (1 - d) * e)``.
    """
    if not 0.0 < d < 1.0:
        raise ValueError(f"damping factor must lie in (0, 1), got {d}")
    n = adjacency.n
    col = adjacency.col_of_entry()
    sums = np.zeros(n)
    np.add.at(sums, col, adjacency.values)
    values = d * adjacency.values / sums[col]
    m = CscMatrix(n, adjacency.col_ptr, adjacency.row_idx, values)
    b = np.full(n, (1.0 - d) / n) if n else np.zeros(0)
    return m, b


def stochastic(adjacency: CscMatrix) -> CscMatrix:
    """Column-normalised copy (empty columns stay empty)."""
    col = adjacency.col_of_entry()
    sums = np.zeros(adjacency.n)
    np.add.at(sums, col, adjacency.values)
    return CscMatrix(adjacency.n, adjacency.col_ptr, adjacency.row_idx,
                     adjacency.values / sums[col])

