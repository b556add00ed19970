"""Cycle-cost comparison grid: row/column power iterations against
distributed diffusion on a uniform random graph, for several processor
counts.

Every method solves the same problem to the same residual threshold and
reports its makespan in simulated cycles. ``normalized_speed`` is the
makespan of ``sPI-R`` with one processor divided by the cell's makespan.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import distsim
from .cost import CostLedger, CostParams, price, sync_column_work, sync_row_work
from .engine import DiffusionMode, Strategy, pagerank_system, rho1_seed, run, stochastic
from .graphs import uniform_random_graph
from .reference import iterate_sweeps
from .sparse import CscMatrix

log = logging.getLogger(__name__)

METHODS = ("sPI-R", "aPI-R", "sPI-C", "sPI-Cr", "DI+COST")
K_GRID = (1, 2, 4, 8, 16, 32, 64, 128)


class BenchError(RuntimeError):
    pass


@dataclass
class BenchConfig:
    n: int = 128
    links: int = 1652
    #: "undirected" draws ``links`` unordered pairs (a 128/1652 graph then
    #: has mean degree 25.6); "directed" stops at ``links`` stored entries
    link_count: str = "undirected"
    seed: int = 1
    #: "eigen": P x = x with P column stochastic; "pagerank": x = d P x + b
    system: str = "eigen"
    d: float = 0.85
    epsilon: float = 1e-2
    ks: tuple = K_GRID
    methods: tuple = METHODS
    cost: CostParams = field(default_factory=CostParams)
    delay_bound: int = 0
    exchange_period: int = 1
    delay_seed: int = 0

    def __post_init__(self):
        if any(k < 1 or k > self.n for k in self.ks):
            raise ValueError(f"every K must lie in [1, {self.n}], got {self.ks}")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
        if self.system not in ("eigen", "pagerank"):
            raise ValueError(f"system must be 'eigen' or 'pagerank', got {self.system!r}")


@dataclass
class Cell:
    method: str
    k: int
    makespan: int
    ledger: CostLedger
    iterations: int
    converged: bool
    normalized_speed: float = float("nan")


@dataclass
class Problem:
    """``x = P x + b`` solved by the sweep methods from ``x0`` and by
    diffusion from fluid ``b_di``; both reach the same ``x``."""

    p: CscMatrix
    b: np.ndarray
    x0: np.ndarray
    b_di: np.ndarray
    seed_cost: bool
    homogeneous: bool


def build_problem(cfg: BenchConfig, adjacency: CscMatrix | None = None) -> Problem:
    if adjacency is None:
        e = uniform_random_graph(cfg.n, cfg.links, seed=cfg.seed, count=cfg.link_count)
        adjacency = e.to_matrix()
    n = adjacency.n
    if cfg.system == "eigen":
        p = stochastic(adjacency)
        e0 = np.full(n, 1.0 / n)
        # diffusion computes h = x - e from fluid P e - e
        return Problem(p, np.zeros(n), e0, rho1_seed(p), True, True)
    p, b = pagerank_system(adjacency, cfg.d)
    return Problem(p, b, np.zeros(n), b, False, True)


def _sync_cell(prob: Problem, method: str, k: int, sweeps: int, converged: bool,
               cost: CostParams) -> Cell:
    part = distsim.partition_uniform(prob.p.n, k)
    ledger = CostLedger(k)
    per_pid = []
    for pid in range(k):
        if method == "sPI-R":
            work = sync_row_work(prob.p, part.owner, k, pid)
        else:
            work = sync_column_work(prob.p, part.owner, pid,
                                    homogeneous=method == "sPI-Cr" and prob.homogeneous)
        ledger.charge(pid, *(sweeps * w for w in work))
        per_pid.append(price(cost, *work))
    return Cell(method, k, sweeps * max(per_pid), ledger, sweeps, converged)


def run_cell(prob: Problem, method: str, k: int, cfg: BenchConfig, sweeps=None) -> Cell:
    """Makespan of one ``(method, K)`` combination."""
    n = prob.p.n
    part = distsim.partition_uniform(n, k)
    simcfg = distsim.SimConfig(k=k, delay_bound=cfg.delay_bound,
                               exchange_period=cfg.exchange_period, seed=cfg.delay_seed,
                               cost=cfg.cost, epsilon=cfg.epsilon,
                               charge_seed=prob.seed_cost, validate=False)
    if method in ("sPI-R", "sPI-C", "sPI-Cr"):
        if sweeps is None:
            sweeps = iterate_sweeps(prob.p, prob.b, prob.x0, cfg.epsilon)
        return _sync_cell(prob, method, k, sweeps.sweeps, sweeps.converged, cfg.cost)
    if method == "aPI-R":
        r = distsim.simulate_apir(prob.p, prob.b, part, simcfg, x0=prob.x0)
        return Cell(method, k, r.makespan_cycles, r.ledger, r.steps, r.converged)
    r = distsim.simulate(prob.p, prob.b_di, part, Strategy.cost(), DiffusionMode.ALL, simcfg)
    return Cell(method, k, r.makespan_cycles, r.ledger, r.steps, r.converged)


@dataclass
class BenchResult:
    config: BenchConfig
    cells: list
    extras: dict

    def cell(self, method: str, k: int) -> Cell:
        for c in self.cells:
            if c.method == method and c.k == k:
                return c
        raise KeyError((method, k))

    def ratio(self, num: tuple, den: tuple) -> float:
        """``makespan(den) / makespan(num)``: how much faster ``num`` is."""
        return self.cell(*den).makespan / self.cell(*num).makespan

    def write_table(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["method", "K", "makespan_cycles", "normalized_speed"])
            for c in self.cells:
                w.writerow([c.method, c.k, c.makespan, f"{c.normalized_speed:.6g}"])

    def write_ideal(self, path) -> None:
        """Ideal linear-speedup lines ``y = x`` anchored at each method's
        K=1 speed, in gnuplot-friendly columns."""
        methods = [m for m in self.config.methods]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["K", "ideal"] + [f"ideal_{m}" for m in methods])
            for k in self.config.ks:
                row = [k, k]
                for m in methods:
                    try:
                        row.append(f"{k * self.cell(m, 1).normalized_speed:.6g}")
                    except KeyError:
                        row.append("")
                w.writerow(row)

    def write_ledger(self, path) -> None:
        from .cost import write_ledger_csv
        write_ledger_csv(path, [(c.method, c.k, c.ledger, c.makespan) for c in self.cells])

    def write_report(self, path) -> None:
        with open(path, "w") as fh:
            fh.writelines(f"{key}={val}\n" for key, val in self.extras.items())


def measured_rate(adjacency: CscMatrix, d: float, strategy: Strategy | None = None) -> float:
    """Geometric-mean residual decay per ``n`` diffusions on the damped
    system, to compare with the ``d / (2 - d)`` heuristic."""
    p, b = pagerank_system(adjacency, d)
    n = p.n
    sol = run(p, b, strategy or Strategy.cyc(), epsilon=1e-12, history_every=n)
    hist = [(c, r) for c, _, r in sol.residual_history if r > 0]
    (c0, r0), (c1, r1) = hist[0], hist[-1]
    if c1 == c0:
        return 0.0
    return float((r1 / r0) ** (n / (c1 - c0)))


def run_bench(cfg: BenchConfig, adjacency: CscMatrix | None = None) -> BenchResult:
    """Fill the ``(method, K)`` grid. Any failed sub-run aborts."""
    if adjacency is None:
        e = uniform_random_graph(cfg.n, cfg.links, seed=cfg.seed, count=cfg.link_count)
        adjacency = e.to_matrix()
        stats = e.stats
    else:
        stats = {}
    prob = build_problem(cfg, adjacency)
    sweeps = iterate_sweeps(prob.p, prob.b, prob.x0, cfg.epsilon)
    cells = []
    for method in cfg.methods:
        for k in cfg.ks:
            try:
                c = run_cell(prob, method, k, cfg, sweeps)
            except Exception as exc:
                raise BenchError(f"{method} with K={k} failed: {exc}") from exc
            if not c.converged:
                raise BenchError(f"{method} with K={k} did not converge")
            log.info("%s K=%d makespan=%d", method, k, c.makespan)
            cells.append(c)
    base = next((c for c in cells if c.method == "sPI-R" and c.k == 1), None)
    if base is None:
        base = run_cell(prob, "sPI-R", 1, cfg, sweeps)
    for c in cells:
        c.normalized_speed = base.makespan / c.makespan
    extras = {f"graph_{k}": v for k, v in stats.items()}
    extras["sweeps"] = sweeps.sweeps
    extras["baseline_sPI-R_K1"] = base.makespan
    extras["heuristic_rate_d_over_2_minus_d"] = cfg.d / (2 - cfg.d)
    extras["measured_rate_cyc_per_n_diffusions"] = measured_rate(adjacency, cfg.d)
    if "aPI-R" in cfg.methods:
        # the alternative read accounting for aPI-R, reported only
        part = distsim.partition_uniform(adjacency.n, 1)
        simcfg = distsim.SimConfig(k=1, cost=cfg.cost, epsilon=cfg.epsilon, validate=False)
        alt = distsim.simulate_apir(prob.p, prob.b, part, simcfg, x0=prob.x0, local_reads=True)
        extras["aPI-R_K1_all_reads_charged"] = alt.makespan_cycles
    return BenchResult(cfg, cells, extras)


def with_overrides(cfg: BenchConfig, **kw) -> BenchConfig:
    return replace(cfg, **kw)
