"""D-iteration: diffusion-based solver for ``x = P x + b`` and for the
eigenvector of eigenvalue 1, with a distributed simulator and a cycle-cost
benchmark harness."""

from .bench import BenchConfig, BenchResult, run_bench
from .cost import CostLedger, CostParams, charge, cycles
from .distsim import (
    FluidMessage,
    Partition,
    PidState,
    RebalanceConfig,
    SimConfig,
    SimResult,
    deliver,
    flush_outbox,
    init_states,
    partition_uniform,
    rebalance,
    simulate,
    simulate_apir,
    step_pid,
)
from .engine import (
    DiffusionMode,
    DiffusionState,
    Solution,
    Strategy,
    StrategyKind,
    diffuse_once,
    eigenvector_rho1,
    inject_fluid,
    next_index,
    pagerank_system,
    run,
    stochastic,
)
from .graphs import (
    EdgeList,
    EdgeListFormatError,
    power_law_graph,
    read_edge_list,
    uniform_random_graph,
    write_edge_list,
)
from .reference import BaselineKind, direct_solve, iterate_sweeps, power_sweep
from .sparse import (
    CscMatrix,
    DimensionError,
    apply,
    column,
    csc_from_arrays,
    csc_from_edges,
    left_perron,
    sigma_v,
    weighted_l1,
)

__version__ = "0.1.0"

__all__ = [
    "BaselineKind",
    "BenchConfig",
    "BenchResult",
    "CostLedger",
    "CostParams",
    "CscMatrix",
    "DiffusionMode",
    "DiffusionState",
    "DimensionError",
    "EdgeList",
    "EdgeListFormatError",
    "FluidMessage",
    "Partition",
    "PidState",
    "RebalanceConfig",
    "SimConfig",
    "SimResult",
    "Solution",
    "Strategy",
    "StrategyKind",
    "apply",
    "charge",
    "column",
    "csc_from_arrays",
    "csc_from_edges",
    "cycles",
    "deliver",
    "diffuse_once",
    "direct_solve",
    "eigenvector_rho1",
    "flush_outbox",
    "init_states",
    "inject_fluid",
    "iterate_sweeps",
    "left_perron",
    "next_index",
    "pagerank_system",
    "partition_uniform",
    "power_law_graph",
    "power_sweep",
    "read_edge_list",
    "rebalance",
    "run",
    "run_bench",
    "sigma_v",
    "simulate",
    "simulate_apir",
    "step_pid",
    "stochastic",
    "uniform_random_graph",
    "weighted_l1",
    "write_edge_list",
]
