"""Command-line driver: ``gen``, ``solve``, ``simulate`` and ``bench``.

Every command accepts ``--config FILE``, a flat ``key = value`` file whose
keys are flag names (``delay-bound`` or ``delay_bound``); flags given on
the command line win. Outputs are CSV and byte-identical for identical
inputs.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench as benchmod
from . import distsim, engine, graphs
from .cost import CostParams
from .engine import DiffusionMode, Strategy

log = logging.getLogger("diteration")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NOT_CONVERGED = 3


class ConfigError(ValueError):
    pass


def read_config(path) -> dict:
    """Parse a flat ``key = value`` file (``#`` comments, blank lines)."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, val = (t.strip() for t in body.split("=", 1))
            out[key.replace("-", "_")] = val
    return out


def _common(p: argparse.ArgumentParser, epsilon_help="residual tolerance (default 1e-9)"):
    g = p.add_argument_group("problem")
    g.add_argument("--config", help="flat key=value file; flags override its values")
    g.add_argument("--graph", help="edge-list file (default: generate a uniform graph)")
    g.add_argument("--max-nodes", type=int, help="keep the induced subgraph on the first N nodes")
    g.add_argument("--n", type=int, default=128, help="nodes of the generated graph")
    g.add_argument("--links", type=int, default=1652, help="links of the generated graph")
    g.add_argument("--link-count", choices=["directed", "undirected"], default="undirected",
                   help="how --links is counted")
    g.add_argument("--system", choices=["pagerank", "linear", "eigen"], default="pagerank",
                   help="pagerank: x = d P_s x + (1-d)/n; linear: x = W x + b with the "
                        "edge weights W; eigen: P_s x = x")
    g.add_argument("--b-value", type=float, default=1.0, help="constant b for --system linear")
    g.add_argument("--d", type=float, default=0.85, help="damping factor")
    g.add_argument("--epsilon", type=float, default=None, help=epsilon_help)
    g.add_argument("--seed", type=int, default=1)
    s = p.add_argument_group("diffusion")
    s.add_argument("--strategy", choices=["cyc", "max", "cost", "explicit"], default="cost")
    s.add_argument("--sequence", help="comma-separated node order for --strategy explicit")
    s.add_argument("--mode", choices=["all", "neg", "pos"], default=None,
                   help="eligible fluid sign (default: neg for eigen, else all)")
    c = p.add_argument_group("cost model (cycles)")
    c.add_argument("--tr", type=int, default=4)
    c.add_argument("--tw", type=int, default=2)
    c.add_argument("--tm", type=int, default=1)
    c.add_argument("--ta", type=int, default=1)
    p.add_argument("--out", help="primary output file")
    p.add_argument("-v", "--verbose", action="store_true")


def _distributed(p):
    g = p.add_argument_group("distribution")
    g.add_argument("--k", type=int, default=1, help="processor count")
    g.add_argument("--delay-bound", type=int, default=0, help="max message delay (cycles)")
    g.add_argument("--exchange-period", type=int, default=1, help="diffusions between sends")
    g.add_argument("--rebalance", action="store_true", help="enable dynamic partition")
    g.add_argument("--rebalance-window", type=int, default=20_000)
    g.add_argument("--rebalance-metric", choices=["own_decay", "log_residual"],
                   default="own_decay")
    g.add_argument("--speed", help="comma-separated integer slowdown per processor")
    g.add_argument("--max-steps", type=int, default=10**9)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="diteration", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    ap.set_defaults(_subparsers=sub.choices)

    g = sub.add_parser("gen", help="write a graph as an edge list")
    g.add_argument("kind", choices=["uniform", "powerlaw", "snake", "chain"])
    g.add_argument("n", type=int, nargs="?", help="node count")
    g.add_argument("links", type=int, nargs="?", help="link count (uniform)")
    g.add_argument("--exponent", type=float, default=2.1)
    g.add_argument("--link-count", choices=["directed", "undirected"], default="directed")
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("--config")
    g.add_argument("--out", required=False)
    g.add_argument("-v", "--verbose", action="store_true")

    s = sub.add_parser("solve", help="sequential diffusion solve")
    _common(s)
    s.add_argument("--history", help="residual history CSV (default: <out>.history.csv)")
    s.add_argument("--max-diffusions", type=int, default=10**7)

    m = sub.add_parser("simulate", help="distributed diffusion on K simulated processors")
    _common(m)
    _distributed(m)
    m.add_argument("--exchange-log", help="exchange log CSV")
    m.add_argument("--history", help="residual history CSV")
    m.add_argument("--ledger", help="cost ledger CSV")

    b = sub.add_parser("bench", help="makespan grid of all methods over K")
    _common(b, epsilon_help="residual tolerance (default 1e-2, see README)")
    b.set_defaults(system="eigen")
    b.add_argument("--ks", default=",".join(map(str, benchmod.K_GRID)))
    b.add_argument("--methods", default=",".join(benchmod.METHODS))
    b.add_argument("--delay-bound", type=int, default=0)
    b.add_argument("--exchange-period", type=int, default=1)
    return ap


def _apply_config(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    """Parse twice: once to find the subcommand and config file, then with
    the file's values installed as defaults."""
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    sub = args._subparsers[args.command]
    try:
        values = read_config(args.config)
    except OSError as exc:
        parser.error(f"cannot read config: {exc}")
    except ConfigError as exc:
        parser.error(str(exc))
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in values.items():
        if key not in actions:
            parser.error(f"unknown config key {key!r}")
        act = actions[key]
        if isinstance(act, argparse._StoreTrueAction):
            defaults[key] = raw.lower() in ("1", "true", "yes", "on")
            continue
        try:
            val = act.type(raw) if act.type else raw
        except ValueError:
            parser.error(f"config key {key!r}: bad value {raw!r}")
        if act.choices and val not in act.choices:
            parser.error(f"config key {key!r}: {val!r} not in {sorted(act.choices)}")
        defaults[key] = val
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


# -- problem construction ---------------------------------------------------

def load_graph(args) -> graphs.EdgeList:
    if args.graph:
        return graphs.read_edge_list(args.graph, max_nodes=args.max_nodes)
    e = graphs.uniform_random_graph(args.n, args.links, seed=args.seed, count=args.link_count)
    return e.subgraph(args.max_nodes) if args.max_nodes else e


def build_system(args, e: graphs.EdgeList):
    a = e.to_matrix()
    if args.system == "pagerank":
        return engine.pagerank_system(a, args.d)
    if args.system == "eigen":
        p = engine.stochastic(a)
        return p, engine.rho1_seed(p)
    return a, np.full(a.n, args.b_value)


def build_strategy(args) -> Strategy:
    if args.strategy == "explicit":
        if not args.sequence:
            raise ConfigError("--strategy explicit needs --sequence")
        return Strategy.explicit([int(t) for t in args.sequence.split(",")])
    if args.sequence:
        raise ConfigError("--sequence only applies to --strategy explicit")
    return Strategy.parse(args.strategy)


def build_mode(args) -> DiffusionMode:
    if args.mode is None:
        return DiffusionMode.NEGATIVE_ONLY if args.system == "eigen" else DiffusionMode.ALL
    return engine.parse_mode(args.mode)


def cost_params(args) -> CostParams:
    return CostParams(t_r=args.tr, t_w=args.tw, t_m=args.tm, t_a=args.ta)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_solution(path, h, status=None, residual=None) -> None:
    with open(path, "w") as fh:
        if status is not None:
            fh.write(f"# partial: status={status} residual={_fmt(residual)}\n")
        fh.write("node,h\n")
        fh.writelines(f"{i},{_fmt(v)}\n" for i, v in enumerate(h.tolist()))


def _sidecar(out, suffix):
    return None if out is None else str(Path(out).with_suffix("")) + suffix


# -- commands -----------------------------------------------------------------

def cmd_gen(args) -> int:
    if args.kind == "uniform":
        if args.n is None or args.links is None:
            raise ConfigError("gen uniform needs N and LINKS")
        e = graphs.uniform_random_graph(args.n, args.links, seed=args.seed,
                                        count=args.link_count)
    elif args.kind == "powerlaw":
        if args.n is None:
            raise ConfigError("gen powerlaw needs N")
        e = graphs.power_law_graph(args.n, args.exponent, seed=args.seed)
    elif args.kind == "snake":
        e = graphs.snake_graph()
    else:
        m = graphs.chain_matrix()
        cols = m.col_of_entry()
        e = graphs.EdgeList(m.n, cols, m.row_idx, m.values)
    out = args.out or f"{args.kind}.edges"
    graphs.write_edge_list(out, e)
    stats = graphs.degree_stats(e)
    print(" ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}"
                   for k, v in stats.items()))
    return EXIT_OK


def cmd_solve(args) -> int:
    e = load_graph(args)
    p, b = build_system(args, e)
    strategy = build_strategy(args)
    mode = build_mode(args)
    eps = 1e-9 if args.epsilon is None else args.epsilon
    sol = engine.run(p, b, strategy, mode, epsilon=eps,
                     max_diffusions=args.max_diffusions)
    h = sol.h
    if args.system == "eigen":
        h = h + 1.0 / p.n
    out = args.out or "solution.csv"
    write_solution(out, h, None if sol.converged else sol.status, sol.residual_l1)
    hist = args.history or _sidecar(out, ".history.csv")
    with open(hist, "w") as fh:
        fh.write("diffusions,link_ops,residual\n")
        fh.writelines(f"{d},{l},{_fmt(r)}\n" for d, l, r in sol.residual_history)
    print(f"status={sol.status} residual={sol.residual_l1:.3e} "
          f"diffusions={sol.diffusion_count} link_ops={sol.link_ops}")
    return EXIT_OK if sol.converged else EXIT_NOT_CONVERGED


def cmd_simulate(args) -> int:
    e = load_graph(args)
    p, b = build_system(args, e)
    strategy = build_strategy(args)
    mode = build_mode(args)
    eps = 1e-9 if args.epsilon is None else args.epsilon
    speed = tuple(int(t) for t in args.speed.split(",")) if args.speed else None
    reb = (distsim.RebalanceConfig(window=args.rebalance_window, metric=args.rebalance_metric)
           if args.rebalance else None)
    cfg = distsim.SimConfig(k=args.k, delay_bound=args.delay_bound,
                            exchange_period=args.exchange_period, seed=args.seed,
                            cost=cost_params(args), rebalance=reb, speed=speed, epsilon=eps,
                            max_steps=args.max_steps, charge_seed=args.system == "eigen")
    part = distsim.partition_uniform(p.n, args.k)
    r = distsim.simulate(p, b, part, strategy, mode, cfg)
    h = r.h_global + (1.0 / p.n if args.system == "eigen" else 0.0)
    out = args.out or "solution.csv"
    final = r.residual_history[-1][1] if r.residual_history else float("nan")
    write_solution(out, h, None if r.converged else r.status, final)
    r.write_exchange_log(args.exchange_log or _sidecar(out, ".exchange.csv"))
    r.write_residual_history(args.history or _sidecar(out, ".history.csv"))
    from .cost import write_ledger_csv
    write_ledger_csv(args.ledger or _sidecar(out, ".ledger.csv"),
                     [("DI+" + args.strategy.upper(), args.k, r.ledger, r.makespan_cycles)])
    print(f"status={r.status} makespan_cycles={r.makespan_cycles} steps={r.steps} "
          f"transfers={len(r.transfers)}")
    return EXIT_OK if r.converged else EXIT_NOT_CONVERGED


def cmd_bench(args) -> int:
    kw = {
        "n": args.n, "links": args.links, "link_count": args.link_count, "seed": args.seed,
        "system": "pagerank" if args.system == "pagerank" else "eigen", "d": args.d,
        "ks": tuple(int(t) for t in args.ks.split(",")),
        "methods": tuple(t.strip() for t in args.methods.split(",")),
        "cost": cost_params(args), "delay_bound": args.delay_bound,
        "exchange_period": args.exchange_period,
    }
    if args.system == "linear":
        raise ConfigError("bench supports --system eigen or pagerank")
    if args.epsilon is not None:
        kw["epsilon"] = args.epsilon
    cfg = benchmod.BenchConfig(**kw)
    adjacency = None
    if args.graph:
        adjacency = graphs.read_edge_list(args.graph, max_nodes=args.max_nodes).to_matrix()
    res = benchmod.run_bench(cfg, adjacency)
    out = args.out or "bench.csv"
    res.write_table(out)
    res.write_ideal(_sidecar(out, ".ideal.csv"))
    res.write_ledger(_sidecar(out, ".ledger.csv"))
    res.write_report(_sidecar(out, ".report.txt"))
    print(f"{'method':8s} " + " ".join(f"{k:>8d}" for k in cfg.ks))
    for method in cfg.methods:
        print(f"{method:8s} " + " ".join(f"{res.cell(method, k).makespan:>8d}" for k in cfg.ks))
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "solve": cmd_solve, "simulate": cmd_simulate, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    args = _apply_config(parser, argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ValueError, IndexError, graphs.EdgeListFormatError) as exc:
        print(f"diteration {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"diteration {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
