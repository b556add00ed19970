"""Deterministic discrete-event simulation of asynchronous distributed
diffusion on ``K`` processors.

Each processor (PID) owns a block of nodes, diffuses locally and
accumulates the fluid destined to foreign nodes in an outbox. Every
``exchange_period`` steps the outbox is sent as one message per
destination PID, delivered after a delay drawn from ``[0, delay_bound]``.
Only the cumulated fluid matters, so messages may overtake each other.

The PID with the smallest local clock acts next (ties by index); clocks
advance by the cycle cost of the work done. All randomness comes from one
seeded generator, so a run is replayable.
"""

from __future__ import annotations

import csv
import heapq
import itertools
import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .cost import CostLedger, CostParams, price
from .engine import (
    DiffusionMode,
    Strategy,
    StrategyKind,
    _validate_rho1,
    _Worker,
)
from .sparse import CscMatrix, DimensionError, apply, out_degrees

log = logging.getLogger(__name__)


@dataclass
class Partition:
    owner: np.ndarray
    blocks: list

    def __post_init__(self):
        self.owner = np.asarray(self.owner, dtype=np.int64)
        self.blocks = [np.asarray(b, dtype=np.int64) for b in self.blocks]
        self.validate()

    @property
    def k(self) -> int:
        return len(self.blocks)

    @property
    def n(self) -> int:
        return self.owner.size

    def validate(self) -> None:
        seen = np.zeros(self.n, dtype=np.int64)
        for pid, blk in enumerate(self.blocks):
            np.add.at(seen, blk, 1)
            if blk.size and np.any(self.owner[blk] != pid):
                raise ValueError(f"owner and block {pid} disagree")
        if np.any(seen != 1):
            raise ValueError("every node must be owned exactly once")

    @classmethod
    def from_owner(cls, owner, k: int | None = None) -> Partition:
        owner = np.asarray(owner, dtype=np.int64)
        k = int(owner.max()) + 1 if k is None else k
        return cls(owner, [np.flatnonzero(owner == p) for p in range(k)])


def partition_uniform(n: int, k: int) -> Partition:
    """Contiguous blocks whose sizes differ by at most one."""
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    bounds = np.linspace(0, n, k + 1).round().astype(np.int64)
    sizes = np.diff(bounds)
    owner = np.repeat(np.arange(k), sizes)
    return Partition(owner, [np.arange(bounds[p], bounds[p + 1]) for p in range(k)])


@dataclass
class RebalanceConfig:
    """Move ``transfer`` of the slowest PID's nodes to the fastest one when
    their log-residual decay rates differ by more than ``threshold``
    (relative to the fastest), measured every ``window`` cycles."""

    threshold: float = 0.5
    transfer: float = 0.1
    window: int = 20_000
    #: "own_decay": log-scale decay rate of the PID's remaining fluid due to
    #: its own diffusions (diffused mass per cycle over mean remaining
    #: fluid), insensitive to fluid received from peers;
    #: "log_residual": raw slope of the log remaining fluid, inflow included
    metric: str = "own_decay"

    def __post_init__(self):
        if self.metric not in ("own_decay", "log_residual"):
            raise ValueError(f"unknown speed metric {self.metric!r}")
        if not (0 < self.transfer < 1 and self.threshold >= 0 and self.window > 0):
            raise ValueError("need 0 < transfer < 1, threshold >= 0, window > 0")


@dataclass
class SimConfig:
    k: int = 1
    delay_bound: int = 0
    exchange_period: int = 1
    seed: int = 0
    cost: CostParams = field(default_factory=CostParams)
    rebalance: RebalanceConfig | None = None
    #: integer cycle multiplier per PID (1 = nominal speed)
    speed: tuple | None = None
    epsilon: float = 1e-9
    max_steps: int = 10**9
    #: if set, every step costs this many cycles and exchanges are free;
    #: idle CYC workers keep stepping (a unit-time model for scripted runs)
    unit_step_cycles: int | None = None
    #: scripted delays ``(src, dst, nth_message_from_src) -> cycles``
    delay_fn: Callable | None = None
    #: charge each PID for computing its share of ``P e - e`` up front
    charge_seed: bool = False
    check_invariants: bool = False
    snapshot_every: int = 0
    validate: bool = True

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.delay_bound < 0 or self.exchange_period < 1:
            raise ValueError("delay_bound must be >= 0 and exchange_period >= 1")
        if self.speed is not None:
            if len(self.speed) != self.k or min(self.speed) < 1:
                raise ValueError("speed needs k integer multipliers >= 1")
            self.speed = tuple(int(s) for s in self.speed)


@dataclass
class FluidMessage:
    src: int
    dst: int
    nodes: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    send_clock: int
    deliver_clock: int
    mass: float = -1.0

    def __post_init__(self):
        if self.mass < 0:
            self.mass = float(np.abs(self.values).sum())


class _Shared:
    """Arrays shared by all PIDs: global fluid/history and node ownership."""

    def __init__(self, m: CscMatrix, b: np.ndarray, partition: Partition, kind, mode,
                 cost: CostParams, unit: int | None = None):
        self.m = m
        self.b = b
        self.out = out_degrees(m)
        self.f = b.copy()
        self.h = np.zeros(m.n)
        self.owner = partition.owner.copy()
        self.key = np.full(m.n, -1.0)
        self.pos = np.full(m.n, -1, dtype=np.int64)
        self.acc = np.array([K.l1(self.f), 0.0])
        self.kind = int(kind)
        self.mode = int(mode)
        self.cost = cost
        self.unit = unit
        self.ledger = CostLedger(partition.k)


class PidState:
    """One processor: a kernel worker over its block plus timing data."""

    def __init__(self, pid: int, shared: _Shared, block: np.ndarray, speed: int = 1):
        self.pid = pid
        self.shared = shared
        self.speed = speed
        self.worker = _Worker(shared.m, shared.f, shared.out, shared.owner, pid, block,
                              shared.kind, shared.mode, shared.key, shared.pos)
        self.local_clock = 0
        self.last_send_clock = 0
        self.since_send = 0
        self.sent = 0
        #: heap of ``(deliver_clock, seq, message)``
        self.pending: list = []
        self.info = np.zeros(4, dtype=np.int64)

    @property
    def block(self) -> np.ndarray:
        return self.worker.block

    @property
    def outbox_mass(self) -> float:
        ob = self.worker.outbox
        return float(np.abs(ob[self.worker.ob_list[:self.worker.ctr[K.C_OBCOUNT]]]).sum())

    def residual(self) -> float:
        return float(np.abs(self.shared.f[self.block]).sum())

    def charge(self, reads=0, writes=0, muls=0, adds=0) -> None:
        """Record work in the ledger and advance the clock by its price."""
        self.shared.ledger.charge(self.pid, reads, writes, muls, adds)
        self.local_clock += self.speed * price(self.shared.cost, reads, writes, muls, adds)


def init_states(m: CscMatrix, b, partition: Partition, strategy: Strategy | None = None,
                mode: DiffusionMode = DiffusionMode.ALL, cost: CostParams | None = None,
                speed=None, unit_step_cycles: int | None = None) -> list[PidState]:
    """Fresh per-PID states sharing global ``f = b`` and ``h = 0``."""
    strategy = Strategy.cyc() if strategy is None else strategy
    b = np.array(b, dtype=np.float64)
    if b.shape != (m.n,) or partition.n != m.n:
        raise DimensionError("matrix, b and partition sizes must agree")
    shared = _Shared(m, b, partition, strategy.kind, DiffusionMode(mode),
                     CostParams() if cost is None else cost, unit_step_cycles)
    speed = speed or (1,) * partition.k
    return [PidState(p, shared, partition.blocks[p], speed[p]) for p in range(partition.k)]


def step_pid(pid: PidState) -> np.ndarray:
    """Select the next owned node and diffuse it, advancing the clock.

    Fluid for foreign rows goes to the outbox. A diffusion costs
    ``out_i`` muls and adds plus one write; a selected node that fails the
    eligibility test costs one addition. Returns the kernel's ``[node,
    diffused, n_local, n_remote]`` record, with ``node = -1`` when nothing
    is eligible (the clock is then unchanged).
    """
    s = pid.shared
    w = pid.worker
    m = s.m
    info = pid.info
    K.step(m.col_ptr, m.row_idx, m.values, s.out, s.f, s.h, s.owner, pid.pid,
           w.block, w.seq, s.key, w.heap, s.pos, w.ctr, s.acc,
           w.outbox, w.ob_mark, w.ob_list, s.kind, s.mode, info)
    node = int(info[0])
    if s.unit is not None:
        if node < 0 and s.kind == K.CYC and w.block.size:
            # unit-time model: an idle round-robin worker keeps visiting
            c = w.ctr
            info[0] = w.block[c[K.C_CURSOR]]
            info[1] = 0
            c[K.C_CURSOR] = (c[K.C_CURSOR] + 1) % w.block.size
            c[K.C_DIFF] += 1
            node = int(info[0])
        if node >= 0:
            deg = int(s.out[node]) * int(info[1])
            s.ledger.charge(pid.pid, writes=int(info[1]), muls=deg, adds=deg)
            pid.local_clock += pid.speed * s.unit
        return info
    if node < 0:
        return info
    if info[1]:
        deg = int(s.out[node])
        pid.charge(writes=1, muls=deg, adds=deg)
    else:
        pid.charge(adds=1)
    return info


def flush_outbox(pid: PidState, cfg: SimConfig, rng) -> list[FluidMessage]:
    """Turn the accumulated outbox into one message per destination PID.

    ``send_clock`` is the PID's current clock; the delay comes from
    ``cfg.delay_fn`` when given, otherwise uniformly from
    ``[0, cfg.delay_bound]``.
    """
    s = pid.shared
    idx, vals = pid.worker.drain_outbox()
    s.acc[K.A_EST_OB] -= float(np.abs(vals).sum())
    pid.since_send = 0
    pid.last_send_clock = pid.local_clock
    if idx.size == 0:
        return []
    dests = s.owner[idx]
    order = np.argsort(dests, kind="stable")
    idx, vals, dests = idx[order], vals[order], dests[order]
    starts = np.concatenate(([0], np.flatnonzero(np.diff(dests)) + 1))
    ends = np.append(starts[1:], idx.size)
    masses = np.add.reduceat(np.abs(vals), starts)
    if cfg.delay_fn is None:
        delays = rng.integers(0, cfg.delay_bound + 1, size=starts.size)
    msgs = []
    for g, (a, z) in enumerate(zip(starts.tolist(), ends.tolist())):
        dst = int(dests[a])
        if cfg.delay_fn is not None:
            delay = int(cfg.delay_fn(pid.pid, dst, pid.sent))
            if delay < 0:
                raise ValueError(f"scripted delay must be >= 0, got {delay}")
        else:
            delay = int(delays[g])
        msgs.append(FluidMessage(pid.pid, dst, idx[a:z], vals[a:z], pid.local_clock,
                                 pid.local_clock + delay, float(masses[g])))
    pid.sent += 1
    return msgs


def deliver(pid: PidState, msg: FluidMessage) -> PidState:
    """Inject a message's fluid; entries for nodes this PID no longer owns
    are forwarded through its outbox."""
    if msg.dst != pid.pid:
        raise ValueError(f"message for PID {msg.dst} delivered to PID {pid.pid}")
    s = pid.shared
    w = pid.worker
    K.deliver_batch(msg.nodes, msg.values, pid.pid, s.owner, s.f, s.out, s.key, w.heap,
                    s.pos, w.ctr, s.acc, w.outbox, w.ob_mark, w.ob_list, s.kind, s.mode)
    return pid


@dataclass
class SimResult:
    h_global: np.ndarray
    makespan_cycles: int
    ledger: CostLedger
    exchange_log: list
    residual_history: list
    converged: bool
    status: str
    steps: int
    diffusions: np.ndarray
    link_ops: int
    partition: Partition
    snapshots: list = field(default_factory=list)
    transfers: list = field(default_factory=list)
    f_global: np.ndarray | None = None

    def write_exchange_log(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["event", "clock", "src", "dst", "mass", "send_clock", "deliver_clock"])
            w.writerows(self.exchange_log)

    def write_residual_history(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["clock", "global_residual"])
            w.writerows(self.residual_history)


def _seed_work(m: CscMatrix, rows: np.ndarray) -> tuple[int, int, int]:
    """(writes, muls, adds) to form ``(P e - e)`` on ``rows``."""
    t = m.transpose()
    nr = t.col_ptr[rows + 1] - t.col_ptr[rows]
    return int(rows.size), int(nr.sum()), int(nr.sum() + rows.size)


class _Simulator:
    def __init__(self, m, b, partition, strategy, mode, cfg):
        self.m = m
        self.cfg = cfg
        self.k = partition.k
        self.rng = np.random.default_rng(cfg.seed)
        self.pids = init_states(m, b, partition, strategy, mode, cfg.cost, cfg.speed,
                                cfg.unit_step_cycles)
        self.shared = self.pids[0].shared
        self.ledger = self.shared.ledger
        self.extra_cycles = np.zeros(self.k, dtype=np.int64)
        self.unit = cfg.unit_step_cycles
        self.seq = itertools.count()
        self.inflight = 0.0
        self.n_inflight = 0
        self.exchange_log = []
        self.residual_history = []
        self.snapshots = []
        self.transfers = []
        self.steps = 0
        self.sync_ctr = 0
        self.b_l1 = float(np.abs(b).sum())
        self.thr = cfg.epsilon * max(1.0, self.b_l1)
        self.parked = [False] * self.k
        self.cyc = strategy.kind is StrategyKind.CYC
        if cfg.charge_seed:
            for p in self.pids:
                wr, mu, ad = _seed_work(m, p.block)
                p.charge(writes=wr, muls=mu, adds=ad)
        self.reb = cfg.rebalance
        self.next_check = self.reb.window if self.reb else math.inf
        self.last_measure = None

    # -- messaging ------------------------------------------------------
    def _send(self, p: PidState):
        msgs = flush_outbox(p, self.cfg, self.rng)
        # one shared read-add-write per aggregated remote coordinate; the
        # messages leave once that work is done
        cnt = sum(int(msg.nodes.size) for msg in msgs)
        if cnt and self.unit is None:
            before = p.local_clock
            p.charge(reads=cnt, writes=cnt, adds=cnt)
            for msg in msgs:
                msg.send_clock += p.local_clock - before
                msg.deliver_clock += p.local_clock - before
        for msg in msgs:
            heapq.heappush(self.pids[msg.dst].pending, (msg.deliver_clock, next(self.seq), msg))
            mass = msg.mass
            self.inflight += mass
            self.n_inflight += 1
            self.exchange_log.append(("send", msg.send_clock, msg.src, msg.dst, mass,
                                      msg.send_clock, msg.deliver_clock))
            if self.parked[msg.dst]:
                q = self.pids[msg.dst]
                q.local_clock = max(q.local_clock, msg.deliver_clock)
                self.parked[msg.dst] = False
                heapq.heappush(self.active, (q.local_clock, q.pid))

    def _deliver_due(self, p: PidState):
        while p.pending and p.pending[0][0] <= p.local_clock:
            msg = heapq.heappop(p.pending)[2]
            deliver(p, msg)
            mass = msg.mass
            self.inflight -= mass
            self.n_inflight -= 1
            if self.n_inflight == 0:
                self.inflight = 0.0
            self.exchange_log.append(("deliver", p.local_clock, msg.src, msg.dst, mass,
                                      msg.send_clock, msg.deliver_clock))

    # -- global bookkeeping ----------------------------------------------
    def _exact_total(self) -> float:
        s = self.shared
        ef = K.l1(s.f)
        s.acc[K.A_EST_F] = ef
        eo = 0.0
        for p in self.pids:
            eo += p.outbox_mass
        s.acc[K.A_EST_OB] = eo
        return ef + eo + self.inflight_exact()

    def inflight_exact(self) -> float:
        total = 0.0
        for p in self.pids:
            for _, _, msg in p.pending:
                total += msg.mass
        self.inflight = total
        return total

    def makespan(self) -> int:
        return int(max(p.local_clock for p in self.pids))

    def check_conservation(self):
        s = self.shared
        lhs = s.h + s.f
        for p in self.pids:
            lhs = lhs + p.worker.outbox
            for _, _, msg in p.pending:
                np.add.at(lhs, msg.nodes, msg.values)
        rhs = apply(self.m, s.h) + s.b
        viol = float(np.abs(lhs - rhs).max(initial=0.0))
        if viol > 1e-10 * (1.0 + self.b_l1):
            raise AssertionError(f"global conservation violated by {viol:.3e}")
        return viol

    def _sync(self, now: int) -> float | None:
        """Exact termination test; returns the residual when it is met."""
        total = self._exact_total()
        self.residual_history.append((now, total))
        if self.cfg.check_invariants:
            self.check_conservation()
        return total

    # -- rebalancing ------------------------------------------------------
    def _measure(self, now):
        s = self.shared
        res = np.array([max(p.residual(), 1e-300) for p in self.pids])
        hist = np.array([float(np.abs(s.h[p.block]).sum()) for p in self.pids])
        prev = self.last_measure
        self.last_measure = (now, res, hist)
        if prev is None or now <= prev[0]:
            return
        span = now - prev[0]
        if self.reb.metric == "log_residual":
            speed = -(np.log(res) - np.log(prev[1])) / span
        else:
            speed = (hist - prev[2]) / (0.5 * (res + prev[1])) / span
        fast = int(np.argmax(speed))
        slow = int(np.argmin(speed))
        if fast == slow or speed[fast] <= 0:
            return
        if (speed[fast] - speed[slow]) / speed[fast] <= self.reb.threshold:
            return
        self._transfer(slow, fast, now)
        self.last_measure = None

    def _transfer(self, slow: int, fast: int, now: int):
        count = _move_nodes(self.pids, slow, fast, self.reb.transfer)
        if not count:
            return
        self.extra_cycles[[slow, fast]] += count
        self.transfers.append((now, slow, fast, count))
        dst = self.pids[fast]
        if self.parked[fast]:
            self.parked[fast] = False
            dst.local_clock = max(dst.local_clock, now)
            heapq.heappush(self.active, (dst.local_clock, fast))
        log.debug("rebalance at %d: %d nodes PID %d -> %d", now, count, slow, fast)

    # -- main loop ---------------------------------------------------------
    def run(self) -> tuple[str, float]:
        s = self.shared
        n = self.m.n
        self.active = [(p.local_clock, p.pid) for p in self.pids]
        heapq.heapify(self.active)
        total = self._sync(0)
        if total <= self.thr:
            return "converged", total
        snap = self.cfg.snapshot_every
        while True:
            if not self.active:
                total = self._sync(self.makespan())
                return ("converged" if total <= self.thr else "stalled"), total
            if self.steps >= self.cfg.max_steps:
                return "budget", self._sync(self.makespan())
            now, pid = heapq.heappop(self.active)
            p = self.pids[pid]
            if now != p.local_clock:
                # clock moved while queued (node migration); requeue
                heapq.heappush(self.active, (p.local_clock, pid))
                continue
            if now >= self.next_check:
                self._measure(now)
                while self.next_check <= now:
                    self.next_check += self.reb.window
            self._deliver_due(p)
            info = step_pid(p)
            if info[0] < 0:
                if p.worker.ctr[K.C_OBCOUNT] > 0:
                    self._send(p)
                elif p.pending:
                    p.local_clock = max(p.local_clock, p.pending[0][0])
                else:
                    self.parked[pid] = True
                    continue
                heapq.heappush(self.active, (p.local_clock, pid))
                continue
            done = self._after_step(p, n)
            if done is not None:
                return done
            heapq.heappush(self.active, (p.local_clock, pid))
            if snap and self.steps % snap == 0:
                self.snapshots.append((self.steps, s.h.copy()))

    def _after_step(self, p: PidState, n: int):
        s = self.shared
        self.steps += 1
        p.since_send += 1
        if p.since_send >= self.cfg.exchange_period:
            self._send(p)
        self.sync_ctr += 1
        est = s.acc[K.A_EST_F] + s.acc[K.A_EST_OB] + self.inflight
        if est <= self.thr or self.sync_ctr >= n:
            self.sync_ctr = 0
            total = self._sync(p.local_clock)
            if total <= self.thr:
                return "converged", total
            if s.mode == K.ALL and total > 10.0 * self.b_l1 and self.b_l1 > 0:
                return "diverged", total
        return None


def simulate(m: CscMatrix, b, partition: Partition, strategy: Strategy,
             mode: DiffusionMode = DiffusionMode.ALL, cfg: SimConfig | None = None) -> SimResult:
    """Run distributed D-iteration until the global fluid, counting outboxes
    and messages in flight, drops to ``eps * max(1, |b|_1)``."""
    cfg = SimConfig(k=partition.k) if cfg is None else cfg
    b = np.array(b, dtype=np.float64)
    if b.shape != (m.n,) or partition.n != m.n:
        raise DimensionError("matrix, b and partition sizes must agree")
    if cfg.k != partition.k:
        raise ValueError(f"config k={cfg.k} but partition has {partition.k} blocks")
    if strategy.kind is StrategyKind.EXPLICIT:
        raise ValueError("explicit sequences are not supported per PID; use CYC, MAX or COST")
    mode = DiffusionMode(mode)
    if cfg.validate and mode is DiffusionMode.NEGATIVE_ONLY:
        _validate_rho1(m, b)
    sim = _Simulator(m, b, partition, strategy, mode, cfg)
    status, _ = sim.run()
    if status == "diverged":
        log.warning("distributed residual exceeded 10 |b|_1; spectral radius likely >= 1")
    sh = sim.shared
    return SimResult(
        h_global=sh.h.copy(),
        makespan_cycles=sim.makespan(),
        ledger=sim.ledger,
        exchange_log=sim.exchange_log,
        residual_history=sim.residual_history,
        converged=status == "converged",
        status=status,
        steps=sim.steps,
        diffusions=np.array([p.worker.ctr[K.C_DIFF] for p in sim.pids]),
        link_ops=int(sum(p.worker.ctr[K.C_LINKS] for p in sim.pids)),
        partition=Partition.from_owner(sh.owner, partition.k),
        snapshots=sim.snapshots,
        transfers=sim.transfers,
        f_global=sh.f.copy(),
    )


def _move_nodes(pids: list, slow: int, fast: int, fraction: float) -> int:
    """Hand the ``ceil(fraction * size)`` nodes of PID ``slow`` holding the
    most fluid to PID ``fast``. Returns the number moved (0 if none)."""
    s = pids[slow].shared
    src, dst = pids[slow], pids[fast]
    blk = src.block
    count = math.ceil(fraction * blk.size)
    if count <= 0 or count >= blk.size:
        return 0
    order = np.lexsort((blk, -np.abs(s.f[blk])))
    moved = np.sort(blk[order[:count]])
    s.owner[moved] = fast
    src.worker.set_block(np.setdiff1d(blk, moved), s.f, s.out)
    dst.worker.set_block(np.union1d(dst.block, moved), s.f, s.out)
    # fluid the receiver had queued for the nodes it now owns becomes local
    w = dst.worker
    for node in moved.tolist():
        val = w.outbox[node]
        if val != 0.0:
            w.outbox[node] = 0.0
            s.acc[K.A_EST_OB] -= abs(val)
            K.add_local(node, val, s.f, s.out, s.key, w.heap, s.pos, w.ctr, s.acc,
                        s.kind, s.mode)
    # one cycle per migrated node on both sides
    src.local_clock += count
    dst.local_clock += count
    return count


def rebalance(states: list, partition: Partition, speeds,
              cfg: RebalanceConfig | None = None) -> Partition:
    """Apply one rebalancing decision given per-PID speeds (larger is
    faster) and return the resulting partition.

    Nothing moves when the relative gap between the fastest and slowest
    PID is at most ``cfg.threshold`` or the slowest block is too small.
    :func:`simulate` applies the same rule from its event loop when
    ``SimConfig.rebalance`` is set.
    """
    cfg = RebalanceConfig() if cfg is None else cfg
    speeds = np.asarray(speeds, dtype=float)
    if speeds.shape != (len(states),):
        raise ValueError("need one speed per PID")
    fast = int(np.argmax(speeds))
    slow = int(np.argmin(speeds))
    if fast == slow or speeds[fast] <= 0:
        return partition
    if (speeds[fast] - speeds[slow]) / speeds[fast] <= cfg.threshold:
        return partition
    if not _move_nodes(states, slow, fast, cfg.transfer):
        return partition
    return Partition.from_owner(states[0].shared.owner, partition.k)


def simulate_apir(m: CscMatrix, b, partition: Partition, cfg: SimConfig | None = None,
                  x0=None, local_reads: bool = False) -> SimResult:
    """Asynchronous row-wise power iteration ``x_i <- (P x)_i + b_i``.

    Each PID sweeps its rows cyclically, reading the current shared
    values. Convergence is tested on the equation residual
    ``|P x + b - x|_1``, tracked incrementally.

    Reads of coordinates owned by another PID are charged; with
    ``local_reads=True`` every input read is charged instead.
    """
    cfg = SimConfig(k=partition.k) if cfg is None else cfg
    b = np.array(b, dtype=np.float64)
    n = m.n
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    t = m.transpose()
    rptr, rcol, rval = t.col_ptr, t.row_idx, t.values
    owner = partition.owner
    k = partition.k
    ledger = CostLedger(k)
    speed = cfg.speed or (1,) * k
    p_cost = cfg.cost
    clocks = [0] * k
    cursors = [0] * k
    blocks = [blk for blk in partition.blocks]
    remote = np.zeros(n, dtype=np.int64)
    for i in range(n):
        cols = rcol[rptr[i]:rptr[i + 1]]
        remote[i] = cols.size if local_reads else np.count_nonzero(owner[cols] != owner[i])
    r = apply(m, x) + b - x
    thr = cfg.epsilon * max(1.0, float(np.abs(b).sum()))
    est = float(np.abs(r).sum())
    history = [(0, est)]
    active = [(0, p) for p in range(k) if blocks[p].size]
    heapq.heapify(active)
    steps = 0
    since = 0
    status = "budget"
    while active and steps < cfg.max_steps:
        now, pid = heapq.heappop(active)
        blk = blocks[pid]
        i = int(blk[cursors[pid]])
        cursors[pid] = (cursors[pid] + 1) % blk.size
        lo, hi = rptr[i], rptr[i + 1]
        new = float(rval[lo:hi] @ x[rcol[lo:hi]]) + b[i]
        delta = new - x[i]
        x[i] = new
        nr = int(hi - lo)
        ledger.charge(pid, reads=int(remote[i]), writes=1, muls=nr, adds=nr)
        clocks[pid] = now + speed[pid] * price(p_cost, int(remote[i]), 1, nr, nr)
        if delta != 0.0:
            clo, chi = m.col_ptr[i], m.col_ptr[i + 1]
            rows = m.row_idx[clo:chi]
            before = np.abs(r[rows]).sum() + abs(r[i]) * (i not in rows)
            r[i] -= delta
            r[rows] += m.values[clo:chi] * delta
            after = np.abs(r[rows]).sum() + abs(r[i]) * (i not in rows)
            est += after - before
        steps += 1
        since += 1
        if est <= thr or since >= n:
            since = 0
            r = apply(m, x) + b - x
            est = float(np.abs(r).sum())
            history.append((clocks[pid], est))
            if est <= thr:
                status = "converged"
                break
        heapq.heappush(active, (clocks[pid], pid))
    return SimResult(
        h_global=x, makespan_cycles=int(max(clocks)), ledger=ledger, exchange_log=[],
        residual_history=history, converged=status == "converged", status=status,
        steps=steps, diffusions=np.zeros(k, dtype=np.int64), link_ops=0,
        partition=partition, f_global=r,
    )
