"""Cycle accounting on a hypothetical shared-memory parallel computer.

Local memory is free; shared reads/writes, multiplications and additions
cost ``t_r``, ``t_w``, ``t_m`` and ``t_a`` cycles. The per-scheme rules:

* row update (sPI-R, aPI-R): per row with ``n_r`` entries, one shared read
  per remotely owned input coordinate, ``n_r`` muls, ``n_r`` adds, one
  shared write. With a single processor every input read is charged.
* column diffusion (DI, sPI-C): ``out_i`` muls and adds per column, one
  read-add-write per remote destination, one write of the own coordinate.
  sPI-Cr uses a single multiplication per non-empty column.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .sparse import CscMatrix


@dataclass(frozen=True)
class CostParams:
    t_r: int = 4
    t_w: int = 2
    t_m: int = 1
    t_a: int = 1

    def __post_init__(self):
        if min(self.t_r, self.t_w, self.t_m, self.t_a) < 0:
            raise ValueError("cycle costs must be non-negative")

    @property
    def rmw(self) -> int:
        """Read-add-write of one shared cell."""
        return self.t_r + self.t_a + self.t_w


@dataclass
class CostLedger:
    k: int = 1
    reads: np.ndarray = field(default=None)
    writes: np.ndarray = field(default=None)
    muls: np.ndarray = field(default=None)
    adds: np.ndarray = field(default=None)

    def __post_init__(self):
        for name in ("reads", "writes", "muls", "adds"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(self.k, dtype=np.int64))

    def charge(self, pid: int, reads: int = 0, writes: int = 0, muls: int = 0,
               adds: int = 0) -> CostLedger:
        self.reads[pid] += reads
        self.writes[pid] += writes
        self.muls[pid] += muls
        self.adds[pid] += adds
        return self

    def totals(self) -> dict:
        return {"reads": int(self.reads.sum()), "writes": int(self.writes.sum()),
                "muls": int(self.muls.sum()), "adds": int(self.adds.sum())}

    def pid_cycles(self, p: CostParams) -> np.ndarray:
        return (self.reads * p.t_r + self.writes * p.t_w + self.muls * p.t_m
                + self.adds * p.t_a)


def charge(ledger: CostLedger, pid: int, reads: int = 0, writes: int = 0,
           muls: int = 0, adds: int = 0) -> CostLedger:
    ledger.charge(pid, reads, writes, muls, adds)
    return ledger


def cycles(ledger: CostLedger, p: CostParams | None = None) -> int:
    """Total work in cycles (not the makespan of a parallel run)."""
    p = CostParams() if p is None else p
    t = ledger.totals()
    return t["reads"] * p.t_r + t["writes"] * p.t_w + t["muls"] * p.t_m + t["adds"] * p.t_a


def price(p: CostParams, reads: int = 0, writes: int = 0, muls: int = 0, adds: int = 0) -> int:
    return reads * p.t_r + writes * p.t_w + muls * p.t_m + adds * p.t_a


LEDGER_COLUMNS = ["method", "K", "reads", "writes", "muls", "adds", "makespan_cycles"]


def write_ledger_csv(path, rows) -> None:
    """``rows``: iterable of ``(method, K, ledger, makespan)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LEDGER_COLUMNS)
        for method, k, ledger, makespan in rows:
            t = ledger.totals()
            w.writerow([method, k, t["reads"], t["writes"], t["muls"], t["adds"],
                        int(makespan)])


# -- per-iteration work of the synchronised schemes -------------------------

def _row_structure(m: CscMatrix):
    """Row index -> column indices (CSR pattern) as flat arrays."""
    t = m.transpose()
    return t.col_ptr, t.row_idx


def sync_row_work(m: CscMatrix, owner: np.ndarray, k: int, pid: int):
    """``(reads, writes, muls, adds)`` for one sweep of pid's rows."""
    ptr, cols = _row_structure(m)
    rows = np.flatnonzero(owner == pid)
    nr = ptr[rows + 1] - ptr[rows]
    if k == 1:
        reads = int(nr.sum())
    else:
        reads = 0
        for i in rows:
            c = cols[ptr[i]:ptr[i + 1]]
            reads += int(np.count_nonzero(owner[c] != pid))
    return reads, int(rows.size), int(nr.sum()), int(nr.sum())


def sync_column_work(m: CscMatrix, owner: np.ndarray, pid: int, homogeneous: bool = False):
    """``(reads, writes, muls, adds)`` for one sweep of pid's columns.

    Contributions to the same remote coordinate are aggregated locally and
    pushed once with a read-add-write.
    """
    cols = np.flatnonzero(owner == pid)
    outs = m.col_ptr[cols + 1] - m.col_ptr[cols]
    links = int(outs.sum())
    muls = int(np.count_nonzero(outs)) if homogeneous else links
    touched = set()
    for j in cols:
        for r in m.row_idx[m.col_ptr[j]:m.col_ptr[j + 1]]:
            if owner[r] != pid:
                touched.add(int(r))
    remote = len(touched)
    return remote, remote + int(cols.size), muls, links + remote
