"""Test graphs: generators, edge-list files and conversion to matrices.

Edge-list text format::

    n <count>
    <src> <dst> [weight]
    ...

Indices are 0-based and whitespace separated; ``#`` starts a comment.
An edge ``src -> dst`` becomes the matrix entry ``(row=dst, col=src)``, so
column ``src`` lists the out-links of ``src``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .sparse import CscMatrix, csc_from_arrays

log = logging.getLogger(__name__)


class EdgeListFormatError(ValueError):
    def __init__(self, path, lineno: int, msg: str):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.lineno = lineno


@dataclass
class EdgeList:
    n: int
    src: np.ndarray
    dst: np.ndarray
    weights: np.ndarray | None = None
    stats: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        self.src = np.asarray(self.src, dtype=np.int64)
        self.dst = np.asarray(self.dst, dtype=np.int64)
        if self.src.shape != self.dst.shape:
            raise ValueError("src and dst must have equal length")
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=np.float64)
            if self.weights.shape != self.src.shape:
                raise ValueError("weights must match the number of edges")
        if self.src.size and (min(self.src.min(), self.dst.min()) < 0
                              or max(self.src.max(), self.dst.max()) >= self.n):
            raise IndexError(f"edge index out of range for n={self.n}")

    def __len__(self):
        return int(self.src.size)

    def __eq__(self, other):
        if not isinstance(other, EdgeList):
            return NotImplemented
        if self.n != other.n or not np.array_equal(self.src, other.src) \
                or not np.array_equal(self.dst, other.dst):
            return False
        if self.weights is None or other.weights is None:
            return self.weights is None and other.weights is None
        return np.array_equal(self.weights, other.weights)

    def edges(self) -> list[tuple[int, int]]:
        return list(zip(self.src.tolist(), self.dst.tolist()))

    def to_matrix(self) -> CscMatrix:
        """Adjacency matrix with entry ``(dst, src)`` per link."""
        w = np.ones(len(self)) if self.weights is None else self.weights
        return csc_from_arrays(self.dst, self.src, w, self.n)

    def subgraph(self, k: int) -> EdgeList:
        """Induced subgraph on nodes ``0..k-1``."""
        k = min(k, self.n)
        keep = (self.src < k) & (self.dst < k)
        w = None if self.weights is None else self.weights[keep]
        return EdgeList(k, self.src[keep], self.dst[keep], w)


def degree_stats(e: EdgeList) -> dict:
    """Out-degree audit under both counting conventions.

    ``directed`` counts stored entries per node. ``undirected`` treats the
    list as symmetric and counts each unordered pair once per endpoint,
    a self-loop once.
    """
    out = np.bincount(e.src, minlength=e.n)
    loops = int(np.count_nonzero(e.src == e.dst))
    pairs = (len(e) - loops) // 2 + loops
    stats = {
        "n": e.n,
        "directed_entries": len(e),
        "self_loops": loops,
        "undirected_links": pairs,
        "mean_out_degree": float(out.mean()) if e.n else 0.0,
        "sd_out_degree": float(out.std()) if e.n else 0.0,
        "min_out_degree": int(out.min()) if e.n else 0,
        "max_out_degree": int(out.max()) if e.n else 0,
        "median_out_degree": float(np.median(out)) if e.n else 0.0,
    }
    return stats


def uniform_random_graph(n: int, target_links: int, seed=None,
                         count: str = "directed") -> EdgeList:
    """Symmetric random graph with self-loops allowed.

    Unordered node pairs are drawn uniformly without replacement. With
    ``count="directed"`` pairs are added until ``target_links`` stored
    entries exist (a pair ``i != j`` contributes two, a self-loop one).
    With ``count="undirected"`` exactly ``target_links`` pairs are drawn.
    """
    n_pairs = n * (n + 1) // 2
    if count == "directed":
        feasible = 0 <= target_links <= n * n
    elif count == "undirected":
        feasible = 0 <= target_links <= n_pairs
    else:
        raise ValueError(f"count must be 'directed' or 'undirected', got {count!r}")
    if not feasible:
        raise ValueError(f"cannot place {target_links} {count} links on {n} nodes")
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n)
    order = rng.permutation(n_pairs)
    if count == "undirected":
        chosen = order[:target_links]
    else:
        cost = np.where(iu[order] == ju[order], 1, 2)
        total = np.cumsum(cost)
        cut = int(np.searchsorted(total, target_links, side="right"))
        chosen = list(order[:cut])
        have = int(total[cut - 1]) if cut else 0
        if have < target_links:
            # one entry short: only a self-loop fits
            rest = order[cut:]
            loops = rest[iu[rest] == ju[rest]]
            if loops.size == 0:
                raise ValueError(f"cannot place exactly {target_links} entries on {n} nodes")
            chosen.append(loops[0])
        chosen = np.asarray(chosen, dtype=np.int64)
    a, b = iu[chosen], ju[chosen]
    off = a != b
    src = np.concatenate([a, b[off]])
    dst = np.concatenate([b, a[off]])
    order = np.lexsort((dst, src))
    e = EdgeList(n, src[order], dst[order])
    e.stats = degree_stats(e)
    log.info("uniform graph: %s", e.stats)
    return e


def power_law_graph(n: int, exponent: float = 2.1, seed=None, min_degree: int = 1,
                    max_degree: int | None = None) -> EdgeList:
    """Directed graph with truncated power-law out-degrees.

    ``P(k) ~ k**-exponent`` on ``min_degree..max_degree`` (default
    ``n - 1``, at least 1); destinations are uniform without repetition
    per source.
    """
    if exponent <= 1:
        raise ValueError(f"exponent must be > 1, got {exponent}")
    rng = np.random.default_rng(seed)
    if n <= 0:
        return EdgeList(0, [], [])
    kmax = max(1, n - 1) if max_degree is None else min(max_degree, n)
    kmin = min(max(min_degree, 1), kmax)
    ks = np.arange(kmin, kmax + 1)
    p = ks.astype(float) ** -exponent
    p /= p.sum()
    degrees = rng.choice(ks, size=n, p=p)
    src, dst = [], []
    for i, k in enumerate(degrees):
        targets = rng.choice(n, size=int(k), replace=False)
        src.append(np.full(k, i))
        dst.append(np.sort(targets))
    e = EdgeList(n, np.concatenate(src), np.concatenate(dst))
    e.stats = degree_stats(e)
    log.info("power-law graph: %s", e.stats)
    return e


def write_edge_list(path, e: EdgeList) -> None:
    with open(path, "w") as fh:
        fh.write(f"n {e.n}\n")
        if e.weights is None:
            fh.writelines(f"{s} {d}\n" for s, d in zip(e.src.tolist(), e.dst.tolist()))
        else:
            fh.writelines(f"{s} {d} {w!r}\n" for s, d, w in zip(e.src.tolist(), e.dst.tolist(), e.weights.tolist()))


def read_edge_list(path, max_nodes: int | None = None) -> EdgeList:
    """Parse the edge-list format; ``max_nodes`` keeps the induced subgraph
    on the first ``max_nodes`` nodes."""
    n = None
    src, dst, wts = [], [], []
    weighted = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            body = line.split("#", 1)[0].split()
            if not body:
                continue
            if n is None:
                if len(body) != 2 or body[0] != "n":
                    raise EdgeListFormatError(path, lineno, "expected header 'n <count>'")
                try:
                    n = int(body[1])
                except ValueError:
                    raise EdgeListFormatError(path, lineno, f"bad node count {body[1]!r}") from None
                if n < 0:
                    raise EdgeListFormatError(path, lineno, "node count must be >= 0")
                continue
            if len(body) not in (2, 3):
                raise EdgeListFormatError(path, lineno, "expected 'src dst [weight]'")
            if weighted is None:
                weighted = len(body) == 3
            elif weighted != (len(body) == 3):
                raise EdgeListFormatError(path, lineno, "mixed weighted and unweighted lines")
            try:
                s, d = int(body[0]), int(body[1])
                w = float(body[2]) if weighted else None
            except ValueError:
                raise EdgeListFormatError(path, lineno, f"cannot parse {line.strip()!r}") from None
            if not (0 <= s < n and 0 <= d < n):
                raise EdgeListFormatError(path, lineno, f"node index out of range for n={n}")
            if weighted and not (w >= 0 and np.isfinite(w)):
                raise EdgeListFormatError(path, lineno, f"invalid weight {body[2]!r}")
            src.append(s)
            dst.append(d)
            if weighted:
                wts.append(w)
    if n is None:
        raise EdgeListFormatError(path, 0, "empty file, missing header")
    e = EdgeList(n, np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64),
                 np.array(wts) if weighted else None)
    if max_nodes is not None:
        e = e.subgraph(max_nodes)
    return e


def snake_graph() -> EdgeList:
    """Five-node periodic graph ``0->{1,2}, 1->3, 2->4, 3->0, 4->0``."""
    return EdgeList(5, [0, 0, 1, 2, 3, 4], [1, 2, 3, 4, 0, 0])


def chain_matrix() -> CscMatrix:
    """Two-node chain with both off-diagonal entries 0.5."""
    return csc_from_arrays([1, 0], [0, 1], [0.5, 0.5], 2)


