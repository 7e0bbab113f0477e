"""s-t max-flow / min-cut.

The default solver is a Boykov-Kolmogorov style search-tree algorithm
(compiled with numba).  A Dinic shortest-augmenting-path solver in plain
Python is kept for differential testing (``algorithm="sap"``).
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from typing import Iterable, List, Tuple

import numpy as np

from . import _kernels
from .errors import BudgetExceeded, ContractViolation, SentinelCutError

INF_CAPACITY = 1e15
RESIDUAL_TOL = 1e-9

SOURCE = 0
SINK = 1


@dataclass
class CutResult:
    flow_value: float
    side_of_cut: np.ndarray  # per node: SOURCE (0) or SINK (1)

    def source_set(self) -> np.ndarray:
        return np.flatnonzero(self.side_of_cut == SOURCE)


class FlowNetwork:
    """Directed network with a distinguished source and sink.

    Each ``add_arc`` creates an arc and its reverse; the reverse gets
    ``rev_capacity`` (0 unless given).
    """

    def __init__(self, node_count: int, source: int, sink: int):
        if source == sink:
            raise ContractViolation("source and sink must differ")
        if not (0 <= source < node_count and 0 <= sink < node_count):
            raise ContractViolation("terminal index out of range")
        self.node_count = int(node_count)
        self.source = int(source)
        self.sink = int(sink)
        self._tails: List[np.ndarray] = []
        self._heads: List[np.ndarray] = []
        self._caps: List[np.ndarray] = []
        self._rcaps: List[np.ndarray] = []

    def add_arc(self, u: int, v: int, capacity: float, rev_capacity: float = 0.0) -> None:
        self.add_arcs([u], [v], [capacity], [rev_capacity])

    def add_arcs(self, tails, heads, caps, rev_caps=None) -> None:
        t = np.asarray(tails, dtype=np.int64).reshape(-1)
        h = np.asarray(heads, dtype=np.int64).reshape(-1)
        c = np.asarray(caps, dtype=float).reshape(-1)
        r = np.zeros_like(c) if rev_caps is None else np.asarray(rev_caps, dtype=float).reshape(-1)
        if not (len(t) == len(h) == len(c) == len(r)):
            raise ContractViolation("arc arrays differ in length")
        if len(t) and (min(t.min(), h.min()) < 0 or max(t.max(), h.max()) >= self.node_count):
            raise ContractViolation("arc endpoint out of range")
        if np.any(t == h):
            raise ContractViolation("self-loop arcs are not allowed")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(r))) or np.any(c < 0) or np.any(r < 0):
            raise ContractViolation("capacities must be finite and nonnegative")
        self._tails.append(t)
        self._heads.append(h)
        self._caps.append(c)
        self._rcaps.append(r)

    def arcs(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        if not self._tails:
            e = np.zeros(0, dtype=np.int64)
            return e, e.copy(), np.zeros(0), np.zeros(0)
        return (np.concatenate(self._tails), np.concatenate(self._heads),
                np.concatenate(self._caps), np.concatenate(self._rcaps))

    @property
    def arc_count(self) -> int:
        return int(sum(len(t) for t in self._tails))

    def directed_arcs(self) -> Iterable[Tuple[int, int, float]]:
        """Every arc with positive capacity, reverses included."""
        t, h, c, r = self.arcs()
        for u, v, cu, cr in zip(t.tolist(), h.tolist(), c.tolist(), r.tolist()):
            if cu > 0:
                yield u, v, cu
            if cr > 0:
                yield v, u, cr

    def cut_capacity(self, side_of_cut) -> float:
        side = np.asarray(side_of_cut)
        t, h, c, r = self.arcs()
        fwd = (side[t] == SOURCE) & (side[h] == SINK)
        bwd = (side[h] == SOURCE) & (side[t] == SINK)
        return float(c[fwd].sum() + r[bwd].sum())

    def finite_capacity_total(self) -> float:
        _, _, c, r = self.arcs()
        return float(c[c < INF_CAPACITY].sum() + r[r < INF_CAPACITY].sum())


def _terminal_form(net: FlowNetwork):
    """Split arcs touching s or t into per-node terminal capacities.

    Flow that can go s->v->t directly is pushed up front and reported as
    ``direct``; the remainder is the net terminal capacity of ``v``.
    """
    t, h, c, r = net.arcs()
    n, s, snk = net.node_count, net.source, net.sink
    src = np.zeros(n)
    dst = np.zeros(n)
    direct = 0.0
    # arc u->v with cap c and v->u with cap r
    for tails, heads, caps in ((t, h, c), (h, t, r)):
        from_s = (tails == s) & (heads != snk)
        np.add.at(src, heads[from_s], caps[from_s])
        to_t = (heads == snk) & (tails != s)
        np.add.at(dst, tails[to_t], caps[to_t])
        direct += float(caps[(tails == s) & (heads == snk)].sum())
    direct += float(np.minimum(src, dst).sum())
    inner = (t != s) & (t != snk) & (h != s) & (h != snk)
    return t[inner], h[inner], c[inner], r[inner], src - dst, direct


def solve_arrays(n: int, tails, heads, caps, rev_caps, tr_cap, algorithm: str = "bk",
                 tol: float = RESIDUAL_TOL) -> Tuple[float, np.ndarray]:
    """Max-flow on inner nodes ``0..n-1`` with terminal capacities folded into ``tr_cap``.

    ``tr_cap[v] > 0`` is capacity s->v, ``< 0`` is capacity v->t.  Returns
    (flow, segment) with segment 0 = source side, 1 = sink side.
    """
    tails = np.asarray(tails, dtype=np.int64)
    heads = np.asarray(heads, dtype=np.int64)
    m = len(tails)
    head = np.empty(2 * m, dtype=np.int64)
    head[0::2] = heads
    head[1::2] = tails
    rcap = np.empty(2 * m)
    rcap[0::2] = caps
    rcap[1::2] = rev_caps
    tail_of = np.empty(2 * m, dtype=np.int64)
    tail_of[0::2] = tails
    tail_of[1::2] = heads
    adj = np.argsort(tail_of, kind="stable").astype(np.int64)
    start = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(tail_of, minlength=n), out=start[1:])
    tr = np.array(tr_cap, dtype=float)
    if algorithm == "bk":
        # lay arcs out contiguously per tail node for locality
        pos = np.empty(2 * m, dtype=np.int64)
        pos[adj] = np.arange(2 * m, dtype=np.int64)
        sister = pos[adj ^ 1]
        return _kernels.bk_maxflow(n, start, sister, head[adj], rcap[adj], tr, tol)
    if algorithm == "sap":
        return _dinic(n, start, adj, head, rcap, tr, tol)
    raise ValueError(f"unknown max-flow algorithm {algorithm!r}")


def _dinic(n, start, adj, head, rcap, tr, tol):
    """Dinic's algorithm over the CSR arrays with explicit terminals s=n, t=n+1."""
    s, t = n, n + 1
    # terminal arcs appended as adjacency lists
    nbrs: List[List[int]] = [list(adj[start[v]:start[v + 1]]) for v in range(n)] + [[], []]
    head = list(head)
    cap = list(rcap)
    for v in range(n):
        if tr[v] > 0:
            a = len(head)
            head += [v, s]
            cap += [tr[v], 0.0]
            nbrs[s].append(a)
            nbrs[v].append(a + 1)
        elif tr[v] < 0:
            a = len(head)
            head += [t, v]
            cap += [-tr[v], 0.0]
            nbrs[v].append(a)
            nbrs[t].append(a + 1)
    total = n + 2
    flow = 0.0
    while True:
        level = [-1] * total
        level[s] = 0
        q = deque([s])
        while q:
            u = q.popleft()
            for a in nbrs[u]:
                if cap[a] > tol and level[head[a]] < 0:
                    level[head[a]] = level[u] + 1
                    q.append(head[a])
        if level[t] < 0:
            break
        it = [0] * total
        while True:
            # iterative DFS for one augmenting path in the level graph
            path: List[int] = []
            u = s
            while u != t:
                advanced = False
                while it[u] < len(nbrs[u]):
                    a = nbrs[u][it[u]]
                    v = head[a]
                    if cap[a] > tol and level[v] == level[u] + 1:
                        path.append(a)
                        u = v
                        advanced = True
                        break
                    it[u] += 1
                if not advanced:
                    if u == s:
                        break
                    level[u] = -1
                    a = path.pop()
                    u = head[a ^ 1]
                    it[u] += 1
            if u != t:
                break
            b = min(cap[a] for a in path)
            for a in path:
                cap[a] -= b
                cap[a ^ 1] += b
            flow += b
    seen = [False] * total
    seen[s] = True
    q = deque([s])
    while q:
        u = q.popleft()
        for a in nbrs[u]:
            if cap[a] > tol and not seen[head[a]]:
                seen[head[a]] = True
                q.append(head[a])
    seg = np.array([0 if seen[v] else 1 for v in range(n)], dtype=np.int8)
    return flow, seg


def max_flow(net: FlowNetwork, algorithm: str = "bk") -> CutResult:
    """Maximum s-t flow and a minimum cut certifying it."""
    finite = net.finite_capacity_total()
    if finite >= INF_CAPACITY:
        raise ContractViolation("finite capacities sum past the infinity sentinel")
    t, h, c, r, tr, direct = _terminal_form(net)
    keep = np.array([v for v in range(net.node_count) if v not in (net.source, net.sink)], dtype=np.int64)
    remap = np.full(net.node_count, -1, dtype=np.int64)
    remap[keep] = np.arange(len(keep))
    flow, seg = solve_arrays(len(keep), remap[t], remap[h], c, r, tr[keep], algorithm)
    side = np.zeros(net.node_count, dtype=np.int8)
    side[keep] = seg
    side[net.source] = SOURCE
    side[net.sink] = SINK
    _check_sentinel(net, side)
    return CutResult(flow_value=float(flow + direct), side_of_cut=side)


def _check_sentinel(net: FlowNetwork, side: np.ndarray) -> None:
    t, h, c, r = net.arcs()
    fwd = (side[t] == SOURCE) & (side[h] == SINK) & (c >= INF_CAPACITY)
    bwd = (side[h] == SOURCE) & (side[t] == SINK) & (r >= INF_CAPACITY)
    if np.any(fwd) or np.any(bwd):
        raise SentinelCutError("minimum cut crosses an infinite-capacity arc")


def min_cut_value_bruteforce(net: FlowNetwork, max_free: int = 18) -> float:
    """Minimum s-t cut by enumerating every bipartition of the non-terminal nodes."""
    free = [v for v in range(net.node_count) if v not in (net.source, net.sink)]
    if len(free) > max_free:
        raise BudgetExceeded(f"{len(free)} free nodes; brute force allows at most {max_free}")
    arcs = list(net.directed_arcs())
    if not arcs:
        return 0.0
    k = len(free)
    codes = np.arange(2 ** k, dtype=np.int64)
    # side matrix: column per node, 1 = sink side
    side = np.zeros((len(codes), net.node_count), dtype=bool)
    for bit, v in enumerate(free):
        side[:, v] = (codes >> bit) & 1
    side[:, net.sink] = True
    best = np.zeros(len(codes))
    for u, v, c in arcs:
        best += c * (~side[:, u] & side[:, v])
    return float(best.min())


# -- DIMACS max-flow text format ------------------------------------------------

def write_dimacs(net: FlowNetwork, fh, comment: str | None = None) -> None:
    """Write ``net`` as DIMACS max-flow text (1-based node ids)."""
    arcs = list(net.directed_arcs())
    if comment:
        for line in comment.splitlines():
            fh.write(f"c {line}\n")
    fh.write(f"p max {net.node_count} {len(arcs)}\n")
    fh.write(f"n {net.source + 1} s\n")
    fh.write(f"n {net.sink + 1} t\n")
    for u, v, c in arcs:
        fh.write(f"a {u + 1} {v + 1} {c!r}\n")


def read_dimacs(fh) -> FlowNetwork:
    n = source = sink = None
    tails, heads, caps = [], [], []
    for lineno, raw in enumerate(fh, 1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "p":
            if len(parts) != 4 or parts[1] != "max":
                raise ValueError(f"line {lineno}: expected 'p max <nodes> <arcs>'")
            n = int(parts[2])
        elif tag == "n":
            if parts[2] == "s":
                source = int(parts[1]) - 1
            elif parts[2] == "t":
                sink = int(parts[1]) - 1
            else:
                raise ValueError(f"line {lineno}: node designator must be s or t")
        elif tag == "a":
            tails.append(int(parts[1]) - 1)
            heads.append(int(parts[2]) - 1)
            caps.append(float(parts[3]))
        else:
            raise ValueError(f"line {lineno}: unknown record {tag!r}")
    if n is None or source is None or sink is None:
        raise ValueError("DIMACS input lacks a problem line or terminal designators")
    net = FlowNetwork(n, source, sink)
    if tails:
        net.add_arcs(tails, heads, caps)
    return net


def random_network(rng: np.random.Generator, free_nodes: int, density: float = 0.3,
                   max_cap: float = 10.0) -> FlowNetwork:
    """Random network on ``free_nodes + 2`` nodes; node 0 is s, node 1 is t."""
    n = free_nodes + 2
    net = FlowNetwork(n, 0, 1)
    tails, heads, caps = [], [], []
    for u, v in itertools.permutations(range(n), 2):
        if v == 0 or u == 1:
            continue
        if rng.random() < density:
            tails.append(u)
            heads.append(v)
            caps.append(float(rng.uniform(0.0, max_cap)))
    if tails:
        net.add_arcs(tails, heads, caps)
    return net
