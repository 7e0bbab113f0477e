"""Exact minimisation of convex-prior subproblems by a layered min-cut.

A move freezes some nodes at their current labels and lets the active
nodes choose from contiguous label intervals.  Edges between two frozen
nodes become constants, edges with one active endpoint become unary terms
(always priced by ``g``), and edges between two active nodes keep a pairwise
term priced by a table that must be convex over the differences it can see.

Each active node with an interval of ``k`` labels gets ``k - 1`` binary
variables ``y[m] = [u >= lo + m]``; infinite arcs force the thresholds to be
monotone.  A pairwise term ``w f(u_i - u_j)`` splits into linear terms plus
one arc per level pair with capacity ``w`` times the second difference of
``f``; arcs with zero capacity are never emitted, so a prior that is linear
beyond ``T`` yields O(L T) arcs per edge instead of O(L^2).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .energy import EnergyModel, active_mask, check_labeling
from .errors import ContractViolation, NonConvexPriorError
from .maxflow import INF_CAPACITY, SOURCE, FlowNetwork, solve_arrays, write_dimacs
from .priors import is_discretely_convex


@dataclass
class SubProblem:
    """A move restricted to its active nodes.

    ``unary`` is dense over all labels; only entries inside each node's
    interval are meaningful.
    """

    nodes: np.ndarray            # global ids of active nodes, ascending
    lower: np.ndarray            # per active node
    upper: np.ndarray            # per active node, inclusive
    unary: np.ndarray = field(repr=False)
    pair_a: np.ndarray = field(repr=False)      # local endpoint indices
    pair_b: np.ndarray = field(repr=False)
    pair_w: np.ndarray = field(repr=False)
    pair_edges: np.ndarray = field(repr=False)  # global edge ids
    table: np.ndarray = field(repr=False)       # prior on active-active edges
    table_mode: str
    constant_term: float
    current: np.ndarray          # local view of the labeling the move starts from
    base: np.ndarray = field(repr=False)  # full labeling the move starts from

    @property
    def offset(self) -> int:
        return (len(self.table) - 1) // 2

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def interval_sizes(self) -> np.ndarray:
        return self.upper - self.lower + 1

    def evaluate(self, u) -> float:
        u = np.asarray(u, dtype=np.int64)
        return float(self.evaluate_batch(u[None, :])[0])

    def evaluate_batch(self, U: np.ndarray) -> np.ndarray:
        """Move energy for each row of ``U`` (rows are local labelings)."""
        U = np.asarray(U, dtype=np.int64)
        out = np.full(len(U), self.constant_term)
        if self.size:
            out += self.unary[np.arange(self.size)[None, :], U].sum(axis=1)
        if len(self.pair_a):
            d = U[:, self.pair_a] - U[:, self.pair_b] + self.offset
            out += (self.pair_w[None, :] * self.table[d]).sum(axis=1)
        return out

    def candidates(self):
        return [np.arange(lo, hi + 1) for lo, hi in zip(self.lower, self.upper)]

    def embed(self, u) -> np.ndarray:
        """Full labeling with the active nodes set to ``u``."""
        x = self.base.copy()
        x[self.nodes] = u
        return x

    def span(self) -> tuple[int, int]:
        """Range of label differences the pairwise table must cover."""
        if not len(self.pair_a):
            return 0, 0
        lo = int(np.min(self.lower[self.pair_a] - self.upper[self.pair_b]))
        hi = int(np.max(self.upper[self.pair_a] - self.lower[self.pair_b]))
        return lo, hi


def _interval_array(value, n: int, L: int) -> np.ndarray:
    a = np.broadcast_to(np.asarray(value, dtype=np.int64), (n,)).copy()
    return np.clip(a, 0, L - 1)


def build_subproblem(model: EnergyModel, x, active, lower=0, upper=None,
                     pair_mode: str = "h", dropped_edges=None) -> SubProblem:
    """Reduce ``model`` to the move that lets ``active`` nodes pick labels in ``[lower, upper]``.

    ``lower``/``upper`` are per-node arrays over all nodes (or scalars).
    ``dropped_edges`` (boolean per edge) marks edges held at their current
    cost regardless of endpoint activity.
    """
    x = check_labeling(model, x)
    n, L = model.node_count, model.label_count
    mask = active_mask(n, active)
    lo_all = _interval_array(lower, n, L)
    hi_all = _interval_array(L - 1 if upper is None else upper, n, L)
    nodes = np.flatnonzero(mask)
    lo, hi = lo_all[nodes], hi_all[nodes]
    if np.any(lo > hi):
        raise ContractViolation("empty candidate interval")
    cur = x[nodes]
    if np.any((cur < lo) | (cur > hi)):
        raise ContractViolation("current label lies outside its candidate interval")

    prior = model.prior
    off = prior.offset
    g = prior.g
    table = prior.table(pair_mode)
    e = model.edges
    w = model.weights
    ei, ej = e[:, 0], e[:, 1]
    ai, aj = mask[ei], mask[ej]
    dropped = np.zeros(len(e), dtype=bool) if dropped_edges is None else np.asarray(dropped_edges, dtype=bool)
    if dropped.shape != (len(e),):
        raise ContractViolation("dropped_edges must have one flag per edge")

    local = np.full(n, -1, dtype=np.int64)
    local[nodes] = np.arange(len(nodes))

    frozen = ~mask
    constant = float(model.unary[np.flatnonzero(frozen), x[frozen]].sum())
    const_edges = dropped | (~ai & ~aj)
    constant += float((w[const_edges] * g[x[ei[const_edges]] - x[ej[const_edges]] + off]).sum())

    unary = model.unary[nodes].copy()
    labels = np.arange(L)
    # active i, frozen j: w g(u_i - x_j)
    sel = ~dropped & ai & ~aj
    if np.any(sel):
        contrib = w[sel, None] * g[labels[None, :] - x[ej[sel]][:, None] + off]
        np.add.at(unary, local[ei[sel]], contrib)
    # frozen i, active j: w g(x_i - u_j)
    sel = ~dropped & ~ai & aj
    if np.any(sel):
        contrib = w[sel, None] * g[x[ei[sel]][:, None] - labels[None, :] + off]
        np.add.at(unary, local[ej[sel]], contrib)

    pair = ~dropped & ai & aj
    pair_ids = np.flatnonzero(pair)
    return SubProblem(
        nodes=nodes, lower=lo, upper=hi, unary=unary,
        pair_a=local[ei[pair]], pair_b=local[ej[pair]], pair_w=w[pair].copy(),
        pair_edges=pair_ids, table=table, table_mode=pair_mode.lower(),
        constant_term=constant, current=cur.copy(), base=x.copy(),
    )


def _second_differences(table: np.ndarray) -> np.ndarray:
    d2 = table[:-2] - 2.0 * table[1:-1] + table[2:]
    scale = max(1.0, float(np.max(np.abs(table))))
    d2 = np.where(np.abs(d2) <= 1e-12 * scale, 0.0, d2)
    return d2


@dataclass
class LayeredGraph:
    """Binary-variable network for a :class:`SubProblem`.

    Energy of a threshold assignment ``y`` (True = source side = ``u >= lo + m``)::

        E(y) = constant + coef . y + sum_arcs cap * y[tail] * (1 - y[head])
    """

    sizes: np.ndarray
    lower: np.ndarray
    offsets: np.ndarray
    tails: np.ndarray = field(repr=False)
    heads: np.ndarray = field(repr=False)
    caps: np.ndarray = field(repr=False)
    coef: np.ndarray = field(repr=False)
    constant: float
    arc_edge: np.ndarray = field(repr=False)  # local pair-edge index, -1 for column arcs
    pair_count: int

    @property
    def n_vars(self) -> int:
        return int(self.offsets[-1])

    @property
    def cut_offset(self) -> float:
        """Add to a cut capacity to obtain the move energy."""
        return self.constant + float(np.minimum(self.coef, 0.0).sum())

    def pair_arc_counts(self) -> np.ndarray:
        sel = self.arc_edge >= 0
        return np.bincount(self.arc_edge[sel], minlength=self.pair_count)

    def encode(self, u) -> np.ndarray:
        """Threshold variables (source side) for a local labeling."""
        u = np.asarray(u, dtype=np.int64)
        y = np.zeros(self.n_vars, dtype=bool)
        for i, (base, k) in enumerate(zip(self.lower, self.sizes)):
            lvl = u[i] - base
            y[self.offsets[i]: self.offsets[i] + lvl] = True
        return y

    def decode(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=bool)
        u = np.empty(len(self.sizes), dtype=np.int64)
        for i, (base, k) in enumerate(zip(self.lower, self.sizes)):
            col = y[self.offsets[i]: self.offsets[i] + k - 1]
            c = int(col.sum())
            if not np.all(col[:c]):
                raise RuntimeError("non-monotone cut in layered graph")
            u[i] = base + c
        return u

    def cut_capacity(self, y) -> float:
        y = np.asarray(y, dtype=bool)
        pos = np.maximum(self.coef, 0.0)
        neg = np.maximum(-self.coef, 0.0)
        arcs = self.caps[y[self.tails] & ~y[self.heads]].sum()
        return float(arcs + pos[y].sum() + neg[~y].sum())

    def to_flow_network(self) -> FlowNetwork:
        """Explicit network: variables ``0..n-1``, source ``n``, sink ``n+1``."""
        n = self.n_vars
        net = FlowNetwork(n + 2, n, n + 1)
        net.add_arcs(self.tails, self.heads, self.caps)
        pos = self.coef > 0
        neg = self.coef < 0
        idx = np.arange(n)
        net.add_arcs(idx[pos], np.full(pos.sum(), n + 1), self.coef[pos])
        net.add_arcs(np.full(neg.sum(), n), idx[neg], -self.coef[neg])
        return net


def build_layered_graph(sub: SubProblem) -> LayeredGraph:
    if len(sub.pair_a):
        lo, hi = sub.span()
        off = sub.offset
        lo, hi = max(lo, -off), min(hi, off)
        if not is_discretely_convex(sub.table, lo, hi, offset=off):
            raise NonConvexPriorError(
                f"pairwise table ({sub.table_mode}) is not convex over differences [{lo}, {hi}]")
    sizes = sub.interval_sizes.astype(np.int64)
    offsets = np.zeros(len(sizes) + 1, dtype=np.int64)
    np.cumsum(sizes - 1, out=offsets[1:])
    d2 = _second_differences(sub.table)
    if len(d2) == 0:
        d2 = np.zeros(1)
    tails, heads, caps, coef, const, arc_edge = _kernels.layered_arcs(
        sub.lower.astype(np.int64), sizes, offsets, np.ascontiguousarray(sub.unary),
        sub.pair_a.astype(np.int64), sub.pair_b.astype(np.int64), sub.pair_w.astype(float),
        np.ascontiguousarray(sub.table, dtype=float), np.ascontiguousarray(d2), sub.offset,
        INF_CAPACITY)
    finite = float(caps[caps < INF_CAPACITY].sum() + np.abs(coef).sum())
    if finite >= INF_CAPACITY:
        raise ContractViolation("finite capacities sum past the infinity sentinel")
    return LayeredGraph(sizes=sizes, lower=sub.lower.astype(np.int64), offsets=offsets,
                        tails=tails, heads=heads, caps=caps, coef=coef,
                        constant=const + sub.constant_term, arc_edge=arc_edge,
                        pair_count=len(sub.pair_a))


def solve_exact(sub: SubProblem, algorithm: str = "bk"):
    """Exact minimiser of the move energy over the product of candidate intervals.

    Returns ``(u, energy)`` with ``u`` the local labeling of the active nodes.
    """
    if sub.size == 0:
        return np.zeros(0, dtype=np.int64), float(sub.constant_term)
    graph = build_layered_graph(sub)
    n = graph.n_vars
    if n == 0:
        u = sub.lower.copy()
    else:
        flow, seg = solve_arrays(n, graph.tails, graph.heads, graph.caps,
                                 np.zeros(len(graph.caps)), -graph.coef, algorithm)
        u = graph.decode(seg == SOURCE)
        expect = flow + graph.cut_offset
        got = sub.evaluate(u)
        if abs(expect - got) > 1e-6 * max(1.0, abs(got)):
            raise RuntimeError(f"cut value {expect!r} disagrees with move energy {got!r}")
    return u, sub.evaluate(u)


def dump_dimacs(sub: SubProblem, fh) -> None:
    """Debug dump of the subproblem's layered network in DIMACS max-flow form."""
    graph = build_layered_graph(sub)
    write_dimacs(graph.to_flow_network(), fh,
                 comment=f"layered graph: {sub.size} active nodes, {graph.n_vars} threshold variables,"
                         f" cut offset {graph.cut_offset!r}")
