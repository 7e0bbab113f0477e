"""Pairwise MRF energy model and exact energy evaluation.

The energy of a labeling ``x`` is

    E(x) = sum_i U[i, x_i] + sum_(i,j) w_ij * f(x_i - x_j)

with ``f`` either the prior ``g`` or its convex extension ``h``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .errors import ContractViolation
from .priors import Prior

Labeling = np.ndarray


@dataclass(frozen=True)
class LabelSpace:
    count: int

    def __post_init__(self):
        if int(self.count) < 2:
            raise ContractViolation(f"label space needs at least 2 labels, got {self.count}")


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def canonical_edge_order(edges: np.ndarray) -> np.ndarray:
    """Permutation sorting edges lexicographically on ``(min(i,j), max(i,j))``."""
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    lo = np.minimum(e[:, 0], e[:, 1])
    hi = np.maximum(e[:, 0], e[:, 1])
    return np.lexsort((hi, lo))


@dataclass(frozen=True)
class GraphTopology:
    """Undirected pairwise graph.  Edge ``(i, j)`` keeps its orientation, since
    the prior is applied to ``x_i - x_j``; edges are sorted by ``(min, max)``."""

    node_count: int
    edges: np.ndarray = field(repr=False)
    grid: Optional[Tuple[int, int]] = None  # (width, height), 4-connected

    def __post_init__(self):
        n = int(self.node_count)
        if n < 1:
            raise ContractViolation("graph needs at least one node")
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if e.size:
            if e.min() < 0 or e.max() >= n:
                raise ContractViolation("edge endpoint out of range")
            if np.any(e[:, 0] == e[:, 1]):
                raise ContractViolation("self-loop edges are not allowed")
            e = e[canonical_edge_order(e)]
            lo = np.minimum(e[:, 0], e[:, 1])
            hi = np.maximum(e[:, 0], e[:, 1])
            if np.any((lo[1:] == lo[:-1]) & (hi[1:] == hi[:-1])):
                raise ContractViolation("duplicate edge")
        object.__setattr__(self, "edges", _freeze(np.ascontiguousarray(e)))

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @classmethod
    def grid4(cls, width: int, height: int) -> "GraphTopology":
        """4-connected grid, nodes in row-major order."""
        idx = np.arange(width * height).reshape(height, width)
        horiz = np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()], axis=1)
        vert = np.stack([idx[:-1, :].ravel(), idx[1:, :].ravel()], axis=1)
        return cls(width * height, np.concatenate([horiz, vert]), grid=(width, height))

    @classmethod
    def chain(cls, n: int) -> "GraphTopology":
        e = np.stack([np.arange(n - 1), np.arange(1, n)], axis=1)
        return cls(n, e, grid=(n, 1))


@dataclass(frozen=True)
class EnergyModel:
    topology: GraphTopology
    labels: LabelSpace
    unary: np.ndarray = field(repr=False)
    prior: Prior
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        n, L = self.topology.node_count, self.labels.count
        u = np.array(self.unary, dtype=float)
        if u.shape != (n, L):
            raise ContractViolation(f"unary table must be {n}x{L}, got {u.shape}")
        if not np.all(np.isfinite(u)):
            raise ContractViolation("unary costs must be finite")
        w = np.array(self.weights, dtype=float).reshape(-1)
        if w.shape != (self.topology.edge_count,):
            raise ContractViolation("one weight per edge required")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ContractViolation("edge weights must be finite and nonnegative")
        if self.prior.label_count != L:
            raise ContractViolation("prior tables were built for a different label count")
        object.__setattr__(self, "unary", _freeze(u))
        object.__setattr__(self, "weights", _freeze(w))

    @classmethod
    def build(cls, topology: GraphTopology, unary, prior: Prior, weights=1.0) -> "EnergyModel":
        """Convenience constructor; ``weights`` may be a scalar.

        Weights given per edge must follow ``topology.edges`` order.
        """
        unary = np.asarray(unary, dtype=float)
        w = np.broadcast_to(np.asarray(weights, dtype=float), (topology.edge_count,)).copy()
        return cls(topology, LabelSpace(unary.shape[1]), unary, prior, w)

    @classmethod
    def from_edges(cls, unary, edges, weights, prior: Prior, grid=None) -> "EnergyModel":
        """Build from an arbitrary edge list, keeping each weight with its edge."""
        unary = np.asarray(unary, dtype=float)
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        w = np.broadcast_to(np.asarray(weights, dtype=float), (len(e),))
        order = canonical_edge_order(e)
        topo = GraphTopology(unary.shape[0], e[order], grid=grid)
        return cls(topo, LabelSpace(unary.shape[1]), unary, prior, w[order].copy())

    @property
    def node_count(self) -> int:
        return self.topology.node_count

    @property
    def label_count(self) -> int:
        return self.labels.count

    @property
    def edges(self) -> np.ndarray:
        return self.topology.edges


def check_labeling(model: EnergyModel, x) -> np.ndarray:
    x = np.asarray(x)
    if x.shape != (model.node_count,):
        raise ContractViolation(f"labeling has shape {x.shape}, model has {model.node_count} nodes")
    if not np.issubdtype(x.dtype, np.integer):
        if not np.all(np.equal(np.mod(x, 1), 0)):
            raise ContractViolation("labels must be integers")
    x = x.astype(np.int64)
    if x.size and (x.min() < 0 or x.max() >= model.label_count):
        raise ContractViolation("label out of range")
    return x


def unary_energy(model: EnergyModel, x: np.ndarray) -> float:
    return float(model.unary[np.arange(model.node_count), x].sum())


def edge_terms(model: EnergyModel, x: np.ndarray, mode: str = "G") -> np.ndarray:
    """Per-edge pairwise cost ``w_ij * f(x_i - x_j)``."""
    e = model.edges
    table = model.prior.table(mode)
    return model.weights * table[x[e[:, 0]] - x[e[:, 1]] + model.prior.offset]


def evaluate_energy(model: EnergyModel, x, prior_mode: str = "G") -> float:
    """Energy of ``x`` with every edge priced by ``g`` (mode ``G``) or ``h`` (mode ``H``)."""
    x = check_labeling(model, x)
    return unary_energy(model, x) + float(edge_terms(model, x, prior_mode).sum())


def evaluate_hybrid_energy(model: EnergyModel, x, active) -> float:
    """Energy with ``h`` on edges whose endpoints are both active and ``g`` elsewhere."""
    x = check_labeling(model, x)
    mask = active_mask(model.node_count, active)
    e = model.edges
    both = mask[e[:, 0]] & mask[e[:, 1]]
    d = x[e[:, 0]] - x[e[:, 1]] + model.prior.offset
    pair = np.where(both, model.prior.h[d], model.prior.g[d])
    return unary_energy(model, x) + float((model.weights * pair).sum())


def active_mask(node_count: int, active) -> np.ndarray:
    """Normalise a node set (boolean mask or index collection) to a boolean mask."""
    if active is None:
        return np.zeros(node_count, dtype=bool)
    a = np.asarray(active)
    if a.dtype == bool:
        if a.shape != (node_count,):
            raise ContractViolation("active mask has wrong length")
        return a.copy()
    a = np.asarray(list(active) if not isinstance(active, np.ndarray) else active, dtype=np.int64).reshape(-1)
    if a.size and (a.min() < 0 or a.max() >= node_count):
        raise ContractViolation("active node index out of range")
    m = np.zeros(node_count, dtype=bool)
    m[a] = True
    return m
