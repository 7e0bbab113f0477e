"""Plain-text instance files.

::

    rangemove-instance 1
    nodes <n> labels <L> edges <m>
    prior <tl|tq|cauchy|tab> <T>
    grid <width> <height>          (or: grid none)
    table <2L-1 values>            (tab priors only, g(-(L-1)) .. g(L-1))
    unary
    <n lines of L costs>
    edges
    <m lines: i j w>

Lines starting with ``#`` are comments.  Floats are written with ``repr`` so
a write/read round trip is exact.
"""

from __future__ import annotations

from typing import Iterator, List, TextIO

import numpy as np

from .energy import EnergyModel, GraphTopology, LabelSpace
from .errors import ContractViolation
from .priors import PriorKind, make_prior

MAGIC = "rangemove-instance"
VERSION = 1


def write_instance(model: EnergyModel, fh: TextIO) -> None:
    prior = model.prior
    fh.write(f"{MAGIC} {VERSION}\n")
    fh.write(f"nodes {model.node_count} labels {model.label_count} edges {len(model.edges)}\n")
    fh.write(f"prior {prior.kind.value} {prior.trunc}\n")
    grid = model.topology.grid
    fh.write("grid none\n" if grid is None else f"grid {grid[0]} {grid[1]}\n")
    if prior.kind == PriorKind.TABULATED:
        fh.write("table " + " ".join(repr(float(v)) for v in prior.g) + "\n")
    fh.write("unary\n")
    for row in model.unary:
        fh.write(" ".join(repr(float(v)) for v in row) + "\n")
    fh.write("edges\n")
    for (i, j), w in zip(model.edges, model.weights):
        fh.write(f"{int(i)} {int(j)} {float(w)!r}\n")


def _lines(fh: TextIO) -> Iterator[List[str]]:
    for raw in fh:
        line = raw.strip()
        if line and not line.startswith("#"):
            yield line.split()


def _expect(tokens: List[str], key: str) -> List[str]:
    if not tokens or tokens[0] != key:
        raise ContractViolation(f"instance file: expected {key!r}, got {' '.join(tokens)!r}")
    return tokens[1:]


def read_instance(fh: TextIO) -> EnergyModel:
    lines = _lines(fh)
    try:
        head = next(lines)
        if head[0] != MAGIC or int(head[1]) != VERSION:
            raise ContractViolation(f"not a version-{VERSION} instance file")
        t = next(lines)
        if len(t) != 6 or t[0] != "nodes" or t[2] != "labels" or t[4] != "edges":
            raise ContractViolation("instance file: bad size line")
        n, L, m = int(t[1]), int(t[3]), int(t[5])
        kind, trunc = _expect(next(lines), "prior")
        g = _expect(next(lines), "grid")
        grid = None if g == ["none"] else (int(g[0]), int(g[1]))
        t = next(lines)
        table = None
        if t[0] == "table":
            table = np.array([float(v) for v in t[1:]])
            t = next(lines)
        _expect(t, "unary")
        unary = np.array([[float(v) for v in next(lines)] for _ in range(n)])
        _expect(next(lines), "edges")
        rows = [next(lines) for _ in range(m)]
    except StopIteration:
        raise ContractViolation("instance file ends early") from None
    except (ValueError, IndexError) as exc:
        raise ContractViolation(f"instance file: {exc}") from None
    if unary.shape != (n, L):
        raise ContractViolation("instance file: unary block has the wrong shape")
    edges = np.array([[int(r[0]), int(r[1])] for r in rows], dtype=np.int64).reshape(-1, 2)
    weights = np.array([float(r[2]) for r in rows])
    prior = make_prior(kind, int(trunc), L, table=table)
    topo = GraphTopology(n, edges, grid=grid)
    if not np.array_equal(topo.edges, edges):
        raise ContractViolation("instance file: edges must be listed in canonical order")
    return EnergyModel(topo, LabelSpace(L), unary, prior, weights)


def save_instance(model: EnergyModel, path) -> None:
    with open(path, "w") as fh:
        write_instance(model, fh)


def load_instance(path) -> EnergyModel:
    with open(path) as fh:
        return read_instance(fh)


def read_labeling(path, node_count: int) -> np.ndarray:
    """Whitespace-separated integer labels, one per node."""
    with open(path) as fh:
        vals = fh.read().split()
    x = np.array([int(v) for v in vals], dtype=np.int64)
    if len(x) != node_count:
        raise ContractViolation(f"{path}: {len(x)} labels for {node_count} nodes")
    return x


def write_labeling(path, x) -> None:
    with open(path, "w") as fh:
        fh.write(" ".join(str(int(v)) for v in x) + "\n")
