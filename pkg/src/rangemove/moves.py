"""Move-making solvers.

Every solver repeatedly picks a move (a set of active nodes plus the labels
each may take), minimises the energy restricted to that move, and keeps the
result if it does not raise the true energy ``E^g``.

Solvers
-------
``alpha_exp``  binary expansion moves, alpha ascending
``ab_swap``    binary swap moves over all label pairs
``rswap``      range swaps over ``[alpha, beta]`` priced by ``g``
``rswape``     range swaps widened by ``epsilon`` and priced by ``h``
``gswap``      all nodes allowed to move over the full label set, except those
               omitted so no active pair is more than ``T`` apart
``gswapf``     every node active; edges already more than ``T`` apart are held
               at their current cost (truncated-flat priors only)
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Union

import numpy as np

from .energy import EnergyModel, GraphTopology, check_labeling, evaluate_energy, evaluate_hybrid_energy
from .errors import ContractViolation, SolverRefused
from .ishikawa import SubProblem, build_subproblem, solve_exact
from .maxflow import SOURCE, solve_arrays
from .priors import is_discretely_convex

SOLVERS = ("alpha_exp", "ab_swap", "rswap", "rswape", "gswap", "gswapf")
_ALIASES = {
    "alpha_expansion": "alpha_exp",
    "expansion": "alpha_exp",
    "alphabeta_swap": "ab_swap",
    "swap": "ab_swap",
    "range_swap": "rswap",
    "range_swap_extended": "rswape",
}
# new energies above old + this are treated as increases and rejected
ACCEPT_SLACK = 1e-9


def solver_name(name: str) -> str:
    key = name.strip().lower().replace("-", "_")
    key = _ALIASES.get(key, key)
    if key not in SOLVERS:
        raise ContractViolation(f"unknown solver {name!r}; choose from {', '.join(SOLVERS)}")
    return key


# --- plans -----------------------------------------------------------------


@dataclass(frozen=True)
class Standard:
    """Range move over ``[alpha, beta]`` with the prior itself on active pairs."""


@dataclass(frozen=True)
class Extended:
    """Range move over ``[alpha - epsilon, beta + epsilon]`` with ``h`` on active pairs."""

    epsilon: int = 2

    def __post_init__(self):
        if int(self.epsilon) < 0:
            raise ContractViolation("epsilon must be nonnegative")


@dataclass(frozen=True)
class Alternating:
    """Omit the larger endpoint of each over-threshold edge on even iterations, the smaller on odd."""


@dataclass(frozen=True)
class RangeAnchored:
    """Prefer omitting whichever endpoint lies outside ``[alpha, beta]``."""

    alpha: int
    beta: int


RangeVariant = Union[Standard, Extended]
ActiveStrategy = Union[Alternating, RangeAnchored]

# edge classes within a plan
ACTIVE_ACTIVE, ACTIVE_FROZEN, FROZEN_FROZEN, DROPPED = 0, 1, 2, 3


@dataclass
class MovePlan:
    """Which nodes move, over which labels, and how each edge is priced."""

    kind: str
    active: np.ndarray                 # boolean mask over nodes
    lower: np.ndarray                  # per node (meaningful for active nodes)
    upper: np.ndarray
    edge_class: np.ndarray             # one of the edge class constants per edge
    pair_mode: str = "h"
    parity: int = 0
    alpha: Optional[int] = None
    beta: Optional[int] = None
    epsilon: Optional[int] = None

    @property
    def active_count(self) -> int:
        return int(self.active.sum())

    @property
    def dropped(self) -> np.ndarray:
        return self.edge_class == DROPPED

    def subproblem(self, model: EnergyModel, x) -> SubProblem:
        return build_subproblem(model, x, self.active, self.lower, self.upper,
                                pair_mode=self.pair_mode, dropped_edges=self.dropped)


def _edge_classes(model: EnergyModel, active: np.ndarray, dropped=None) -> np.ndarray:
    e = model.edges
    ai, aj = active[e[:, 0]], active[e[:, 1]]
    cls = np.full(len(e), FROZEN_FROZEN, dtype=np.int8)
    cls[ai ^ aj] = ACTIVE_FROZEN
    cls[ai & aj] = ACTIVE_ACTIVE
    if dropped is not None:
        cls[np.asarray(dropped, dtype=bool)] = DROPPED
    return cls


def condition2_holds(x, edges: np.ndarray, active: np.ndarray, trunc: int) -> bool:
    """True if no edge joins two active nodes whose labels differ by more than ``trunc``."""
    x = np.asarray(x)
    both = active[edges[:, 0]] & active[edges[:, 1]]
    return bool(np.all(np.abs(x[edges[both, 0]] - x[edges[both, 1]]) <= trunc))


def gswap_select_active(x, topology: GraphTopology, trunc: int, parity: int,
                        strategy: ActiveStrategy = Alternating()) -> np.ndarray:
    """Active mask keeping every active pair within ``trunc`` of each other.

    Edges are scanned in canonical order; an over-threshold edge with an
    endpoint already omitted is satisfied and skipped.
    """
    x = np.asarray(x, dtype=np.int64)
    omitted = np.zeros(topology.node_count, dtype=bool)
    e = topology.edges
    diff = np.abs(x[e[:, 0]] - x[e[:, 1]])
    even = int(parity) % 2 == 0
    for k in np.flatnonzero(diff > trunc):
        i, j = int(e[k, 0]), int(e[k, 1])
        if omitted[i] or omitted[j]:
            continue
        if isinstance(strategy, RangeAnchored):
            in_i = strategy.alpha <= x[i] <= strategy.beta
            in_j = strategy.alpha <= x[j] <= strategy.beta
            if in_i != in_j:
                omitted[j if in_i else i] = True
                continue
        big, small = (i, j) if x[i] > x[j] else (j, i)
        omitted[big if even else small] = True
    return ~omitted


def plan_range_swap(model: EnergyModel, x, alpha: int, beta: int,
                    variant: RangeVariant = Standard()) -> MovePlan:
    trunc = model.prior.trunc
    if not 0 < beta - alpha <= trunc:
        raise ContractViolation(f"range move needs 0 < beta - alpha <= T={trunc}, got [{alpha}, {beta}]")
    x = check_labeling(model, x)
    L = model.label_count
    active = (x >= alpha) & (x <= beta)
    if isinstance(variant, Extended):
        lo, hi, mode, eps = max(0, alpha - variant.epsilon), min(L - 1, beta + variant.epsilon), "h", variant.epsilon
    else:
        lo, hi, mode, eps = alpha, beta, "g", None
    n = model.node_count
    return MovePlan(kind="rswape" if eps is not None else "rswap", active=active,
                    lower=np.full(n, lo, dtype=np.int64), upper=np.full(n, hi, dtype=np.int64),
                    edge_class=_edge_classes(model, active), pair_mode=mode,
                    alpha=alpha, beta=beta, epsilon=eps)


def plan_gswap(model: EnergyModel, x, parity: int, strategy: ActiveStrategy = Alternating()) -> MovePlan:
    x = check_labeling(model, x)
    active = gswap_select_active(x, model.topology, model.prior.trunc, parity, strategy)
    n, L = model.node_count, model.label_count
    return MovePlan(kind="gswap", active=active, lower=np.zeros(n, dtype=np.int64),
                    upper=np.full(n, L - 1, dtype=np.int64),
                    edge_class=_edge_classes(model, active), pair_mode="h", parity=int(parity) % 2)


def plan_gswapf(model: EnergyModel, x) -> MovePlan:
    if not model.prior.is_truncated_flat:
        raise SolverRefused(
            f"gswapf needs a prior that is constant beyond the truncation; "
            f"{model.prior.kind.value} with T={model.prior.trunc} is not, so dropping "
            f"over-threshold edges could raise the energy. Use gswap instead.")
    x = check_labeling(model, x)
    n, L = model.node_count, model.label_count
    e = model.edges
    dropped = np.abs(x[e[:, 0]] - x[e[:, 1]]) > model.prior.trunc
    active = np.ones(n, dtype=bool)
    return MovePlan(kind="gswapf", active=active, lower=np.zeros(n, dtype=np.int64),
                    upper=np.full(n, L - 1, dtype=np.int64),
                    edge_class=_edge_classes(model, active, dropped), pair_mode="h")


# --- moves -----------------------------------------------------------------


@dataclass
class MoveResult:
    labeling: np.ndarray
    energy: float           # true E^g of ``labeling``
    previous: float         # true E^g before the move
    accepted: bool
    active_count: int
    repairs: int = 0
    plan: Optional[MovePlan] = None


def _accept(model: EnergyModel, x: np.ndarray, cand: np.ndarray, e_old: float, strict: bool,
            active_count: int, repairs: int = 0, plan=None) -> MoveResult:
    e_new = evaluate_energy(model, cand)
    better = e_new < e_old if strict else e_new <= e_old + ACCEPT_SLACK
    if better and not np.array_equal(cand, x):
        return MoveResult(cand, e_new, e_old, True, active_count, repairs, plan)
    return MoveResult(x.copy(), e_old, e_old, False, active_count, repairs, plan)


def execute_plan(model: EnergyModel, x, plan: MovePlan, algorithm: str = "bk") -> MoveResult:
    """Solve a range-style plan exactly and apply the monotone acceptance guard."""
    x = check_labeling(model, x)
    e_old = evaluate_energy(model, x)
    if plan.active_count == 0:
        return MoveResult(x.copy(), e_old, e_old, False, 0, 0, plan)
    sub = plan.subproblem(model, x)
    u, _ = solve_exact(sub, algorithm)
    return _accept(model, x, sub.embed(u), e_old, False, plan.active_count, 0, plan)


def range_swap_move(model: EnergyModel, x, alpha: int, beta: int,
                    variant: RangeVariant = Standard(), algorithm: str = "bk") -> MoveResult:
    return execute_plan(model, x, plan_range_swap(model, x, alpha, beta, variant), algorithm)


def gswap_move(model: EnergyModel, x, parity: int, strategy: ActiveStrategy = Alternating(),
               algorithm: str = "bk") -> MoveResult:
    return execute_plan(model, x, plan_gswap(model, x, parity, strategy), algorithm)


def gswapf_move(model: EnergyModel, x, algorithm: str = "bk") -> MoveResult:
    return execute_plan(model, x, plan_gswapf(model, x), algorithm)


@dataclass
class BinaryMove:
    """Each active node picks between ``choice[i, 0]`` (0) and ``choice[i, 1]`` (1).

    ``tables[e]`` is the 2x2 cost of pair ``e`` indexed ``[y_a, y_b]``.
    """

    nodes: np.ndarray
    choice: np.ndarray = field(repr=False)       # (k, 2) labels
    unary: np.ndarray = field(repr=False)        # (k, 2)
    pair_a: np.ndarray = field(repr=False)
    pair_b: np.ndarray = field(repr=False)
    tables: np.ndarray = field(repr=False)       # (m, 2, 2)
    constant_term: float
    base: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.nodes)

    def candidates(self):
        return [np.array([0, 1])] * self.size

    def evaluate_batch(self, Y: np.ndarray, tables: Optional[np.ndarray] = None) -> np.ndarray:
        Y = np.asarray(Y, dtype=np.int64)
        t = self.tables if tables is None else tables
        out = np.full(len(Y), self.constant_term)
        if self.size:
            out += self.unary[np.arange(self.size)[None, :], Y].sum(axis=1)
        if len(self.pair_a):
            out += t[np.arange(len(t))[None, :], Y[:, self.pair_a], Y[:, self.pair_b]].sum(axis=1)
        return out

    def evaluate(self, y) -> float:
        return float(self.evaluate_batch(np.asarray(y)[None, :])[0])

    def embed(self, y) -> np.ndarray:
        x = self.base.copy()
        x[self.nodes] = self.choice[np.arange(self.size), np.asarray(y, dtype=np.int64)]
        return x

    def repaired_tables(self):
        """Tables made submodular by lowering ``[0, 0]`` where needed, and the repair count."""
        t = self.tables.copy()
        a, b, c, d = t[:, 0, 0], t[:, 0, 1], t[:, 1, 0], t[:, 1, 1]
        bad = b + c - a - d < 0
        t[bad, 0, 0] = (b + c - d)[bad]
        return t, int(bad.sum())

    def solve(self, algorithm: str = "bk"):
        """Min-cut solution of the (repaired) move; returns ``(y, repairs)``.

        Exact whenever no repair was needed.
        """
        k = self.size
        if k == 0:
            return np.zeros(0, dtype=np.int64), 0
        t, repairs = self.repaired_tables()
        # y = 1 means sink side.  E = A + (C-A) ya + (D-C) yb + (B+C-A-D)(1-ya) yb
        lin = self.unary[:, 1] - self.unary[:, 0]
        lin = lin.copy()
        a, b, c, d = t[:, 0, 0], t[:, 0, 1], t[:, 1, 0], t[:, 1, 1]
        np.add.at(lin, self.pair_a, c - a)
        np.add.at(lin, self.pair_b, d - c)
        cap = b + c - a - d
        keep = cap > 0
        _, seg = solve_arrays(k, self.pair_a[keep], self.pair_b[keep], cap[keep],
                              np.zeros(int(keep.sum())), lin, algorithm)
        return (seg != SOURCE).astype(np.int64), repairs


def _binary_move(model: EnergyModel, x: np.ndarray, active: np.ndarray, choice: np.ndarray) -> BinaryMove:
    """Binary move over ``active`` nodes with per-node label options ``choice`` (n_active x 2)."""
    off = model.prior.offset
    g = model.prior.g
    e, w = model.edges, model.weights
    n = model.node_count
    nodes = np.flatnonzero(active)
    local = np.full(n, -1, dtype=np.int64)
    local[nodes] = np.arange(len(nodes))
    ei, ej = e[:, 0], e[:, 1]
    ai, aj = active[ei], active[ej]

    frozen = ~active
    constant = float(model.unary[np.flatnonzero(frozen), x[frozen]].sum())
    ff = ~ai & ~aj
    constant += float((w[ff] * g[x[ei[ff]] - x[ej[ff]] + off]).sum())

    unary = model.unary[nodes[:, None], choice].copy()
    sel = ai & ~aj
    if np.any(sel):
        li = local[ei[sel]]
        np.add.at(unary, li, w[sel, None] * g[choice[li] - x[ej[sel]][:, None] + off])
    sel = ~ai & aj
    if np.any(sel):
        lj = local[ej[sel]]
        np.add.at(unary, lj, w[sel, None] * g[x[ei[sel]][:, None] - choice[lj] + off])

    pair = ai & aj
    pa, pb = local[ei[pair]], local[ej[pair]]
    tables = (w[pair, None, None]
              * g[choice[pa][:, :, None] - choice[pb][:, None, :] + off])
    return BinaryMove(nodes=nodes, choice=choice, unary=unary, pair_a=pa, pair_b=pb,
                      tables=tables, constant_term=constant, base=x.copy())


def build_expansion_move(model: EnergyModel, x, alpha: int) -> BinaryMove:
    """Nodes not already at ``alpha`` choose between keeping their label (0) and ``alpha`` (1)."""
    x = check_labeling(model, x)
    if not 0 <= alpha < model.label_count:
        raise ContractViolation(f"alpha={alpha} outside the label set")
    active = x != alpha
    nodes = np.flatnonzero(active)
    choice = np.stack([x[nodes], np.full(len(nodes), alpha)], axis=1)
    return _binary_move(model, x, active, choice)


def build_swap_move(model: EnergyModel, x, alpha: int, beta: int) -> BinaryMove:
    """Nodes labelled ``alpha`` or ``beta`` choose between ``alpha`` (0) and ``beta`` (1)."""
    x = check_labeling(model, x)
    if alpha == beta:
        raise ContractViolation("swap move needs two distinct labels")
    active = (x == alpha) | (x == beta)
    nodes = np.flatnonzero(active)
    choice = np.tile(np.array([alpha, beta], dtype=np.int64), (len(nodes), 1))
    return _binary_move(model, x, active, choice)


def alpha_expansion_move(model: EnergyModel, x, alpha: int, algorithm: str = "bk") -> MoveResult:
    """Expansion move; the result is kept only if it strictly lowers ``E^g``."""
    move = build_expansion_move(model, x, alpha)
    x = move.base
    e_old = evaluate_energy(model, x)
    if move.size == 0:
        return MoveResult(x.copy(), e_old, e_old, False, 0)
    y, repairs = move.solve(algorithm)
    return _accept(model, x, move.embed(y), e_old, True, move.size, repairs)


def alphabeta_swap_move(model: EnergyModel, x, alpha: int, beta: int, algorithm: str = "bk") -> MoveResult:
    move = build_swap_move(model, x, alpha, beta)
    x = move.base
    e_old = evaluate_energy(model, x)
    if move.size == 0:
        return MoveResult(x.copy(), e_old, e_old, False, 0)
    y, repairs = move.solve(algorithm)
    return _accept(model, x, move.embed(y), e_old, False, move.size, repairs)


# --- driver ----------------------------------------------------------------


@dataclass
class SolveOptions:
    tol: float = 1e-6
    epsilon: int = 2
    max_sweeps: int = 100
    max_iterations: int = 1000     # cap on moves for gswap / gswapf
    record: str = "sweep"          # "sweep" or "move": granularity of trace rows
    timing: bool = True            # False writes 0 in the ms column
    check: bool = False            # verify per-move invariants (slow)
    algorithm: str = "bk"


@dataclass
class TraceRow:
    iteration: int
    E_g: float
    E_h: float
    changed_fraction: float
    active_count: int
    ms: int


CSV_COLUMNS = ("iteration", "E_g", "E_h", "changed_fraction", "active_count", "ms")


@dataclass
class SolveTrace:
    """Row 0 is the initial labeling; later rows follow each sweep (or move)."""

    solver: str
    rows: List[TraceRow] = field(default_factory=list)
    labeling: Optional[np.ndarray] = None
    repairs: int = 0
    moves: int = 0
    converged: bool = False

    @property
    def final_energy(self) -> float:
        return self.rows[-1].E_g

    @property
    def iterations(self) -> int:
        return len(self.rows) - 1

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.E_g for r in self.rows])

    @property
    def total_ms(self) -> int:
        return int(sum(r.ms for r in self.rows))

    def to_csv(self, fh) -> None:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for r in self.rows:
            fh.write(f"{r.iteration},{r.E_g:.6f},{r.E_h:.6f},{r.changed_fraction:.6f},"
                     f"{r.active_count},{r.ms}\n")


class InvariantViolation(AssertionError):
    pass


def _check_plan(model: EnergyModel, x: np.ndarray, plan: MovePlan) -> None:
    if plan.kind == "gswap" and not condition2_holds(x, model.edges, plan.active, model.prior.trunc):
        raise InvariantViolation("active set joins two nodes more than T apart")
    hybrid = evaluate_hybrid_energy(model, x, plan.active)
    if plan.kind == "gswap" and abs(hybrid - evaluate_energy(model, x)) > 1e-9 * max(1.0, abs(hybrid)):
        raise InvariantViolation("hybrid energy differs from E^g at the current labeling")
    sub = plan.subproblem(model, x)
    lo, hi = sub.span()
    if not is_discretely_convex(sub.table, lo, hi, sub.offset):
        raise InvariantViolation("active-active pair table is not convex over its span")


Callback = Callable[[TraceRow, np.ndarray], None]


def _schedule(solver: str, L: int, trunc: int):
    if solver == "alpha_exp":
        return [(a,) for a in range(L)]
    if solver == "ab_swap":
        return [(a, b) for a in range(L) for b in range(a + 1, L)]
    return [(a, b) for a in range(L) for b in range(a + 1, min(L, a + trunc + 1))]


def run(model: EnergyModel, solver: str, init=None, options: SolveOptions = SolveOptions(),
        callback: Optional[Callback] = None) -> SolveTrace:
    """Run ``solver`` from ``init`` (all zeros by default) until no sweep lowers the energy by more than ``tol``."""
    solver = solver_name(solver)
    if solver == "gswapf" and not model.prior.is_truncated_flat:
        plan_gswapf(model, np.zeros(model.node_count, dtype=np.int64))  # raises SolverRefused
    if options.record not in ("sweep", "move"):
        raise ContractViolation("record must be 'sweep' or 'move'")
    x = np.zeros(model.node_count, dtype=np.int64) if init is None else check_labeling(model, init).copy()
    n = model.node_count
    trace = SolveTrace(solver=solver)

    def emit(iteration, prev, active_count, t0):
        ms = int(round((time.perf_counter() - t0) * 1000)) if options.timing else 0
        row = TraceRow(iteration, evaluate_energy(model, x), evaluate_energy(model, x, "H"),
                       float(np.mean(prev != x)) if n else 0.0, int(active_count), ms)
        trace.rows.append(row)
        if callback is not None:
            callback(row, x)
        return row

    t0 = time.perf_counter()
    emit(0, x, 0, t0)
    energy = trace.rows[0].E_g

    def do_move(m) -> MoveResult:
        nonlocal x
        if m.energy > m.previous + options.tol:
            raise InvariantViolation(f"move raised the energy from {m.previous} to {m.energy}")
        trace.moves += 1
        trace.repairs += m.repairs
        x = m.labeling
        return m

    if solver in ("gswap", "gswapf"):
        quiet = 0
        needed = 2 if solver == "gswap" else 1
        t = 0
        while t < options.max_iterations:
            t0 = time.perf_counter()
            prev = x.copy()
            plan = plan_gswap(model, x, t) if solver == "gswap" else plan_gswapf(model, x)
            if options.check:
                _check_plan(model, x, plan)
            m = do_move(execute_plan(model, x, plan, options.algorithm))
            t += 1
            emit(t, prev, plan.active_count, t0)
            decrease = energy - m.energy
            energy = m.energy
            quiet = quiet + 1 if decrease <= options.tol else 0
            if quiet >= needed:
                trace.converged = True
                break
    else:
        L, T = model.label_count, model.prior.trunc
        schedule = _schedule(solver, L, T)
        variant = Extended(options.epsilon) if solver == "rswape" else Standard()
        it = 0
        for _ in range(options.max_sweeps):
            t0 = time.perf_counter()
            sweep_start = x.copy()
            sweep_energy = energy
            active_total = 0
            for labels in schedule:
                prev = x.copy()
                tm = time.perf_counter()
                if solver == "alpha_exp":
                    m = alpha_expansion_move(model, x, labels[0], options.algorithm)
                elif solver == "ab_swap":
                    m = alphabeta_swap_move(model, x, labels[0], labels[1], options.algorithm)
                else:
                    plan = plan_range_swap(model, x, labels[0], labels[1], variant)
                    if options.check:
                        _check_plan(model, x, plan)
                    m = execute_plan(model, x, plan, options.algorithm)
                do_move(m)
                energy = m.energy
                active_total += m.active_count
                if options.record == "move":
                    it += 1
                    emit(it, prev, m.active_count, tm)
            if options.record == "sweep":
                it += 1
                emit(it, sweep_start, active_total, t0)
            if sweep_energy - energy <= options.tol:
                trace.converged = True
                break
    trace.labeling = x.copy()
    return trace


def unary_argmin(model: EnergyModel) -> np.ndarray:
    return np.argmin(model.unary, axis=1).astype(np.int64)


__all__ = [
    "SOLVERS", "solver_name", "Standard", "Extended", "Alternating", "RangeAnchored",
    "MovePlan", "MoveResult", "BinaryMove", "SolveOptions", "SolveTrace", "TraceRow",
    "condition2_holds", "gswap_select_active", "plan_range_swap", "plan_gswap", "plan_gswapf",
    "execute_plan", "range_swap_move", "gswap_move", "gswapf_move", "build_expansion_move",
    "build_swap_move", "alpha_expansion_move", "alphabeta_swap_move", "run", "InvariantViolation",
]
