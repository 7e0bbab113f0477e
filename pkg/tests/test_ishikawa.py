import io

import numpy as np
import pytest

from rangemove.energy import EnergyModel, GraphTopology, evaluate_energy
from rangemove.errors import ContractViolation, NonConvexPriorError
from rangemove.ishikawa import build_layered_graph, build_subproblem, dump_dimacs, solve_exact
from rangemove.maxflow import max_flow, read_dimacs
from rangemove.oracle import exact_minimum, exact_move_minimum
from rangemove.priors import make_prior
from rangemove.synthetic import grid_model


def quadratic_model(unary, edges, w, L, T=None):
    # with T >= L - 1 the truncated quadratic is a plain quadratic over the table
    T = L - 1 if T is None else T
    return EnergyModel.from_edges(np.asarray(unary, float), edges, w, make_prior("tq", T, L))


def test_single_node_argmin():
    m = EnergyModel.build(GraphTopology(1, np.zeros((0, 2))), [[3.0, 1.0, 2.0]], make_prior("tq", 2, 3))
    sub = build_subproblem(m, [0], [0])
    u, e = solve_exact(sub)
    assert list(u) == [1] and e == 1.0


def test_two_node_quadratic():
    m = quadratic_model([[0, 10], [10, 0]], [[0, 1]], 1.0, 2)
    u, e = solve_exact(build_subproblem(m, [0, 0], [0, 1]))
    assert list(u) == [0, 1] and e == 1.0


def test_full_active_keeps_unaries():
    m = grid_model(3, 3, 4, "tq", 2, seed=1)
    sub = build_subproblem(m, np.zeros(9, int), np.ones(9, bool))
    np.testing.assert_array_equal(sub.unary, m.unary)
    assert sub.constant_term == 0


def test_frozen_neighbour_folded_with_g():
    L = 6
    unary = np.arange(2 * L, dtype=float).reshape(2, L)
    m = EnergyModel.build(GraphTopology.chain(2), unary, make_prior("tq", 2, L), 2.0)
    sub = build_subproblem(m, [0, 4], [0])
    lam = np.arange(L)
    np.testing.assert_allclose(sub.unary[0], unary[0] + 2 * np.minimum((lam - 4) ** 2, 4))
    assert sub.constant_term == unary[1, 4]


def test_all_frozen_is_constant():
    m = grid_model(3, 3, 4, "tq", 2, seed=2)
    x = np.random.default_rng(0).integers(0, 4, 9)
    sub = build_subproblem(m, x, [])
    assert sub.size == 0
    assert sub.constant_term == pytest.approx(evaluate_energy(m, x))
    u, e = solve_exact(sub)
    assert len(u) == 0 and e == pytest.approx(evaluate_energy(m, x))


def test_current_label_must_be_feasible():
    m = grid_model(2, 2, 5, "tq", 2)
    with pytest.raises(ContractViolation):
        build_subproblem(m, [4, 0, 0, 0], [0], lower=0, upper=2)


def test_non_convex_table_refused():
    m = grid_model(3, 3, 6, "tq", 2)
    sub = build_subproblem(m, np.zeros(9, int), np.ones(9, bool), pair_mode="g")
    with pytest.raises(NonConvexPriorError):
        solve_exact(sub)
    # the same table restricted to a narrow interval is convex
    narrow = build_subproblem(m, np.zeros(9, int), np.ones(9, bool), 0, 2, pair_mode="g")
    u, e = solve_exact(narrow)
    assert e == pytest.approx(exact_move_minimum(narrow)[1])


@pytest.mark.parametrize("seed", range(25))
def test_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    L = int(rng.integers(2, 6))
    kind = ["tl", "tq", "cauchy"][seed % 3]
    m = grid_model(3, 3, L, kind, int(rng.integers(1, 4)), seed, float(rng.uniform(0.2, 5)))
    sub = build_subproblem(m, np.zeros(9, int), np.ones(9, bool))
    _, e = solve_exact(sub)
    _, e_ref = exact_minimum(m, "H")
    assert e == pytest.approx(e_ref, abs=1e-6)
    _, e_sap = solve_exact(sub, "sap")
    assert e_sap == pytest.approx(e_ref, abs=1e-6)


@pytest.mark.parametrize("seed", range(10))
def test_partial_moves_match_enumeration(seed):
    rng = np.random.default_rng(50 + seed)
    L = 6
    m = grid_model(3, 3, L, "tq", 3, seed, 2.0)
    x = rng.integers(0, L, 9)
    active = rng.random(9) < 0.6
    lo = np.maximum(x - rng.integers(0, 3, 9), 0)
    hi = np.minimum(x + rng.integers(0, 3, 9), L - 1)
    sub = build_subproblem(m, x, active, lo, hi)
    u, e = solve_exact(sub)
    assert e == pytest.approx(exact_move_minimum(sub)[1], abs=1e-6)
    assert np.all((u >= sub.lower) & (u <= sub.upper))


def test_cut_energy_correspondence():
    m = grid_model(3, 3, 5, "tq", 2, seed=7)
    sub = build_subproblem(m, np.zeros(9, int), np.ones(9, bool))
    g = build_layered_graph(sub)
    rng = np.random.default_rng(3)
    for _ in range(20):
        u = rng.integers(0, 5, 9)
        y = g.encode(u)
        np.testing.assert_array_equal(g.decode(y), u)
        assert g.cut_capacity(y) + g.cut_offset == pytest.approx(sub.evaluate(u))


def test_explicit_network_and_dimacs():
    m = grid_model(2, 2, 4, "tq", 2, seed=9)
    sub = build_subproblem(m, np.zeros(4, int), np.ones(4, bool))
    g = build_layered_graph(sub)
    res = max_flow(g.to_flow_network())
    _, e = solve_exact(sub)
    assert res.flow_value + g.cut_offset == pytest.approx(e)
    buf = io.StringIO()
    dump_dimacs(sub, buf)
    back = read_dimacs(io.StringIO(buf.getvalue()))
    assert max_flow(back).flow_value == pytest.approx(res.flow_value)


def test_huber_arcs_are_sparse():
    L, T = 32, 3
    topo = GraphTopology.chain(2)
    unary = np.zeros((2, L))
    huber = EnergyModel.build(topo, unary, make_prior("tq", T, L), 1.0)
    quad = EnergyModel.build(topo, unary, make_prior("tq", L - 1, L), 1.0)
    full = np.ones(2, bool)
    n_h = build_layered_graph(build_subproblem(huber, [0, 0], full)).pair_arc_counts()[0]
    n_q = build_layered_graph(build_subproblem(quad, [0, 0], full)).pair_arc_counts()[0]
    assert n_h <= 2 * L * (2 * T + 1)
    assert n_q >= (L - 1) ** 2 / 2
