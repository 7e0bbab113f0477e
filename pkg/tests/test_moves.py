import numpy as np
import pytest

from rangemove.energy import EnergyModel, GraphTopology, evaluate_energy, evaluate_hybrid_energy
from rangemove.errors import ContractViolation, SolverRefused
from rangemove.ishikawa import build_subproblem, solve_exact
from rangemove.moves import (SOLVERS, Alternating, Extended, RangeAnchored, SolveOptions, Standard,
                             alpha_expansion_move, alphabeta_swap_move, build_expansion_move, build_swap_move,
                             condition2_holds, gswap_move, gswap_select_active, gswapf_move, plan_gswap,
                             plan_range_swap, range_swap_move, run, solver_name)
from rangemove.oracle import exact_minimum, exact_move_minimum
from rangemove.priors import make_prior
from rangemove.synthetic import chain_model, grid_model


def test_solver_names():
    assert solver_name("alpha_expansion") == "alpha_exp"
    assert solver_name("GSWAP") == "gswap"
    with pytest.raises(ContractViolation):
        solver_name("icm")


@pytest.mark.parametrize("solver", SOLVERS)
def test_decoupled_nodes_reach_unary_argmin(solver):
    rng = np.random.default_rng(0)
    L = 5
    unary = rng.uniform(0, 10, (6, L))
    m = EnergyModel.build(GraphTopology.chain(6), unary, make_prior("tq", L - 1, L), 0.0)
    tr = run(m, solver)
    np.testing.assert_array_equal(tr.labeling, unary.argmin(axis=1))
    assert tr.rows[1].E_g == pytest.approx(tr.final_energy)
    assert tr.converged


def test_trace_layout():
    m = grid_model(3, 3, 4, "tq", 2, seed=1)
    tr = run(m, "rswap", options=SolveOptions(timing=False))
    assert tr.rows[0].iteration == 0
    assert tr.rows[0].E_g == pytest.approx(evaluate_energy(m, np.zeros(9, int)))
    assert all(r.ms == 0 for r in tr.rows)
    import io
    buf = io.StringIO()
    tr.to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "iteration,E_g,E_h,changed_fraction,active_count,ms"
    assert len(lines) == len(tr.rows) + 1


def test_gswap_beats_rswap_on_chains():
    wins = 0
    for seed in range(50):
        m = chain_model(10, 6, "tq", 2, seed)
        g = run(m, "gswap").final_energy
        r = run(m, "rswap").final_energy
        wins += g <= r + 1e-9
    assert wins > 25


@pytest.mark.parametrize("seed", range(6))
def test_solvers_bounded_by_oracle(seed):
    m = grid_model(3, 3, 4, "tq", 1 + seed % 3, seed, 2.0)
    _, best = exact_minimum(m)
    for solver in SOLVERS:
        assert run(m, solver).final_energy >= best - 1e-9


def test_gswapf_refused_for_cauchy():
    m = grid_model(2, 2, 4, "cauchy", 1)
    with pytest.raises(SolverRefused, match="gswap"):
        run(m, "gswapf")
    with pytest.raises(SolverRefused):
        gswapf_move(m, np.zeros(4, int))


def test_init_is_used():
    m = grid_model(3, 3, 4, "tq", 2, seed=3)
    x0 = np.full(9, 3)
    tr = run(m, "alpha_exp", x0)
    assert tr.rows[0].E_g == pytest.approx(evaluate_energy(m, x0))
    with pytest.raises(ContractViolation):
        run(m, "gswap", np.full(9, 4))


# --- expansion ---------------------------------------------------------------

def test_expansion_two_node_example():
    m = EnergyModel.build(GraphTopology.chain(2), [[0, 9], [9, 0]], make_prior("tq", 2, 2), 1.0)
    r = alpha_expansion_move(m, [0, 0], 1)
    assert list(r.labeling) == [0, 1]
    assert r.previous == 9 and r.energy == 1


def test_expansion_noop_when_all_alpha():
    m = grid_model(2, 2, 4, "tq", 2)
    x = np.full(4, 2)
    r = alpha_expansion_move(m, x, 2)
    np.testing.assert_array_equal(r.labeling, x)
    assert not r.accepted and r.energy == r.previous


def test_expansion_repair_count():
    # g(0 - 2) = 4 > g(0 - 1) + g(1 - 2) = 2: keeping both labels is non-submodular
    m = EnergyModel.build(GraphTopology.chain(2), np.zeros((2, 3)), make_prior("tq", 2, 3), 1.0)
    move = build_expansion_move(m, [0, 2], 1)
    _, repairs = move.repaired_tables()
    assert repairs == 1
    assert alpha_expansion_move(m, [0, 2], 1).repairs == 1
    # truncated linear is a metric, so the same move needs no repair
    q = EnergyModel.build(GraphTopology.chain(2), np.zeros((2, 3)), make_prior("tl", 2, 3), 1.0)
    assert build_expansion_move(q, [0, 2], 1).repaired_tables()[1] == 0


@pytest.mark.parametrize("seed", range(8))
def test_expansion_exact_without_repair(seed):
    rng = np.random.default_rng(seed)
    m = grid_model(3, 3, 5, "tl", 2, seed, 2.0)  # metric prior: nothing to repair
    x = rng.integers(0, 5, 9)
    for alpha in range(5):
        move = build_expansion_move(m, x, alpha)
        y, repairs = move.solve()
        assert repairs == 0
        if move.size:
            assert move.evaluate(y) == pytest.approx(exact_move_minimum(move)[1])


# --- swap --------------------------------------------------------------------

def test_swap_noop_without_labels():
    m = grid_model(2, 2, 5, "tq", 2)
    x = np.array([0, 1, 0, 1])
    r = alphabeta_swap_move(m, x, 2, 3)
    np.testing.assert_array_equal(r.labeling, x)
    assert r.active_count == 0


def test_swap_single_node():
    m = EnergyModel.build(GraphTopology(1, np.zeros((0, 2))), [[5.0, 1.0, 0.0]], make_prior("tl", 1, 3))
    assert list(alphabeta_swap_move(m, [0], 0, 1).labeling) == [1]
    with pytest.raises(ContractViolation):
        alphabeta_swap_move(m, [0], 1, 1)


@pytest.mark.parametrize("seed", range(8))
def test_swap_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    m = grid_model(2, 2, 4, ["tl", "tq", "cauchy"][seed % 3], 2, seed)
    x = rng.integers(0, 2, 4)
    move = build_swap_move(m, x, 0, 1)
    y, repairs = move.solve()
    assert repairs == 0
    assert move.evaluate(y) == pytest.approx(exact_move_minimum(move)[1])


# --- range swaps -------------------------------------------------------------

def test_range_swap_contract_and_noop():
    m = grid_model(3, 3, 6, "tq", 2)
    with pytest.raises(ContractViolation):
        range_swap_move(m, np.zeros(9, int), 0, 3)
    with pytest.raises(ContractViolation):
        range_swap_move(m, np.zeros(9, int), 2, 2)
    x = np.full(9, 5)
    r = range_swap_move(m, x, 0, 2)
    assert r.active_count == 0
    np.testing.assert_array_equal(r.labeling, x)


def test_range_swap_active_set():
    m = grid_model(3, 3, 8, "tq", 3)
    x = np.arange(9) % 8
    plan = plan_range_swap(m, x, 2, 4)
    np.testing.assert_array_equal(plan.active, (x >= 2) & (x <= 4))
    assert plan.pair_mode == "g" and plan.lower[0] == 2 and plan.upper[0] == 4
    ext = plan_range_swap(m, x, 2, 4, Extended(2))
    assert ext.pair_mode == "h" and ext.lower[0] == 0 and ext.upper[0] == 6


@pytest.mark.parametrize("seed", range(10))
def test_standard_range_swap_is_exact(seed):
    rng = np.random.default_rng(seed)
    L = 6
    m = grid_model(3, 3, L, "tq", 2, seed, 2.0)
    x = rng.integers(0, L, 9)
    plan = plan_range_swap(m, x, 1, 3)
    sub = plan.subproblem(m, x)
    u, e = solve_exact(sub)
    assert e == pytest.approx(exact_move_minimum(sub)[1])


def test_extended_hops_barrier():
    # one node at 0; unary well at 0 is shallow, deep well at 4 behind a barrier
    L = 6
    unary = np.array([[3.0, 9.0, 9.0, 9.0, 0.0, 9.0]])
    m = EnergyModel.build(GraphTopology(1, np.zeros((0, 2))), unary, make_prior("tq", 2, L))
    std = range_swap_move(m, [0], 0, 2)
    ext = range_swap_move(m, [0], 0, 2, Extended(2))
    assert list(std.labeling) == [0]
    assert list(ext.labeling) == [4]
    assert ext.energy < std.energy


@pytest.mark.parametrize("seed", range(10))
def test_extended_dominates_standard(seed):
    rng = np.random.default_rng(seed)
    L = 7
    m = grid_model(3, 3, L, ["tl", "tq", "cauchy"][seed % 3], 3, seed, 2.0)
    x = rng.integers(0, L, 9)
    for a in range(L - 1):
        for b in range(a + 1, min(L, a + 4)):
            s = range_swap_move(m, x, a, b, Standard())
            e = range_swap_move(m, x, a, b, Extended(2))
            assert e.energy <= s.energy + 1e-6


# --- generalized swaps -------------------------------------------------------

def test_select_examples():
    t = GraphTopology.chain(3)
    assert np.flatnonzero(gswap_select_active([0, 10, 0], t, 3, 0)).tolist() == [0, 2]
    assert np.flatnonzero(gswap_select_active([0, 10, 0], t, 3, 1)).tolist() == [1]
    assert gswap_select_active([0, 2, 5], t, 3, 0).all()


def test_select_range_anchored():
    t = GraphTopology.chain(3)
    x = [0, 10, 0]
    act = gswap_select_active(x, t, 3, 1, RangeAnchored(9, 11))
    # node 1 is in range, so its out-of-range neighbours are dropped
    assert np.flatnonzero(act).tolist() == [1]
    in_range = (np.array(x) >= 9) & (np.array(x) <= 11)
    assert np.all(act[in_range])


@pytest.mark.parametrize("seed", range(20))
def test_select_satisfies_condition(seed):
    rng = np.random.default_rng(seed)
    m = grid_model(4, 4, 10, "tq", 2, seed)
    x = rng.integers(0, 10, 16)
    seen = np.zeros(16, bool)
    for parity in (0, 1):
        act = gswap_select_active(x, m.topology, 2, parity, Alternating())
        assert condition2_holds(x, m.edges, act, 2)
        seen |= act
    a, b = sorted(rng.integers(0, 10, 2))
    if 0 < b - a <= 2:
        act = gswap_select_active(x, m.topology, 2, seed, RangeAnchored(a, b))
        assert condition2_holds(x, m.edges, act, 2)
        assert np.all(act[(x >= a) & (x <= b)])


@pytest.mark.parametrize("seed", range(8))
def test_gswap_first_move_minimises_huber_energy(seed):
    m = grid_model(3, 3, 4, ["tl", "tq", "cauchy"][seed % 3], 1 + seed % 2, seed, 2.0)
    r = gswap_move(m, np.zeros(9, int), 0)
    _, e_h = exact_minimum(m, "H")
    assert evaluate_energy(m, r.labeling, "H") == pytest.approx(e_h, abs=1e-6)


def test_gswapf_first_move_equals_gswap():
    m = grid_model(4, 4, 6, "tq", 2, seed=11)
    x0 = np.zeros(16, int)
    np.testing.assert_array_equal(gswap_move(m, x0, 0).labeling, gswapf_move(m, x0).labeling)


def test_hybrid_energy_equals_true_energy_on_selected_set():
    rng = np.random.default_rng(4)
    m = grid_model(4, 4, 8, "cauchy", 2, seed=4)
    for t in range(6):
        x = rng.integers(0, 8, 16)
        plan = plan_gswap(m, x, t)
        assert evaluate_hybrid_energy(m, x, plan.active) == pytest.approx(evaluate_energy(m, x), abs=1e-9)


def test_gswapf_separated_pair_never_increases():
    # the pair starts more than T apart, so gswapf holds the edge at its
    # current cost and never notices that joining would be far cheaper
    L = 8
    unary = np.ones((2, L))
    unary[0, 0] = unary[1, 7] = 0.0
    m = EnergyModel.build(GraphTopology.chain(2), unary, make_prior("tq", 2, L), 5.0)
    x0 = np.array([0, 7])
    full = run(m, "gswapf", x0, SolveOptions(record="move"))
    assert np.all(np.diff(full.energies) <= 1e-9)
    assert list(full.labeling) == [0, 7] and full.final_energy == 20
    gen = run(m, "gswap", x0, SolveOptions(record="move"))
    assert np.all(np.diff(gen.energies) <= 1e-9)
    assert gen.final_energy == 1


@pytest.mark.parametrize("seed", range(50))
def test_gswapf_monotone_on_small_grids(seed):
    m = grid_model(3, 3, 5, ["tq", "tl"][seed % 2], 1 + seed % 3, seed, 3.0)
    x0 = np.random.default_rng(seed).integers(0, 5, 9)
    tr = run(m, "gswapf", x0, SolveOptions(record="move", check=True))
    assert np.all(np.diff(tr.energies) <= 1e-6)


@pytest.mark.parametrize("solver", SOLVERS)
def test_checked_runs_on_random_init(solver):
    for seed in range(5):
        m = grid_model(3, 3, 6, "tq", 2, seed, 2.5)
        x0 = np.random.default_rng(seed).integers(0, 6, 9)
        tr = run(m, solver, x0, SolveOptions(record="move", check=True))
        assert np.all(np.diff(tr.energies) <= 1e-6)
