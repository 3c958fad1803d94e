import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from budgetopt.errors import RepairError, UnconstrainableBudgetError
from budgetopt.instance import Budgets, Instance, Kind, generate_instance
from budgetopt.oracle import brute_force_min_tree, brute_force_tree, prufer_trees
from budgetopt.spanning_tree import (
    TreeConfig,
    dual_ascent_tree,
    is_spanning_tree,
    min_tree,
    optimal_tree_family,
    phi_tree,
    repair_psi,
    repair_thresholds,
    repair_tree,
    select_candidate_tree,
    solve_constrained_tree,
    tree_from_edges,
)


def binding_budget(inst, rng):
    """A budget between the cheapest tree's cost and the MST's cost."""
    trees = prufer_trees(inst.n)
    cheapest = inst.costs[trees, 0].sum(axis=1).min()
    mst_cost = min_tree(inst, [0.0]).costs[0]
    return Budgets((float(rng.uniform(cheapest, mst_cost)) + 1e-12,))


def test_k3_min_tree(k3):
    t = min_tree(k3, [1.0])
    assert t.edges.tolist() == [0, 1]
    assert t.composite([1.0]) == pytest.approx(0.7)
    assert phi_tree(k3, Budgets((0.35,)), [1.0]) == pytest.approx(0.35)


def test_zero_lambda_gives_ordinary_mst():
    inst = generate_instance(Kind.COMPLETE, 6, 1, 1.0, 3)
    assert min_tree(inst, [0.0]).weight == pytest.approx(brute_force_tree(inst, None).optimum)
    assert phi_tree(inst, Budgets((2.0,)), [0.0]) == pytest.approx(min_tree(inst, [0.0]).weight)


def test_k5_matches_prufer_enumeration():
    inst = generate_instance(Kind.COMPLETE, 5, 1, 1.0, 11)
    res = brute_force_min_tree(inst, [0.7])
    assert res.enumerated_count == 125
    t = min_tree(inst, [0.7])
    assert t.composite([0.7]) == pytest.approx(res.optimum, abs=1e-12)
    assert t.key == frozenset(res.argmin)


@given(st.integers(2, 7), st.integers(1, 3), st.integers(0, 2**32),
       st.lists(st.floats(0, 10), min_size=3, max_size=3))
@settings(max_examples=60, deadline=None)
def test_min_tree_is_optimal_spanning_tree(n, r, seed, lam):
    inst = generate_instance(Kind.COMPLETE, n, r, 1.0, seed)
    lam = lam[:r]
    t = min_tree(inst, lam)
    assert is_spanning_tree(inst, t.edges)
    assert t.composite(lam) == pytest.approx(brute_force_min_tree(inst, lam).optimum, abs=1e-9)


@given(st.integers(3, 7), st.integers(0, 2**32), st.floats(0.2, 3.0),
       st.lists(st.floats(0, 20), min_size=2, max_size=2))
@settings(max_examples=60, deadline=None)
def test_weak_duality_two_budgets(n, seed, scale, lam):
    inst = generate_instance(Kind.COMPLETE, n, 2, 1.0, seed)
    budgets = Budgets((scale, scale))
    w_star = brute_force_tree(inst, budgets)
    if w_star.feasible:
        assert phi_tree(inst, budgets, lam) <= w_star.optimum + 1e-9


@given(st.integers(3, 7), st.integers(0, 2**32), st.floats(0, 5), st.floats(0, 5), st.floats(0, 1))
@settings(max_examples=60, deadline=None)
def test_phi_is_concave(n, seed, a, b, t):
    inst = generate_instance(Kind.COMPLETE, n, 1, 1.0, seed)
    budgets = Budgets((1.0,))
    mid = phi_tree(inst, budgets, [t * a + (1 - t) * b])
    chord = t * phi_tree(inst, budgets, [a]) + (1 - t) * phi_tree(inst, budgets, [b])
    assert mid >= chord - 1e-9


def test_subgradient_non_increasing_in_lambda():
    inst = generate_instance(Kind.COMPLETE, 30, 1, 1.0, 4)
    costs = [min_tree(inst, [lam]).costs[0] for lam in np.linspace(0, 20, 60)]
    assert all(b <= a + 1e-12 for a, b in zip(costs, costs[1:]))


def test_k3_dual_optimum(k3):
    # c(T) switches from 0.4 to 0.3 where 0.3 + 0.4 lam = 0.5 + 0.3 lam
    cert = dual_ascent_tree(k3, Budgets((0.35,)))
    assert cert.lambda_star[0] == pytest.approx(2.0, abs=1e-6)
    assert cert.phi == pytest.approx(0.4, abs=1e-6)
    assert {t.key for t in cert.optimal_family} == {frozenset({0, 1}), frozenset({1, 2})}
    family = optimal_tree_family(k3, cert.lambda_star)
    assert {t.key for t in family} == {frozenset({0, 1}), frozenset({1, 2})}
    assert brute_force_tree(k3, Budgets((0.35,))).optimum == pytest.approx(0.5)


def test_loose_budget_gives_zero_lambda():
    inst = generate_instance(Kind.COMPLETE, 12, 1, 1.0, 0)
    cert = dual_ascent_tree(inst, Budgets((12.0,)))
    assert cert.lambda_star[0] == 0
    assert cert.phi == pytest.approx(min_tree(inst, [0.0]).weight)
    sol, cert = solve_constrained_tree(inst, Budgets((12.0,)))
    assert sol.key == min_tree(inst, [0.0]).key and sol.trace.selected == "unconstrained"


def test_unconstrainable_budget():
    inst = generate_instance(Kind.COMPLETE, 5, 1, 1.0, 0)
    with pytest.raises(UnconstrainableBudgetError):
        dual_ascent_tree(inst, Budgets((1e-6,)))


@pytest.mark.parametrize("r", [1, 2])
def test_dual_value_below_oracle(r):
    rng = np.random.default_rng(r)
    for seed in range(40):
        n = int(rng.integers(4, 8))
        inst = generate_instance(Kind.COMPLETE, n, r, 1.0, seed)
        budgets = Budgets(tuple(float(x) for x in rng.uniform(0.3, 0.6, r) * (n - 1)))
        w_star = brute_force_tree(inst, budgets)
        if not w_star.feasible:
            continue
        try:
            cert = dual_ascent_tree(inst, budgets)
        except UnconstrainableBudgetError:
            continue
        assert cert.phi <= w_star.optimum + 1e-9


def test_unique_minimizer_gives_singleton_family():
    inst = generate_instance(Kind.COMPLETE, 7, 1, 1.0, 5)
    assert len(optimal_tree_family(inst, [0.123456])) == 1


def test_family_members_tie_and_are_trees():
    rng = np.random.default_rng(8)
    for seed in range(30):
        inst = generate_instance(Kind.COMPLETE, 7, 1, 1.0, seed)
        cert = dual_ascent_tree(inst, binding_budget(inst, rng))
        family = optimal_tree_family(inst, cert.lambda_star, seeds=cert.optimal_family)
        best = brute_force_min_tree(inst, cert.lambda_star).optimum
        for t in family:
            assert is_spanning_tree(inst, t.edges)
            assert t.composite(cert.lambda_star) <= best + 1e-7 + 1e-12


def test_small_family_sizes():
    rng = np.random.default_rng(9)
    sizes = []
    for seed in range(200):
        n = int(rng.integers(4, 8))
        inst = generate_instance(Kind.COMPLETE, n, 1, 1.0, seed)
        cert = dual_ascent_tree(inst, binding_budget(inst, rng))
        sizes.append(len(optimal_tree_family(inst, cert.lambda_star, 1e-7, seeds=cert.optimal_family)))
    assert np.mean(np.array(sizes) <= 2) >= 0.95


def _k4(weights, costs):
    return Instance.from_arrays(Kind.COMPLETE, 4, weights, costs)


def test_select_single_feasible():
    inst = generate_instance(Kind.COMPLETE, 6, 1, 1.0, 0)
    t = min_tree(inst, [0.0])
    assert select_candidate_tree(inst, [t], Budgets((5.0,))).key == t.key


def test_select_filters_before_weight():
    # edges (0,1) (0,2) (0,3) (1,2) (1,3) (2,3)
    inst = _k4([0.1, 0.1, 0.1, 0.5, 0.5, 0.5], [0.9, 0.9, 0.9, 0.1, 0.1, 0.1])
    star = tree_from_edges(inst, [0, 1, 2])  # light, cost 2.7
    path = tree_from_edges(inst, [0, 3, 5])  # heavier, cost 1.1
    # c_max = 0.9, so the relaxed bound is 0.25 + 0.9 = 1.15
    pick = select_candidate_tree(inst, [star, path], Budgets((0.25,)))
    assert pick.key == path.key and pick.trace.selected == "relaxed_bound"
    fallback = select_candidate_tree(inst, [star], Budgets((0.1,)))
    assert fallback.key == star.key and fallback.trace.selected == "least_overrun"


def test_repair_leaves_comfortable_tree_alone():
    inst = generate_instance(Kind.COMPLETE, 300, 1, 1.0, 1)
    t = min_tree(inst, [0.0])
    out = repair_tree(inst, t, Budgets((300.0,)))
    assert out.key == t.key and out.trace.selected == "unrepaired"
    assert not out.trace.deleted and not out.trace.added


def test_repair_toy_path():
    # path 0-1-2-3 with the middle edge expensive; the other three edges are cheap
    weights = [0.05, 0.1, 0.1, 0.05, 0.1, 0.05]
    costs = [0.15, 0.1, 0.1, 0.9, 0.1, 0.15]
    inst = _k4(weights, costs)
    path = tree_from_edges(inst, [0, 3, 5])
    assert path.costs[0] == pytest.approx(1.2)
    assert path.costs[0] - 0.9 == pytest.approx(0.3)
    budgets = Budgets((1.0,))
    psi = repair_psi(4, 1, 1.0)
    assert all(c <= psi for c in (0.1, 0.1, 0.1))
    out = repair_tree(inst, path, budgets)
    assert 3 in out.trace.deleted[0]
    assert out.trace.added and all(
        inst.weight[e] <= psi and inst.costs[e, 0] <= psi for e in out.trace.added
    )
    assert is_spanning_tree(inst, out.edges)
    assert out.costs[0] <= 1.0 and out.feasible
    assert out.weight >= brute_force_tree(inst, budgets).optimum - 1e-12


def test_repair_threshold_values():
    inst = generate_instance(Kind.COMPLETE, 100, 1, 1.0, 0)
    th = repair_thresholds(inst, Budgets((50.0,)))
    assert th.psi == pytest.approx(np.log(100) / 10)
    assert th.expensive[0] == pytest.approx(50.0 / 400)
    assert th.quota[0] == 8


def test_solve_feasible_and_above_oracle():
    rng = np.random.default_rng(2)
    for seed in range(200):
        n = int(rng.integers(5, 8))
        inst = generate_instance(Kind.COMPLETE, n, 1, 1.0, 1000 + seed)
        budgets = binding_budget(inst, rng)
        sol, cert = solve_constrained_tree(inst, budgets)
        w_star = brute_force_tree(inst, budgets).optimum
        assert is_spanning_tree(inst, sol.edges)
        assert sol.costs[0] <= budgets.values[0]
        assert sol.weight >= w_star - 1e-9
        assert cert.phi <= w_star + 1e-9


def test_solve_two_budgets_medium():
    inst = generate_instance(Kind.COMPLETE, 60, 2, 1.0, 3)
    budgets = Budgets((20.0, 20.0))
    sol, cert = solve_constrained_tree(inst, budgets)
    assert is_spanning_tree(inst, sol.edges)
    assert all(c <= 20.0 for c in sol.costs)
    assert cert.phi <= sol.weight + 1e-9


def test_fallback_off_surfaces_failure():
    # at n = 6 the headroom the repair asks for cannot exist
    inst = generate_instance(Kind.COMPLETE, 6, 1, 1.0, 1)
    budgets = Budgets((2.1735053008943606,))
    sol, _ = solve_constrained_tree(inst, budgets)
    assert sol.trace.failure == "RepairError"
    assert sol.costs[0] <= budgets.values[0]
    with pytest.raises(RepairError):
        solve_constrained_tree(inst, budgets, TreeConfig(fallback=False))
