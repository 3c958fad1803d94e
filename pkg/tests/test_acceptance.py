"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v -s``; the lines are also
collected into an "acceptance criteria" section of the terminal summary.
"""

import math
import time
from fractions import Fraction
from functools import lru_cache

import numpy as np
import pytest

from budgetopt.assignment import (
    EXPOSED,
    augment_cheap,
    dual_search_match,
    gasoline_start,
    matching_from_pairs,
    min_assignment,
    phi_match,
)
from budgetopt.harness import ExperimentConfig, csv_text, run_experiment, summarize
from budgetopt.instance import (
    Budgets,
    Kind,
    default_budgets,
    deserialize_instance,
    exponent_budgets,
    generate_instance,
    serialize_instance,
)
from budgetopt.oracle import (
    all_permutations,
    brute_force_matching,
    brute_force_min_assignment,
    brute_force_min_tree,
    brute_force_tree,
    exhaustive_rotation_check,
    prufer_trees,
)
from budgetopt.spanning_tree import (
    dual_ascent_tree,
    min_tree,
    optimal_tree_family,
    phi_tree,
    repair_tree,
    select_candidate_tree,
)

pytestmark = pytest.mark.acceptance

MASTER_SEED = 20240601


def non_increasing(values):
    return all(b <= a for a, b in zip(values, values[1:]))


def tree_budget_between(inst, rng):
    trees = prufer_trees(inst.n)
    lo = inst.costs[trees].sum(axis=1).min(axis=0)
    hi = np.asarray(min_tree(inst, np.zeros(inst.r)).costs)
    return Budgets(tuple(float(x) for x in rng.uniform(lo, np.maximum(lo, hi)) + 1e-12))


def match_budget_between(inst, rng):
    perms = all_permutations(inst.n)
    lo = inst.cost_matrix()[np.arange(inst.n), perms].sum(axis=1).min()
    hi = min_assignment(inst, 0.0).cost
    return float(rng.uniform(lo, hi)) + 1e-12


@lru_cache(maxsize=None)
def tree_trend_records():
    cfg = ExperimentConfig(problem="tree", n_grid=[100, 200, 400, 800], alpha=1.0, r=1,
                           omega_exponent=0.05, trials=20, seed=MASTER_SEED, oracle="skip")
    return tuple(run_experiment(cfg))


@lru_cache(maxsize=None)
def matching_trend_records():
    cfg = ExperimentConfig(problem="matching", n_grid=[50, 100, 200], alpha=1.0,
                           budget_rule="exponent", budget_exponent=0.75,
                           trials=20, seed=MASTER_SEED, oracle="skip")
    return tuple(run_experiment(cfg))


@lru_cache(maxsize=None)
def feasibility_records(problem):
    cfg = ExperimentConfig(problem=problem, n_grid=[200], alpha=1.0, r=1,
                           omega_exponent=0.05, trials=100, seed=MASTER_SEED + 1,
                           oracle="skip")
    return tuple(run_experiment(cfg))


def test_c01_inner_solvers_match_enumeration(report):
    rng = np.random.default_rng(MASTER_SEED)
    start = time.perf_counter()
    worst_tree = worst_match = 0.0
    for k in range(500):
        n = int(rng.integers(2, 8))
        r = int(rng.integers(1, 4))
        inst = generate_instance(Kind.COMPLETE, n, r, float(rng.choice([1.0, 2.0])), 10_000 + k)
        lam = rng.exponential(2.0, r)
        got = min_tree(inst, lam).composite(lam)
        worst_tree = max(worst_tree, abs(got - brute_force_min_tree(inst, lam).optimum))
    for k in range(500):
        n = int(rng.integers(2, 9))
        inst = generate_instance(Kind.COMPLETE_BIPARTITE, n, 1, float(rng.choice([1.0, 2.0])),
                                 20_000 + k)
        lam = float(rng.exponential(2.0))
        got = min_assignment(inst, lam).composite(lam)
        worst_match = max(worst_match, abs(got - brute_force_min_assignment(inst, lam).optimum))
    elapsed = time.perf_counter() - start
    ok = worst_tree <= 1e-9 and worst_match <= 1e-9 and elapsed < 120
    report("C1 oracle equivalence", ok,
           f"max |err| tree {worst_tree:.2e}, assignment {worst_match:.2e}, {elapsed:.1f}s")
    assert ok


def test_c02_weak_duality(report):
    rng = np.random.default_rng(MASTER_SEED + 2)
    checks = violations = 0
    worst = -math.inf
    for k in range(200):
        inst = generate_instance(Kind.COMPLETE, int(rng.integers(3, 8)), 1, 1.0, 30_000 + k)
        budgets = tree_budget_between(inst, rng)
        w_star = brute_force_tree(inst, budgets).optimum
        for lam in rng.exponential(3.0, 20):
            gap = phi_tree(inst, budgets, [lam]) - w_star
            worst = max(worst, gap)
            violations += gap > 1e-9
            checks += 1
    for k in range(200):
        inst = generate_instance(Kind.COMPLETE_BIPARTITE, int(rng.integers(2, 9)), 1, 1.0,
                                 40_000 + k)
        C1 = match_budget_between(inst, rng)
        w_star = brute_force_matching(inst, C1).optimum
        for lam in rng.exponential(3.0, 20):
            gap = phi_match(inst, C1, float(lam)) - w_star
            worst = max(worst, gap)
            violations += gap > 1e-9
            checks += 1
    ok = violations == 0
    report("C2 weak duality", ok,
           f"{violations} violations in {checks} checks, max phi - w* = {worst:.3e}")
    assert ok


def zero_sum_sequence(rng):
    """Dyadic sequence with an exactly zero sum, elements spanning 1e-6..1e3."""
    k = int(rng.integers(1, 51))
    if k == 1:
        return [0.0]
    mixed = rng.random() < 0.5
    if mixed:
        exps = rng.integers(-40, -10, k - 1)  # per-element magnitude 2^-20..2^10
    else:
        exps = np.full(k - 1, int(rng.integers(-40, -10)))
    q = rng.integers(-(2**20), 2**20 + 1, k - 1)
    body = [float(int(x) * 2.0 ** int(e)) for x, e in zip(q, exps)]
    last = -sum(Fraction(x) for x in body)
    assert Fraction(float(last)) == last
    seq = body + [float(last)]
    rng.shuffle(seq)
    return seq


def test_c03_gasoline_start(report):
    rng = np.random.default_rng(MASTER_SEED + 3)
    failures = 0
    for _ in range(10_000):
        a = zero_sum_sequence(rng)
        if gasoline_start(a) not in exhaustive_rotation_check(a, tol=0.0):
            failures += 1
    ok = failures == 0
    report("C3 gasoline start", ok, f"{failures} failures in 10000 sequences")
    assert ok


def test_c04_end_to_end_feasibility(report):
    grids = {
        "tree": list(tree_trend_records()) + list(feasibility_records("tree")),
        "matching": list(matching_trend_records()) + list(feasibility_records("matching")),
    }
    lines, ok = [], True
    for problem, records in grids.items():
        solved = [r for r in records if not math.isnan(r.w_alg)]
        infeasible = sum(1 for r in solved if not r.feasible)
        big = [r for r in feasibility_records(problem)]
        fail_rate = sum(1 for r in big if r.failure) / len(big)
        classes = sorted({r.failure for r in records if r.failure})
        ok &= infeasible == 0 and fail_rate == 0.0
        lines.append(f"{problem}: {infeasible}/{len(solved)} over budget, "
                     f"n=200 failure rate {fail_rate:.2f}, classes {classes or 'none'}")
    report("C4 end-to-end feasibility", ok, "; ".join(lines))
    assert ok


def test_c05_tree_ratio_trend(report):
    records = tree_trend_records()
    summary = summarize(list(records), "tree")
    medians = [c.ratio_dual_median for c in summary.cells]
    slowest = max(r.wall_time_ms for r in records if r.n == 800) / 1000
    ok = non_increasing(medians) and medians[-1] <= 1.10 and slowest < 60
    report("C5 tree ratio trend", ok,
           "medians " + ", ".join(f"n={c.n}: {c.ratio_dual_median:.4f}" for c in summary.cells)
           + f"; slowest n=800 trial {slowest:.1f}s")
    assert ok


def test_c06_matching_ratio_trend(report):
    records = matching_trend_records()
    summary = summarize(list(records), "matching")
    medians = [c.ratio_dual_median for c in summary.cells]
    slowest = max(r.wall_time_ms for r in records if r.n == 200) / 1000
    ok = non_increasing(medians) and medians[-1] <= 1.15 and slowest < 60
    report("C6 matching ratio trend", ok,
           "medians " + ", ".join(f"n={c.n}: {c.ratio_dual_median:.4f}" for c in summary.cells)
           + f"; slowest n=200 trial {slowest:.1f}s")
    assert ok


def test_c07_tree_family_size(report):
    sizes = []
    for k in range(200):
        inst = generate_instance(Kind.COMPLETE, 50, 1, 1.0, 50_000 + k)
        budgets = exponent_budgets(50, 1, 0.75)  # binding: the MST costs about 24.5
        cert = dual_ascent_tree(inst, budgets)
        family = optimal_tree_family(inst, cert.lambda_star, 1e-7, seeds=cert.optimal_family)
        sizes.append(len(family))
    share = float(np.mean(np.array(sizes) <= 2))
    ok = share >= 0.95
    report("C7 tied family size", ok,
           f"{share:.1%} of 200 trials with <= 2 trees (max {max(sizes)})")
    assert ok


def test_c08_lambda_scaling(report):
    ok, parts = True, []
    for alpha in (1.0, 2.0):
        medians = []
        for n in (50, 100, 200, 400):
            C1 = n**0.75
            vals = []
            for t in range(20):
                inst = generate_instance(Kind.COMPLETE_BIPARTITE, n, 1, alpha,
                                         60_000 + 1000 * n + t + (7 if alpha == 2 else 0) * 10**6)
                cert = dual_search_match(inst, C1)
                vals.append(cert.lambda_star * C1**2 / n ** (2 - 1 / alpha))
            medians.append(float(np.median(vals)))
        band = max(medians) / min(medians) if min(medians) > 0 else math.inf
        ok &= band <= 4.0
        parts.append(f"alpha={alpha:g}: " + ", ".join(f"{m:.3f}" for m in medians)
                     + f" (max/min {band:.2f})")
    report("C8 normalised lambda* band", ok, "; ".join(parts))
    assert ok


def test_c09_cheap_augmentation(report):
    n = 200
    theta = n ** (-1 / 3)
    rng = np.random.default_rng(MASTER_SEED + 9)
    clean = 0
    added_weights = []
    bound_ok = True
    for t in range(100):
        inst = generate_instance(Kind.COMPLETE_BIPARTITE, n, 1, 1.0, 70_000 + t)
        pairs = rng.permutation(n)
        pairs[int(rng.integers(n))] = EXPOSED
        m = matching_from_pairs(inst, pairs)
        out = augment_cheap(inst, m)
        new = set(out.edge_ids().tolist()) - set(m.edge_ids().tolist())
        added = math.fsum(inst.weight[e] for e in new)
        added_weights.append(added)
        if out.trace.escalations == 0:
            clean += 1
            bound_ok &= added <= 6 * theta
    aw = np.array(added_weights)
    ok = clean >= 95 and bound_ok
    report("C9 cheap augmentation", ok,
           f"{clean}/100 without escalation; added weight median {np.median(aw):.4f}, "
           f"max {aw.max():.4f} vs 6n^-1/3={6 * theta:.4f}; "
           f"{np.mean(aw <= 3 * theta):.0%} within 3n^-1/3={3 * theta:.4f}")
    assert ok


def test_c10_threshold_reconnection(report):
    n = 500
    clean = 0
    rows = []
    for t in range(100):
        inst = generate_instance(Kind.COMPLETE, n, 1, 1.0, 80_000 + t)
        budgets = default_budgets(inst, n**0.05)
        cert = dual_ascent_tree(inst, budgets)
        family = optimal_tree_family(inst, cert.lambda_star, seeds=cert.optimal_family)
        candidate = select_candidate_tree(inst, family, budgets)
        try:
            out = repair_tree(inst, candidate, budgets)
        except Exception as exc:  # counted, not fatal
            rows.append(type(exc).__name__)
            continue
        rows.append(out.trace.selected)
        clean += out.trace.escalations == 0
    ok = clean >= 99
    report("C10 threshold reconnection", ok,
           f"{clean}/100 reconnected without escalation at n={n} "
           f"({rows.count('repaired')} repaired, {rows.count('unrepaired')} untouched)")
    assert ok


def test_c11_reproducibility(report, tmp_path):
    cfg = dict(problem="tree", n_grid=[7, 40], trials=5, seed=MASTER_SEED)
    a = run_experiment(ExperimentConfig(**cfg, out=str(tmp_path / "a.csv")))
    b = run_experiment(ExperimentConfig(**cfg, out=str(tmp_path / "b.csv")))

    def drop_timing(path):
        lines = path.read_text().splitlines()
        return [line.rsplit(",", 1)[0] for line in lines]

    same_csv = drop_timing(tmp_path / "a.csv") == drop_timing(tmp_path / "b.csv")
    same_csv &= csv_text(a, include_timing=False) == csv_text(b, include_timing=False)
    mcfg = dict(problem="matching", n_grid=[30], trials=4, seed=MASTER_SEED,
                budget_rule="exponent", budget_exponent=0.75)
    same_csv &= csv_text(run_experiment(ExperimentConfig(**mcfg)), False) == csv_text(
        run_experiment(ExperimentConfig(**mcfg)), False)
    round_trip = True
    for kind, n, r, alpha in [(Kind.COMPLETE, 30, 2, 1.0), (Kind.COMPLETE_BIPARTITE, 20, 1, 2.0),
                              (Kind.COMPLETE, 9, 3, 3.5)]:
        inst = generate_instance(kind, n, r, alpha, MASTER_SEED)
        data = serialize_instance(inst)
        back = deserialize_instance(data)
        round_trip &= back == inst and serialize_instance(back) == data
        round_trip &= back.weight.tobytes() == inst.weight.tobytes()
        round_trip &= back.costs.tobytes() == inst.costs.tobytes()
    ok = same_csv and round_trip
    report("C11 reproducibility", ok,
           f"CSV identical modulo timing: {same_csv}; bit-exact round trip: {round_trip}")
    assert ok


def test_solve_pipelines_used_on_feasibility_grid():
    # the n=200 feasibility runs really exercise the constrained paths
    tree = feasibility_records("tree")
    match = feasibility_records("matching")
    assert sum(1 for r in tree if r.lambda_star[0] > 0) >= 50
    assert sum(1 for r in match if r.lambda_star[0] > 0) >= 50
