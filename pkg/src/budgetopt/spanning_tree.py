"""Cost-budgeted minimum spanning trees on K_n via Lagrangean relaxation.

Pipeline: maximise the concave dual ``phi(lam)`` (bisection for one budget,
projected subgradient ascent otherwise), collect the trees tied for minimum
composite weight at the dual optimum by exchange moves ``T + e - f``, pick
the lightest member that is nearly within budget, then restore strict
feasibility by deleting expensive edges and reconnecting the forest with
edges from the low-weight/low-cost threshold subgraph.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import RepairError, UnconstrainableBudgetError
from .instance import Budgets, Instance, Kind

log = logging.getLogger(__name__)

__all__ = [
    "TreeConfig",
    "TreeTrace",
    "TreeSolution",
    "TreeDualCertificate",
    "RepairThresholds",
    "composite_weights",
    "tree_from_edges",
    "is_spanning_tree",
    "min_tree",
    "phi_tree",
    "dual_ascent_tree",
    "optimal_tree_family",
    "select_candidate_tree",
    "repair_thresholds",
    "repair_tree",
    "solve_constrained_tree",
    "tree_record",
]


class UnionFind:
    __slots__ = ("parent", "components")

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.components = n

    def find(self, u: int) -> int:
        parent = self.parent
        while parent[u] != u:
            parent[u] = parent[parent[u]]
            u = parent[u]
        return u

    def union(self, u: int, v: int) -> bool:
        ru, rv = self.find(u), self.find(v)
        if ru == rv:
            return False
        self.parent[rv] = ru
        self.components -= 1
        return True


@dataclass
class TreeConfig:
    lambda_tol: Optional[float] = None  # None: 1e-9 * (1 + lam_hi)
    tie_tol: float = 1e-7
    step0: Optional[float] = None  # None: 1/n
    max_iters: Optional[int] = None  # None: 200 r
    family_cap: Optional[int] = None  # None: 4 (r + 1)
    psi_escalations: int = 5
    lambda_max: float = 2.0**60
    # when repair fails, fall back to a budget-feasible tree from the tied
    # dual family (recorded as a failure in the trace)
    fallback: bool = True
    # also let a feasible family tree win when it beats the repaired tree
    keep_best_feasible: bool = False


@dataclass
class TreeTrace:
    psi: float = math.nan
    deleted: dict[int, list[int]] = field(default_factory=dict)
    added: list[int] = field(default_factory=list)
    escalations: int = 0
    selected: str = "min_tree"
    w_max: float = math.nan
    c_max: float = math.nan
    failure: Optional[str] = None
    notes: list[str] = field(default_factory=list)


@dataclass
class TreeSolution:
    edges: np.ndarray
    weight: float
    costs: tuple[float, ...]
    feasible: Optional[bool] = None
    trace: TreeTrace = field(default_factory=TreeTrace)

    @property
    def key(self) -> frozenset:
        return frozenset(self.edges.tolist())

    def composite(self, lam) -> float:
        return self.weight + float(np.dot(np.asarray(lam, dtype=float), self.costs))


@dataclass
class TreeDualCertificate:
    lambda_star: np.ndarray
    phi: float
    subgradient: np.ndarray
    optimal_family: list[TreeSolution]
    iterations: int = 0
    swap_depth: int = 0
    tie_anomaly: bool = False

    @property
    def family_size(self) -> int:
        return len(self.optimal_family)


@dataclass(frozen=True)
class RepairThresholds:
    psi: float
    expensive: np.ndarray  # C_i / (4n)
    quota: np.ndarray  # ceil(4 r n / C_i)


def _resolve(config: Optional[TreeConfig]) -> TreeConfig:
    return config if config is not None else TreeConfig()


def _check_complete(instance: Instance):
    if instance.kind is not Kind.COMPLETE:
        raise ValueError("spanning tree solvers need a complete-graph instance")


def composite_weights(instance: Instance, lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float).reshape(-1)
    if lam.size != instance.r:
        raise ValueError(f"lambda has {lam.size} entries, instance has r={instance.r}")
    if np.any(lam < 0):
        raise ValueError("lambda must be non-negative")
    if instance.r == 0:
        return instance.weight.copy()
    return instance.weight + instance.costs @ lam


def tree_from_edges(
    instance: Instance, edges: Iterable[int], budgets: Optional[Budgets] = None
) -> TreeSolution:
    ids = np.sort(np.fromiter(edges, dtype=np.int64))
    weight = math.fsum(instance.weight[ids])
    costs = tuple(math.fsum(instance.costs[ids, i]) for i in range(instance.r))
    feasible = None
    if budgets is not None:
        feasible = all(c <= C for c, C in zip(costs, budgets.values))
    return TreeSolution(ids, weight, costs, feasible)


def is_spanning_tree(instance: Instance, edges: Sequence[int]) -> bool:
    edges = list(edges)
    if len(edges) != instance.n - 1:
        return False
    uf = UnionFind(instance.n)
    return all(uf.union(int(instance.tail[e]), int(instance.head[e])) for e in edges)


def _kruskal(instance: Instance, key: np.ndarray) -> list[int]:
    """Minimum spanning tree under ``key``; ties go to the smaller edge id."""
    n, m = instance.n, instance.m
    tail, head = instance.tail, instance.head
    # only a prefix of the sorted order is ever scanned; sort a generous
    # lower slice first and fall back to the full order if it is too short
    k = min(m, 8 * n * max(1, math.ceil(math.log(n))))
    if k < m:
        cutoff = np.partition(key, k - 1)[k - 1]
        pool = np.flatnonzero(key <= cutoff)
        orders = [pool[np.argsort(key[pool], kind="stable")]]
    else:
        orders = []
    orders.append(np.argsort(key, kind="stable"))
    for order in orders:
        uf = UnionFind(n)
        chosen = []
        for e in order.tolist():
            if uf.union(int(tail[e]), int(head[e])):
                chosen.append(e)
                if len(chosen) == n - 1:
                    return chosen
    raise AssertionError("complete graph must be connected")


def min_tree(instance: Instance, lam) -> TreeSolution:
    """Spanning tree minimising ``w(T) + sum_i lam_i c_i(T)``."""
    _check_complete(instance)
    return tree_from_edges(instance, _kruskal(instance, composite_weights(instance, lam)))


def _phi_of(tree: TreeSolution, lam: np.ndarray, C: np.ndarray) -> float:
    return tree.weight + float(np.dot(lam, np.asarray(tree.costs) - C))


def phi_tree(instance: Instance, budgets: Budgets, lam) -> float:
    """Lagrangean dual value; a lower bound on the constrained optimum."""
    lam = np.asarray(lam, dtype=float).reshape(-1)
    return _phi_of(min_tree(instance, lam), lam, budgets.as_array())


def _distinct(trees: Iterable[TreeSolution]) -> list[TreeSolution]:
    seen = {}
    for t in trees:
        seen.setdefault(t.key, t)
    return list(seen.values())


def _bisect(instance: Instance, budgets: Budgets, config: TreeConfig) -> TreeDualCertificate:
    C = budgets.values[0]
    zero = np.zeros(1)
    t_lo = min_tree(instance, zero)
    if t_lo.costs[0] <= C:
        return TreeDualCertificate(zero, t_lo.weight - 0.0, np.array([t_lo.costs[0] - C]), [t_lo])
    lo, hi = 0.0, 1.0
    iters = 1
    t_hi = min_tree(instance, [hi])
    while t_hi.costs[0] > C:
        lo, t_lo = hi, t_hi
        hi *= 2.0
        iters += 1
        if hi > config.lambda_max:
            raise UnconstrainableBudgetError(
                f"no spanning tree meets C_1={C:.6g} (lambda > {config.lambda_max:.3g})"
            )
        t_hi = min_tree(instance, [hi])
    tol = config.lambda_tol if config.lambda_tol is not None else 1e-9 * (1.0 + hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        t = min_tree(instance, [mid])
        iters += 1
        if t.costs[0] <= C:
            hi, t_hi = mid, t
        else:
            lo, t_lo = mid, t
    lam = np.array([0.5 * (lo + hi)])
    t_mid = min_tree(instance, lam)
    found = _distinct([t_mid, t_lo, t_hi])
    phi = min(_phi_of(t, lam, np.array([C])) for t in found)
    best = min(t.composite(lam) for t in found)
    family = [t for t in found if t.composite(lam) <= best + config.tie_tol]
    return TreeDualCertificate(lam, phi, np.array([t_mid.costs[0] - C]), family, iters)


def _subgradient(instance: Instance, budgets: Budgets, config: TreeConfig) -> TreeDualCertificate:
    r = instance.r
    C = budgets.as_array()
    step0 = config.step0 if config.step0 is not None else 1.0 / instance.n
    max_iters = config.max_iters if config.max_iters is not None else 200 * r
    lam = np.zeros(r)
    best = None
    iters = 0
    for t in range(1, max_iters + 1):
        tree = min_tree(instance, lam)
        iters = t
        g = np.asarray(tree.costs) - C
        val = _phi_of(tree, lam, C)
        if best is None or val > best[0]:
            best = (val, lam.copy(), g, tree)
        if np.all(g <= 0) and not np.any(lam):
            break
        lam = np.maximum(0.0, lam + step0 / math.sqrt(t) * g)
    val, lam, g, tree = best
    return TreeDualCertificate(lam, val, g, [tree], iters)


def dual_ascent_tree(
    instance: Instance, budgets: Budgets, config: Optional[TreeConfig] = None
) -> TreeDualCertificate:
    """Approximately maximise the dual ``phi`` over ``lam >= 0``.

    One budget: bisection on the sign of ``c_1(T_lam) - C_1``; the two sides
    of the final bracket are both kept in the certificate's family.  Several
    budgets: projected subgradient ascent with step ``step0 / sqrt(t)``,
    returning the best iterate seen.
    """
    _check_complete(instance)
    config = _resolve(config)
    if instance.r < 1:
        raise ValueError("dual ascent needs r >= 1")
    if budgets.r != instance.r:
        raise ValueError(f"{budgets.r} budgets for r={instance.r} costs")
    if instance.r == 1:
        return _bisect(instance, budgets, config)
    return _subgradient(instance, budgets, config)


class _RootedTree:
    """Parent pointers of a spanning tree rooted at vertex 0."""

    def __init__(self, instance: Instance, edges: np.ndarray):
        n = instance.n
        adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        for e in edges.tolist():
            u, v = int(instance.tail[e]), int(instance.head[e])
            adj[u].append((v, e))
            adj[v].append((u, e))
        self.parent = [-1] * n
        self.parent_edge = [-1] * n
        self.depth = [0] * n
        self.order = [0]
        seen = [False] * n
        seen[0] = True
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for v, e in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    self.parent[v], self.parent_edge[v] = u, e
                    self.depth[v] = self.depth[u] + 1
                    self.order.append(v)
                    queue.append(v)

    def path_edges(self, u: int, v: int) -> list[int]:
        out = []
        while u != v:
            if self.depth[u] >= self.depth[v]:
                out.append(self.parent_edge[u])
                u = self.parent[u]
            else:
                out.append(self.parent_edge[v])
                v = self.parent[v]
        return out

    def path_max(self, cw: np.ndarray) -> np.ndarray:
        """Matrix of the largest ``cw`` on each tree path (-inf on the diagonal)."""
        n = len(self.parent)
        pm = np.full((n, n), -np.inf)
        order = np.asarray(self.order)
        for k in range(1, n):
            v = order[k]
            p = self.parent[v]
            seen = order[:k]
            row = np.maximum(pm[seen, p], cw[self.parent_edge[v]])
            pm[seen, v] = row
            pm[v, seen] = row
        return pm


def _tie_swaps(
    instance: Instance, cw: np.ndarray, tree: TreeSolution, slack: float
) -> list[np.ndarray]:
    """Edge sets ``T + e - f`` whose composite weight rises by at most ``slack``."""
    rooted = _RootedTree(instance, tree.edges)
    pm = rooted.path_max(cw)
    gap = cw - pm[instance.tail, instance.head]
    in_tree = np.zeros(instance.m, dtype=bool)
    in_tree[tree.edges] = True
    out = []
    for e in np.flatnonzero(~in_tree & (gap <= slack)).tolist():
        u, v = int(instance.tail[e]), int(instance.head[e])
        for f in rooted.path_edges(u, v):
            if cw[e] - cw[f] <= slack:
                new = tree.edges[tree.edges != f]
                out.append(np.append(new, e))
    return out


def _swap_closure(
    instance: Instance,
    lam: np.ndarray,
    tie_tol: float,
    cap: int,
    depth: int,
    seeds: Iterable[TreeSolution] = (),
) -> tuple[list[TreeSolution], int, bool]:
    cw = composite_weights(instance, lam)
    root = min_tree(instance, lam)

    def cw_sum(t: TreeSolution) -> float:
        return math.fsum(cw[t.edges])

    best = cw_sum(root)
    family = {root.key: root}
    for s in seeds:
        if s.key not in family and cw_sum(s) <= best + tie_tol:
            family[s.key] = s
    frontier = list(family.values())
    reached = 0
    capped = False
    for d in range(1, depth + 1):
        nxt = []
        for t in frontier:
            for edges in _tie_swaps(instance, cw, t, best + tie_tol - cw_sum(t)):
                cand = tree_from_edges(instance, edges)
                if cand.key in family:
                    continue
                if len(family) >= cap:
                    capped = True
                    break
                family[cand.key] = cand
                nxt.append(cand)
                reached = d
        if not nxt:
            break
        frontier = nxt
    return list(family.values()), reached, capped


def optimal_tree_family(
    instance: Instance,
    lambda_star,
    tie_tol: float = 1e-7,
    family_cap: Optional[int] = None,
    depth: Optional[int] = None,
    seeds: Iterable[TreeSolution] = (),
) -> list[TreeSolution]:
    """Trees within ``tie_tol`` of the minimum composite weight at ``lambda_star``.

    Explores exchange moves ``T + e - f`` from ``min_tree`` up to ``depth``
    (default ``r``) levels, deduplicated and capped at ``family_cap``
    (default ``4 (r + 1)``).  Extra ``seeds`` are admitted when they tie.
    """
    _check_complete(instance)
    lam = np.asarray(lambda_star, dtype=float).reshape(-1)
    r = instance.r
    cap = family_cap if family_cap is not None else 4 * (r + 1)
    depth = depth if depth is not None else max(r, 1)
    family, _, _ = _swap_closure(instance, lam, tie_tol, cap, depth, seeds)
    if len(family) > r + 1:
        log.warning("tie anomaly: %d trees tied at lambda=%s", len(family), lam)
    return family


def select_candidate_tree(
    instance: Instance, family: Sequence[TreeSolution], budgets: Budgets
) -> TreeSolution:
    """Lightest family member with every ``c_i(T) <= C_i + r * c_max``.

    ``c_max`` is the largest single-edge cost over all family members and
    constraints.  If no member qualifies, the one with the smallest worst
    relative overrun is returned instead.
    """
    if not family:
        raise ValueError("empty tree family")
    r = instance.r
    C = budgets.as_array()
    ids = np.unique(np.concatenate([t.edges for t in family]))
    w_max = float(instance.weight[ids].max())
    c_max = float(instance.costs[ids].max()) if r else 0.0
    qualified = [t for t in family if np.all(np.asarray(t.costs) <= C + r * c_max)]
    if qualified:
        pick = min(qualified, key=lambda t: (t.weight, t.edges.tolist()))
        how = "relaxed_bound"
    else:
        pick = min(family, key=lambda t: (float(np.max((np.asarray(t.costs) - C) / C)), t.weight))
        how = "least_overrun"
    out = tree_from_edges(instance, pick.edges, budgets)
    out.trace.selected = how
    out.trace.w_max, out.trace.c_max = w_max, c_max
    return out


def repair_psi(n: int, r: int, alpha: float) -> float:
    """Threshold ``F^{-1}(n^{-1/(r+1)} (ln n)^{1/r})`` for ``F(x) = x**alpha``."""
    return (n ** (-1.0 / (r + 1)) * math.log(n) ** (1.0 / r)) ** (1.0 / alpha)


def repair_thresholds(instance: Instance, budgets: Budgets) -> RepairThresholds:
    n, r = instance.n, instance.r
    C = budgets.as_array()
    return RepairThresholds(
        psi=repair_psi(n, r, instance.alpha),
        expensive=C / (4 * n),
        quota=np.ceil(4 * r * n / C).astype(int),
    )


def repair_tree(
    instance: Instance,
    tree: TreeSolution,
    budgets: Budgets,
    config: Optional[TreeConfig] = None,
) -> TreeSolution:
    """Push a near-feasible tree strictly inside the budgets.

    For each budget with too little headroom, the tree's most expensive
    edges (cost at least ``C_i / 4n``) are deleted, at most ``quota_i`` of
    them, until ``quota_i (r + 1) psi`` of headroom is free.  The forest is
    then reconnected with the lightest edges whose weight and costs are all
    at most ``psi``.  If those edges cannot reconnect it, ``psi`` doubles,
    up to ``config.psi_escalations`` times.

    The result may still be over budget when the headroom cannot be freed
    (tiny ``n``); its ``feasible`` flag says so.
    """
    _check_complete(instance)
    config = _resolve(config)
    r = instance.r
    C = budgets.as_array()
    th = repair_thresholds(instance, budgets)
    costs = instance.costs
    base_costs = np.asarray(tree.costs)
    psi = th.psi
    for esc in range(config.psi_escalations + 1):
        margin = th.quota * (r + 1) * psi
        if np.all(base_costs <= C - margin):
            out = tree_from_edges(instance, tree.edges, budgets)
            out.trace = TreeTrace(psi=psi, selected="unrepaired", escalations=esc,
                                  w_max=tree.trace.w_max, c_max=tree.trace.c_max)
            return out
        forest = set(tree.edges.tolist())
        current = base_costs.copy()
        deleted: dict[int, list[int]] = {}
        for i in range(r):
            if current[i] <= C[i] - margin[i]:
                continue
            expensive = [e for e in forest if costs[e, i] >= th.expensive[i]]
            expensive.sort(key=lambda e: (-costs[e, i], e))
            dels = []
            for e in expensive:
                if len(dels) >= th.quota[i] or current[i] <= C[i] - margin[i]:
                    break
                forest.discard(e)
                current -= costs[e]
                dels.append(e)
            deleted[i] = dels
        removed = {e for dels in deleted.values() for e in dels}

        uf = UnionFind(instance.n)
        for e in forest:
            uf.union(int(instance.tail[e]), int(instance.head[e]))
        gamma = (instance.weight <= psi) & np.all(costs <= psi, axis=1)
        pool = np.flatnonzero(gamma)
        pool = pool[np.argsort(instance.weight[pool], kind="stable")]
        added = []
        for e in pool.tolist():
            if uf.components == 1:
                break
            if e in removed or e in forest:
                continue
            if uf.union(int(instance.tail[e]), int(instance.head[e])):
                added.append(e)
        if uf.components == 1:
            out = tree_from_edges(instance, list(forest) + added, budgets)
            out.trace = TreeTrace(
                psi=psi, deleted=deleted, added=added, escalations=esc,
                selected="repaired", w_max=tree.trace.w_max, c_max=tree.trace.c_max,
            )
            if not out.feasible:
                out.trace.notes.append("headroom shortfall: repaired tree over budget")
            return out
        log.info("threshold subgraph left %d components at psi=%.4g; escalating",
                 uf.components, psi)
        psi *= 2.0
    raise RepairError(
        f"threshold subgraph failed to reconnect after {config.psi_escalations} escalations"
    )


def solve_constrained_tree(
    instance: Instance, budgets: Budgets, config: Optional[TreeConfig] = None
) -> tuple[TreeSolution, TreeDualCertificate]:
    """Budget-feasible near-optimal spanning tree plus its dual lower bound."""
    config = _resolve(config)
    cert = dual_ascent_tree(instance, budgets, config)
    C = budgets.as_array()
    if not np.any(cert.lambda_star) and np.all(cert.subgradient <= 0):
        sol = tree_from_edges(instance, cert.optimal_family[0].edges, budgets)
        sol.trace.selected = "unconstrained"
        return sol, cert

    r = instance.r
    cap = config.family_cap if config.family_cap is not None else 4 * (r + 1)
    family, depth, capped = _swap_closure(
        instance, cert.lambda_star, config.tie_tol, cap, max(r, 1), cert.optimal_family
    )
    cert.optimal_family = family
    cert.swap_depth = depth
    cert.tie_anomaly = capped or len(family) > r + 1
    if cert.tie_anomaly:
        log.warning("tie anomaly: %d trees tied at lambda=%s", len(family), cert.lambda_star)

    candidate = select_candidate_tree(instance, family, budgets)
    failure: Optional[Exception] = None
    repaired = None
    try:
        repaired = repair_tree(instance, candidate, budgets, config)
        if not repaired.feasible:
            failure = RepairError("repaired tree exceeds a budget")
    except RepairError as exc:
        failure = exc
    feasible_family = [
        t for t in family if np.all(np.asarray(t.costs) <= C)
    ]
    options = [repaired] if failure is None else []
    if config.keep_best_feasible or (failure is not None and config.fallback):
        for t in feasible_family:
            alt = tree_from_edges(instance, t.edges, budgets)
            alt.trace.selected = "dual_family"
            options.append(alt)
    if not options:
        raise failure or RepairError("no budget-feasible tree found")
    best = min(options, key=lambda t: (t.weight, t.edges.tolist()))
    if repaired is not None and best is not repaired:
        # keep the repair bookkeeping visible even when it lost
        best.trace.psi = repaired.trace.psi
        best.trace.escalations = repaired.trace.escalations
        best.trace.notes.append(
            f"repaired tree weight {repaired.weight:.6g} "
            f"({'feasible' if repaired.feasible else 'infeasible'}) not chosen"
        )
    if failure is not None:
        best.trace.failure = type(failure).__name__
        best.trace.notes.append(f"repair failed: {failure}")
    best.trace.w_max, best.trace.c_max = candidate.trace.w_max, candidate.trace.c_max
    return best, cert


def tree_record(solution: TreeSolution, cert: Optional[TreeDualCertificate] = None) -> dict:
    """Plain-data trace of a solve, suitable for JSON export."""
    rec = {
        "edges": solution.edges.tolist(),
        "weight": solution.weight,
        "costs": list(solution.costs),
        "feasible": solution.feasible,
        "selected": solution.trace.selected,
        "psi": solution.trace.psi,
        "deleted": {str(i): d for i, d in solution.trace.deleted.items()},
        "added": solution.trace.added,
        "escalations": solution.trace.escalations,
        "failure": solution.trace.failure,
        "notes": solution.trace.notes,
    }
    if cert is not None:
        rec.update(
            lambda_star=cert.lambda_star.tolist(),
            phi=cert.phi,
            subgradient=cert.subgradient.tolist(),
            family_size=cert.family_size,
            swap_depth=cert.swap_depth,
            tie_anomaly=cert.tie_anomaly,
        )
    return rec
