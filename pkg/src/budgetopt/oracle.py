"""Exhaustive ground truth for tiny instances.

Trees are enumerated through Prüfer sequences (n^(n-2) of them), matchings
through all n! permutations.  Nothing clever happens here on purpose.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Optional, Sequence, Union

import numpy as np

from .instance import Budgets, Instance, Kind

__all__ = [
    "OracleResult",
    "prufer_trees",
    "all_permutations",
    "brute_force_tree",
    "brute_force_min_tree",
    "brute_force_matching",
    "brute_force_min_assignment",
    "exhaustive_rotation_check",
]

MAX_N = 8
BUDGET_SLACK = 1e-12


@dataclass(frozen=True)
class OracleResult:
    optimum: Optional[float]  # None when infeasible
    argmin: tuple[int, ...]
    enumerated_count: int

    @property
    def feasible(self) -> bool:
        return self.optimum is not None


@lru_cache(maxsize=None)
def prufer_trees(n: int) -> np.ndarray:
    """Edge-id matrix of every labeled tree on ``n`` vertices, shape (n^(n-2), n-1).

    Decodes all Prüfer sequences at once; row ``k`` is the tree whose
    sequence is ``k`` written in base ``n``.  Edge ids follow the
    lexicographic numbering of :class:`Instance`.
    """
    if not 2 <= n <= MAX_N:
        raise ValueError(f"tree enumeration supports 2 <= n <= {MAX_N}, got {n}")
    if n == 2:
        return np.zeros((1, 1), dtype=np.int64)
    count = n ** (n - 2)
    seqs = np.array(list(itertools.product(range(n), repeat=n - 2)), dtype=np.int64)
    rows = np.arange(count)
    degree = np.ones((count, n), dtype=np.int64)
    np.add.at(degree, (np.repeat(rows, n - 2), seqs.ravel()), 1)
    ends = np.empty((count, n - 1, 2), dtype=np.int64)
    for step in range(n - 2):
        leaf = np.argmax(degree == 1, axis=1)  # smallest current leaf
        parent = seqs[:, step]
        ends[:, step, 0] = leaf
        ends[:, step, 1] = parent
        degree[rows, leaf] = 0
        degree[rows, parent] -= 1
    last = np.argsort(degree != 1, axis=1, kind="stable")[:, :2]
    ends[:, n - 2] = last
    u = ends.min(axis=2)
    v = ends.max(axis=2)
    edge_id = u * (2 * n - u - 1) // 2 + (v - u - 1)
    out = np.sort(edge_id, axis=1)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def all_permutations(n: int) -> np.ndarray:
    if not 1 <= n <= MAX_N:
        raise ValueError(f"matching enumeration supports 1 <= n <= {MAX_N}, got {n}")
    out = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    out.setflags(write=False)
    return out


def _argmin(values: np.ndarray, ok: np.ndarray) -> Optional[int]:
    if not ok.any():
        return None
    masked = np.where(ok, values, np.inf)
    return int(np.argmin(masked))


def brute_force_tree(
    instance: Instance, budgets: Union[Budgets, Sequence[float], None]
) -> OracleResult:
    """Lightest spanning tree within every budget, by full enumeration.

    ``budgets`` may be a :class:`Budgets` or a plain sequence (zero allowed).
    """
    if instance.kind is not Kind.COMPLETE:
        raise ValueError("brute_force_tree needs a complete-graph instance")
    if instance.n > MAX_N:
        raise ValueError(f"n={instance.n} too large for enumeration (max {MAX_N})")
    trees = prufer_trees(instance.n)
    weights = instance.weight[trees].sum(axis=1)
    ok = np.ones(len(trees), dtype=bool)
    if budgets is not None:
        values = budgets.values if isinstance(budgets, Budgets) else tuple(budgets)
        for i, C in enumerate(values):
            ok &= instance.costs[trees, i].sum(axis=1) <= C + BUDGET_SLACK
    k = _argmin(weights, ok)
    if k is None:
        return OracleResult(None, (), len(trees))
    return OracleResult(float(weights[k]), tuple(trees[k].tolist()), len(trees))


def brute_force_min_tree(instance: Instance, lam: Sequence[float]) -> OracleResult:
    """Unconstrained minimum of ``w + sum lam_i c_i`` over all spanning trees."""
    trees = prufer_trees(instance.n)
    key = instance.weight + instance.costs @ np.asarray(lam, dtype=float)
    values = key[trees].sum(axis=1)
    k = int(np.argmin(values))
    return OracleResult(float(values[k]), tuple(trees[k].tolist()), len(trees))


def brute_force_matching(instance: Instance, C1: Optional[float]) -> OracleResult:
    """Lightest perfect matching with cost at most ``C1``; argmin is the permutation."""
    if not instance.bipartite:
        raise ValueError("brute_force_matching needs a bipartite instance")
    if instance.n > MAX_N:
        raise ValueError(f"n={instance.n} too large for enumeration (max {MAX_N})")
    perms = all_permutations(instance.n)
    rows = np.arange(instance.n)
    weights = instance.weight_matrix()[rows, perms].sum(axis=1)
    ok = np.ones(len(perms), dtype=bool)
    if C1 is not None:
        ok = instance.cost_matrix()[rows, perms].sum(axis=1) <= C1 + BUDGET_SLACK
    k = _argmin(weights, ok)
    if k is None:
        return OracleResult(None, (), len(perms))
    return OracleResult(float(weights[k]), tuple(perms[k].tolist()), len(perms))


def brute_force_min_assignment(instance: Instance, lam: float) -> OracleResult:
    perms = all_permutations(instance.n)
    rows = np.arange(instance.n)
    key = instance.weight_matrix() + lam * instance.cost_matrix()
    values = key[rows, perms].sum(axis=1)
    k = int(np.argmin(values))
    return OracleResult(float(values[k]), tuple(perms[k].tolist()), len(perms))


def exhaustive_rotation_check(a: Sequence[float], tol: float = 1e-12) -> set[int]:
    """Every start ``ell`` whose cyclic partial sums (t = 1..k-1) are all <= tol.

    Sums are exact: each float is a dyadic rational.
    """
    k = len(a)
    if k > 64:
        raise ValueError("exhaustive check limited to k <= 64")
    vals = [Fraction(float(x)) for x in a]
    denom = max((v.denominator for v in vals), default=1)
    ints = [int(v * denom) for v in vals]
    limit = Fraction(tol) * denom
    valid = set()
    for ell in range(k):
        s = 0
        for t in range(1, k):
            s += ints[(ell + t - 1) % k]
            if s > limit:
                break
        else:
            valid.add(ell)
    return valid
