"""Single-budget minimum-weight perfect matchings on K_{n,n}.

The dual ``phi(lam) = min_M w(M) + lam (c(M) - C)`` is maximised by
bisection.  The two matchings on either side of the final bracket differ on
an alternating cycle; walking that cycle from a start where no partial
sum of composite weights is positive trades the cheap matching's edges for
the light one's while the budget allows.  The single edge this leaves
uncovered is restored by a short augmenting path in the graph of edges
whose weight and cost are both below ``theta``.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import (
    AugmentationError,
    ContractViolation,
    PatchError,
    UnconstrainableBudgetError,
)
from .instance import Instance

log = logging.getLogger(__name__)

__all__ = [
    "EXPOSED",
    "MatchConfig",
    "CheapGraphConfig",
    "MatchTrace",
    "MatchingSolution",
    "RotationState",
    "MatchDualCertificate",
    "matching_from_pairs",
    "min_assignment",
    "phi_match",
    "dual_search_match",
    "gasoline_start",
    "rotate_cycle",
    "augment_cheap",
    "solve_constrained_matching",
    "lambda_bound_reference",
    "matching_record",
]

EXPOSED = -1


@dataclass
class CheapGraphConfig:
    theta: Optional[float] = None  # None: n^(-1/3)
    escalation: float = 2.0
    max_escalations: int = 5
    # 11 edges = at most 6 cheap edges added per augmentation
    max_path_edges: int = 11

    def resolve_theta(self, n: int) -> float:
        return self.theta if self.theta is not None else n ** (-1.0 / 3.0)


@dataclass
class MatchConfig:
    lambda_tol: Optional[float] = None  # None: 1e-9 * (1 + lam_hi)
    lambda_max: float = 2.0**60
    cheap: CheapGraphConfig = field(default_factory=CheapGraphConfig)
    patch_rounds: int = 3
    bound_constant: float = 1.0
    # when augmentation or patching fails, fall back to the within-budget side
    # of the dual bracket (recorded as a failure in the trace)
    fallback: bool = True
    # also let that bracket matching win when it beats the pipeline result
    keep_best_feasible: bool = False


@dataclass
class RotationState:
    cycle: list[int]  # edge ids e_1..e_k; odd positions (1-based) lie in m_high
    a: np.ndarray
    ell: int
    tau: int
    x_tau: list[int]
    seam: Optional[int] = None
    cycles_found: int = 1


@dataclass
class MatchTrace:
    rotation: Optional[RotationState] = None
    escalations: int = 0
    theta: float = math.nan
    path_lengths: list[int] = field(default_factory=list)
    overshoot_weight: float = 0.0
    overshoot_cost: float = 0.0
    patch_rounds: int = 0
    selected: str = "min_assignment"
    failure: Optional[str] = None
    notes: list[str] = field(default_factory=list)


@dataclass
class MatchingSolution:
    pairs: np.ndarray  # pairs[i] = right vertex of left vertex i, or EXPOSED
    weight: float
    cost: float
    size: int
    feasible: Optional[bool] = None
    trace: MatchTrace = field(default_factory=MatchTrace)

    @property
    def perfect(self) -> bool:
        return self.size == len(self.pairs)

    def edge_ids(self) -> np.ndarray:
        n = len(self.pairs)
        rows = np.flatnonzero(self.pairs != EXPOSED)
        return rows * n + self.pairs[rows]

    def composite(self, lam: float) -> float:
        return self.weight + lam * self.cost


@dataclass
class MatchDualCertificate:
    lambda_star: float
    phi: float
    m_low: MatchingSolution
    m_high: MatchingSolution
    lambda_bound: float
    bracket: tuple[float, float] = (0.0, 0.0)
    iterations: int = 0

    @property
    def degenerate(self) -> bool:
        return self.lambda_star == 0.0 or np.array_equal(self.m_low.pairs, self.m_high.pairs)


def _check_bipartite(instance: Instance):
    if not instance.bipartite or instance.r != 1:
        raise ValueError("matching solvers need a complete-bipartite instance with r=1")


def matching_from_pairs(
    instance: Instance, pairs: Sequence[int], C1: Optional[float] = None
) -> MatchingSolution:
    pairs = np.asarray(pairs, dtype=np.int64).copy()
    rows = np.flatnonzero(pairs != EXPOSED)
    cols = pairs[rows]
    if len(set(cols.tolist())) != len(cols):
        raise ContractViolation("pairs are not injective")
    W, Cm = instance.weight_matrix(), instance.cost_matrix()
    weight = math.fsum(W[rows, cols])
    cost = math.fsum(Cm[rows, cols])
    feasible = None if C1 is None else cost <= C1
    return MatchingSolution(pairs, weight, cost, len(rows), feasible)


def min_assignment(instance: Instance, lam: float) -> MatchingSolution:
    """Perfect matching minimising ``w(M) + lam * c_1(M)`` (exact, O(n^3))."""
    _check_bipartite(instance)
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    cw = instance.weight_matrix() + lam * instance.cost_matrix()
    _, cols = linear_sum_assignment(cw)
    return matching_from_pairs(instance, cols)


def phi_match(instance: Instance, C1: float, lam: float) -> float:
    m = min_assignment(instance, lam)
    return m.weight + lam * (m.cost - C1)


def lambda_bound_reference(n: int, alpha: float, C1: float, D: float) -> float:
    """Reference scale ``D n^(2 - 1/alpha) / C1^2`` for the dual optimum."""
    if n < 2 or C1 <= 0 or D < 0:
        raise ValueError("need n >= 2, C1 > 0, D >= 0")
    return D * n ** (2.0 - 1.0 / alpha) / C1**2


def dual_search_match(
    instance: Instance, C1: float, config: Optional[MatchConfig] = None
) -> MatchDualCertificate:
    """Bisection for the dual optimum of the budgeted assignment problem.

    ``m_high`` is the optimum at the bracket's lower end (over budget) and
    ``m_low`` the optimum at its upper end (within budget).  ``lambda_star``
    is where their composite weights are equal, which lies in the bracket.
    """
    _check_bipartite(instance)
    config = config or MatchConfig()
    if not C1 > 0:
        raise ValueError("C1 must be positive")
    bound = lambda_bound_reference(instance.n, instance.alpha, C1, config.bound_constant)
    m0 = min_assignment(instance, 0.0)
    if m0.cost <= C1:
        m0.feasible = True
        return MatchDualCertificate(0.0, m0.weight, m0, m0, bound, (0.0, 0.0), 1)
    lo, hi = 0.0, 1.0
    m_high = m0
    m_low = min_assignment(instance, hi)
    iters = 2
    while m_low.cost > C1:
        lo, m_high = hi, m_low
        hi *= 2.0
        if hi > config.lambda_max:
            raise UnconstrainableBudgetError(
                f"no perfect matching meets C1={C1:.6g} (lambda > {config.lambda_max:.3g})"
            )
        m_low = min_assignment(instance, hi)
        iters += 1
    tol = config.lambda_tol if config.lambda_tol is not None else 1e-9 * (1.0 + hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        m = min_assignment(instance, mid)
        iters += 1
        if m.cost <= C1:
            hi, m_low = mid, m
        else:
            lo, m_high = mid, m
    # breakpoint of the two lines w + lam c
    lam = (m_low.weight - m_high.weight) / (m_high.cost - m_low.cost)
    lam = min(max(lam, lo), hi)
    m_mid = min_assignment(instance, lam)
    phi = min(m.weight + lam * (m.cost - C1) for m in (m_mid, m_low, m_high))
    m_low.feasible, m_high.feasible = True, False
    return MatchDualCertificate(lam, phi, m_low, m_high, bound, (lo, hi), iters)


def _dyadic(a: Sequence[float]) -> tuple[list[int], int]:
    """Integers ``q`` and a power of two ``d`` with ``a[i] == q[i] / d`` exactly."""
    ratios = [float(x).as_integer_ratio() for x in a]
    d = max((den for _, den in ratios), default=1)
    return [num * (d // den) for num, den in ratios], d


def gasoline_start(a: Sequence[float], sum_tol: float = 1e-9, prefix_tol: float = 1e-12) -> int:
    """Start index from which every cyclic partial sum of ``a`` is <= 0.

    Returns ``ell`` (0-based) such that ``a[ell] + ... + a[ell+t-1]`` (indices
    mod k) is at most ``prefix_tol`` for ``t = 1..k-1``.  The start follows
    the first maximum of the running sums, computed exactly so rounding
    cannot move it.
    """
    k = len(a)
    if k == 0:
        raise ContractViolation("empty sequence")
    q, d = _dyadic(a)
    prefix = [0]
    for x in q:
        prefix.append(prefix[-1] + x)
    total = prefix[-1]
    if abs(Fraction(total, d)) > sum_tol:
        raise ContractViolation(f"sequence sums to {total / d:.3g}, not zero")
    peak = max(prefix[:k])
    ell = prefix.index(peak)
    # wrapped partial sums exceed the running-sum bound by at most the total
    worst = max(
        (prefix[(ell + t - 1) % k + 1] - prefix[ell] + (total if ell + t > k else 0))
        for t in range(1, k)
    ) if k > 1 else 0
    if Fraction(worst, d) > prefix_tol:
        raise ContractViolation("no valid start: positive residual sum")
    return ell


def _alternating_cycles(
    high: np.ndarray, low: np.ndarray, n: int
) -> list[list[int]]:
    """Cycles of ``high xor low`` as edge-id lists starting with a ``high`` edge.

    Edges alternate high, low, high, ... around each cycle.
    """
    left_of_low = np.empty(n, dtype=np.int64)
    left_of_low[low] = np.arange(n)
    done = np.zeros(n, dtype=bool)
    cycles = []
    for start in range(n):
        if done[start] or high[start] == low[start]:
            continue
        cycle = []
        i = start
        while not done[i]:
            done[i] = True
            j = int(high[i])
            cycle.append(i * n + j)
            i2 = int(left_of_low[j])
            cycle.append(i2 * n + j)
            i = i2
        cycles.append(cycle)
    return cycles


def rotate_cycle(
    instance: Instance, certificate: MatchDualCertificate, C1: float
) -> MatchingSolution:
    """Partial exchange from ``m_low`` toward ``m_high`` kept within budget.

    Walks the alternating cycle from the gasoline start, adding ``m_high``
    edges and dropping ``m_low`` edges, stops at the last step whose edge
    set still fits the budget, and removes the first added edge if it
    clashes with the untouched ``m_low`` neighbour.  The result covers
    ``n - 1`` left vertices, or is ``m_low`` itself when no step fits.
    """
    _check_bipartite(instance)
    if certificate.degenerate:
        raise ContractViolation("rotation needs a non-degenerate certificate")
    n = instance.n
    lam = certificate.lambda_star
    low, high = certificate.m_low, certificate.m_high
    w, c = instance.weight, instance.costs[:, 0]
    cw = w + lam * c
    cycles = _alternating_cycles(high.pairs, low.pairs, n)
    if len(cycles) > 1:
        log.warning("%d alternating cycles between bracket matchings; rotating one",
                    len(cycles))
        cycles.sort(key=lambda cyc: -(math.fsum(c[cyc[0::2]]) - math.fsum(c[cyc[1::2]])))
    cycle = cycles[0]
    k = len(cycle)
    cyc = np.asarray(cycle)
    sign = np.where(np.arange(k) % 2 == 0, 1.0, -1.0)  # + for m_high edges
    a = sign * cw[cyc]
    # centre exactly so the zero-sum precondition holds despite rounding
    a_centred = a - math.fsum(a) / k
    scale = float(np.abs(a).max()) if k else 1.0
    ell = gasoline_start(a_centred, sum_tol=1e-6 * k * scale + 1e-12,
                         prefix_tol=1e-9 * k * scale + 1e-12)

    base_cost = low.cost
    steps = [(ell + t) % k for t in range(k - 1)]  # positions processed at t=1..k-1
    delta = sign[steps] * c[cyc[steps]]
    running = base_cost + np.cumsum(delta)
    fits = np.flatnonzero(running <= C1)
    tau = int(fits[-1]) + 1 if fits.size else 0

    if tau == 0:
        out = matching_from_pairs(instance, low.pairs, C1)
        out.trace.rotation = RotationState(cycle, a, ell, 0, low.edge_ids().tolist(),
                                           cycles_found=len(cycles))
        out.trace.selected = "rotation_tau0"
        return out

    window = steps[:tau]
    removed = {cycle[p] for p in window if p % 2 == 1}
    entered = {cycle[p] for p in window if p % 2 == 0}
    x_tau = sorted((set(low.edge_ids().tolist()) - removed) | entered)
    # a window opening with an m_high edge clashes with the untouched m_low
    # edge just before it; dropping that first edge restores a matching
    seam = cycle[window[0]] if window[0] % 2 == 0 else None
    out = matching_from_pairs(instance, _clean_pairs(x_tau, seam, n), C1)
    if out.cost > C1:
        raise AssertionError("rotation produced an over-budget matching")
    out.trace.rotation = RotationState(cycle, a, ell, tau, x_tau, seam, len(cycles))
    out.trace.selected = "rotation"
    return out


def _clean_pairs(x_tau: list[int], seam: Optional[int], n: int) -> np.ndarray:
    """Matching formed by ``x_tau`` minus ``seam``; raises if it is not one."""
    keep = [e for e in x_tau if e != seam]
    out = np.full(n, EXPOSED, dtype=np.int64)
    used_right = set()
    for e in keep:
        i, j = divmod(e, n)
        if out[i] != EXPOSED or j in used_right:
            raise AssertionError("rotation window does not yield a matching")
        out[i] = j
        used_right.add(j)
    return out


def _cheap_adjacency(instance: Instance, theta: float) -> list[np.ndarray]:
    W, Cm = instance.weight_matrix(), instance.cost_matrix()
    mask = (W <= theta) & (Cm <= theta)
    return [np.flatnonzero(row) for row in mask]


def _shortest_augmenting_path(
    adj: list[np.ndarray],
    pairs: np.ndarray,
    mate_right: np.ndarray,
    max_edges: int,
    W: np.ndarray,
) -> Optional[list[tuple[int, int]]]:
    """Lightest of the fewest-edge augmenting paths, or None.

    Layered search from every exposed left vertex; non-matching steps use
    cheap edges, matching steps follow ``pairs``.  Within the first layer
    that reaches an exposed right vertex, the path with the smallest net
    weight change is chosen.  Returns the path's non-matching (left, right)
    edges from the exposed left end.
    """
    n = len(pairs)
    via = np.full(n, -1, dtype=np.int64)
    gain_left = np.full(n, np.inf)
    frontier = np.flatnonzero(pairs == EXPOSED).tolist()
    gain_left[frontier] = 0.0
    seen_left = np.zeros(n, dtype=bool)
    seen_left[frontier] = True
    seen_right = np.zeros(n, dtype=bool)
    for _ in range((max_edges + 1) // 2):
        best: dict[int, float] = {}
        for i in frontier:
            g = gain_left[i]
            for j in adj[i].tolist():
                if seen_right[j] or pairs[i] == j:
                    continue
                cand = g + W[i, j]
                if cand < best.get(j, np.inf):
                    best[j] = cand
                    via[j] = i
        if not best:
            return None
        for j in best:
            seen_right[j] = True
        ends = [j for j in best if mate_right[j] == EXPOSED]
        if ends:
            j = min(ends, key=lambda x: (best[x], x))
            path = []
            while True:
                li = int(via[j])
                path.append((li, j))
                if pairs[li] == EXPOSED:
                    return path[::-1]
                j = int(pairs[li])
        frontier = []
        for j in sorted(best):
            i2 = int(mate_right[j])
            if not seen_left[i2]:
                seen_left[i2] = True
                gain_left[i2] = best[j] - W[i2, j]
                frontier.append(i2)
        if not frontier:
            return None
    return None


def augment_cheap(
    instance: Instance, matching: MatchingSolution, cheap: Optional[CheapGraphConfig] = None
) -> MatchingSolution:
    """Complete ``matching`` to a perfect one through cheap augmenting paths.

    Each augmentation adds at most ``(max_path_edges + 1) / 2`` edges with
    weight and cost at most ``theta``.  When no short path exists, ``theta``
    grows by the escalation factor, up to ``max_escalations`` times.
    """
    _check_bipartite(instance)
    cheap = cheap or CheapGraphConfig()
    n = instance.n
    theta = cheap.resolve_theta(n)
    pairs = matching.pairs.copy()
    trace = MatchTrace(theta=theta, selected=matching.trace.selected,
                       rotation=matching.trace.rotation)
    if matching.size == n:
        out = matching_from_pairs(instance, pairs)
        out.trace = trace
        return out
    adj = _cheap_adjacency(instance, theta)
    W = instance.weight_matrix()
    mate_right = np.full(n, EXPOSED, dtype=np.int64)
    rows = np.flatnonzero(pairs != EXPOSED)
    mate_right[pairs[rows]] = rows
    escalations = 0
    while np.any(pairs == EXPOSED):
        path = _shortest_augmenting_path(adj, pairs, mate_right, cheap.max_path_edges, W)
        if path is None:
            if escalations >= cheap.max_escalations:
                raise AugmentationError(
                    f"no augmenting path with <= {cheap.max_path_edges} edges "
                    f"at theta={theta:.4g} after {escalations} escalations"
                )
            escalations += 1
            theta *= cheap.escalation
            adj = _cheap_adjacency(instance, theta)
            continue
        trace.path_lengths.append(2 * len(path) - 1)
        for i, j in path:
            pairs[i] = j
            mate_right[j] = i
    out = matching_from_pairs(instance, pairs)
    trace.escalations = escalations
    trace.theta = theta
    trace.overshoot_weight = out.weight - matching.weight
    trace.overshoot_cost = out.cost - matching.cost
    out.trace = trace
    return out


def solve_constrained_matching(
    instance: Instance, C1: float, config: Optional[MatchConfig] = None
) -> tuple[MatchingSolution, MatchDualCertificate]:
    """Budget-feasible near-optimal perfect matching plus its dual lower bound."""
    config = config or MatchConfig()
    cert = dual_search_match(instance, C1, config)
    if cert.degenerate:
        out = matching_from_pairs(instance, cert.m_low.pairs, C1)
        out.trace.selected = "unconstrained"
        return out, cert

    rotated = rotate_cycle(instance, cert, C1)
    result = None
    failure = None
    try:
        current = augment_cheap(instance, rotated, config.cheap)
        escalations = current.trace.escalations
        rounds = 0
        while current.cost > C1:
            if rounds >= config.patch_rounds:
                raise PatchError(f"still over budget after {rounds} patch rounds")
            rounds += 1
            pairs = current.pairs.copy()
            Cm = instance.cost_matrix()
            worst = int(np.argmax(Cm[np.arange(instance.n), pairs]))
            pairs[worst] = EXPOSED
            trimmed = matching_from_pairs(instance, pairs)
            trimmed.trace = current.trace
            current = augment_cheap(instance, trimmed, config.cheap)
            escalations += current.trace.escalations
        current.trace.escalations = escalations
        current.trace.patch_rounds = rounds
        current.trace.overshoot_weight = current.weight - rotated.weight
        current.trace.overshoot_cost = current.cost - rotated.cost
        current.feasible = True
        result = current
    except (AugmentationError, PatchError) as exc:
        failure = exc

    options = [result] if result is not None else []
    if config.keep_best_feasible or (result is None and config.fallback):
        alt = matching_from_pairs(instance, cert.m_low.pairs, C1)
        alt.trace.selected = "dual_bracket"
        options.append(alt)
    if not options:
        raise failure
    best = min(options, key=lambda m: (m.weight, m.pairs.tolist()))
    if result is not None and best is not result:
        best.trace.rotation = result.trace.rotation
        best.trace.escalations = result.trace.escalations
        best.trace.patch_rounds = result.trace.patch_rounds
        best.trace.notes.append(f"rotated matching weight {result.weight:.6g} not chosen")
    elif result is None:
        best.trace.rotation = rotated.trace.rotation
        best.trace.failure = type(failure).__name__
        best.trace.notes.append(f"rotation pipeline failed: {failure}")
    return best, cert


def matching_record(solution: MatchingSolution, cert: Optional[MatchDualCertificate] = None) -> dict:
    """Plain-data trace of a solve, suitable for JSON export."""
    rot = solution.trace.rotation
    rec = {
        "pairs": solution.pairs.tolist(),
        "weight": solution.weight,
        "cost": solution.cost,
        "size": solution.size,
        "feasible": solution.feasible,
        "selected": solution.trace.selected,
        "cycle_length": len(rot.cycle) if rot else 0,
        "ell": rot.ell if rot else None,
        "tau": rot.tau if rot else None,
        "escalations": solution.trace.escalations,
        "patch_rounds": solution.trace.patch_rounds,
        "failure": solution.trace.failure,
        "notes": solution.trace.notes,
    }
    if cert is not None:
        rec.update(lambda_star=cert.lambda_star, phi=cert.phi, lambda_bound=cert.lambda_bound)
    return rec
