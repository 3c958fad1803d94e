"""
Budgeted perfect matchings: bisection, rotating along the alternating
cycle, then finishing with cheap augmenting paths.
"""

import numpy as np

from budgetopt import Instance, Kind, brute_force_matching, generate_instance
from budgetopt import dual_search_match, min_assignment, phi_match, solve_constrained_matching
from budgetopt.assignment import augment_cheap, rotate_cycle

## Two left and two right vertices
w = [[0.1, 0.4], [0.5, 0.2]]
c = [[0.9, 0.1], [0.1, 0.8]]
tiny = Instance.from_arrays(Kind.COMPLETE_BIPARTITE, 2, w, c)
print(min_assignment(tiny, 0.0).pairs)      # identity, weight 0.3
print(min_assignment(tiny, 1.0).pairs)      # swap
print(phi_match(tiny, 0.5, 0.4))            # 0.78

cert = dual_search_match(tiny, 0.5)
print(cert.lambda_star, cert.m_low.pairs, cert.m_high.pairs)
sol, _ = solve_constrained_matching(tiny, 0.5)
print(sol.pairs, sol.weight, brute_force_matching(tiny, 0.5).optimum)

## Step by step on n = 150 with C1 = n**0.75
n = 150
C1 = n**0.75
inst = generate_instance(Kind.COMPLETE_BIPARTITE, n, 1, 1.0, seed=5)
cert = dual_search_match(inst, C1)
print("lambda*", cert.lambda_star, "bracket costs", cert.m_low.cost, cert.m_high.cost)

rotated = rotate_cycle(inst, cert, C1)
rot = rotated.trace.rotation
print("cycle length", len(rot.cycle), "start", rot.ell, "tau", rot.tau, "size", rotated.size)

full = augment_cheap(inst, rotated)
print("path edges", full.trace.path_lengths, "extra weight", full.trace.overshoot_weight)
# the cheap edges can push the cost just past C1; the solver then drops
# the costliest edge and augments again
print("cost", full.cost, "<=", C1, full.cost <= C1)

## The whole pipeline, against the dual bound
sol, cert = solve_constrained_matching(inst, C1)
print("weight / dual bound", sol.weight / cert.phi, "patch rounds", sol.trace.patch_rounds)
print("lambda* C1^2 / n", cert.lambda_star * C1**2 / n)
