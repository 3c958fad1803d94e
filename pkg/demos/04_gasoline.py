"""
Starting a cyclic zero-sum sequence so that no partial sum is positive.
"""

import numpy as np

from budgetopt import exhaustive_rotation_check, gasoline_start

a = [2, -1, -1, 1, -2, 1]
ell = gasoline_start(a)
rotated = a[ell:] + a[:ell]
print(ell, rotated, np.cumsum(rotated))     # 1, partial sums -1 -2 -1 -3 -2 0
print(exhaustive_rotation_check(a))

## Every zero-sum sequence has such a start
rng = np.random.default_rng(0)
for _ in range(5):
    q = rng.integers(-50, 51, 8).tolist()
    q.append(-sum(q))
    ell = gasoline_start(q)
    print(q, ell, ell in exhaustive_rotation_check(q))

## All-zero: every start works, the first is returned
print(gasoline_start([0, 0, 0]), exhaustive_rotation_check([0, 0, 0]))
