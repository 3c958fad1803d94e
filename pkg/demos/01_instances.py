"""
Random instances: drawing edge values, budgets and the text file format.
"""

import numpy as np

from budgetopt import Kind, default_budgets, generate_instance, sample_edge_value
from budgetopt import deserialize_instance, serialize_instance

## Edge values follow F(x) = x**alpha on (0, 1)
print(sample_edge_value(0.25, 1))      # 0.25
print(sample_edge_value(0.25, 2))      # 0.5
print(sample_edge_value(0.0081, 4))    # 0.3

## A complete graph on 6 vertices with two cost functions
inst = generate_instance(Kind.COMPLETE, 6, 2, 1.0, seed=42)
print(inst.m, "edges")                 # 15
for e in list(inst.edges())[:3]:
    print(e)

## Same arguments, same instance
again = generate_instance(Kind.COMPLETE, 6, 2, 1.0, seed=42)
print(inst == again)

## Larger alpha pushes values toward 1
for alpha in (1.0, 2.0, 4.0):
    big = generate_instance(Kind.COMPLETE_BIPARTITE, 300, 0, alpha, seed=1)
    print(alpha, np.mean(big.weight <= 0.5), 0.5**alpha)

## Budgets that grow with n
tree = generate_instance(Kind.COMPLETE, 100, 1, 1.0, seed=0)
print(default_budgets(tree, omega=2.0).values)   # about 92.10
bip = generate_instance(Kind.COMPLETE_BIPARTITE, 100, 1, 1.0, seed=0)
print(default_budgets(bip, omega=2.0).values)    # about 63.25

## Instance files are plain text and round-trip bit for bit
text = serialize_instance(inst)
print(text.decode().splitlines()[:3])
print(deserialize_instance(text) == inst)
