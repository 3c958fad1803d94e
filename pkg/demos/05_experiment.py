"""
Seeded trial batches, CSV output and the summary table.
"""

import tempfile
from pathlib import Path

from budgetopt.harness import ExperimentConfig, format_table, read_csv, run_experiment, summarize

## Trees with omega = n**0.05; an oracle column appears for n <= 8
config = ExperimentConfig(problem="tree", n_grid=[8, 100, 200], omega_exponent=0.05,
                          trials=10, seed=7)
records = run_experiment(config)
print(format_table(summarize(records, "tree")))

## Matchings with C1 = n**0.75
config = ExperimentConfig(problem="matching", n_grid=[8, 50, 100], budget_rule="exponent",
                          budget_exponent=0.75, trials=10, seed=7)
records = run_experiment(config)
summary = summarize(records, "matching")
print(format_table(summary))
print(summary.to_json()[:200])

## The CSV is the durable output
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "matching.csv"
    config.out = str(path)
    records = run_experiment(config)
    print(path.read_text().splitlines()[0])
    print(read_csv(path) == records)
