"""Seeded experiment batches over instance sizes, with CSV and summary output.

Each ``(n, trial)`` cell gets its own child seed, so any single trial can be
rerun in isolation and the record list does not depend on execution order.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .assignment import MatchConfig, solve_constrained_matching
from .errors import SolverFailure
from .instance import Budgets, Kind, default_budgets, exponent_budgets, generate_instance
from .oracle import MAX_N, brute_force_matching, brute_force_tree
from .spanning_tree import TreeConfig, solve_constrained_tree

__all__ = [
    "ExperimentConfig",
    "TrialRecord",
    "CellSummary",
    "Summary",
    "child_seed",
    "make_budgets",
    "run_trial",
    "run_experiment",
    "summarize",
    "write_csv",
    "csv_text",
    "read_csv",
    "format_table",
]


@dataclass
class ExperimentConfig:
    problem: str = "tree"  # "tree" | "matching"
    n_grid: list[int] = field(default_factory=lambda: [50])
    alpha: float = 1.0
    r: int = 1
    budget_rule: str = "auto"  # "auto" | "explicit" | "exponent"
    omega: Optional[float] = None
    omega_exponent: Optional[float] = None  # auto rule with omega = n**x
    budget: Optional[float] = None
    budget_exponent: Optional[float] = None
    budget_scale: float = 1.0
    trials: int = 10
    seed: int = 0
    lambda_tol: Optional[float] = None
    tie_tol: float = 1e-7
    oracle: str = "auto"  # "auto" | "force" | "skip"
    out: Optional[str] = None
    jobs: int = 1

    def __post_init__(self):
        if self.problem not in ("tree", "matching"):
            raise ValueError(f"unknown problem {self.problem!r}")
        if self.problem == "matching" and self.r != 1:
            raise ValueError("matching experiments need r = 1")
        if self.problem == "tree" and self.r < 1:
            raise ValueError("tree experiments need r >= 1")
        if self.budget_rule not in ("auto", "explicit", "exponent"):
            raise ValueError(f"unknown budget rule {self.budget_rule!r}")
        if self.budget_rule == "explicit" and self.budget is None:
            raise ValueError("explicit budget rule needs a budget value")
        if self.budget_rule == "exponent" and self.budget_exponent is None:
            raise ValueError("exponent budget rule needs budget_exponent")
        if self.oracle not in ("auto", "force", "skip"):
            raise ValueError(f"unknown oracle mode {self.oracle!r}")
        if self.trials < 0:
            raise ValueError("trials must be >= 0")
        if any(n < 2 for n in self.n_grid):
            raise ValueError("every n must be >= 2")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @property
    def kind(self) -> Kind:
        return Kind.COMPLETE if self.problem == "tree" else Kind.COMPLETE_BIPARTITE


@dataclass
class TrialRecord:
    n: int
    alpha: float
    r: int
    budgets: tuple[float, ...]
    seed: int
    w_alg: float = math.nan
    cost_vector_alg: tuple[float, ...] = ()
    feasible: bool = False
    phi_star: float = math.nan
    lambda_star: tuple[float, ...] = ()
    w_oracle: Optional[float] = None
    ratio_dual: float = math.nan
    ratio_oracle: Optional[float] = None
    family_size: int = 0
    escalations: int = 0
    patch_rounds: int = 0
    failure: str = ""
    wall_time_ms: float = 0.0


COLUMNS = [f.name for f in dataclasses.fields(TrialRecord)]
TIMING_COLUMNS = ("wall_time_ms",)


def child_seed(master_seed: int, n: int, trial: int) -> int:
    digest = hashlib.blake2b(f"{master_seed}|{n}|{trial}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") & ((1 << 63) - 1)


def make_budgets(config: ExperimentConfig, instance) -> Budgets:
    n = instance.n
    if config.budget_rule == "explicit":
        return Budgets((config.budget,) * config.r)
    if config.budget_rule == "exponent":
        return exponent_budgets(n, config.r, config.budget_exponent, config.budget_scale)
    if config.omega_exponent is not None:
        omega = n**config.omega_exponent
    else:
        omega = config.omega if config.omega is not None else 2.0
    return default_budgets(instance, omega)


def run_trial(config: ExperimentConfig, n: int, trial: int) -> TrialRecord:
    seed = child_seed(config.seed, n, trial)
    instance = generate_instance(config.kind, n, config.r, config.alpha, seed)
    budgets = make_budgets(config, instance)
    rec = TrialRecord(n=n, alpha=config.alpha, r=config.r, budgets=budgets.values, seed=seed)
    start = time.perf_counter()
    try:
        if config.problem == "tree":
            sol, cert = solve_constrained_tree(
                instance, budgets, TreeConfig(lambda_tol=config.lambda_tol, tie_tol=config.tie_tol)
            )
            rec.cost_vector_alg = sol.costs
            rec.lambda_star = tuple(float(x) for x in cert.lambda_star)
            rec.family_size = cert.family_size
        else:
            sol, cert = solve_constrained_matching(
                instance, budgets.values[0], MatchConfig(lambda_tol=config.lambda_tol)
            )
            rec.cost_vector_alg = (sol.cost,)
            rec.lambda_star = (float(cert.lambda_star),)
            rec.family_size = 1 if cert.degenerate else 2
            rec.patch_rounds = sol.trace.patch_rounds
        rec.w_alg = sol.weight
        rec.feasible = bool(all(c <= C for c, C in zip(rec.cost_vector_alg, budgets.values)))
        rec.phi_star = cert.phi
        rec.ratio_dual = sol.weight / cert.phi
        rec.escalations = sol.trace.escalations
        rec.failure = sol.trace.failure or ""
    except SolverFailure as exc:
        rec.failure = type(exc).__name__
    rec.wall_time_ms = (time.perf_counter() - start) * 1000.0

    if config.oracle == "force" or (config.oracle == "auto" and n <= MAX_N):
        if config.problem == "tree":
            res = brute_force_tree(instance, budgets)
        else:
            res = brute_force_matching(instance, budgets.values[0])
        rec.w_oracle = res.optimum
        if res.feasible and not math.isnan(rec.w_alg):
            rec.ratio_oracle = rec.w_alg / res.optimum
    return rec


def _run_task(args) -> TrialRecord:
    return run_trial(*args)


def run_experiment(config: ExperimentConfig) -> list[TrialRecord]:
    """One record per ``(n, trial)``, ordered by ``n`` then trial index.

    Solver failures become records with ``failure`` set; they are never
    dropped.  When ``config.out`` is set the CSV is written there as well.
    """
    tasks = [(config, n, t) for n in config.n_grid for t in range(config.trials)]
    if config.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            records = list(pool.map(_run_task, tasks))
    else:
        records = [_run_task(t) for t in tasks]
    if config.out:
        write_csv(records, config.out)
    return records


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, tuple):
        return ";".join(_fmt(v) for v in value)
    return str(value)


def csv_text(records: Iterable[TrialRecord], include_timing: bool = True) -> str:
    cols = [c for c in COLUMNS if include_timing or c not in TIMING_COLUMNS]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for rec in records:
        writer.writerow([_fmt(getattr(rec, c)) for c in cols])
    return buf.getvalue()


def write_csv(records: Iterable[TrialRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(csv_text(records))


def _parse(name: str, raw: str):
    ftype = {f.name: f.type for f in dataclasses.fields(TrialRecord)}[name]
    if raw == "":
        return () if "tuple" in ftype else (None if "Optional" in ftype else raw)
    if "tuple" in ftype:
        return tuple(float(x) for x in raw.split(";"))
    if ftype == "bool":
        return raw == "true"
    if ftype == "int":
        return int(raw)
    if ftype == "str":
        return raw
    return float(raw)


def read_csv(path) -> list[TrialRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [TrialRecord(**{k: _parse(k, v) for k, v in row.items()}) for row in rows]


@dataclass
class CellSummary:
    n: int
    trials: int
    failures: int
    failure_rate: float
    feasibility_rate: float
    ratio_dual_median: float
    ratio_dual_p90: float
    ratio_oracle_median: Optional[float]
    lambda_norm_median: Optional[float]
    escalation_rate: float


@dataclass
class Summary:
    cells: list[CellSummary]
    trend: str

    def to_dict(self) -> dict:
        return {"cells": [dataclasses.asdict(c) for c in self.cells], "trend": self.trend}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=True)


def _median(values: Sequence[float]) -> float:
    return float(np.median(values)) if len(values) else math.nan


def _trend(medians: Sequence[float]) -> str:
    if len(medians) < 2:
        return "n/a"
    steps = np.diff(medians)
    if np.all(steps < 0):
        return "decreasing"
    if np.all(steps <= 0):
        return "non-increasing"
    if np.all(steps > 0):
        return "increasing"
    return "mixed"


def summarize(records: Sequence[TrialRecord], problem: Optional[str] = None) -> Summary:
    """Per-``n`` statistics and the trend of the median dual ratio.

    The normalised dual optimum ``lambda* C1^2 / n^(2 - 1/alpha)`` is
    reported for single-budget records (matchings); pass ``problem="tree"``
    to suppress it.
    """
    if not records:
        raise ValueError("nothing to summarise")
    cells = []
    for n in sorted({rec.n for rec in records}):
        rows = [rec for rec in records if rec.n == n]
        ok = [rec for rec in rows if not math.isnan(rec.ratio_dual)]
        failures = sum(1 for rec in rows if rec.failure)
        ratios = [rec.ratio_dual for rec in ok]
        oracle = [rec.ratio_oracle for rec in ok if rec.ratio_oracle is not None]
        lam_norm = None
        if problem != "tree" and all(rec.r == 1 for rec in ok) and ok:
            lam_norm = _median([
                rec.lambda_star[0] * rec.budgets[0] ** 2 / rec.n ** (2 - 1 / rec.alpha)
                for rec in ok
            ])
        cells.append(CellSummary(
            n=n,
            trials=len(rows),
            failures=failures,
            failure_rate=failures / len(rows),
            feasibility_rate=sum(1 for rec in rows if rec.feasible) / len(rows),
            ratio_dual_median=_median(ratios),
            ratio_dual_p90=float(np.percentile(ratios, 90)) if ratios else math.nan,
            ratio_oracle_median=_median(oracle) if oracle else None,
            lambda_norm_median=lam_norm,
            escalation_rate=sum(1 for rec in ok if rec.escalations) / len(rows),
        ))
    return Summary(cells, _trend([c.ratio_dual_median for c in cells]))


def format_table(summary: Summary) -> str:
    head = (
        f"{'n':>6} {'trials':>6} {'fail':>5} {'feas':>6} {'ratio med':>10} "
        f"{'ratio p90':>10} {'oracle med':>10} {'lam norm':>10} {'escal':>6}"
    )
    lines = [head, "-" * len(head)]

    def f(x, spec=".4f"):
        return "-" if x is None or (isinstance(x, float) and math.isnan(x)) else format(x, spec)

    for c in summary.cells:
        lines.append(
            f"{c.n:>6} {c.trials:>6} {c.failures:>5} {f(c.feasibility_rate, '.3f'):>6} "
            f"{f(c.ratio_dual_median):>10} {f(c.ratio_dual_p90):>10} "
            f"{f(c.ratio_oracle_median):>10} {f(c.lambda_norm_median):>10} "
            f"{f(c.escalation_rate, '.3f'):>6}"
        )
    lines.append(f"trend of median ratio_dual: {summary.trend}")
    return "\n".join(lines)


def load_config(source: Union[str, dict]) -> ExperimentConfig:
    if isinstance(source, dict):
        return ExperimentConfig.from_dict(source)
    with open(source) as fh:
        return ExperimentConfig.from_dict(json.load(fh))
