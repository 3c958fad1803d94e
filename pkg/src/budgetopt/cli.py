"""Command-line entry point: ``gen``, ``solve-tree``, ``solve-matching``, ``experiment``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .assignment import MatchConfig, matching_record, solve_constrained_matching
from .errors import SolverFailure
from .harness import (
    ExperimentConfig,
    format_table,
    load_config,
    run_experiment,
    summarize,
)
from .instance import (
    Budgets,
    Kind,
    default_budgets,
    deserialize_instance,
    exponent_budgets,
    generate_instance,
    serialize_instance,
)
from .spanning_tree import TreeConfig, solve_constrained_tree, tree_record


def _instance_args(p: argparse.ArgumentParser, r_default: int = 1):
    p.add_argument("--instance", type=Path, help="read instance file instead of generating")
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--r", type=int, default=r_default)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)


def _budget_args(p: argparse.ArgumentParser):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--omega", type=float, help="auto budgets with this divergence factor")
    g.add_argument("--budget", type=float, help="explicit budget for every constraint")
    g.add_argument("--budget-exponent", type=float, help="budgets n**x")


def _load_instance(args, kind: Kind):
    if args.instance is not None:
        inst = deserialize_instance(args.instance.read_bytes())
        if inst.kind is not kind:
            raise SystemExit(f"instance kind is {inst.kind.value}, expected {kind.value}")
        return inst
    return generate_instance(kind, args.n, args.r, args.alpha, args.seed)


def _budgets(args, inst) -> Budgets:
    if args.budget is not None:
        return Budgets((args.budget,) * inst.r)
    if args.budget_exponent is not None:
        return exponent_budgets(inst.n, inst.r, args.budget_exponent)
    return default_budgets(inst, args.omega if args.omega is not None else 2.0)


def cmd_gen(args) -> int:
    inst = generate_instance(args.kind, args.n, args.r, args.alpha, args.seed)
    data = serialize_instance(inst)
    if args.out:
        Path(args.out).write_bytes(data)
    else:
        sys.stdout.write(data.decode("ascii"))
    return 0


def cmd_solve_tree(args) -> int:
    inst = _load_instance(args, Kind.COMPLETE)
    budgets = _budgets(args, inst)
    config = TreeConfig(lambda_tol=args.lambda_tol, tie_tol=args.tie_tol)
    try:
        sol, cert = solve_constrained_tree(inst, budgets, config)
    except SolverFailure as exc:
        print(json.dumps({"failure": type(exc).__name__, "message": str(exc)}))
        return 2
    rec = tree_record(sol, cert)
    rec["budgets"] = list(budgets.values)
    print(json.dumps(rec))
    return 0


def cmd_solve_matching(args) -> int:
    inst = _load_instance(args, Kind.COMPLETE_BIPARTITE)
    budgets = _budgets(args, inst)
    try:
        sol, cert = solve_constrained_matching(
            inst, budgets.values[0], MatchConfig(lambda_tol=args.lambda_tol)
        )
    except SolverFailure as exc:
        print(json.dumps({"failure": type(exc).__name__, "message": str(exc)}))
        return 2
    rec = matching_record(sol, cert)
    rec["budget"] = budgets.values[0]
    print(json.dumps(rec))
    return 0


def cmd_experiment(args) -> int:
    data = {}
    if args.config is not None:
        data = json.loads(Path(args.config).read_text())
    overrides = {
        "problem": args.problem,
        "n_grid": args.n,
        "alpha": args.alpha,
        "r": args.r,
        "omega": args.omega,
        "trials": args.trials,
        "seed": args.seed,
        "out": args.out,
        "oracle": args.oracle,
        "lambda_tol": args.lambda_tol,
        "tie_tol": args.tie_tol,
        "jobs": args.jobs,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    if args.budget is not None:
        data.update(budget_rule="explicit", budget=args.budget)
    if args.budget_exponent is not None:
        data.update(budget_rule="exponent", budget_exponent=args.budget_exponent)
    if data.get("problem") == "matching" and "budget_rule" not in data:
        data.update(budget_rule="exponent", budget_exponent=0.75)
    config = load_config(data)
    records = run_experiment(config)
    if not records:
        print("no trials run")
        return 0
    summary = summarize(records, config.problem)
    print(format_table(summary))
    if config.out:
        Path(config.out).with_suffix(".summary.json").write_text(summary.to_json() + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="budgetopt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a random instance file")
    p.add_argument("--kind", choices=[k.value for k in Kind], default=Kind.COMPLETE.value)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", type=int, default=1)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output path (default stdout)")
    p.set_defaults(func=cmd_gen)

    for name, func, r_default in (
        ("solve-tree", cmd_solve_tree, 1),
        ("solve-matching", cmd_solve_matching, 1),
    ):
        p = sub.add_parser(name, help=f"{name.split('-')[1]} solver; prints a JSON trace")
        _instance_args(p, r_default)
        _budget_args(p)
        p.add_argument("--lambda-tol", type=float)
        p.add_argument("--tie-tol", type=float, default=1e-7)
        p.set_defaults(func=func)

    p = sub.add_parser("experiment", help="run a seeded trial batch")
    p.add_argument("config", nargs="?", help="JSON config file")
    p.add_argument("--problem", choices=["tree", "matching"])
    p.add_argument("--n", type=int, action="append", help="grid value (repeatable)")
    p.add_argument("--alpha", type=float)
    p.add_argument("--r", type=int)
    _budget_args(p)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--oracle", choices=["auto", "force", "skip"])
    p.add_argument("--lambda-tol", type=float)
    p.add_argument("--tie-tol", type=float)
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
