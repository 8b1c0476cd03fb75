"""Command-line entry points: generate instances, solve, run experiments, fit slopes.

Exit codes: 0 success, 2 config error, 3 I/O error, 4 solver error.  Errors
print one machine-parsable line ``error:<kind>: <message>`` to stderr.  The
master seed falls back to the ``SPBANDIT_SEED`` environment variable when not
given on the command line; flags override config-file values, and the fully
resolved configuration is echoed into the output directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .core import SPBanditError, load_instance, save_instance
from .offline import brute_force_opt, greedy_max, solve_optimal
from .sim import (
    AlgoConfig,
    ExperimentPlan,
    fits_from_csv,
    generate_sp_instance,
    permute_columns,
    run_plan,
)

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_SOLVER = 0, 2, 3, 4


class _ConfigError(Exception):
    pass


def _master_seed(value) -> int:
    if value is not None:
        return int(value)
    env = os.environ.get("SPBANDIT_SEED")
    if env is None:
        raise _ConfigError("no --seed given and SPBANDIT_SEED is not set")
    return int(env)


def cmd_generate(args) -> int:
    seed = _master_seed(args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    value_range = tuple(float(x) for x in args.value_range.split(","))
    for i in range(args.count):
        gen = generate_sp_instance(
            args.users, args.arms,
            seed=np.random.SeedSequence([seed, 1, i]),
            value_range=value_range, costs_mode=args.costs,
            budget=args.budget, horizon=args.horizon, peak_gap=args.peak_gap,
        )
        # "peaks" are positions under sp_order; "peak_arms" are column indices
        # of each user's best arm in the written file.
        diag = {"instance_id": i, "peaks": gen.peaks.tolist()}
        if args.permute:
            perm = permute_columns(gen.instance, np.random.SeedSequence([seed, 2, i]))
            inst, sp_order = perm.instance, perm.sp_order
            new_column = np.argsort(perm.permutation)
            diag["permutation"] = perm.permutation.tolist()
            diag["sp_order"] = perm.sp_order.tolist()
            diag["peak_arms"] = [int(new_column[p]) for p in gen.peaks]
        else:
            inst, sp_order = gen.instance, np.arange(args.arms)
            diag["sp_order"] = sp_order.tolist()
            diag["peak_arms"] = gen.peaks.tolist()
        stem = out_dir / f"instance_{i:04d}"
        save_instance(inst, stem.with_suffix(".json"), sp_order=sp_order)
        stem.with_suffix(".diag.json").write_text(
            json.dumps(diag, sort_keys=True) + "\n", encoding="utf-8")
    manifest = {
        "count": args.count, "users": args.users, "arms": args.arms,
        "seed": seed, "costs": args.costs, "budget": args.budget,
        "horizon": args.horizon, "value_range": list(value_range),
        "permute": bool(args.permute), "peak_gap": args.peak_gap,
    }
    (out_dir / "generation_manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {args.count} instances to {out_dir}")
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = load_instance(args.instance)
    sol = solve_optimal(inst.theta, inst.costs, inst.budget)
    report = {
        "value": sol.value,
        "assignment": sol.assignment.tolist(),
        "order": sol.order.tolist(),
        "selected": sorted(set(sol.assignment.tolist())),
    }
    if args.oracle:
        _, oracle_value = brute_force_opt(inst.theta, inst.costs, inst.budget)
        report["oracle_value"] = oracle_value
        report["oracle_agrees"] = bool(abs(oracle_value - sol.value) <= 1e-9)
    if args.greedy:
        subset, greedy_value = greedy_max(inst.theta, inst.costs, inst.budget)
        report["greedy_value"] = greedy_value
        report["greedy_subset"] = list(subset)
    if args.json:
        print(json.dumps(report, sort_keys=True))
    else:
        print(f"optimal value: {sol.value!r}")
        print(f"assignment: {report['assignment']}")
        print(f"selected arms: {report['selected']}")
        if args.oracle:
            print(f"oracle value: {report['oracle_value']!r} "
                  f"(agrees: {report['oracle_agrees']})")
        if args.greedy:
            print(f"greedy value: {report['greedy_value']!r} on {report['greedy_subset']}")
    return EXIT_OK


def _plan_from_args(args) -> ExperimentPlan:
    config = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            config = json.load(fh)

    def pick(flag, key, default=None):
        return flag if flag is not None else config.get(key, default)

    algos = pick(args.algos, "algorithms")
    if isinstance(algos, str):
        algos = [{"algo": a.strip(), "params": {}} for a in algos.split(",") if a.strip()]
    if not algos:
        raise _ConfigError("no algorithms given (use --algos or the config file)")
    horizons = pick(args.horizons, "horizons")
    if isinstance(horizons, str):
        horizons = [int(float(x)) for x in horizons.split(",")]
    if not horizons:
        raise _ConfigError("no horizons given")
    seed = args.seed if args.seed is not None else config.get("master_seed")
    return ExperimentPlan(
        users=int(pick(args.users, "users", 20)),
        arms=int(pick(args.arms, "arms", 8)),
        n_instances=int(pick(args.instances, "n_instances", 5)),
        seeds_per_instance=int(pick(args.seeds, "seeds_per_instance", 5)),
        horizons=tuple(horizons),
        algorithms=tuple(AlgoConfig(algo=a["algo"], params=dict(a.get("params", {})))
                         for a in algos),
        master_seed=_master_seed(seed),
        costs_mode=str(pick(args.costs, "costs_mode", "unit")),
        budget=pick(args.budget, "budget"),
        peak_gap=float(pick(args.peak_gap, "peak_gap", 0.0)),
    )


def cmd_run(args) -> int:
    plan = _plan_from_args(args)
    jobs = args.jobs if args.jobs is not None else (os.cpu_count() or 1)
    result = run_plan(plan, args.out, jobs=jobs, t_min=args.tmin, t_max=args.tmax)
    for fit in result["fits"]:
        if fit["slope"] is None:
            print(f"{fit['algo']} [{fit['mode']}]: no positive points to fit")
        else:
            print(f"{fit['algo']} [{fit['mode']}]: slope={fit['slope']:.4f} "
                  f"r2={fit['r2']:.4f} n={fit['n_points']}")
    print(f"results: {result['csv']}")
    print(f"slopes:  {result['slopes']}")
    return EXIT_OK


def cmd_slope(args) -> int:
    fits = fits_from_csv(args.csv, t_min=args.tmin, t_max=args.tmax)
    payload = json.dumps({"fits": fits}, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(payload, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        print(payload, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spbandit",
        description="Budgeted matching under single-peaked preferences: "
                    "generators, solvers, online-learning experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write instance files with diagnostics sidecars")
    gen.add_argument("--users", type=int, required=True)
    gen.add_argument("--arms", type=int, required=True)
    gen.add_argument("--count", type=int, default=1)
    gen.add_argument("--seed", type=int, default=None)
    gen.add_argument("--out-dir", default="instances")
    gen.add_argument("--horizon", type=int, default=100_000)
    gen.add_argument("--value-range", default="0.2,0.9")
    gen.add_argument("--costs", choices=["unit", "random"], default="unit")
    gen.add_argument("--budget", type=int, default=None)
    gen.add_argument("--peak-gap", type=float, default=0.0)
    gen.add_argument("--permute", action=argparse.BooleanOptionalAction, default=True)
    gen.set_defaults(func=cmd_generate)

    solve = sub.add_parser("solve", help="optimal matching for an instance file")
    solve.add_argument("--instance", required=True)
    solve.add_argument("--oracle", action="store_true",
                       help="cross-check against exhaustive enumeration")
    solve.add_argument("--greedy", action="store_true",
                       help="also report the greedy+max half-approximation")
    solve.add_argument("--json", action="store_true")
    solve.set_defaults(func=cmd_solve)

    run = sub.add_parser("run", help="execute an experiment plan")
    run.add_argument("--config", default=None, help="JSON plan; flags override it")
    run.add_argument("--out", default="results")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--users", type=int, default=None)
    run.add_argument("--arms", type=int, default=None)
    run.add_argument("--instances", type=int, default=None)
    run.add_argument("--seeds", type=int, default=None)
    run.add_argument("--horizons", default=None, help="comma-separated, e.g. 1e5,2e5")
    run.add_argument("--algos", default=None, help="comma-separated algorithm tags")
    run.add_argument("--costs", choices=["unit", "random"], default=None)
    run.add_argument("--budget", type=int, default=None)
    run.add_argument("--peak-gap", type=float, default=None)
    run.add_argument("--jobs", type=int, default=None)
    run.add_argument("--tmin", type=float, default=None)
    run.add_argument("--tmax", type=float, default=None)
    run.set_defaults(func=cmd_run)

    slope = sub.add_parser("slope", help="re-fit slopes from an existing results CSV")
    slope.add_argument("--csv", required=True)
    slope.add_argument("--out", default=None)
    slope.add_argument("--tmin", type=float, default=None)
    slope.add_argument("--tmax", type=float, default=None)
    slope.set_defaults(func=cmd_slope)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _ConfigError as exc:
        print(f"error:config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error:config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error:io: {exc}", file=sys.stderr)
        return EXIT_IO
    except SPBanditError as exc:
        print(f"error:solver: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
