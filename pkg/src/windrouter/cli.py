"""Command-line front end.

Exit codes: 0 success, 1 usage or IO error, 2 infeasible instance,
3 time limit hit (the incumbent, if any, is still written).

The default output directory comes from WINDROUTER_OUTPUT_DIR and can be
overridden per file with the usual path arguments.  All subcommands are
reproducible: the same flags, files, and seed produce byte-identical
artifacts, whatever --threads says.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import experiments, lp_export
from .errors import InfeasibleError, ParseError, WindrouterError
from .instances import (
    CostField,
    QuotaSpec,
    generate_synthetic_site,
    load_instance,
    save_instance,
    validate,
)
from .solution import load_solution_dict, save_solution, solution_from_dict, verify_solution
from .solver import SolverConfig, brute_force_oracle, parse_split_spec, solve_hop, solve_with_strategy
from .wake import WakeParams, build_interference_matrix, interference_to_csv

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_TIME_LIMIT = 3


def _out_path(args_path: str | None, default_name: str) -> str:
    if args_path:
        return args_path
    base = os.environ.get("WINDROUTER_OUTPUT_DIR", ".")
    os.makedirs(base, exist_ok=True)
    return os.path.join(base, default_name)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="windrouter",
        description="Integrated wind farm layout and cable routing optimization.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic instance")
    p.add_argument("--n", type=int, required=True, help="number of candidate positions")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--region", type=float, nargs=4, default=(0.0, 0.0, 7000.0, 7000.0),
                   metavar=("X0", "Y0", "X1", "Y1"))
    p.add_argument("--quota-turbines", type=int, default=None,
                   help="quota as an equivalent turbine count (default: n/10)")
    p.add_argument("--quota-mw", type=float, default=None)
    p.add_argument("--cost-base", type=float, default=900.0)
    p.add_argument("--cost-amplitude", type=float, default=1100.0)
    p.add_argument("--cost-angle", type=float, default=30.0)
    p.add_argument("--name", default=None)
    p.add_argument("--no-interference", action="store_true",
                   help="do not embed the interference matrix")
    p.add_argument("--out", default=None)

    p = sub.add_parser("interference", help="compute and export the interference matrix")
    p.add_argument("--instance", required=True)
    p.add_argument("--decay-k", type=float, default=0.05)
    p.add_argument("--thrust-coefficient", type=float, default=None)
    p.add_argument("--out-csv", default=None)

    for name, help_text in (("solve", "solve the free-tree problem"),
                            ("solve-hop", "solve the radial hop-limited problem")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--instance", required=True)
        p.add_argument("--split", default="none",
                       help="none | ilb | heur:ALPHA | mini:TAU (ALPHA commonly 0.1, 0.5, 0.8)")
        p.add_argument("--time-limit", type=float, default=None, metavar="SECONDS")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--out", default=None)
        if name == "solve-hop":
            p.add_argument("--hop", type=int, default=6,
                           help="turbines per string (default 6)")

    p = sub.add_parser("oracle", help="subset-enumeration optimum for small instances")
    p.add_argument("--instance", required=True)
    p.add_argument("--hop", type=int, default=None)
    p.add_argument("--exact-budget", type=int, default=12)
    p.add_argument("--out", default=None)

    p = sub.add_parser("export-lp", help="write an LP-format model file")
    p.add_argument("--instance", required=True)
    p.add_argument("--model", required=True, choices=lp_export.MODELS)
    p.add_argument("--hop", type=int, default=6)
    p.add_argument("--ilb-cut", action="store_true",
                   help="add the interference floor row")
    p.add_argument("--out", default=None)

    p = sub.add_parser("compare-seq", help="sequential vs integrated batch report")
    p.add_argument("instances", nargs="+", help="instance JSON files")
    p.add_argument("--hop", type=int, default=6)
    p.add_argument("--time-limit", type=float, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out-dir", default=None)

    p = sub.add_parser("render", help="render a solution as SVG")
    p.add_argument("--instance", required=True)
    p.add_argument("--solution", required=True)
    p.add_argument("--spacing-circles", action="store_true")
    p.add_argument("--out", default=None)

    p = sub.add_parser("verify", help="re-check a solution against its instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--solution", required=True)
    p.add_argument("--hop", type=int, default=None)

    return parser


def _cmd_gen(args) -> int:
    if args.quota_turbines is not None and args.quota_mw is not None:
        print("gen: pass at most one of --quota-turbines / --quota-mw", file=sys.stderr)
        return EXIT_USAGE
    quota = None
    if args.quota_turbines is not None:
        quota = QuotaSpec(equivalent_turbines=args.quota_turbines)
    elif args.quota_mw is not None:
        quota = QuotaSpec(mw=args.quota_mw)
    instance = generate_synthetic_site(
        args.n,
        region=tuple(args.region),
        cost_field=CostField(args.cost_base, args.cost_amplitude, args.cost_angle),
        seed=args.seed,
        quota=quota,
        name=args.name,
        embed_interference=not args.no_interference,
    )
    out = _out_path(args.out, f"{instance.name}.json")
    save_instance(instance, out)
    print(out)
    return EXIT_OK


def _cmd_interference(args) -> int:
    instance = load_instance(args.instance)
    params = WakeParams(decay_k=args.decay_k, thrust_coefficient=args.thrust_coefficient)
    matrix = build_interference_matrix(instance, params)
    out = _out_path(args.out_csv, "interference.csv")
    interference_to_csv(matrix, out)
    print(out)
    return EXIT_OK


def _load_checked(path: str) -> object:
    instance = load_instance(path)
    problems = validate(instance)
    if problems:
        raise InfeasibleError("; ".join(problems))
    return instance


def _cmd_solve(args, hop: int | None) -> int:
    instance = _load_checked(args.instance)
    config = parse_split_spec(args.split)
    config = SolverConfig(
        time_limit_s=args.time_limit,
        split=config.split,
        alpha=config.alpha,
        tau_s=config.tau_s,
        hop=hop,
        threads=args.threads,
    )
    if config.split != "none":
        result, outcome = solve_with_strategy(instance, config)
        if outcome is not None and outcome.certificate:
            print(f"split {outcome.i_split_mw:.6g} MW, certificate {outcome.certificate}", file=sys.stderr)
    elif hop is None:
        from .solver import solve as solve_flat

        result = solve_flat(instance, config)
    else:
        result = solve_hop(instance, hop, config)
    out = _out_path(args.out, "solution.json")
    if result.solution is None:
        print("time limit hit before any feasible solution was found", file=sys.stderr)
        return EXIT_TIME_LIMIT
    save_solution(result.solution, result.proven_optimal, result.lower_bound_keur, out)
    print(out)
    if not result.proven_optimal:
        print("time limit: wrote the incumbent, optimality unproven", file=sys.stderr)
        return EXIT_TIME_LIMIT
    return EXIT_OK


def _cmd_oracle(args) -> int:
    instance = _load_checked(args.instance)
    solution = brute_force_oracle(instance, hop=args.hop, exact_budget=args.exact_budget)
    out = _out_path(args.out, "oracle.json")
    save_solution(solution, True, solution.total_cost_keur, out)
    print(out)
    return EXIT_OK


def _cmd_export_lp(args) -> int:
    instance = _load_checked(args.instance)
    spec = lp_export.ExportSpec(
        model=args.model,
        hop=args.hop if args.model == "flow-capa" else None,
        include_ilb_cut=args.ilb_cut,
    )
    out = _out_path(args.out, f"{os.path.splitext(os.path.basename(args.instance))[0]}.{args.model}.lp")
    lp_export.export_lp(instance, spec, out)
    lp_export.check_lp_roundtrip(out)
    print(out)
    return EXIT_OK


def _cmd_compare_seq(args) -> int:
    pairs = []
    for path in args.instances:
        instance = load_instance(path)
        pairs.append((os.path.splitext(os.path.basename(path))[0], instance))
    config = SolverConfig(time_limit_s=args.time_limit, threads=args.threads)
    out_dir = args.out_dir or os.environ.get("WINDROUTER_OUTPUT_DIR", ".")
    _, summary = experiments.batch_report(pairs, args.hop, out_dir, config)
    print(os.path.join(out_dir, "comparison.csv"))
    for key, value in summary.items():
        print(f"{key}: {value}", file=sys.stderr)
    return EXIT_OK


def _cmd_render(args) -> int:
    instance = load_instance(args.instance)
    solution, _, _ = solution_from_dict(load_solution_dict(args.solution))
    out = _out_path(args.out, "layout.svg")
    experiments.render_solution_svg(instance, solution, out, show_spacing_circles=args.spacing_circles)
    print(out)
    return EXIT_OK


def _cmd_verify(args) -> int:
    instance = load_instance(args.instance)
    solution, _, _ = solution_from_dict(load_solution_dict(args.solution))
    problems = verify_solution(instance, solution, hop=args.hop)
    if problems:
        for p in problems:
            print(p, file=sys.stderr)
        return EXIT_INFEASIBLE
    print("solution verified")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        if args.command == "gen":
            return _cmd_gen(args)
        if args.command == "interference":
            return _cmd_interference(args)
        if args.command == "solve":
            return _cmd_solve(args, hop=None)
        if args.command == "solve-hop":
            return _cmd_solve(args, hop=args.hop)
        if args.command == "oracle":
            return _cmd_oracle(args)
        if args.command == "export-lp":
            return _cmd_export_lp(args)
        if args.command == "compare-seq":
            return _cmd_compare_seq(args)
        if args.command == "render":
            return _cmd_render(args)
        if args.command == "verify":
            return _cmd_verify(args)
        parser.error(f"unknown command {args.command!r}")
        return EXIT_USAGE
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ParseError, WindrouterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
