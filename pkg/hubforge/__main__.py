"""This module provides a CLI for hubforge."""

import argparse
import logging
import os
import sys
from pathlib import Path

from .branch_and_cut import BranchingRule, NodeOrder, SolveParams
from .config import get_alpha_sweep
from .create_config import create_default_config
from .formulations import FormulationKind, build
from .instance import generate_random, serialize
from .linear_model import export_mps
from .logging_config import resolve_log_level, setup_logging
from .oracle import CrossCheckError, enumerate_optimum, lp_cross_check
from .report import (
    INSTANCE_FORMATS, bound_rows, bounds_csv, compare_csv, compare_instances, exit_code,
    load_instance, records_csv, run_solve)

logger = logging.getLogger(__name__)

FORMULATION_CHOICES = ["sk", "hlpma", "cfp", "fzp", "cfs", "fzs"]


def _add_instance_arguments(parser, multiple=False):
    """Instance file and the overrides shared by every solving command."""
    if multiple:
        parser.add_argument("--instance", required=True, nargs="+",
                            help="Instance files.")
    else:
        parser.add_argument("--instance", required=True, help="Instance file.")
    parser.add_argument("--format", choices=INSTANCE_FORMATS, default="hli",
                        help="Instance file format (default: hli).")
    parser.add_argument("--n", type=int,
                        help="Number of nodes to keep from a cab or ap dataset.")
    parser.add_argument("--alpha", type=float, help="Interhub discount factor.")
    parser.add_argument("--gamma", type=float, help="Access leg factor.")
    parser.add_argument("--theta", type=float, help="Distribution leg factor.")
    setup = parser.add_mutually_exclusive_group()
    setup.add_argument("--setup-file", help="File with one setup cost per node.")
    setup.add_argument("--setup-mean", type=float,
                       help="Mean of surrogate setup costs for cab or ap datasets.")
    parser.add_argument("--setup-factor", type=float,
                        help="Multiply every setup cost by this factor.")


def _add_search_arguments(parser):
    parser.add_argument("--time-limit", type=float, help="Wall-clock limit in seconds.")
    parser.add_argument("--gap", type=float, help="Relative gap tolerance.")
    parser.add_argument("--node-limit", type=int, help="Maximum number of nodes.")
    parser.add_argument("--branching", choices=[r.value for r in BranchingRule],
                        default=BranchingRule.MOST_FRACTIONAL.value,
                        help="Branching rule (default: most-fractional).")
    parser.add_argument("--node-order", choices=[o.value for o in NodeOrder],
                        default=NodeOrder.BEST_BOUND.value,
                        help="Node selection (default: best-bound).")


class UsageErrorParser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with code 1.

    Exit code 2 is reserved for a search stopped by a limit.
    """

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def setup_argument_parser():
    """Set up and return the argument parser with all subcommands."""
    parser = UsageErrorParser(
        description="hubforge: exact solvers for multiple-allocation hub location.")
    subparsers = parser.add_subparsers(dest="command")

    # init command
    init_parser = subparsers.add_parser("init", help="Create default config file.")
    init_parser.add_argument("-f", "--force", action="store_true",
                             help="Force overwrite of existing config file.")

    # solve command
    solve_parser = subparsers.add_parser("solve", help="Solve an instance to optimality.")
    _add_instance_arguments(solve_parser)
    solve_parser.add_argument("--formulation", choices=FORMULATION_CHOICES, default="fzs",
                              help="Formulation to solve (default: fzs).")
    solve_parser.add_argument("--seed-cuts", action="store_true",
                              help="Seed supermodular masters with eta_r >= v_r1.")
    solve_parser.add_argument("--out", help="Write the run CSV here and the routing next "
                                            "to it; both are printed without it.")
    _add_search_arguments(solve_parser)

    # bound command
    bound_parser = subparsers.add_parser("bound", help="Report root relaxation bounds.")
    _add_instance_arguments(bound_parser)
    bound_parser.add_argument("--formulation", choices=FORMULATION_CHOICES, action="append",
                              help="Formulation to bound; repeatable (default: all).")
    bound_parser.add_argument("--out", help="Output CSV path.")

    # compare command
    compare_parser = subparsers.add_parser(
        "compare", help="Cross-check the six relaxations on several instances.")
    _add_instance_arguments(compare_parser, multiple=True)
    compare_parser.add_argument("--sweep", action="store_true",
                                help="Repeat every instance over the configured alpha sweep.")
    compare_parser.add_argument("--tol", type=float, default=1e-6,
                                help="Relative tolerance of the relation checks.")
    compare_parser.add_argument("--max-nodes", type=int,
                                help="Override the cross-check size guard.")
    compare_parser.add_argument("--jobs", type=int, default=1,
                                help="Worker processes (default: 1).")
    compare_parser.add_argument("--out", help="Output CSV path.")

    # oracle command
    oracle_parser = subparsers.add_parser("oracle", help="Enumerate every hub set.")
    _add_instance_arguments(oracle_parser)
    oracle_parser.add_argument("--min-hubs", type=int, default=2,
                               help="Smallest hub set size (default: 2).")
    oracle_parser.add_argument("--max-nodes", type=int, help="Override the size guard.")
    oracle_parser.add_argument("--cross-check", action="store_true",
                               help="Also check the relaxation bound relations.")
    oracle_parser.add_argument("--strict", action="store_true",
                               help="Fail when a bound relation does not hold.")
    oracle_parser.add_argument("--out", help="Output CSV path.")

    # export command
    export_parser = subparsers.add_parser("export", help="Export a formulation as MPS.")
    _add_instance_arguments(export_parser)
    export_parser.add_argument("--formulation", choices=FORMULATION_CHOICES, default="fzp",
                               help="Formulation to export (default: fzp).")
    export_parser.add_argument("--out", help="Output MPS path.")

    # generate command
    generate_parser = subparsers.add_parser("generate", help="Write a random instance.")
    generate_parser.add_argument("--n", type=int, required=True, help="Number of nodes.")
    generate_parser.add_argument("--density", type=float, default=1.0,
                                 help="Share of ordered pairs with demand (default: 1).")
    generate_parser.add_argument("--seed", type=int, default=0, help="Random seed.")
    generate_parser.add_argument("--alpha", type=float, default=0.5,
                                 help="Interhub discount factor (default: 0.5).")
    generate_parser.add_argument("--out", help="Output HLI path.")
    return parser


def _load(args, path=None):
    return load_instance(path or args.instance, args.format, n=args.n, alpha=args.alpha,
                         gamma=args.gamma, theta=args.theta, setup_file=args.setup_file,
                         setup_factor=args.setup_factor, setup_mean=args.setup_mean)


def _emit(text, out=None):
    """Write ``text`` to ``out`` or standard output."""
    if out:
        Path(out).write_text(text, encoding='utf-8')
        logger.info("Wrote %s", out)
        # Keep as print for CLI user feedback
        print(f"Wrote {out}")
    else:
        print(text, end="" if text.endswith("\n") else "\n")


def handle_init_command(args):
    """Handle init command."""
    create_default_config(force=args.force)
    return 0


def handle_solve_command(args):
    """Handle solve command."""
    instance = _load(args)
    kind = FormulationKind.parse(args.formulation)
    params = SolveParams.from_config(time_limit=args.time_limit, gap_tol=args.gap,
                                     node_limit=args.node_limit,
                                     branching=BranchingRule(args.branching),
                                     node_order=NodeOrder(args.node_order))
    run = run_solve(instance, kind, params, seed_cuts=args.seed_cuts)
    _emit(records_csv([run.record]), args.out)
    routing = run.routing_csv()
    if routing is not None:
        _emit(routing, str(Path(args.out).with_suffix(".routing.csv")) if args.out else None)
    print(run.record.text_block())
    if run.hub_check is not None:
        print(run.hub_check)
    return exit_code(run.result.status)


def handle_bound_command(args):
    """Handle bound command."""
    instance = _load(args)
    kinds = [FormulationKind.parse(name) for name in (args.formulation or FORMULATION_CHOICES)]
    _emit(bounds_csv(bound_rows(instance, kinds)), args.out)
    return 0


def handle_compare_command(args):
    """Handle compare command."""
    instances = []
    for path in args.instance:
        instance = _load(args, path)
        if args.sweep:
            instances.extend(instance.replace(alpha=alpha, name=f"{instance.name}_a{alpha}")
                             for alpha in get_alpha_sweep())
        else:
            instances.append(instance)
    rows = compare_instances(instances, tol=args.tol, max_nodes=args.max_nodes,
                             jobs=max(args.jobs, 1))
    _emit(compare_csv(rows), args.out)
    return 0


def handle_oracle_command(args):
    """Handle oracle command."""
    instance = _load(args)
    result = enumerate_optimum(instance, min_hubs=args.min_hubs, max_nodes=args.max_nodes)
    print(result.summary())
    if args.out:
        _emit(result.to_csv(instance), args.out)
    if args.cross_check:
        try:
            bounds = lp_cross_check(instance, strict=args.strict, max_nodes=args.max_nodes)
        except CrossCheckError as exc:
            for failure in exc.failures:
                print(f"  {failure}")
            return 1
        for relation in bounds.relations:
            print(f"  {relation}")
    return 0


def handle_export_command(args):
    """Handle export command."""
    instance = _load(args)
    built = build(FormulationKind.parse(args.formulation), instance)
    _emit(export_mps(built.model), args.out)
    return 0


def handle_generate_command(args):
    """Handle generate command."""
    instance = generate_random(args.n, density=args.density, seed=args.seed, alpha=args.alpha)
    _emit(serialize(instance), args.out)
    return 0


def main(argv=None):
    """Main function for the CLI."""
    # Set up logging
    setup_logging(resolve_log_level(os.getenv("HUBFORGE_LOG_LEVEL")))

    parser = setup_argument_parser()
    args = parser.parse_args(argv)

    # Command dispatch mapping
    command_handlers = {
        "init": handle_init_command,
        "solve": handle_solve_command,
        "bound": handle_bound_command,
        "compare": handle_compare_command,
        "oracle": handle_oracle_command,
        "export": handle_export_command,
        "generate": handle_generate_command,
    }

    if args.command not in command_handlers:
        # display help if no command is provided
        parser.print_help()
        return

    try:
        code = command_handlers[args.command](args)
    except (ValueError, RuntimeError, OSError) as exc:
        logger.error("%s failed: %s", args.command, exc)
        print(f"Error: {exc}", file=sys.stderr)
        sys.exit(1)
    if code:
        sys.exit(code)


if __name__ == "__main__":
    main()
