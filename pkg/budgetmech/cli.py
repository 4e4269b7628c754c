"""
Command-line interface for budgetmech.

Examples:
  budgetmech solve-bavwm --in instance.json --method approx --dump-lp relax.lp
  budgetmech round-gap --in gap.json --exact
  budgetmech solve-mechanism --in prior.json --bic-mode budget-downward
  budgetmech run-mechanism --prior prior.json --delta delta.json --profile 0,1 --seed 7
  budgetmech bench --seed 0 --count 500 --n-max 3 --m-max 6 --json bench.json
  budgetmech verify --oracle --json verify.json

Exit codes: 0 on success, 1 on a guarantee violation or failed check,
2 on usage or input errors.
"""

import argparse
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

from . import check_dependencies
from .__version__ import __version__
from .bavwm import SolveMethod, solve_bavwm
from .exceptions import BudgetMechError, GuaranteeViolationError
from .gap import solve_gap_lp, st_round
from .harness import GeneratorConfig, bench_ratio, generate_instances, verify_suite
from .logging import disable_logging, get_logger, setup_logging
from .mechanism import (
    BicMode,
    bic_epsilon,
    check_bic,
    check_ex_post,
    check_interim_ir,
    run_virtual_welfare_mechanism,
    solve_optimal_mechanism,
)
from .numeric import ArithmeticMode
from .serialization import (
    BENCH_REPORT_SCHEMA,
    VERIFICATION_REPORT_SCHEMA,
    dump_json,
    format_number,
    load_gap,
    load_instance,
    load_mapping_distribution,
    load_prior,
    outcome_to_dict,
    parse_profile,
    report_to_json,
    result_to_dict,
    rounding_to_dict,
    solution_to_dict,
)

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_INPUT = 2


class Colors:
    RED = "\033[0;31m"
    GREEN = "\033[0;32m"
    BLUE = "\033[0;34m"
    YELLOW = "\033[1;33m"
    BOLD = "\033[1m"
    NC = "\033[0m"


def print_status(message: str) -> None:
    print(f"{Colors.BLUE}[INFO]{Colors.NC} {message}")


def print_success(message: str) -> None:
    print(f"{Colors.GREEN}[SUCCESS]{Colors.NC} {message}")


def print_warning(message: str) -> None:
    print(f"{Colors.YELLOW}[WARNING]{Colors.NC} {message}")


def print_error(message: str) -> None:
    print(f"{Colors.RED}[ERROR]{Colors.NC} {message}")


def _assignment_text(assignment: List[Optional[int]]) -> str:
    return ", ".join(f"item {j + 1} -> {'-' if a is None else f'agent {a}'}" for j, a in enumerate(assignment))


def cmd_solve_bavwm(args: argparse.Namespace) -> int:
    instance = load_instance(args.input)
    mode = ArithmeticMode.EXACT if args.exact_arith else None
    result = solve_bavwm(instance, SolveMethod(args.method), mode, dump_lp=args.dump_lp)
    data = result_to_dict(result)

    print_status(f"n={instance.n}, m={instance.m}, method={data['method']}")
    print(f"allocation: {_assignment_text(data['allocation'])}")
    print(f"prices:     {data['prices']}")
    print(f"objective:  {data['objective']}")
    if "lp_bound" in data:
        print(f"LP bound:   {data['lp_bound']}")
    if args.dump_lp:
        print_status(f"relaxation written to {args.dump_lp}")
    if args.json:
        dump_json(data, args.json)
    print_success("solved")
    return EXIT_OK


def cmd_round_gap(args: argparse.Namespace) -> int:
    gap = load_gap(args.input)
    mode = ArithmeticMode.EXACT if args.exact else None
    frac = solve_gap_lp(gap, mode)
    assignment = st_round(gap, frac, mode)
    data = rounding_to_dict(gap, assignment)
    data["lp_cost"] = format_number(frac.objective_value)

    print_status(f"{gap.jobs} jobs on {gap.machines} machines, LP cost {data['lp_cost']}")
    for j, machine in enumerate(data["machine_of"]):
        print(f"job {j} -> machine {machine}")
    print(f"cost:  {data['cost']}")
    print(f"loads: {data['loads']} (capacities {data['capacities']})")
    if args.json:
        dump_json(data, args.json)
    print_success("rounded")
    return EXIT_OK


def cmd_solve_mechanism(args: argparse.Namespace) -> int:
    prior = load_prior(args.input)
    bic_mode = BicMode(args.bic_mode)
    mode = ArithmeticMode.EXACT if args.exact_arith else None
    solution = solve_optimal_mechanism(prior, bic_mode, mode)

    print_status(f"{prior.n} bidders, {prior.m} items, BIC {bic_mode.value}")
    print(f"expected revenue: {format_number(solution.revenue)}")
    for i, rows in enumerate(solution.interim.payments):
        for k, payment in enumerate(rows):
            shares = [format_number(v) for v in solution.interim.allocation[i][k]]
            print(f"bidder {i + 1} type {k}: allocation {shares}, payment {format_number(payment)}")
    if args.json:
        dump_json(solution_to_dict(solution), args.json)

    ok = True
    if check_bic(solution, prior, bic_mode):
        print_error(f"BIC violated by {bic_epsilon(solution, prior, bic_mode)}")
        ok = False
    ex_post = check_ex_post(solution, prior)
    if ex_post:
        print_error(f"{len(ex_post)} ex-post violations, first: {ex_post[0]}")
        ok = False
    if check_interim_ir(solution, prior):
        print_error("interim IR violated")
        ok = False
    if not ok:
        return EXIT_VIOLATION
    print_success("mechanism is BIC, interim IR and ex-post budget-respecting")
    return EXIT_OK


def cmd_run_mechanism(args: argparse.Namespace) -> int:
    prior = load_prior(args.prior)
    delta = load_mapping_distribution(args.delta)
    profile = parse_profile(args.profile)
    outcome = run_virtual_welfare_mechanism(prior, delta, profile, args.seed, SolveMethod(args.solver))
    data = outcome_to_dict(outcome)

    print_status(f"mapping {data['mapping_index']} drawn with seed {args.seed}")
    print(f"allocation: {_assignment_text(data['allocation'])}")
    print(f"prices:     {data['prices']}")
    print(f"virtual objective: {data['virtual_objective']}")
    if args.json:
        dump_json(data, args.json)
    print_success("done")
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    config = GeneratorConfig(
        seed=args.seed, count=args.count, n_range=(1, args.n_max), m_range=(1, args.m_max)
    )
    print_status(f"benchmarking {config.count} instances (seed {config.seed})")
    report = bench_ratio(generate_instances(config), workers=args.workers)
    print(report)
    if args.json:
        report_to_json(report, BENCH_REPORT_SCHEMA, args.json)
        print_status(f"report written to {args.json}")
    if report.has_violations():
        print_error(f"{report.violations} guarantee violations")
        return EXIT_VIOLATION
    print_success(f"min ratio {report.min_ratio}")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    if args.oracle and not check_dependencies()["oracle"]:
        print_error("--oracle needs scipy; install budgetmech[oracle]")
        return EXIT_INPUT
    report = verify_suite(oracle=args.oracle)
    print(report)
    if args.json:
        report_to_json(report, VERIFICATION_REPORT_SCHEMA, args.json)
        print_status(f"report written to {args.json}")
    if report.has_failures():
        print_error(f"{len(report.failures)} checks failed")
        return EXIT_VIOLATION
    print_success("all checks passed")
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace], int]] = {
    "solve-bavwm": cmd_solve_bavwm,
    "round-gap": cmd_round_gap,
    "solve-mechanism": cmd_solve_mechanism,
    "run-mechanism": cmd_run_mechanism,
    "bench": cmd_bench,
    "verify": cmd_verify,
}


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="budgetmech",
        description="Revenue-optimal mechanisms for budget-constrained additive bidders",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__.split("Examples:", 1)[1] if __doc__ else None,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--log-level",
        default="WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        help="Logging level (logs go to stderr)",
    )
    parser.add_argument("--log-file", help="Also write logs to this file")
    parser.add_argument("--quiet", action="store_true", help="Silence all logging")
    sub =parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-bavwm", help="Solve a BAVWM instance")
    p.add_argument("--in", dest="input", type=Path, required=True, help="Instance JSON")
    p.add_argument("--method", choices=[m.value for m in SolveMethod], default="auto")
    p.add_argument("--exact-arith", action="store_true", help="Use rational arithmetic")
    p.add_argument("--dump-lp", type=Path, help="Write the LP relaxation as text")
    p.add_argument("--json", type=Path, help="Write the result as JSON")

    p = sub.add_parser("round-gap", help="Solve and round a GAP instance")
    p.add_argument("--in", dest="input", type=Path, required=True, help="GAP JSON")
    p.add_argument("--exact", action="store_true", help="Use rational arithmetic")
    p.add_argument("--json", type=Path, help="Write the rounding as JSON")

    p = sub.add_parser("solve-mechanism", help="Solve the optimal mechanism LP for a prior")
    p.add_argument("--in", dest="input", type=Path, required=True, help="Prior JSON")
    p.add_argument("--bic-mode", choices=[m.value for m in BicMode], default=BicMode.FULL.value)
    p.add_argument("--exact-arith", action="store_true", help="Use rational arithmetic")
    p.add_argument("--json", type=Path, help="Write the lottery table as JSON")

    p = sub.add_parser("run-mechanism", help="Run the virtual welfare mechanism on one profile")
    p.add_argument("--prior", type=Path, required=True, help="Prior JSON")
    p.add_argument("--delta", type=Path, required=True, help="Mapping distribution JSON")
    p.add_argument("--profile", required=True, help="Comma-separated 0-based type indices")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--solver", choices=["exact", "approx"], default="exact")
    p.add_argument("--json", type=Path, help="Write the outcome as JSON")

    p = sub.add_parser("bench", help="Benchmark the approximation ratio on random instances")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=_positive, default=100)
    p.add_argument("--n-max", type=_positive, default=3)
    p.add_argument("--m-max", type=_positive, default=6)
    p.add_argument("--workers", type=_positive, default=1)
    p.add_argument("--json", type=Path, help="Write the report as JSON")

    p = sub.add_parser("verify", help="Run the verification suite")
    p.add_argument("--oracle", action="store_true", help="Also cross-check the simplex against scipy")
    p.add_argument("--json", type=Path, help="Write the report as JSON")

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(level=args.log_level, log_file=args.log_file)
    if args.quiet:
        disable_logging()

    try:
        return COMMANDS[args.command](args)
    except GuaranteeViolationError as e:
        print_error(str(e))
        return EXIT_VIOLATION
    except (BudgetMechError, OSError) as e:
        logger.debug("command %s failed", args.command, exc_info=True)
        print_error(str(e))
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
