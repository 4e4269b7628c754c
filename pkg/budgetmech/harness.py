"""
Random instances, approximation-ratio benchmarks and the verification suite.

Example:
    >>> config = GeneratorConfig(seed=1, count=20, n_range=(1, 3), m_range=(1, 5))
    >>> report = bench_ratio(generate_instances(config))
    >>> report.has_violations()
    False
    >>> print(verify_suite())  # doctest: +SKIP
    ✓ V001 double-credit example
    ...
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .bavwm import partition_bins, solve_approx, solve_exact, tripartition_select
from .exceptions import (
    BudgetMechError,
    ConfigurationError,
    GuaranteeViolationError,
    SizeLimitError,
    wrap_external_error,
)
from .gap import (
    GapInstance,
    assignment_cost,
    build_gap_from_bavwm,
    build_gap_lp,
    fractional_cost,
    machine_loads,
    solve_gap_lp,
    st_round,
)
from .logging import get_logger, get_performance_logger, get_solver_logger
from .lp import LinearProgram, Sense, solve_lp
from .mechanism import (
    BicMode,
    BidderPrior,
    LotteryEntry,
    Prior,
    TypeSpec,
    best_posted_price_revenue,
    build_solution,
    check_bic,
    check_ex_post,
    check_interim_ir,
    check_lotteries,
    solve_optimal_mechanism,
)
from .model import (
    UNASSIGNED,
    Allocation,
    BavwmInstance,
    SplitAllocation,
    check_prices,
    goop_objective,
    normalize,
    objective,
    prices_from_allocation,
    raw_objective,
    split_objective,
    validate,
)
from .numeric import ArithmeticMode

logger = get_logger(__name__)

RATIO_BOUND = 1 / 3
RATIO_TOLERANCE = 1e-9

ModeLike = Union[ArithmeticMode, str, None]


@dataclass
class GeneratorConfig:
    """
    Seeded distribution of random instances and priors.

    Values are uniform on [0, vmax], budgets on [0, bmax], raw multipliers on
    [-mmax, mmax] and virtual values on [-wmax, wmax]. Draws are rounded to
    ``decimals`` places (None keeps full floats) so EXACT runs see short
    rationals. ``types_range`` only matters for priors.
    """

    seed: int = 0
    count: int = 10
    n_range: Tuple[int, int] = (1, 3)
    m_range: Tuple[int, int] = (1, 6)
    vmax: float = 10.0
    bmax: float = 10.0
    mmax: float = 2.0
    wmax: float = 5.0
    decimals: Optional[int] = 2
    types_range: Tuple[int, int] = (1, 3)

    def __post_init__(self) -> None:
        for name in ("n_range", "m_range", "types_range"):
            lo, hi = getattr(self, name)
            if lo < 0 or lo > hi:
                raise ConfigurationError(f"{name} must satisfy 0 <= low <= high, got {(lo, hi)}")
        if self.types_range[0] < 1:
            raise ConfigurationError("every bidder needs at least one type")
        if self.count <= 0:
            raise ConfigurationError(f"count must be positive, got {self.count}")
        for name in ("vmax", "bmax", "mmax", "wmax"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be non-negative")


def _draw(rng: np.random.Generator, low: float, high: float, size: Any, decimals: Optional[int]) -> List[Any]:
    sample = rng.uniform(low, high, size=size)
    if decimals is not None:
        sample = np.round(sample, decimals) + 0.0
    return sample.tolist()


def _draw_raw_instance(rng: np.random.Generator, config: GeneratorConfig) -> BavwmInstance:
    n = int(rng.integers(config.n_range[0], config.n_range[1], endpoint=True))
    m = int(rng.integers(config.m_range[0], config.m_range[1], endpoint=True))
    return BavwmInstance(
        n=n,
        m=m,
        values=_draw(rng, 0, config.vmax, (n, m), config.decimals),
        budgets=_draw(rng, 0, config.bmax, n, config.decimals),
        multipliers=_draw(rng, -config.mmax, config.mmax, n, config.decimals),
        virtual_values=_draw(rng, -config.wmax, config.wmax, (n, m), config.decimals),
    )


def generate_raw_instances(config: GeneratorConfig) -> List[BavwmInstance]:
    """Seeded raw instances (multipliers of any sign, values above budgets allowed)."""
    rng = np.random.default_rng(config.seed)
    return [_draw_raw_instance(rng, config) for _ in range(config.count)]


def generate_instances(config: GeneratorConfig) -> List[BavwmInstance]:
    """Seeded, validated and normalized instances; the same seed gives the same list."""
    return [normalize(instance) for instance in generate_raw_instances(config)]


def generate_gap_instances(config: GeneratorConfig) -> List[GapInstance]:
    """
    Seeded GAP instances with a leading zero-capacity dummy machine.

    ``n_range`` counts the real machines, ``m_range`` the jobs; processing
    times are uniform on [0, vmax], capacities on [0, bmax] and costs on
    [-wmax, wmax]. The dummy keeps every instance feasible.
    """
    rng = np.random.default_rng(config.seed)
    instances = []
    for _ in range(config.count):
        machines = int(rng.integers(config.n_range[0], config.n_range[1], endpoint=True))
        jobs = int(rng.integers(config.m_range[0], config.m_range[1], endpoint=True))
        processing = [[0.0] * jobs] + _draw(rng, 0, config.vmax, (machines, jobs), config.decimals)
        cost = [[0.0] * jobs] + _draw(rng, -config.wmax, config.wmax, (machines, jobs), config.decimals)
        capacities = [0.0] + _draw(rng, 0, config.bmax, machines, config.decimals)
        instances.append(GapInstance(processing, cost, capacities, jobs=jobs))
    return instances


def generate_priors(config: GeneratorConfig) -> List[Prior]:
    """
    Seeded priors; probabilities are exact fractions of small integer weights.

    ``n_range`` counts bidders, ``m_range`` items, ``types_range`` types per bidder.
    """
    rng = np.random.default_rng(config.seed)
    priors = []
    for _ in range(config.count):
        n = int(rng.integers(config.n_range[0], config.n_range[1], endpoint=True))
        m = int(rng.integers(config.m_range[0], config.m_range[1], endpoint=True))
        bidders = []
        for _ in range(n):
            k = int(rng.integers(config.types_range[0], config.types_range[1], endpoint=True))
            weights = [int(w) for w in rng.integers(1, 5, size=k)]
            total = sum(weights)
            types = [
                TypeSpec(
                    _draw(rng, 0, config.vmax, m, config.decimals),
                    _draw(rng, 0, config.bmax, 1, config.decimals)[0],
                    Fraction(w, total),
                )
                for w in weights
            ]
            bidders.append(BidderPrior(types))
        priors.append(Prior(m, bidders))
    return priors


@dataclass(frozen=True)
class InstanceBenchmark:
    """One benchmarked instance; objectives are None when it was skipped."""

    index: int
    n: int
    m: int
    exact_objective: Optional[float]
    approx_objective: Optional[float]
    lp_bound: Optional[float]
    ratio: Optional[float]
    wall_time: float
    skipped: bool = False
    violation: bool = False
    note: str = ""


def _fmt(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:.6g}"


def approximation_ratio(exact: float, approx: float) -> float:
    """approx / exact, with ratio 1 when the optimum is 0 and approx is not negative."""
    if abs(exact) <= RATIO_TOLERANCE:
        return 1.0 if approx >= -RATIO_TOLERANCE else 0.0
    return approx / exact


@dataclass
class BenchReport:
    """Per-instance results and aggregates of a ratio benchmark."""

    instances: List[InstanceBenchmark] = field(default_factory=list)

    @property
    def completed(self) -> List[InstanceBenchmark]:
        return [b for b in self.instances if not b.skipped]

    @property
    def skipped(self) -> List[InstanceBenchmark]:
        return [b for b in self.instances if b.skipped]

    @property
    def min_ratio(self) -> Optional[float]:
        ratios = [b.ratio for b in self.completed if b.ratio is not None]
        return min(ratios) if ratios else None

    @property
    def mean_ratio(self) -> Optional[float]:
        ratios = [b.ratio for b in self.completed if b.ratio is not None]
        return float(np.mean(ratios)) if ratios else None

    @property
    def violations(self) -> int:
        return sum(1 for b in self.instances if b.violation)

    def has_violations(self) -> bool:
        return self.violations > 0

    def to_dict(self, include_timing: bool = True) -> Dict[str, Any]:
        """JSON-ready report; without timing it is identical for identical inputs."""
        rows = []
        for bench in self.instances:
            row = asdict(bench)
            if not include_timing:
                row.pop("wall_time")
            rows.append(row)
        return {
            "instances": rows,
            "aggregates": {
                "completed": len(self.completed),
                "skipped": len(self.skipped),
                "min_ratio": self.min_ratio,
                "mean_ratio": self.mean_ratio,
                "violations": self.violations,
            },
        }

    def __str__(self) -> str:
        if not self.instances:
            return "No instances benchmarked"
        lines = []
        for b in self.instances:
            if b.skipped:
                lines.append(f"- #{b.index} (n={b.n}, m={b.m}) skipped: {b.note}")
                continue
            icon = "✗" if b.violation else "✓"
            lines.append(
                f"{icon} #{b.index} (n={b.n}, m={b.m}) exact={_fmt(b.exact_objective)} "
                f"approx={_fmt(b.approx_objective)} ratio={_fmt(b.ratio)}"
                + (f" {b.note}" if b.note else "")
            )
        lines.append("")
        min_ratio = "n/a" if self.min_ratio is None else f"{self.min_ratio:.4f}"
        lines.append(
            f"{len(self.completed)} completed, {len(self.skipped)} skipped, "
            f"min ratio {min_ratio}, {self.violations} violations"
        )
        return "\n".join(lines)


def _bench_one(index: int, instance: BavwmInstance, mode: ModeLike) -> InstanceBenchmark:
    perf = get_performance_logger()
    timer = f"bench[{index}]"
    perf.start_timer(timer)
    try:
        exact = solve_exact(instance, mode)
    except SizeLimitError as e:
        return InstanceBenchmark(
            index, instance.n, instance.m, None, None, None, None,
            perf.end_timer(timer), skipped=True, note=e.message,
        )
    try:
        approx = solve_approx(instance, mode)
    except GuaranteeViolationError as e:
        exact_value = float(exact.objective_value)
        return InstanceBenchmark(
            index, instance.n, instance.m, exact_value, None, None, 0.0,
            perf.end_timer(timer), violation=True, note=str(e),
        )
    elapsed = perf.end_timer(timer)

    exact_value = float(exact.objective_value)
    approx_value = float(approx.objective_value)
    bound = float(approx.certificate) if approx.certificate is not None else None
    notes = []
    violation = False
    if approx_value < exact_value * RATIO_BOUND - RATIO_TOLERANCE:
        violation = True
        notes.append("approx below a third of the optimum")
    if bound is not None and bound < exact_value - RATIO_TOLERANCE:
        violation = True
        notes.append("LP bound below the optimum")
    return InstanceBenchmark(
        index=index,
        n=instance.n,
        m=instance.m,
        exact_objective=exact_value,
        approx_objective=approx_value,
        lp_bound=bound,
        ratio=approximation_ratio(exact_value, approx_value),
        wall_time=elapsed,
        violation=violation,
        note="; ".join(notes),
    )


def bench_ratio(
    instances: Sequence[BavwmInstance], mode: ModeLike = None, workers: int = 1
) -> BenchReport:
    """
    Run exhaustive search and the approximation on every instance.

    Args:
        instances: Instances within the exhaustive-search cap (others are skipped)
        mode: Arithmetic for both solvers
        workers: Thread count; results keep the instance order

    Returns:
        BenchReport flagging every instance below the one-third bound
    """
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda item: _bench_one(item[0], item[1], mode), enumerate(instances)))
    else:
        rows = [_bench_one(i, instance, mode) for i, instance in enumerate(instances)]
    report = BenchReport(rows)
    get_solver_logger().log_bench_summary(
        len(report.completed), len(report.skipped), report.min_ratio, report.violations
    )
    return report


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one verification check."""

    code: str
    name: str
    passed: bool
    message: str = ""


class VerificationReport:
    """
    Coded pass/fail results of ``verify_suite``.

    Examples:
        >>> report = verify_suite()
        >>> if report.has_failures():
        ...     print(report)
    """

    def __init__(self, checks: List[CheckResult]):
        self.checks = checks

    def has_failures(self) -> bool:
        return any(not check.passed for check in self.checks)

    @property
    def failures(self) -> List[CheckResult]:
        return [check for check in self.checks if not check.passed]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": not self.has_failures(),
            "checks": [asdict(check) for check in self.checks],
        }

    def __str__(self) -> str:
        lines = []
        for check in self.checks:
            icon = "✓" if check.passed else "✗"
            line = f"{icon} {check.code} {check.name}"
            if check.message:
                line += f": {check.message}"
            lines.append(line)
        lines.append("")
        lines.append(f"{len(self.checks) - len(self.failures)} passed, {len(self.failures)} failed")
        return "\n".join(lines)


def double_credit_instance() -> BavwmInstance:
    """One agent, two items worth 3 each, budget 3, virtual values -2."""
    return BavwmInstance(1, 2, [[3, 3]], [3], [1], [[-2, -2]])


def _check_double_credit(config: GeneratorConfig) -> str:
    instance = normalize(double_credit_instance().to_mode(ArithmeticMode.EXACT))
    both = SplitAllocation((0, 0), (UNASSIGNED, UNASSIGNED))
    credit = split_objective(instance, both)
    true_value = objective(instance, both.merged())
    best = solve_exact(instance, ArithmeticMode.EXACT)
    if credit != 2 or true_value != -1:
        raise AssertionError(f"double credit {credit}, true value {true_value}")
    if best.objective_value != 1 or len(best.allocation.allocated_items()) != 1:
        raise AssertionError(f"exhaustive search found {best.objective_value} with {best.allocation}")
    return "credit 2, true value -1, optimum 1"


def _check_clamp_invariance(config: GeneratorConfig) -> str:
    rng = np.random.default_rng(config.seed)
    checked = 0
    for raw in generate_raw_instances(config):
        if validate(raw):
            raise AssertionError(f"generator produced an invalid instance: {validate(raw)[0]}")
        normalized = normalize(raw)
        for _ in range(5):
            assignment = [None if k == raw.n else k for k in rng.integers(0, raw.n + 1, size=raw.m).tolist()]
            allocation = Allocation(tuple(assignment))
            a, b = raw_objective(raw, allocation), objective(normalized, allocation)
            if abs(a - b) > 1e-9:
                raise AssertionError(f"raw {a} != normalized {b}")
            prices = prices_from_allocation(normalized, allocation)
            if abs(goop_objective(normalized, allocation, prices) - b) > 1e-9:
                raise AssertionError("optimal prices do not reproduce the objective")
            if check_prices(normalized, allocation, prices):
                raise AssertionError("optimal prices break a payment constraint")
            checked += 1
    return f"{checked} allocations"


def _check_rounding(config: GeneratorConfig) -> str:
    tol = 1e-9
    count = 0
    for gap in generate_gap_instances(config):
        frac = solve_gap_lp(gap)
        rounded = st_round(gap, frac)
        before, after = fractional_cost(gap, frac), assignment_cost(gap, rounded)
        if after < before - tol:
            raise AssertionError(f"cost dropped from {before} to {after}")
        for i, load in enumerate(machine_loads(gap, rounded)):
            if load > 2 * gap.capacities[i] + tol:
                raise AssertionError(f"machine {i} load {load} over twice its capacity")
        count += 1
    for instance in generate_instances(config):
        embedding = build_gap_from_bavwm(instance)
        st_round(embedding.gap, solve_gap_lp(embedding.gap))
        count += 1
    return f"{count} instances"


def _check_tripartition(config: GeneratorConfig) -> str:
    count = 0
    for instance in generate_instances(config):
        trace = solve_approx(instance).trace
        assert trace is not None
        for entry in trace.bins:
            budget = instance.budgets[entry.agent]
            if any(load > budget + 1e-9 for load in entry.loads):
                raise AssertionError(f"agent {entry.agent} bin loads {entry.loads} over {budget}")
        cleaned_value = trace.rounded_value - sum(
            instance.virtual_values[trace.rounded.hat[j]][j] for j in trace.dropped_hat_items
        )
        if 3 * trace.selected_value < cleaned_value - 1e-9:
            raise AssertionError(f"selected {trace.selected_value} below a third of {cleaned_value}")
        count += 1
    return f"{count} runs"


def _check_closed_bound(config: GeneratorConfig) -> str:
    instance = normalize(double_credit_instance().to_mode(ArithmeticMode.EXACT))
    split = SplitAllocation((0, 0), (UNASSIGNED, UNASSIGNED))
    bins = partition_bins(instance, split, ArithmeticMode.EXACT)
    selected = tripartition_select(instance, split, ArithmeticMode.EXACT)
    if max(bins[0].loads) != 3 or split_objective(instance, selected) != 1:
        raise AssertionError(f"bins {bins[0].loads}, selected {selected}")
    return "load exactly 2b accepted"


def _check_approximation(config: GeneratorConfig) -> str:
    report = bench_ratio(generate_instances(config))
    if report.has_violations():
        raise AssertionError(f"{report.violations} instances below the bound")
    return f"min ratio {report.min_ratio:.4f} over {len(report.completed)} instances"


def _mechanism_priors(config: GeneratorConfig) -> List[Prior]:
    small = GeneratorConfig(
        seed=config.seed, count=max(1, config.count // 3), n_range=(1, 2), m_range=(1, 2),
        vmax=config.vmax, bmax=config.bmax, types_range=(1, 2),
    )
    return generate_priors(small)


def _check_mechanism(config: GeneratorConfig) -> str:
    point = Prior(1, [BidderPrior([TypeSpec([10], 2, 1)])])
    two = Prior(1, [BidderPrior([TypeSpec([1], 10, Fraction(1, 2)), TypeSpec([2], 10, Fraction(1, 2))])])
    for prior, expected in ((point, 2), (two, 1)):
        revenue = solve_optimal_mechanism(prior, mode=ArithmeticMode.EXACT).revenue
        if revenue != expected:
            raise AssertionError(f"revenue {revenue}, expected {expected}")
    count = 0
    for prior in _mechanism_priors(config):
        for bic_mode in BicMode:
            solution = solve_optimal_mechanism(prior, bic_mode)
            issues = (
                check_bic(solution, prior, bic_mode)
                + check_ex_post(solution, prior)
                + check_interim_ir(solution, prior)
                + check_lotteries(solution, prior)
            )
            if issues:
                raise AssertionError(f"{len(issues)} constraint violations, first {issues[0]}")
            count += 1
    return f"{count} LP outputs pass every checker"


def _check_fault_injection(config: GeneratorConfig) -> str:
    prior = Prior(1, [BidderPrior([TypeSpec([10], 2, 1)])])
    solution = solve_optimal_mechanism(prior, mode=ArithmeticMode.EXACT)
    table = []
    for profile, entries in solution.table:
        corrupted = [
            LotteryEntry(e.allocation, e.weight, tuple(z + 5 if e.allocation[0] == 0 else z for z in e.payments))
            for e in entries
        ]
        table.append((profile, corrupted))
    broken = build_solution(prior, table, solution.bic_mode, ArithmeticMode.EXACT)
    if not check_ex_post(broken, prior):
        raise AssertionError("corrupted payment masses were not detected")
    return "corrupted payment masses detected"


def _check_revenue_dominance(config: GeneratorConfig) -> str:
    count = 0
    for prior in _mechanism_priors(config):
        full = solve_optimal_mechanism(prior, BicMode.FULL).revenue
        downward = solve_optimal_mechanism(prior, BicMode.BUDGET_DOWNWARD).revenue
        if downward < full - 1e-9:
            raise AssertionError(f"budget-downward {downward} below full {full}")
        _, posted = best_posted_price_revenue(prior)
        if downward < posted - 1e-7:
            raise AssertionError(f"LP revenue {downward} below posted prices {posted}")
        count += 1
    return f"{count} priors"


VERIFICATION_CHECKS: List[Tuple[str, str, Callable[[GeneratorConfig], str]]] = [
    ("V001", "double-credit example", _check_double_credit),
    ("V002", "clamp invariance and optimal prices", _check_clamp_invariance),
    ("V003", "rounding cost and load bounds", _check_rounding),
    ("V004", "tripartition bounds", _check_tripartition),
    ("V005", "bar load exactly twice the budget", _check_closed_bound),
    ("V006", "approximation ratio against exhaustive search", _check_approximation),
    ("V007", "mechanism LP constraints", _check_mechanism),
    ("V008", "payment corruption detected", _check_fault_injection),
    ("V009", "revenue dominance and posted prices", _check_revenue_dominance),
]


def _linprog_arguments(lp: LinearProgram) -> Dict[str, Any]:
    """Dense ``scipy.optimize.linprog`` arguments for a maximization LP."""
    a_ub, b_ub, a_eq, b_eq = [], [], [], []
    for row in lp.constraints:
        dense = np.zeros(lp.variable_count)
        for k, value in row.coefficients:
            dense[k] = float(value)
        if row.sense is Sense.EQ:
            a_eq.append(dense)
            b_eq.append(float(row.rhs))
        elif row.sense is Sense.LE:
            a_ub.append(dense)
            b_ub.append(float(row.rhs))
        else:
            a_ub.append(-dense)
            b_ub.append(-float(row.rhs))
    bounds = [
        (None if math.isinf(lo) else float(lo), None if math.isinf(up) else float(up))
        for lo, up in zip(lp.lower, lp.upper)
    ]
    return {
        "c": -np.array(lp.objective, dtype=float),
        "A_ub": np.array(a_ub) if a_ub else None,
        "b_ub": np.array(b_ub) if b_ub else None,
        "A_eq": np.array(a_eq) if a_eq else None,
        "b_eq": np.array(b_eq) if b_eq else None,
        "bounds": bounds,
    }


def _check_lp_oracle(config: GeneratorConfig) -> str:
    try:
        from scipy.optimize import linprog
    except ImportError as e:
        raise wrap_external_error(e, "lp oracle", "import") from e

    count = 0
    for gap in generate_gap_instances(config):
        lp, _ = build_gap_lp(gap)
        ours = solve_lp(lp)
        try:
            reference = linprog(**_linprog_arguments(lp), method="highs")
        except (TypeError, ValueError) as e:
            raise wrap_external_error(e, "lp oracle", "linprog") from e
        if ours.optimal != (reference.status == 0):
            raise AssertionError(f"status {ours.status.value} but linprog says {reference.message}")
        if ours.optimal and abs(ours.objective_value + reference.fun) > 1e-6:
            raise AssertionError(f"objective {ours.objective_value} but linprog found {-reference.fun}")
        count += 1
    return f"{count} assignment LPs match linprog"


ORACLE_CHECK: Tuple[str, str, Callable[[GeneratorConfig], str]] = (
    "V010",
    "simplex agrees with scipy linprog",
    _check_lp_oracle,
)


def verify_suite(config: Optional[GeneratorConfig] = None, oracle: bool = False) -> VerificationReport:
    """
    Run every invariant check and collect a coded report.

    A check fails when it raises; library errors and assertion failures are
    both recorded rather than propagated.

    Args:
        config: Generator settings shared by the seeded checks
        oracle: Also cross-check the simplex against scipy (needs the ``oracle`` extra)
    """
    config = config or GeneratorConfig(seed=0, count=12, n_range=(1, 3), m_range=(1, 4))
    suite = list(VERIFICATION_CHECKS) + ([ORACLE_CHECK] if oracle else [])
    checks = []
    for code, name, check in suite:
        started = time.perf_counter()
        try:
            message = check(config)
            checks.append(CheckResult(code, name, True, message))
        except (AssertionError, BudgetMechError) as e:
            logger.error(f"{code} {name} failed: {e}")
            checks.append(CheckResult(code, name, False, str(e)))
        logger.debug(f"{code} finished in {time.perf_counter() - started:.3f}s")
    return VerificationReport(checks)
