"""
Solvers for budgeted-additive virtual welfare maximization.

``solve_approx`` is the LP-based 3-approximation:

1. solve the bar/hat relaxation (``build_relaxation`` + ``solve_lp``),
2. round it through the generalized assignment embedding to an integral
   split whose bar load may reach 2 * b_i (``round_to_split``),
3. split each agent's bar items into three bins of load <= b_i and keep the
   most valuable bin (``tripartition_select``).

``solve_exact`` enumerates all (n + 1)^m allocations and ``solve_single_item``
is the O(n) scan for one item. ``solve_bavwm`` picks between them.

Example:
    >>> instance = BavwmInstance(1, 2, [[3, 3]], [3], [1], [[-2, -2]])
    >>> solve_exact(instance, "exact").objective_value
    Fraction(1, 1)
    >>> solve_approx(instance).objective_value >= 1 / 3
    True
"""

import itertools
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .config import get_solver_config
from .exceptions import (
    GuaranteeViolationError,
    InfeasibleError,
    InstanceValidationError,
    InvalidAllocationError,
    RoundingError,
    SizeLimitError,
)
from .gap import FractionalAssignment, MachineKind, build_gap_from_bavwm, st_round
from .logging import get_logger, get_performance_logger, get_solver_logger, log_function_call
from .lp import LinearProgram, LpSolution, LpStatus, Sense, solve_lp
from .model import (
    UNASSIGNED,
    Allocation,
    AgentSlot,
    BavwmInstance,
    PriceVector,
    SplitAllocation,
    _require_normalized,
    bar_loads,
    ensure_valid,
    normalize,
    objective,
    prices_from_allocation,
    split_objective,
)
from .numeric import Arithmetic, ArithmeticMode, Number, arithmetic

logger = get_logger(__name__)

ModeLike = Union[ArithmeticMode, str, None]


class SolveMethod(Enum):
    """Which solver produced (or should produce) a result."""

    EXACT = "exact"
    APPROX = "approx"
    AUTO = "auto"


@dataclass(frozen=True)
class Relaxation:
    """The bar/hat LP and the variable index of every (agent, item) pair."""

    instance: BavwmInstance
    lp: LinearProgram
    bar_index: Tuple[Tuple[int, ...], ...]
    hat_index: Tuple[Tuple[int, ...], ...]

    def split_values(self, solution: LpSolution) -> Tuple[Tuple[Tuple[Number, ...], ...], ...]:
        """(x_bar, x_hat) matrices from an LP solution."""
        bar = tuple(tuple(solution.values[k] for k in row) for row in self.bar_index)
        hat = tuple(tuple(solution.values[k] for k in row) for row in self.hat_index)
        return bar, hat


@dataclass(frozen=True)
class TripartitionBins:
    """Greedy bins of one agent's bar items and the bin that was kept."""

    agent: int
    bins: Tuple[Tuple[int, ...], ...]
    loads: Tuple[Number, ...]
    scores: Tuple[Number, ...]
    chosen: int


@dataclass(frozen=True)
class ApproxTrace:
    """Intermediate results of one ``solve_approx`` run."""

    lp_value: Number
    rounded: SplitAllocation
    rounded_value: Number
    dropped_hat_items: Tuple[int, ...]
    bins: Tuple[TripartitionBins, ...]
    selected: SplitAllocation
    selected_value: Number


@dataclass(frozen=True)
class BavwmResult:
    """
    Allocation, optimal prices and objective value of a solve.

    ``certificate`` is the LP optimum (an upper bound on the integral optimum)
    for approximate solves.
    """

    allocation: Allocation
    prices: PriceVector
    objective_value: Number
    method: SolveMethod
    certificate: Optional[Number] = None
    trace: Optional[ApproxTrace] = None


def _prepare(instance: BavwmInstance, mode: ModeLike) -> Tuple[BavwmInstance, Arithmetic]:
    arith = arithmetic(mode)
    ensure_valid(instance)
    converted = instance.to_mode(arith.mode)
    if not converted.normalized:
        converted = normalize(converted)
    return converted, arith


def build_relaxation(instance: BavwmInstance) -> Relaxation:
    """
    LP relaxation with bar variables (counted against the budget) and hat variables.

    Constraints: sum_i (x_bar_ij + x_hat_ij) <= 1 per item and
    sum_j v_ij * x_bar_ij <= b_i per agent. Objective:
    sum m_i v_ij x_bar_ij + sum w_ij (x_bar_ij + x_hat_ij).

    Raises:
        NotNormalizedError: If the instance is raw
    """
    _require_normalized(instance, "build_relaxation")
    n, m = instance.n, instance.m
    lp = LinearProgram("bavwm_relaxation")

    bar_index = tuple(
        tuple(
            lp.add_variable(
                f"xbar_{i}_{j}",
                upper=1,
                objective=instance.multipliers[i] * instance.values[i][j]
                + instance.virtual_values[i][j],
            )
            for j in range(m)
        )
        for i in range(n)
    )
    hat_index = tuple(
        tuple(
            lp.add_variable(f"xhat_{i}_{j}", upper=1, objective=instance.virtual_values[i][j])
            for j in range(m)
        )
        for i in range(n)
    )

    for j in range(m):
        row = {bar_index[i][j]: 1 for i in range(n)}
        row.update({hat_index[i][j]: 1 for i in range(n)})
        lp.add_constraint(row, Sense.LE, 1, name=f"item_{j}")
    for i in range(n):
        lp.add_constraint(
            {bar_index[i][j]: instance.values[i][j] for j in range(m)},
            Sense.LE,
            instance.budgets[i],
            name=f"budget_{i}",
        )
    return Relaxation(instance, lp, bar_index, hat_index)


def round_to_split(
    instance: BavwmInstance,
    frac: LpSolution,
    mode: ModeLike = None,
    relaxation: Optional[Relaxation] = None,
) -> SplitAllocation:
    """
    Round an optimal relaxation solution to an integral split allocation.

    Bar fractions go to bar machines, hat fractions to hat machines and the
    unallocated remainder of every item to the dummy machine; the result of
    ``st_round`` is mapped back to agents.

    Args:
        instance: Normalized instance the relaxation was built from
        frac: Optimal solution of ``build_relaxation(instance).lp``
        mode: Arithmetic for rounding checks (defaults to the solution's mode)
        relaxation: The relaxation, when the caller already built it

    Returns:
        Split with bar load <= 2 * b_i and split objective >= LP optimum

    Raises:
        RoundingError: If ``frac`` is not an optimal solution
        GuaranteeViolationError: If a rounding bound fails
    """
    _require_normalized(instance, "round_to_split")
    if not frac.optimal:
        raise RoundingError(f"relaxation solution is {frac.status.value}")
    arith = arithmetic(mode if mode is not None else frac.mode)
    relaxation = relaxation or build_relaxation(instance)
    bar, hat = relaxation.split_values(frac)

    embedding = build_gap_from_bavwm(instance)
    gap = embedding.gap
    zero = arith.zero()
    x = [[zero] * gap.jobs for _ in range(gap.machines)]
    for j in range(instance.m):
        placed = zero
        for i in range(instance.n):
            x_bar = arith.clip01(arith.convert(bar[i][j]))
            x_hat = arith.clip01(arith.convert(hat[i][j]))
            x[embedding.machine_for(MachineKind.BAR, i)][j] = x_bar
            x[embedding.machine_for(MachineKind.HAT, i)][j] = x_hat
            placed = placed + x_bar + x_hat
        x[embedding.dummy][j] = arith.clip01(1 - placed)

    assignment = st_round(gap, FractionalAssignment(x), arith.mode)

    bar_owner: List[AgentSlot] = [UNASSIGNED] * instance.m
    hat_owner: List[AgentSlot] = [UNASSIGNED] * instance.m
    for j, machine in enumerate(assignment.machine_of):
        role = embedding.role_of(machine)
        if role.kind is MachineKind.BAR:
            bar_owner[j] = role.agent
        elif role.kind is MachineKind.HAT:
            hat_owner[j] = role.agent
    split = SplitAllocation(tuple(bar_owner), tuple(hat_owner))

    converted = instance.to_mode(arith.mode)
    credit = split_objective(converted, split)
    lp_value = arith.convert(frac.objective_value)
    if arith.lt(credit, lp_value):
        raise GuaranteeViolationError("rounded split objective >= LP optimum", credit, lp_value)
    for i, load in enumerate(bar_loads(converted, split)):
        if arith.gt(load, 2 * converted.budgets[i]):
            raise GuaranteeViolationError(
                f"bar load of agent {i} <= 2 * budget", load, 2 * converted.budgets[i]
            )
    return split


def drop_negative_hat_items(instance: BavwmInstance, split: SplitAllocation) -> Tuple[SplitAllocation, Tuple[int, ...]]:
    """Unassign hat items with w_ij < 0; returns the cleaned split and the dropped items."""
    dropped = tuple(
        j
        for j, owner in enumerate(split.hat)
        if owner is not UNASSIGNED and instance.virtual_values[owner][j] < 0
    )
    hat = tuple(UNASSIGNED if j in dropped else owner for j, owner in enumerate(split.hat))
    return SplitAllocation(split.bar, hat), dropped


def partition_bins(
    instance: BavwmInstance, split: SplitAllocation, mode: ModeLike = None
) -> Tuple[TripartitionBins, ...]:
    """
    Greedy three-bin partition of every agent's bar items.

    Items go in order of decreasing v_ij (ties by item index) into the bin of
    least load (ties by bin index). The kept bin maximizes
    sum (m_i v_ij + w_ij), ties by bin index.

    Raises:
        InvalidAllocationError: If some agent's bar load exceeds 2 * b_i
        GuaranteeViolationError: If a bin ends up over budget
    """
    _require_normalized(instance, "partition_bins")
    arith = arithmetic(mode)
    loads_in = bar_loads(instance, split)
    result: List[TripartitionBins] = []
    for i in range(instance.n):
        budget = instance.budgets[i]
        if arith.gt(loads_in[i], 2 * budget):
            raise InvalidAllocationError(
                f"agent {i} has bar load {loads_in[i]} above twice the budget {budget}"
            )
        items = sorted(split.bar_items(i), key=lambda j: (-instance.values[i][j], j))
        bins: List[List[int]] = [[], [], []]
        loads: List[Number] = [0, 0, 0]
        for j in items:
            k = min(range(3), key=lambda b: loads[b])
            bins[k].append(j)
            loads[k] = loads[k] + instance.values[i][j]
        for k, load in enumerate(loads):
            if arith.gt(load, budget):
                raise GuaranteeViolationError(f"bin {k} of agent {i} <= budget", load, budget)
        scores = [
            sum(
                (instance.multipliers[i] * instance.values[i][j] + instance.virtual_values[i][j] for j in b),
                0,
            )
            for b in bins
        ]
        chosen = max(range(3), key=lambda b: scores[b])
        get_solver_logger().log_tripartition(i, loads, chosen)
        result.append(
            TripartitionBins(
                agent=i,
                bins=tuple(tuple(sorted(b)) for b in bins),
                loads=tuple(loads),
                scores=tuple(scores),
                chosen=chosen,
            )
        )
    return tuple(result)


def tripartition_select(
    instance: BavwmInstance, split: SplitAllocation, mode: ModeLike = None
) -> SplitAllocation:
    """
    Repair a split with bar load <= 2 * b_i into one with bar load <= b_i.

    Every agent keeps only its best greedy bin of bar items; hat items stay.
    When the hat items contribute a non-negative total, the result's split
    objective is at least a third of the input's, and this is asserted.

    Raises:
        InvalidAllocationError: If some agent's bar load exceeds 2 * b_i
        GuaranteeViolationError: If a bin or the one-third bound fails
    """
    arith = arithmetic(mode)
    bins = partition_bins(instance, split, arith.mode)
    return _select(instance, split, bins, arith)


def _select(
    instance: BavwmInstance,
    split: SplitAllocation,
    bins: Sequence[TripartitionBins],
    arith: Arithmetic,
) -> SplitAllocation:
    bar: List[AgentSlot] = [UNASSIGNED] * instance.m
    for entry in bins:
        for j in entry.bins[entry.chosen]:
            bar[j] = entry.agent
    selected = SplitAllocation(tuple(bar), split.hat)

    hat_total = sum(
        (instance.virtual_values[owner][j] for j, owner in enumerate(split.hat) if owner is not UNASSIGNED),
        0,
    )
    if hat_total >= 0:
        before = split_objective(instance, split)
        after = split_objective(instance, selected)
        if arith.lt(3 * after, before):
            raise GuaranteeViolationError("selected split objective >= input / 3", after, before / 3)
    return selected


@log_function_call
def solve_approx(
    instance: BavwmInstance,
    mode: ModeLike = None,
    *,
    dump_lp: Optional[Union[str, Path]] = None,
) -> BavwmResult:
    """
    LP relaxation, rounding and tripartition: a 3-approximation.

    Args:
        instance: Validated instance; it is normalized here if needed
        mode: Arithmetic for the whole pipeline
        dump_lp: Optional path to write the relaxation in text form

    Returns:
        BavwmResult with the LP optimum as certificate and an ApproxTrace

    Raises:
        GuaranteeViolationError: If any stage breaks its bound
    """
    perf = get_performance_logger()
    perf.start_timer("solve_approx")
    normalized, arith = _prepare(instance, mode)

    relaxation = build_relaxation(normalized)
    if dump_lp is not None:
        relaxation.lp.dump(dump_lp)
    solution = solve_lp(relaxation.lp, arith.mode)
    if solution.status is not LpStatus.OPTIMAL:
        raise InfeasibleError("solve_approx", f"relaxation is {solution.status.value}")
    lp_value = solution.objective_value

    rounded = round_to_split(normalized, solution, arith.mode, relaxation)
    cleaned, dropped = drop_negative_hat_items(normalized, rounded)
    bins = partition_bins(normalized, cleaned, arith.mode)
    selected = _select(normalized, cleaned, bins, arith)

    allocation = selected.merged()
    value = objective(normalized, allocation)
    if arith.lt(value, lp_value / 3):
        raise GuaranteeViolationError("approximate objective >= LP optimum / 3", value, lp_value / 3)

    trace = ApproxTrace(
        lp_value=lp_value,
        rounded=rounded,
        rounded_value=split_objective(normalized, rounded),
        dropped_hat_items=dropped,
        bins=bins,
        selected=selected,
        selected_value=split_objective(normalized, selected),
    )
    perf.end_timer("solve_approx", {"n": normalized.n, "m": normalized.m})
    return BavwmResult(
        allocation=allocation,
        prices=prices_from_allocation(normalized, allocation),
        objective_value=value,
        method=SolveMethod.APPROX,
        certificate=lp_value,
        trace=trace,
    )


def _fast_value(instance: BavwmInstance, assignment: Sequence[AgentSlot]) -> Number:
    loads: List[Number] = [0] * instance.n
    total: Number = 0
    for j, owner in enumerate(assignment):
        if owner is not UNASSIGNED:
            loads[owner] = loads[owner] + instance.values[owner][j]
            total = total + instance.virtual_values[owner][j]
    for i, load in enumerate(loads):
        if instance.multipliers[i] > 0:
            total = total + instance.multipliers[i] * min(instance.budgets[i], load)
    return total


@log_function_call
def solve_exact(
    instance: BavwmInstance, mode: ModeLike = None, *, limit: Optional[int] = None
) -> BavwmResult:
    """
    Exhaustive search over all (n + 1)^m allocations.

    Allocations are scanned in lexicographic order with "unassigned" before
    agent 0; among equal objectives the first one is kept.

    Raises:
        SizeLimitError: If (n + 1)^m exceeds ``limit`` (default: configured cap)
    """
    normalized, arith = _prepare(instance, mode)
    cap = limit if limit is not None else get_solver_config().exhaustive_limit
    size = (normalized.n + 1) ** normalized.m
    if size > cap:
        raise SizeLimitError("solve_exact", size, cap)

    options: Tuple[AgentSlot, ...] = (UNASSIGNED,) + tuple(range(normalized.n))
    best: Tuple[AgentSlot, ...] = (UNASSIGNED,) * normalized.m
    best_value = _fast_value(normalized, best)
    for assignment in itertools.product(options, repeat=normalized.m):
        value = _fast_value(normalized, assignment)
        if arith.gt(value, best_value):
            best, best_value = assignment, value

    allocation = Allocation(best)
    return BavwmResult(
        allocation=allocation,
        prices=prices_from_allocation(normalized, allocation),
        objective_value=objective(normalized, allocation),
        method=SolveMethod.EXACT,
    )


def solve_single_item(instance: BavwmInstance, mode: ModeLike = None) -> BavwmResult:
    """
    Exact O(n) solve for one item.

    The item goes to the agent with the largest m_i * min(b_i, v_i) + w_i when
    that value is positive; otherwise it stays unassigned.
    """
    if instance.m != 1:
        raise InstanceValidationError("m", "single-item solve needs exactly one item", instance.m)
    normalized, arith = _prepare(instance, mode)
    winner: AgentSlot = UNASSIGNED
    best = arith.zero()
    for i in range(normalized.n):
        value = _fast_value(normalized, (i,))
        if arith.gt(value, best):
            winner, best = i, value
    allocation = Allocation((winner,))
    return BavwmResult(
        allocation=allocation,
        prices=prices_from_allocation(normalized, allocation),
        objective_value=objective(normalized, allocation),
        method=SolveMethod.EXACT,
    )


class BavwmSolver:
    """
    A BAVWM solver with its method, arithmetic and LP dump target fixed.

    Repeated solves (one per profile and mapping in a mechanism run, one per
    instance in a benchmark) share the setup, and the solver counts how many
    instances each method handled.

    Examples:
        >>> solver = BavwmSolver(SolveMethod.EXACT, "exact")
        >>> solver.solve(BavwmInstance(1, 2, [[3, 3]], [3], [1], [[-2, -2]])).objective_value
        Fraction(1, 1)
        >>> solver.solves
        {'exact': 1}
    """

    def __init__(
        self,
        method: Union[SolveMethod, str] = SolveMethod.AUTO,
        mode: ModeLike = None,
        *,
        dump_lp: Optional[Union[str, Path]] = None,
    ):
        """
        Args:
            method: EXACT, APPROX or AUTO
            mode: Arithmetic for every solve (default: the configured mode)
            dump_lp: Where APPROX solves write their relaxation
        """
        self.method = SolveMethod(method)
        self.arith = arithmetic(mode)
        self.dump_lp = dump_lp
        self.solves: Dict[str, int] = {}

    def solve(self, instance: BavwmInstance) -> BavwmResult:
        """
        Solve with the configured method.

        AUTO uses the single-item scan for m = 1, exhaustive search while
        (n + 1)^m is within the configured cap, and the approximation otherwise.
        """
        result = self._dispatch(instance)
        key = result.method.value
        self.solves[key] = self.solves.get(key, 0) + 1
        return result

    def _dispatch(self, instance: BavwmInstance) -> BavwmResult:
        mode = self.arith.mode
        if self.method is SolveMethod.APPROX:
            return solve_approx(instance, mode, dump_lp=self.dump_lp)
        if self.method is SolveMethod.EXACT:
            return solve_exact(instance, mode)
        if instance.m == 1:
            return solve_single_item(instance, mode)
        if (instance.n + 1) ** instance.m <= get_solver_config().exhaustive_limit:
            return solve_exact(instance, mode)
        logger.info(
            "Instance too large for exhaustive search, using the approximation",
            extra={"context": {"n": instance.n, "m": instance.m}},
        )
        return solve_approx(instance, mode, dump_lp=self.dump_lp)


def solve_bavwm(
    instance: BavwmInstance,
    method: Union[SolveMethod, str] = SolveMethod.AUTO,
    mode: ModeLike = None,
    *,
    dump_lp: Optional[Union[str, Path]] = None,
) -> BavwmResult:
    """One-off solve through a fresh ``BavwmSolver``."""
    return BavwmSolver(method, mode, dump_lp=dump_lp).solve(instance)
