"""
Generalized assignment: instances, the fractional LP, and slot-matching rounding.

Every job goes to exactly one machine; machine i has capacity T_i, job j costs
p_ij of that capacity and earns c_ij. We always maximize total cost.

``st_round`` turns a feasible fractional assignment into an integral one that
earns at least as much and loads every machine to at most 2 * T_i. It splits
each machine into ceil(sum_j x_ij) unit slots, packs the job fractions into
the slots largest job first, and takes a maximum-cost matching of jobs to
slots.

Example:
    >>> gap = GapInstance(
    ...     processing=[[0, 0], [1, 1]], cost=[[0, 0], [5, 4]], capacities=[0, 1]
    ... )
    >>> frac = solve_gap_lp(gap)
    >>> fractional_cost(gap, frac)
    5.0
    >>> st_round(gap, frac).machine_of
    (1, 0)
"""

import math
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .config import get_solver_config
from .exceptions import (
    GuaranteeViolationError,
    InfeasibleError,
    InstanceValidationError,
    RoundingError,
)
from .logging import get_logger, get_solver_logger
from .lp import LinearProgram, LpStatus, Sense, solve_lp
from .model import BavwmInstance, _require_normalized
from .numeric import Arithmetic, ArithmeticMode, Number, arithmetic

logger = get_logger(__name__)

ModeLike = Union[ArithmeticMode, str, None]


@dataclass(frozen=True)
class GapInstance:
    """
    Machines x jobs generalized assignment instance.

    Attributes:
        processing: p_ij >= 0, one row per machine
        cost: c_ij of any sign, one row per machine
        capacities: T_i >= 0 per machine
        jobs: Number of jobs (taken from the rows when omitted)
    """

    processing: Tuple[Tuple[Number, ...], ...]
    cost: Tuple[Tuple[Number, ...], ...]
    capacities: Tuple[Number, ...]
    jobs: Optional[int] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "processing", tuple(tuple(r) for r in self.processing))
        object.__setattr__(self, "cost", tuple(tuple(r) for r in self.cost))
        object.__setattr__(self, "capacities", tuple(self.capacities))
        if self.jobs is None:
            object.__setattr__(self, "jobs", len(self.processing[0]) if self.processing else 0)
        self.check()

    @property
    def machines(self) -> int:
        return len(self.capacities)

    def check(self) -> None:
        """Raise InstanceValidationError on inconsistent dimensions or negative p / T."""
        if len(self.processing) != self.machines or len(self.cost) != self.machines:
            raise InstanceValidationError(
                "processing", f"expected {self.machines} machine rows", len(self.processing)
            )
        for i in range(self.machines):
            if len(self.processing[i]) != self.jobs or len(self.cost[i]) != self.jobs:
                raise InstanceValidationError("processing", f"machine {i} row length != {self.jobs}")
            if self.capacities[i] < 0:
                raise InstanceValidationError("capacities", f"machine {i} capacity is negative")
            for j, p in enumerate(self.processing[i]):
                if p < 0:
                    raise InstanceValidationError(
                        "processing", f"p[{i}][{j}] is negative", p
                    )

    def eligible(self, machine: int, job: int) -> bool:
        return self.processing[machine][job] <= self.capacities[machine]

    def to_mode(self, mode: ModeLike) -> "GapInstance":
        arith = arithmetic(mode)
        return replace(
            self,
            processing=tuple(arith.convert_all(r) for r in self.processing),
            cost=tuple(arith.convert_all(r) for r in self.cost),
            capacities=arith.convert_all(self.capacities),
        )


@dataclass(frozen=True)
class FractionalAssignment:
    """x_ij in [0, 1], machines x jobs, plus the LP value when it came from a solve."""

    x: Tuple[Tuple[Number, ...], ...]
    objective_value: Optional[Number] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", tuple(tuple(r) for r in self.x))

    def is_integral(self, arith: Optional[Arithmetic] = None) -> bool:
        arith = arith or arithmetic()
        return all(arith.is_zero(v) or arith.eq(v, 1) for row in self.x for v in row)


@dataclass(frozen=True)
class IntegralAssignment:
    """``machine_of[j]`` is the machine job j runs on."""

    machine_of: Tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "machine_of", tuple(self.machine_of))


class MachineKind(Enum):
    DUMMY = "dummy"
    HAT = "hat"
    BAR = "bar"


@dataclass(frozen=True)
class MachineRole:
    kind: MachineKind
    agent: Optional[int] = None


@dataclass(frozen=True)
class GapEmbedding:
    """
    GAP instance built from a BAVWM instance, with the machine <-> role maps.

    Machine 0 is the dummy, machines 1..n are hat machines and n+1..2n are
    bar machines, in agent order.
    """

    gap: GapInstance
    roles: Tuple[MachineRole, ...]
    hat_machines: Tuple[int, ...]
    bar_machines: Tuple[int, ...]

    @property
    def dummy(self) -> int:
        return 0

    def role_of(self, machine: int) -> MachineRole:
        return self.roles[machine]

    def machine_for(self, kind: MachineKind, agent: Optional[int] = None) -> int:
        if kind is MachineKind.DUMMY:
            return self.dummy
        if agent is None:
            raise ValueError(f"{kind.value} machines belong to an agent")
        return (self.hat_machines if kind is MachineKind.HAT else self.bar_machines)[agent]


def build_gap_from_bavwm(instance: BavwmInstance) -> GapEmbedding:
    """
    Embed a normalized BAVWM instance as a GAP instance with 2n + 1 machines.

    Dummy: p = 0, c = 0, T = 0. Hat machine of agent i: p = 0, c = w_ij, T = 0.
    Bar machine of agent i: p = v_ij, c = m_i * v_ij + w_ij, T = b_i.

    Raises:
        NotNormalizedError: If the instance is raw
    """
    _require_normalized(instance, "build_gap_from_bavwm")
    n, m = instance.n, instance.m
    zeros = tuple(0 for _ in range(m))

    processing = [zeros] + [zeros] * n + [tuple(instance.values[i]) for i in range(n)]
    cost = [zeros] + [tuple(instance.virtual_values[i]) for i in range(n)]
    cost += [
        tuple(
            instance.multipliers[i] * instance.values[i][j] + instance.virtual_values[i][j]
            for j in range(m)
        )
        for i in range(n)
    ]
    capacities = [0] + [0] * n + list(instance.budgets)

    roles = (
        (MachineRole(MachineKind.DUMMY),)
        + tuple(MachineRole(MachineKind.HAT, i) for i in range(n))
        + tuple(MachineRole(MachineKind.BAR, i) for i in range(n))
    )
    gap = GapInstance(processing, cost, capacities, jobs=m)
    return GapEmbedding(
        gap=gap,
        roles=roles,
        hat_machines=tuple(1 + i for i in range(n)),
        bar_machines=tuple(1 + n + i for i in range(n)),
    )


def build_gap_lp(gap: GapInstance) -> Tuple[LinearProgram, Dict[Tuple[int, int], int]]:
    """
    The assignment LP over eligible (machine, job) pairs.

    Returns:
        The LP and the map (machine, job) -> variable index

    Raises:
        InfeasibleError: If some job has no eligible machine
    """
    lp = LinearProgram("gap")
    index: Dict[Tuple[int, int], int] = {}
    for j in range(gap.jobs):
        for i in range(gap.machines):
            if gap.eligible(i, j):
                index[(i, j)] = lp.add_variable(f"x_{i}_{j}", objective=gap.cost[i][j])

    for j in range(gap.jobs):
        row = {index[(i, j)]: 1 for i in range(gap.machines) if (i, j) in index}
        if not row:
            raise InfeasibleError("solve_gap_lp", f"job {j} fits on no machine")
        lp.add_constraint(row, Sense.EQ, 1, name=f"job_{j}")

    for i in range(gap.machines):
        row = {
            index[(i, j)]: gap.processing[i][j]
            for j in range(gap.jobs)
            if (i, j) in index and gap.processing[i][j] != 0
        }
        # rows whose eligible jobs all have p = 0 are vacuous
        if row:
            lp.add_constraint(row, Sense.LE, gap.capacities[i], name=f"capacity_{i}")
    return lp, index


def solve_gap_lp(gap: GapInstance, mode: ModeLike = None) -> FractionalAssignment:
    """
    Optimal vertex of the generalized assignment LP.

    Raises:
        InfeasibleError: If a job has no eligible machine or capacities cannot hold the jobs
    """
    arith = arithmetic(mode)
    lp, index = build_gap_lp(gap)
    solution = solve_lp(lp, arith.mode)
    if solution.status is not LpStatus.OPTIMAL:
        raise InfeasibleError("solve_gap_lp", f"assignment LP is {solution.status.value}")

    zero = arith.zero()
    x = [[zero] * gap.jobs for _ in range(gap.machines)]
    for (i, j), k in index.items():
        x[i][j] = arith.clip01(solution.values[k])
    return FractionalAssignment(x, solution.objective_value)


def fractional_cost(gap: GapInstance, frac: FractionalAssignment) -> Number:
    total: Number = 0
    for i in range(gap.machines):
        for j in range(gap.jobs):
            if frac.x[i][j]:
                total = total + gap.cost[i][j] * frac.x[i][j]
    return total


def assignment_cost(gap: GapInstance, assignment: IntegralAssignment) -> Number:
    return sum((gap.cost[i][j] for j, i in enumerate(assignment.machine_of)), 0)


def machine_loads(gap: GapInstance, assignment: IntegralAssignment) -> Tuple[Number, ...]:
    loads: List[Number] = [0] * gap.machines
    for j, i in enumerate(assignment.machine_of):
        loads[i] = loads[i] + gap.processing[i][j]
    return tuple(loads)


def _check_fractional(gap: GapInstance, x: Sequence[Sequence[Number]], arith: Arithmetic) -> None:
    if len(x) != gap.machines or any(len(row) != gap.jobs for row in x):
        raise RoundingError("fractional assignment has the wrong shape")
    for j in range(gap.jobs):
        column = [x[i][j] for i in range(gap.machines)]
        for i, value in enumerate(column):
            if arith.lt(value, 0) or arith.gt(value, 1):
                raise RoundingError(f"x[{i}][{j}] = {value} is outside [0, 1]")
            if arith.is_positive(value) and not gap.eligible(i, j):
                raise RoundingError(
                    f"job {j} is placed on machine {i} where it does not fit",
                    {"processing": str(gap.processing[i][j]), "capacity": str(gap.capacities[i])},
                )
        total = sum(column, arith.zero())
        if not arith.eq(total, 1):
            raise RoundingError(f"job {j} is assigned {total} times", {"job": j})
    for i in range(gap.machines):
        load = sum((gap.processing[i][j] * x[i][j] for j in range(gap.jobs)), arith.zero())
        if arith.gt(load, gap.capacities[i]):
            raise RoundingError(
                f"machine {i} is loaded {load} over capacity {gap.capacities[i]}", {"machine": i}
            )


def _pack_slots(
    gap: GapInstance, x: Sequence[Sequence[Number]], arith: Arithmetic
) -> List[Tuple[int, int, int, Number]]:
    """Greedy slot packing; returns (job, machine, slot, fraction) edges."""
    edges: List[Tuple[int, int, int, Number]] = []
    for i in range(gap.machines):
        jobs = [j for j in range(gap.jobs) if x[i][j] > 0]
        if not jobs:
            continue
        jobs.sort(key=lambda j: (-gap.processing[i][j], j))
        total = sum((x[i][j] for j in jobs), arith.zero())
        slots = max(1, math.ceil(total - arith.tol))

        slot, room = 0, arith.convert(1)
        packed: Dict[Tuple[int, int], Number] = {}
        for j in jobs:
            remaining = x[i][j]
            while remaining > arith.tol:
                put = min(remaining, room)
                key = (j, slot)
                packed[key] = packed.get(key, arith.zero()) + put
                remaining = remaining - put
                room = room - put
                if room <= arith.tol:
                    if slot + 1 < slots:
                        slot, room = slot + 1, arith.convert(1)
                    else:
                        # float drift past the last slot stays on it
                        room = arith.convert(1)
        for (j, s), fraction in packed.items():
            edges.append((j, i, s, fraction))
    return edges


def st_round(
    gap: GapInstance, frac: FractionalAssignment, mode: ModeLike = None
) -> IntegralAssignment:
    """
    Round a feasible fractional assignment with the slot-matching construction.

    Args:
        gap: The instance
        frac: Fractional assignment satisfying assignment, capacity and eligibility
        mode: Arithmetic for the precondition checks and slot packing; the
            matching itself is always solved exactly

    Returns:
        Integral assignment with cost >= fractional cost and load <= 2 * T_i

    Raises:
        RoundingError: If ``frac`` is not a feasible fractional assignment
        GuaranteeViolationError: If the result breaks the cost or load bound
    """
    arith = arithmetic(mode)
    gap_m = gap.to_mode(arith.mode)
    x = [list(arith.convert_all(row)) for row in frac.x]
    _check_fractional(gap_m, x, arith)

    if not arith.exact:
        threshold = get_solver_config().zero_fraction_threshold
        x = [[v if v >= threshold else 0.0 for v in row] for row in x]

    edges = _pack_slots(gap_m, x, arith)

    # Max-cost job/slot matching; bipartite vertices are integral
    matching = LinearProgram("slot_matching")
    slot_rows: Dict[Tuple[int, int], Dict[int, int]] = {}
    job_rows: Dict[int, Dict[int, int]] = {}
    for k, (j, i, s, _) in enumerate(edges):
        var = matching.add_variable(f"y_{j}_{i}_{s}", objective=gap_m.cost[i][j])
        assert var == k
        job_rows.setdefault(j, {})[var] = 1
        slot_rows.setdefault((i, s), {})[var] = 1
    for j in range(gap.jobs):
        matching.add_constraint(job_rows.get(j, {}), Sense.EQ, 1, name=f"job_{j}")
    for (i, s), row in sorted(slot_rows.items()):
        matching.add_constraint(row, Sense.LE, 1, name=f"slot_{i}_{s}")

    solution = solve_lp(matching, ArithmeticMode.EXACT)
    if solution.status is not LpStatus.OPTIMAL:
        raise RoundingError(f"slot matching LP is {solution.status.value}")

    machine_of: List[Optional[int]] = [None] * gap.jobs
    half = Fraction(1, 2)
    for k, (j, i, _, _) in enumerate(edges):
        if solution.values[k] > half:
            if machine_of[j] is not None:
                raise RoundingError(f"job {j} matched twice")
            machine_of[j] = i
    missing = [j for j, i in enumerate(machine_of) if i is None]
    if missing:
        raise RoundingError("slot matching left jobs unassigned", {"jobs": missing})

    result = IntegralAssignment(tuple(machine_of))  # type: ignore[arg-type]
    _check_rounding_bounds(gap_m, frac, result, arith)
    return result


def _check_rounding_bounds(
    gap: GapInstance, frac: FractionalAssignment, result: IntegralAssignment, arith: Arithmetic
) -> None:
    before = fractional_cost(gap, FractionalAssignment([arith.convert_all(r) for r in frac.x]))
    after = assignment_cost(gap, result)
    loads = machine_loads(gap, result)

    if arith.lt(after, before):
        raise GuaranteeViolationError("rounded cost >= fractional cost", after, before)

    worst_ratio = 0.0
    for i, load in enumerate(loads):
        bound = 2 * gap.capacities[i]
        if arith.gt(load, bound):
            raise GuaranteeViolationError(f"load of machine {i} <= 2 * capacity", load, bound)
        if gap.capacities[i] > 0:
            worst_ratio = max(worst_ratio, float(load) / float(gap.capacities[i]))

    get_solver_logger().log_rounding(gap.machines, gap.jobs, before, after, worst_ratio)
