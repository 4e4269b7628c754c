"""
Budgeted-additive virtual welfare maximization: instances, allocations, prices.

An instance describes n agents and m items. Agent i has values v_ij >= 0, a
budget b_i >= 0, a price multiplier m_i and virtual values w_ij of any sign.
The value of an allocation is

    sum_i m_i * min(b_i, sum_{j in S_i} v_ij) + sum_i sum_{j in S_i} w_ij

where S_i is the bundle of agent i. Normalizing an instance sets negative
multipliers to zero and clamps every v_ij to b_i; neither change alters the
value of any allocation once prices are chosen optimally.

Agents are 0-based in Python. ``UNASSIGNED`` (``None``) marks an item that no
agent receives.

Example:
    >>> instance = BavwmInstance(
    ...     n=1, m=2, values=[[3, 3]], budgets=[3], multipliers=[1],
    ...     virtual_values=[[-2, -2]],
    ... )
    >>> instance = normalize(instance)
    >>> objective(instance, Allocation((0, 0)))
    -1
    >>> objective(instance, Allocation((0, UNASSIGNED)))
    1
"""

import math
from dataclasses import dataclass, field, replace
from typing import Any, List, Optional, Sequence, Tuple

from .exceptions import InstanceValidationError, InvalidAllocationError, NotNormalizedError
from .numeric import Arithmetic, ArithmeticMode, Number, arithmetic

UNASSIGNED: Optional[int] = None

AgentSlot = Optional[int]


def _matrix(rows: Sequence[Sequence[Any]]) -> Tuple[Tuple[Any, ...], ...]:
    return tuple(tuple(row) for row in rows)


@dataclass(frozen=True)
class Violation:
    """One broken invariant, located by field name and index."""

    field: str
    index: Tuple[int, ...]
    message: str

    def __str__(self) -> str:
        where = f"{self.field}{list(self.index)}" if self.index else self.field
        return f"{where}: {self.message}"


@dataclass(frozen=True)
class BavwmInstance:
    """
    Input of budgeted-additive virtual welfare maximization.

    Attributes:
        n: Number of agents
        m: Number of items
        values: n x m matrix of non-negative item values v_ij
        budgets: Length-n budgets b_i >= 0
        multipliers: Length-n price multipliers m_i (any sign before normalization)
        virtual_values: n x m matrix of virtual values w_ij (any sign)
        normalized: True once multipliers are non-negative and values clamped to budgets
    """

    n: int
    m: int
    values: Tuple[Tuple[Number, ...], ...]
    budgets: Tuple[Number, ...]
    multipliers: Tuple[Number, ...]
    virtual_values: Tuple[Tuple[Number, ...], ...]
    normalized: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _matrix(self.values))
        object.__setattr__(self, "budgets", tuple(self.budgets))
        object.__setattr__(self, "multipliers", tuple(self.multipliers))
        object.__setattr__(self, "virtual_values", _matrix(self.virtual_values))

    def to_mode(self, mode: ArithmeticMode) -> "BavwmInstance":
        """Return a copy with every number converted to the given arithmetic mode."""
        arith = arithmetic(mode)
        return replace(
            self,
            values=tuple(arith.convert_all(row) for row in self.values),
            budgets=arith.convert_all(self.budgets),
            multipliers=arith.convert_all(self.multipliers),
            virtual_values=tuple(arith.convert_all(row) for row in self.virtual_values),
        )


@dataclass(frozen=True)
class Allocation:
    """Integral assignment of items to agents; one entry per item."""

    assignment: Tuple[AgentSlot, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "assignment", tuple(self.assignment))

    @classmethod
    def empty(cls, m: int) -> "Allocation":
        return cls((UNASSIGNED,) * m)

    @property
    def m(self) -> int:
        return len(self.assignment)

    def bundle(self, agent: int) -> Tuple[int, ...]:
        """Items held by ``agent``."""
        return tuple(j for j, owner in enumerate(self.assignment) if owner == agent)

    def allocated_items(self) -> Tuple[int, ...]:
        return tuple(j for j, owner in enumerate(self.assignment) if owner is not UNASSIGNED)


@dataclass(frozen=True)
class SplitAllocation:
    """
    Allocation split into budget-counted ("bar") and additive-only ("hat") parts.

    An item is bar-assigned, hat-assigned, or neither; never both.
    """

    bar: Tuple[AgentSlot, ...]
    hat: Tuple[AgentSlot, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "bar", tuple(self.bar))
        object.__setattr__(self, "hat", tuple(self.hat))
        if len(self.bar) != len(self.hat):
            raise InvalidAllocationError(
                f"bar part covers {len(self.bar)} items, hat part {len(self.hat)}"
            )
        for j, (b, h) in enumerate(zip(self.bar, self.hat)):
            if b is not UNASSIGNED and h is not UNASSIGNED:
                raise InvalidAllocationError("item is both bar- and hat-assigned", item=j)

    @classmethod
    def empty(cls, m: int) -> "SplitAllocation":
        return cls((UNASSIGNED,) * m, (UNASSIGNED,) * m)

    @property
    def m(self) -> int:
        return len(self.bar)

    def bar_items(self, agent: int) -> Tuple[int, ...]:
        return tuple(j for j, owner in enumerate(self.bar) if owner == agent)

    def hat_items(self, agent: int) -> Tuple[int, ...]:
        return tuple(j for j, owner in enumerate(self.hat) if owner == agent)

    def merged(self) -> Allocation:
        """Forget the split: every bar or hat item goes to its agent."""
        return Allocation(tuple(b if b is not UNASSIGNED else h for b, h in zip(self.bar, self.hat)))


@dataclass(frozen=True)
class PriceVector:
    """Per-agent payments p_i."""

    prices: Tuple[Number, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "prices", tuple(self.prices))

    def __len__(self) -> int:
        return len(self.prices)

    def __getitem__(self, agent: int) -> Number:
        return self.prices[agent]

    def total(self) -> Number:
        return sum(self.prices, 0)


def _is_number(value: Any) -> bool:
    # rational strings are parsed by serialization, never here
    if isinstance(value, (bool, str, bytes)):
        return False
    try:
        return not math.isnan(float(value))
    except (TypeError, ValueError):
        return False


def validate(instance: BavwmInstance) -> List[Violation]:
    """
    Check every structural and sign invariant of an instance.

    Returns:
        Empty list iff the instance is well formed; otherwise one Violation per
        broken invariant, naming the field and index.

    Examples:
        >>> validate(BavwmInstance(1, 1, [[-1]], [1], [1], [[0]]))
        [Violation(field='values', index=(0, 0), message='value must be non-negative, got -1')]
    """
    issues: List[Violation] = []
    n, m = instance.n, instance.m

    if not isinstance(n, int) or n < 0:
        issues.append(Violation("n", (), f"agent count must be a non-negative integer, got {n}"))
        return issues
    if not isinstance(m, int) or m < 0:
        issues.append(Violation("m", (), f"item count must be a non-negative integer, got {m}"))
        return issues

    for name, vector in (("budgets", instance.budgets), ("multipliers", instance.multipliers)):
        if len(vector) != n:
            issues.append(Violation(name, (), f"expected {n} entries, got {len(vector)}"))
    for name, matrix in (("values", instance.values), ("virtual_values", instance.virtual_values)):
        if len(matrix) != n:
            issues.append(Violation(name, (), f"expected {n} rows, got {len(matrix)}"))
        for i, row in enumerate(matrix):
            if len(row) != m:
                issues.append(Violation(name, (i,), f"expected {m} entries, got {len(row)}"))
    if issues:
        return issues

    for i in range(n):
        for name, value in (("budgets", instance.budgets[i]), ("multipliers", instance.multipliers[i])):
            if not _is_number(value):
                issues.append(Violation(name, (i,), f"not a number: {value!r}"))
        for j in range(m):
            for name, value in (
                ("values", instance.values[i][j]),
                ("virtual_values", instance.virtual_values[i][j]),
            ):
                if not _is_number(value):
                    issues.append(Violation(name, (i, j), f"not a number: {value!r}"))
    if issues:
        return issues

    for i in range(n):
        budget = instance.budgets[i]
        if budget < 0:
            issues.append(Violation("budgets", (i,), f"budget must be non-negative, got {budget}"))
        for j in range(m):
            value = instance.values[i][j]
            if value < 0:
                issues.append(
                    Violation("values", (i, j), f"value must be non-negative, got {value}")
                )

    if instance.normalized:
        for i in range(n):
            if instance.multipliers[i] < 0:
                issues.append(
                    Violation(
                        "multipliers",
                        (i,),
                        f"normalized multiplier must be non-negative, got {instance.multipliers[i]}",
                    )
                )
            for j in range(m):
                if instance.values[i][j] > instance.budgets[i]:
                    issues.append(
                        Violation(
                            "values",
                            (i, j),
                            f"normalized value {instance.values[i][j]} exceeds budget "
                            f"{instance.budgets[i]}",
                        )
                    )

    return issues


def ensure_valid(instance: BavwmInstance) -> BavwmInstance:
    """Raise InstanceValidationError on the first violation; return the instance otherwise."""
    issues = validate(instance)
    if issues:
        first = issues[0]
        raise InstanceValidationError(
            first.field, first.message, {"index": list(first.index), "count": len(issues)}
        )
    return instance


def normalize(instance: BavwmInstance) -> BavwmInstance:
    """
    Set negative multipliers to 0 and clamp every value to its agent's budget.

    The result has ``normalized=True``. Normalizing twice changes nothing.
    """
    ensure_valid(instance)
    zero = instance.multipliers[0] * 0 if instance.multipliers else 0
    multipliers = tuple(mi if mi >= 0 else zero for mi in instance.multipliers)
    values = tuple(
        tuple(min(v, budget) for v in row) for row, budget in zip(instance.values, instance.budgets)
    )
    return replace(instance, values=values, multipliers=multipliers, normalized=True)


def _require_normalized(instance: BavwmInstance, operation: str) -> None:
    if not instance.normalized:
        raise NotNormalizedError(operation)


def _check_fits(instance: BavwmInstance, assignment: Sequence[AgentSlot], what: str) -> None:
    if len(assignment) != instance.m:
        raise InvalidAllocationError(
            f"{what} covers {len(assignment)} items, instance has {instance.m}"
        )
    for j, owner in enumerate(assignment):
        if owner is UNASSIGNED:
            continue
        if isinstance(owner, bool) or not isinstance(owner, int) or not 0 <= owner < instance.n:
            raise InvalidAllocationError(f"{what} names unknown agent {owner!r}", item=j)


def bundle_values(instance: BavwmInstance, alloc: Allocation) -> Tuple[Number, ...]:
    """Additive value sum_{j in S_i} v_ij of each agent's bundle."""
    _check_fits(instance, alloc.assignment, "allocation")
    totals: List[Number] = [0] * instance.n
    for j, owner in enumerate(alloc.assignment):
        if owner is not UNASSIGNED:
            totals[owner] = totals[owner] + instance.values[owner][j]
    return tuple(totals)


def _evaluate(instance: BavwmInstance, alloc: Allocation) -> Number:
    total: Number = 0
    for i, value in enumerate(bundle_values(instance, alloc)):
        multiplier = instance.multipliers[i]
        if multiplier > 0:
            total = total + multiplier * min(instance.budgets[i], value)
    for j, owner in enumerate(alloc.assignment):
        if owner is not UNASSIGNED:
            total = total + instance.virtual_values[owner][j]
    return total


def objective(instance: BavwmInstance, alloc: Allocation) -> Number:
    """
    Virtual revenue plus virtual welfare of an allocation.

    Raises:
        NotNormalizedError: If the instance has not been normalized
        InvalidAllocationError: If the allocation does not fit the instance
    """
    _require_normalized(instance, "objective")
    return _evaluate(instance, alloc)


def raw_objective(instance: BavwmInstance, alloc: Allocation) -> Number:
    """
    Value of an allocation on a raw instance when prices are chosen optimally.

    Agents with a non-positive multiplier pay nothing and contribute only
    their virtual values; the others pay min(b_i, bundle value). This equals
    ``objective(normalize(instance), alloc)`` for every allocation.
    """
    ensure_valid(instance)
    return _evaluate(instance, alloc)


def split_objective(instance: BavwmInstance, split: SplitAllocation) -> Number:
    """
    Face-value credit of a split allocation, without budget truncation.

    Returns sum m_i v_ij over bar items plus sum w_ij over bar and hat items.
    """
    _require_normalized(instance, "split_objective")
    _check_fits(instance, split.bar, "bar part")
    _check_fits(instance, split.hat, "hat part")
    total: Number = 0
    for j, (b, h) in enumerate(zip(split.bar, split.hat)):
        if b is not UNASSIGNED and h is not UNASSIGNED:
            raise InvalidAllocationError("item is both bar- and hat-assigned", item=j)
        if b is not UNASSIGNED:
            total = total + instance.multipliers[b] * instance.values[b][j]
            total = total + instance.virtual_values[b][j]
        elif h is not UNASSIGNED:
            total = total + instance.virtual_values[h][j]
    return total


def bar_loads(instance: BavwmInstance, split: SplitAllocation) -> Tuple[Number, ...]:
    """Sum of v_ij over each agent's bar items."""
    _check_fits(instance, split.bar, "bar part")
    loads: List[Number] = [0] * instance.n
    for j, owner in enumerate(split.bar):
        if owner is not UNASSIGNED:
            loads[owner] = loads[owner] + instance.values[owner][j]
    return tuple(loads)


def prices_from_allocation(instance: BavwmInstance, alloc: Allocation) -> PriceVector:
    """
    Revenue-optimal prices for an allocation.

    Agent i pays min(b_i, bundle value) when m_i > 0 and nothing otherwise.
    """
    values = bundle_values(instance, alloc)
    prices = []
    for i, value in enumerate(values):
        if instance.multipliers[i] > 0:
            prices.append(min(instance.budgets[i], value))
        else:
            prices.append(value * 0)
    return PriceVector(tuple(prices))


def from_goop(
    values: Sequence[Sequence[Any]],
    budgets: Sequence[Any],
    goop_multipliers: Sequence[Any],
    virtual_values: Sequence[Sequence[Any]],
) -> BavwmInstance:
    """
    Build an instance from the general-objective form.

    In that form the revenue term of agent i is (m_i + 1) * p_i, so the
    multiplier used here is ``goop_multipliers[i] + 1``. The result is raw
    (not normalized).
    """
    n = len(budgets)
    m = len(values[0]) if values else 0
    return BavwmInstance(
        n=n,
        m=m,
        values=values,
        budgets=budgets,
        multipliers=tuple(mi + 1 for mi in goop_multipliers),
        virtual_values=virtual_values,
    )


def goop_objective(instance: BavwmInstance, alloc: Allocation, prices: PriceVector) -> Number:
    """Virtual revenue plus virtual welfare for an explicit price vector."""
    _check_fits(instance, alloc.assignment, "allocation")
    if len(prices) != instance.n:
        raise InvalidAllocationError(f"expected {instance.n} prices, got {len(prices)}")
    total: Number = 0
    for i in range(instance.n):
        total = total + instance.multipliers[i] * prices[i]
    for j, owner in enumerate(alloc.assignment):
        if owner is not UNASSIGNED:
            total = total + instance.virtual_values[owner][j]
    return total


def check_prices(
    instance: BavwmInstance,
    alloc: Allocation,
    prices: PriceVector,
    arith: Optional[Arithmetic] = None,
) -> List[Violation]:
    """
    List price entries that break no-positive-transfers, budgets, or ex-post IR.

    Returns:
        Empty list iff 0 <= p_i <= min(b_i, bundle value) for every agent.
    """
    arith = arith or arithmetic()
    if len(prices) != instance.n:
        return [Violation("prices", (), f"expected {instance.n} prices, got {len(prices)}")]
    values = bundle_values(instance, alloc)
    issues: List[Violation] = []
    for i, price in enumerate(prices.prices):
        if arith.lt(price, 0):
            issues.append(Violation("prices", (i,), f"negative payment {price}"))
        if arith.gt(price, instance.budgets[i]):
            issues.append(
                Violation("prices", (i,), f"payment {price} exceeds budget {instance.budgets[i]}")
            )
        if arith.gt(price, values[i]):
            issues.append(
                Violation("prices", (i,), f"payment {price} exceeds bundle value {values[i]}")
            )
    return issues
