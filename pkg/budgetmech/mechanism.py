"""
Desk-scale revenue-optimal mechanisms for budget-constrained additive bidders.

A finite ``Prior`` lists each bidder's types (item values, budget,
probability); bidders are independent. ``solve_optimal_mechanism`` writes the
revenue-maximizing LP explicitly over every type profile t and every
deterministic allocation a:

- lottery weights lambda(t, a) >= 0 summing to 1 per profile,
- payment masses 0 <= z_i(t, a) <= lambda(t, a) * min(b_i, v_i . a_i), which
  is no positive transfers, ex-post IR and ex-post budgets at once,
- interim BIC (all misreports, or only misreports with a lower budget),
- interim IR,

and maximizes expected revenue. Checkers (``check_bic``, ``check_ex_post``,
``check_interim_ir``, ``check_lotteries``) audit any lottery table, including
hand-built ones and the table of a virtual welfare maximizer
(``evaluate_virtual_welfare_mechanism``).

``run_virtual_welfare_mechanism`` is the mechanism run on reported types:
sample one virtual mapping, build the induced BAVWM instance, solve it and
charge min(b_i, bundle value) to bidders with a positive multiplier.

Example:
    >>> prior = Prior(m=1, bidders=[BidderPrior([TypeSpec([10], 2, 1)])])
    >>> solve_optimal_mechanism(prior).revenue
    2.0
"""

import itertools
from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .bavwm import BavwmSolver, SolveMethod
from .config import get_solver_config
from .exceptions import (
    MechanismError,
    OffSupportTypeError,
    PriorValidationError,
    SizeLimitError,
)
from .logging import get_logger, get_performance_logger, log_function_call
from .lp import LinearProgram, LpStatus, Sense, solve_lp
from .model import UNASSIGNED, Allocation, AgentSlot, BavwmInstance, PriceVector
from .numeric import ArithmeticMode, Number, arithmetic

logger = get_logger(__name__)

ModeLike = Union[ArithmeticMode, str, None]
Profile = Tuple[int, ...]
AllocationTuple = Tuple[AgentSlot, ...]


class BicMode(Enum):
    """Which misreports the incentive constraints cover."""

    FULL = "full"
    BUDGET_DOWNWARD = "budget-downward"


@dataclass(frozen=True)
class TypeSpec:
    """One type: item values, budget and its probability."""

    values: Tuple[Number, ...]
    budget: Number
    probability: Number

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(self.values))

    def bundle_value(self, allocation: AllocationTuple, bidder: int) -> Number:
        return sum((self.values[j] for j, owner in enumerate(allocation) if owner == bidder), 0)


@dataclass(frozen=True)
class BidderPrior:
    types: Tuple[TypeSpec, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "types", tuple(self.types))


@dataclass(frozen=True)
class Prior:
    """
    Independent finite type distributions, one per bidder.

    Raises:
        PriorValidationError: On construction when the prior is malformed
    """

    m: int
    bidders: Tuple[BidderPrior, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "bidders", tuple(self.bidders))
        self.check()

    @property
    def n(self) -> int:
        return len(self.bidders)

    def check(self) -> None:
        tolerance = get_solver_config().probability_tolerance
        if not isinstance(self.m, int) or self.m < 0:
            raise PriorValidationError(f"item count must be a non-negative integer, got {self.m}")
        for i, bidder in enumerate(self.bidders):
            if not bidder.types:
                raise PriorValidationError("bidder has no types", i)
            total: Number = 0
            for k, spec in enumerate(bidder.types):
                if len(spec.values) != self.m:
                    raise PriorValidationError(
                        f"type {k} has {len(spec.values)} values for {self.m} items", i
                    )
                if any(v < 0 for v in spec.values):
                    raise PriorValidationError(f"type {k} has a negative value", i)
                if spec.budget < 0:
                    raise PriorValidationError(f"type {k} has a negative budget", i)
                if not 0 < spec.probability <= 1:
                    raise PriorValidationError(
                        f"type {k} probability {spec.probability} is outside (0, 1]", i
                    )
                total = total + spec.probability
            if abs(total - 1) > tolerance:
                raise PriorValidationError(f"type probabilities sum to {total}", i)

    def to_mode(self, mode: ModeLike) -> "Prior":
        arith = arithmetic(mode)
        bidders = tuple(
            BidderPrior(
                tuple(
                    TypeSpec(
                        arith.convert_all(spec.values),
                        arith.convert(spec.budget),
                        arith.convert(spec.probability),
                    )
                    for spec in bidder.types
                )
            )
            for bidder in self.bidders
        )
        return replace(self, bidders=bidders)

    def type_of(self, bidder: int, index: int) -> TypeSpec:
        return self.bidders[bidder].types[index]

    def profiles(self) -> Iterator[Profile]:
        """All type profiles in lexicographic order of type indices."""
        return itertools.product(*(range(len(b.types)) for b in self.bidders))

    def profile_probability(self, profile: Profile, skip: Optional[int] = None) -> Number:
        """Pr[t], or Pr[t_-skip] when ``skip`` names a bidder."""
        probability: Number = 1
        for i, k in enumerate(profile):
            if i != skip:
                probability = probability * self.bidders[i].types[k].probability
        return probability

    @property
    def profile_count(self) -> int:
        count = 1
        for bidder in self.bidders:
            count *= len(bidder.types)
        return count


def enumerate_allocations(n: int, m: int) -> List[AllocationTuple]:
    """All (n + 1)^m deterministic allocations, unassigned before agent 0."""
    options: Tuple[AgentSlot, ...] = (UNASSIGNED,) + tuple(range(n))
    return list(itertools.product(options, repeat=m))


@dataclass(frozen=True)
class LotteryEntry:
    """
    One support point of a profile's lottery.

    ``payments[i]`` is the payment mass z_i = weight * payment of bidder i.
    """

    allocation: AllocationTuple
    weight: Number
    payments: Tuple[Number, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "allocation", tuple(self.allocation))
        object.__setattr__(self, "payments", tuple(self.payments))


@dataclass(frozen=True)
class InterimForm:
    """
    Marginal allocation probabilities pi[i][k][j] and expected payments p[i][k].

    Indexed by bidder, then type index, then item.
    """

    allocation: Tuple[Tuple[Tuple[Number, ...], ...], ...]
    payments: Tuple[Tuple[Number, ...], ...]


@dataclass(frozen=True)
class MechanismSolution:
    """
    Lottery table of a mechanism on every type profile.

    Attributes:
        table: (profile, lottery entries) pairs in profile order
        revenue: Expected revenue under the prior
        bic_mode: Incentive constraints the table was solved under, if any
        mode: Arithmetic of the numbers in the table
        interim: Interim form derived from the table
    """

    table: Tuple[Tuple[Profile, Tuple[LotteryEntry, ...]], ...]
    revenue: Number
    bic_mode: Optional[BicMode]
    mode: ArithmeticMode
    interim: InterimForm

    @cached_property
    def _index(self) -> Dict[Profile, Tuple[LotteryEntry, ...]]:
        return {profile: entries for profile, entries in self.table}

    def lottery(self, profile: Profile) -> Tuple[LotteryEntry, ...]:
        return self._index.get(tuple(profile), ())


def build_solution(
    prior: Prior,
    table: Union[Mapping[Profile, Sequence[LotteryEntry]], Sequence[Tuple[Profile, Sequence[LotteryEntry]]]],
    bic_mode: Optional[BicMode] = None,
    mode: ModeLike = None,
) -> MechanismSolution:
    """Wrap a lottery table, computing its interim form and revenue."""
    arith = arithmetic(mode)
    items = table.items() if isinstance(table, Mapping) else table
    rows = tuple(sorted(((tuple(p), tuple(e)) for p, e in items), key=lambda row: row[0]))
    draft = MechanismSolution(
        table=rows,
        revenue=arith.zero(),
        bic_mode=bic_mode,
        mode=arith.mode,
        interim=InterimForm((), ()),
    )
    return replace(
        draft,
        revenue=expected_revenue(draft, prior),
        interim=interim_form(draft, prior),
    )


def interim_form(solution: MechanismSolution, prior: Prior) -> InterimForm:
    """Marginalize the lottery table over the other bidders' types."""
    pi = [
        [[0 for _ in range(prior.m)] for _ in bidder.types] for bidder in prior.bidders
    ]
    pay = [[0 for _ in bidder.types] for bidder in prior.bidders]
    for profile in prior.profiles():
        entries = solution.lottery(profile)
        for i, k in enumerate(profile):
            others = prior.profile_probability(profile, skip=i)
            for entry in entries:
                if entry.weight:
                    for j, owner in enumerate(entry.allocation):
                        if owner == i:
                            pi[i][k][j] = pi[i][k][j] + others * entry.weight
                if entry.payments[i]:
                    pay[i][k] = pay[i][k] + others * entry.payments[i]
    return InterimForm(
        tuple(tuple(tuple(row) for row in bidder) for bidder in pi),
        tuple(tuple(bidder) for bidder in pay),
    )


def expected_revenue(solution: MechanismSolution, prior: Prior) -> Number:
    total: Number = 0
    for profile in prior.profiles():
        probability = prior.profile_probability(profile)
        for entry in solution.lottery(profile):
            total = total + probability * sum(entry.payments, 0)
    return total


def _covered(prior: Prior, bidder: int, true_k: int, report_k: int, bic_mode: BicMode) -> bool:
    if true_k == report_k:
        return False
    if bic_mode is BicMode.FULL:
        return True
    return prior.type_of(bidder, report_k).budget <= prior.type_of(bidder, true_k).budget


def _utility(form: InterimForm, prior: Prior, bidder: int, true_k: int, report_k: int) -> Number:
    values = prior.type_of(bidder, true_k).values
    gain = sum((form.allocation[bidder][report_k][j] * values[j] for j in range(prior.m)), 0)
    return gain - form.payments[bidder][report_k]


@dataclass(frozen=True)
class BicSlack:
    """u(true report) - u(misreport) for one bidder; negative means a profitable lie."""

    bidder: int
    true_type: int
    reported_type: int
    slack: Number


def bic_slacks(
    solution: MechanismSolution, prior: Prior, bic_mode: Optional[BicMode] = None
) -> List[BicSlack]:
    """Slack of every incentive constraint covered by ``bic_mode``."""
    bic_mode = bic_mode or solution.bic_mode or BicMode.FULL
    form = interim_form(solution, prior)
    slacks: List[BicSlack] = []
    for i, bidder in enumerate(prior.bidders):
        for k in range(len(bidder.types)):
            truthful = _utility(form, prior, i, k, k)
            for r in range(len(bidder.types)):
                if _covered(prior, i, k, r, bic_mode):
                    slacks.append(BicSlack(i, k, r, truthful - _utility(form, prior, i, k, r)))
    return slacks


def check_bic(
    solution: MechanismSolution,
    prior: Prior,
    bic_mode: Optional[BicMode] = None,
    tol: float = 1e-7,
) -> List[BicSlack]:
    """
    Incentive constraints broken by more than ``tol``.

    Returns:
        Empty list iff the mechanism is ``tol``-BIC under ``bic_mode``
    """
    return [s for s in bic_slacks(solution, prior, bic_mode) if s.slack < -tol]


def bic_epsilon(
    solution: MechanismSolution, prior: Prior, bic_mode: Optional[BicMode] = None
) -> Number:
    """Smallest epsilon for which the mechanism is epsilon-BIC."""
    return max([-s.slack for s in bic_slacks(solution, prior, bic_mode)] + [0])


class ExPostKind(Enum):
    NO_POSITIVE_TRANSFERS = "no_positive_transfers"
    EX_POST_IR = "ex_post_ir"
    EX_POST_BUDGET = "ex_post_budget"


@dataclass(frozen=True)
class ExPostViolation:
    profile: Profile
    allocation: AllocationTuple
    bidder: int
    kind: ExPostKind
    amount: Number


def check_ex_post(
    solution: MechanismSolution, prior: Prior, tol: float = 1e-7
) -> List[ExPostViolation]:
    """
    Support points whose payment mass breaks 0 <= z <= weight * min(budget, bundle value).

    Returns:
        Empty list iff every bound holds within ``tol``
    """
    issues: List[ExPostViolation] = []
    for profile in prior.profiles():
        for entry in solution.lottery(profile):
            for i, z in enumerate(entry.payments):
                spec = prior.type_of(i, profile[i])
                if z < -tol:
                    issues.append(
                        ExPostViolation(profile, entry.allocation, i, ExPostKind.NO_POSITIVE_TRANSFERS, -z)
                    )
                excess_value = z - entry.weight * spec.bundle_value(entry.allocation, i)
                if excess_value > tol:
                    issues.append(
                        ExPostViolation(profile, entry.allocation, i, ExPostKind.EX_POST_IR, excess_value)
                    )
                excess_budget = z - entry.weight * spec.budget
                if excess_budget > tol:
                    issues.append(
                        ExPostViolation(
                            profile, entry.allocation, i, ExPostKind.EX_POST_BUDGET, excess_budget
                        )
                    )
    return issues


def check_interim_ir(
    solution: MechanismSolution, prior: Prior, tol: float = 1e-7
) -> List[Tuple[int, int, Number]]:
    """(bidder, type, expected utility) for every type with utility below -tol."""
    form = interim_form(solution, prior)
    issues = []
    for i, bidder in enumerate(prior.bidders):
        for k in range(len(bidder.types)):
            utility = _utility(form, prior, i, k, k)
            if utility < -tol:
                issues.append((i, k, utility))
    return issues


def check_lotteries(solution: MechanismSolution, prior: Prior, tol: float = 1e-7) -> List[str]:
    """Profiles whose lottery has negative weights, bad shapes or does not sum to 1."""
    issues: List[str] = []
    for profile in prior.profiles():
        entries = solution.lottery(profile)
        total: Number = 0
        for entry in entries:
            if len(entry.allocation) != prior.m or len(entry.payments) != prior.n:
                issues.append(f"profile {profile}: entry {entry.allocation} has the wrong shape")
                continue
            if any(owner is not UNASSIGNED and not 0 <= owner < prior.n for owner in entry.allocation):
                issues.append(f"profile {profile}: entry {entry.allocation} names an unknown bidder")
            if entry.weight < -tol:
                issues.append(f"profile {profile}: negative weight {entry.weight}")
            total = total + entry.weight
        if abs(total - 1) > tol:
            issues.append(f"profile {profile}: weights sum to {total}")
    return issues


def _payment_cap(spec: TypeSpec, allocation: AllocationTuple, bidder: int) -> Number:
    return min(spec.budget, spec.bundle_value(allocation, bidder))


@log_function_call
def solve_optimal_mechanism(
    prior: Prior,
    bic_mode: Union[BicMode, str] = BicMode.FULL,
    mode: ModeLike = None,
    *,
    max_variables: Optional[int] = None,
) -> MechanismSolution:
    """
    Revenue-optimal BIC, interim IR, ex-post IR and budget-respecting mechanism.

    Args:
        prior: Independent finite prior
        bic_mode: FULL covers every misreport; BUDGET_DOWNWARD only reports
            whose budget is at most the true budget
        mode: LP arithmetic
        max_variables: Cap on profiles * allocations (default: configured cap)

    Returns:
        MechanismSolution with the optimal lottery table and revenue

    Raises:
        SizeLimitError: If the LP would be too large
        MechanismError: If the LP is not optimal (the null mechanism is always feasible)
    """
    bic_mode = BicMode(bic_mode)
    arith = arithmetic(mode)
    prior = prior.to_mode(arith.mode)
    allocations = enumerate_allocations(prior.n, prior.m)
    profiles = list(prior.profiles())

    limit = max_variables if max_variables is not None else get_solver_config().mechanism_max_variables
    size = len(profiles) * len(allocations)
    if size > limit:
        raise SizeLimitError("solve_optimal_mechanism", size, limit)

    perf = get_performance_logger()
    perf.start_timer("mechanism_lp")
    lp = LinearProgram(f"mechanism_{bic_mode.value}")
    lam: Dict[Tuple[int, int], int] = {}
    pay: Dict[Tuple[int, int, int], int] = {}
    for p, profile in enumerate(profiles):
        probability = prior.profile_probability(profile)
        for a, allocation in enumerate(allocations):
            lam[(p, a)] = lp.add_variable(f"lam_{p}_{a}")
            for i in range(prior.n):
                cap = _payment_cap(prior.type_of(i, profile[i]), allocation, i)
                if cap > 0:
                    z = lp.add_variable(f"z_{p}_{a}_{i}", objective=probability)
                    pay[(p, a, i)] = z
                    lp.add_constraint({z: 1, lam[(p, a)]: -cap}, Sense.LE, 0, name=f"cap_{p}_{a}_{i}")
        lp.add_constraint(
            {lam[(p, a)]: 1 for a in range(len(allocations))}, Sense.EQ, 1, name=f"lottery_{p}"
        )

    # profiles grouped by each bidder's reported type, with Pr[t_-i]
    by_report: Dict[Tuple[int, int], List[Tuple[int, Number]]] = {}
    for p, profile in enumerate(profiles):
        for i, k in enumerate(profile):
            by_report.setdefault((i, k), []).append((p, prior.profile_probability(profile, skip=i)))

    def utility_terms(i: int, true_k: int, report_k: int) -> Dict[int, Number]:
        values = prior.type_of(i, true_k)
        terms: Dict[int, Number] = {}
        for p, weight in by_report.get((i, report_k), []):
            for a, allocation in enumerate(allocations):
                gain = values.bundle_value(allocation, i)
                if gain:
                    var = lam[(p, a)]
                    terms[var] = terms.get(var, 0) + weight * gain
                z = pay.get((p, a, i))
                if z is not None:
                    terms[z] = terms.get(z, 0) - weight
        return terms

    for i, bidder in enumerate(prior.bidders):
        for k in range(len(bidder.types)):
            truthful = utility_terms(i, k, k)
            lp.add_constraint(truthful, Sense.GE, 0, name=f"ir_{i}_{k}")
            for r in range(len(bidder.types)):
                if not _covered(prior, i, k, r, bic_mode):
                    continue
                row = dict(truthful)
                for var, coefficient in utility_terms(i, k, r).items():
                    row[var] = row.get(var, 0) - coefficient
                lp.add_constraint(row, Sense.GE, 0, name=f"bic_{i}_{k}_{r}")

    solution = solve_lp(lp, arith.mode)
    if solution.status is not LpStatus.OPTIMAL:
        raise MechanismError(
            f"mechanism LP is {solution.status.value}", {"bic_mode": bic_mode.value}
        )

    threshold = 0 if arith.exact else get_solver_config().zero_fraction_threshold
    zero = arith.zero()
    table = []
    for p, profile in enumerate(profiles):
        entries = []
        for a, allocation in enumerate(allocations):
            weight = solution.values[lam[(p, a)]]
            if weight <= threshold:
                continue
            payments = tuple(
                solution.values[pay[(p, a, i)]] if (p, a, i) in pay else zero
                for i in range(prior.n)
            )
            entries.append(LotteryEntry(allocation, weight, payments))
        table.append((profile, tuple(entries)))

    result = build_solution(prior, table, bic_mode, arith.mode)
    perf.end_timer(
        "mechanism_lp",
        {"profiles": len(profiles), "allocations": len(allocations), "revenue": float(result.revenue)},
    )
    return result


def solve_single_item_optimal(
    prior: Prior, bic_mode: Union[BicMode, str] = BicMode.BUDGET_DOWNWARD, mode: ModeLike = None
) -> MechanismSolution:
    """
    Exact optimal mechanism for one item (n + 1 outcomes per profile).

    Defaults to BUDGET_DOWNWARD, the mode whose revenue is never below the
    best posted price. Under FULL a type may claim a budget it does not have,
    and the optimum can drop below posted-price revenue.
    """
    if prior.m != 1:
        raise PriorValidationError(f"single-item solve needs m = 1, got m = {prior.m}")
    return solve_optimal_mechanism(prior, bic_mode, mode)


@dataclass(frozen=True)
class VirtualMapping:
    """
    Per bidder and type: a multiplier >= 0 and a virtual value per item.

    ``multipliers[i][k]`` and ``virtual_values[i][k][j]`` belong to type k of bidder i.
    """

    multipliers: Tuple[Tuple[Number, ...], ...]
    virtual_values: Tuple[Tuple[Tuple[Number, ...], ...], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "multipliers", tuple(tuple(r) for r in self.multipliers))
        object.__setattr__(
            self,
            "virtual_values",
            tuple(tuple(tuple(v) for v in bidder) for bidder in self.virtual_values),
        )

    def check(self, prior: Prior) -> None:
        if len(self.multipliers) != prior.n or len(self.virtual_values) != prior.n:
            raise PriorValidationError(f"mapping covers {len(self.multipliers)} bidders, prior has {prior.n}")
        for i, bidder in enumerate(prior.bidders):
            if len(self.multipliers[i]) != len(bidder.types) or len(self.virtual_values[i]) != len(bidder.types):
                raise PriorValidationError("mapping does not cover every type", i)
            for k in range(len(bidder.types)):
                if self.multipliers[i][k] < 0:
                    raise PriorValidationError(f"type {k} has a negative multiplier", i)
                if len(self.virtual_values[i][k]) != prior.m:
                    raise PriorValidationError(f"type {k} virtual values do not cover {prior.m} items", i)


@dataclass(frozen=True)
class MappingDistribution:
    """Finite distribution over virtual mappings as (weight, mapping) pairs."""

    entries: Tuple[Tuple[Number, VirtualMapping], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple((w, mp) for w, mp in self.entries))
        if not self.entries:
            raise PriorValidationError("mapping distribution is empty")
        total: Number = 0
        for weight, _ in self.entries:
            if not weight > 0:
                raise PriorValidationError(f"mapping weight {weight} is not positive")
            total = total + weight
        if abs(total - 1) > get_solver_config().probability_tolerance:
            raise PriorValidationError(f"mapping weights sum to {total}")

    @classmethod
    def point_mass(cls, mapping: VirtualMapping) -> "MappingDistribution":
        return cls(((1, mapping),))

    def check(self, prior: Prior) -> None:
        for _, mapping in self.entries:
            mapping.check(prior)


@dataclass(frozen=True)
class MechanismOutcome:
    """Result of running the mechanism on one reported profile."""

    allocation: Allocation
    prices: PriceVector
    mapping_index: int
    instance: BavwmInstance
    objective_value: Number


def induced_instance(prior: Prior, mapping: VirtualMapping, profile: Sequence[int]) -> BavwmInstance:
    """BAVWM instance of a reported profile under one virtual mapping."""
    _check_profile(prior, profile)
    return BavwmInstance(
        n=prior.n,
        m=prior.m,
        values=[prior.type_of(i, k).values for i, k in enumerate(profile)],
        budgets=[prior.type_of(i, k).budget for i, k in enumerate(profile)],
        multipliers=[mapping.multipliers[i][k] for i, k in enumerate(profile)],
        virtual_values=[mapping.virtual_values[i][k] for i, k in enumerate(profile)],
    )


def _check_profile(prior: Prior, profile: Sequence[int]) -> None:
    if len(profile) != prior.n:
        raise MechanismError(f"profile has {len(profile)} reports for {prior.n} bidders")
    for i, k in enumerate(profile):
        available = len(prior.bidders[i].types)
        if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or not 0 <= k < available:
            raise OffSupportTypeError(i, k, available)


def run_virtual_welfare_mechanism(
    prior: Prior,
    delta: MappingDistribution,
    profile: Sequence[int],
    seed: Optional[int] = None,
    solver: Union[SolveMethod, str] = SolveMethod.EXACT,
    mode: ModeLike = None,
) -> MechanismOutcome:
    """
    Run the virtual welfare maximizer on reported type indices.

    Args:
        prior: Prior whose type sets the reports come from
        delta: Distribution over virtual mappings
        profile: Reported type index per bidder (0-based)
        seed: Seed of the generator that samples the mapping
        solver: EXACT or APPROX BAVWM solver
        mode: Arithmetic for the BAVWM solve

    Raises:
        OffSupportTypeError: If a report is not a type of that bidder
    """
    _check_profile(prior, profile)
    delta.check(prior)
    rng = np.random.default_rng(seed)
    weights = np.array([float(w) for w, _ in delta.entries])
    index = int(rng.choice(len(weights), p=weights / weights.sum()))
    mapping = delta.entries[index][1]

    instance = induced_instance(prior, mapping, profile)
    result = BavwmSolver(solver, mode).solve(instance)
    logger.debug(
        f"Mapping {index} allocates {result.allocation.assignment}",
        extra={"context": {"profile": list(profile), "seed": seed}},
    )
    return MechanismOutcome(
        allocation=result.allocation,
        prices=result.prices,
        mapping_index=index,
        instance=instance,
        objective_value=result.objective_value,
    )


def evaluate_virtual_welfare_mechanism(
    prior: Prior,
    delta: MappingDistribution,
    solver: Union[SolveMethod, str] = SolveMethod.EXACT,
    mode: ModeLike = None,
) -> MechanismSolution:
    """
    Lottery table of the virtual welfare maximizer on every profile.

    Each mapping contributes its weight to the allocation it selects, with
    payment mass weight * price.
    """
    arith = arithmetic(mode)
    prior = prior.to_mode(arith.mode)
    delta.check(prior)
    bavwm = BavwmSolver(solver, arith.mode)
    table = []
    for profile in prior.profiles():
        merged: Dict[AllocationTuple, Tuple[Number, List[Number]]] = {}
        for weight, mapping in delta.entries:
            w = arith.convert(weight)
            result = bavwm.solve(induced_instance(prior, mapping, profile))
            key = result.allocation.assignment
            total, payments = merged.get(key, (arith.zero(), [arith.zero()] * prior.n))
            merged[key] = (
                total + w,
                [payments[i] + w * result.prices[i] for i in range(prior.n)],
            )
        entries = tuple(
            LotteryEntry(allocation, total, tuple(payments))
            for allocation, (total, payments) in sorted(merged.items(), key=lambda kv: _allocation_key(kv[0]))
        )
        table.append((profile, entries))
    logger.debug("Virtual welfare table built", extra={"context": {"solves": bavwm.solves}})
    return build_solution(prior, table, None, arith.mode)


def _allocation_key(allocation: AllocationTuple) -> Tuple[int, ...]:
    return tuple(-1 if owner is UNASSIGNED else owner for owner in allocation)


def _best_bundle(
    spec: TypeSpec, remaining: Sequence[int], prices: Sequence[Number]
) -> Tuple[Tuple[int, ...], Number]:
    """
    Affordable utility-maximizing bundle; ties go to fewer items, then lexicographic.

    An indifferent bidder buys: the smallest zero-utility bundle beats buying nothing.
    """
    best: Tuple[int, ...] = ()
    best_utility: Number = 0
    for size in range(1, len(remaining) + 1):
        for bundle in itertools.combinations(remaining, size):
            cost = sum((prices[j] for j in bundle), 0)
            if cost > spec.budget:
                continue
            utility = sum((spec.values[j] for j in bundle), 0) - cost
            if utility > best_utility or (not best and utility == best_utility):
                best, best_utility = bundle, utility
    return best, sum((prices[j] for j in best), 0)


def posted_price_outcome(
    prior: Prior, prices: Sequence[Number], profile: Profile
) -> Tuple[AllocationTuple, Tuple[Number, ...]]:
    """Bidders in index order buy their best affordable bundle of the items left."""
    remaining = list(range(prior.m))
    allocation: List[AgentSlot] = [UNASSIGNED] * prior.m
    payments: List[Number] = [0] * prior.n
    for i, k in enumerate(profile):
        bundle, paid = _best_bundle(prior.type_of(i, k), remaining, prices)
        for j in bundle:
            allocation[j] = i
            remaining.remove(j)
        payments[i] = paid
    return tuple(allocation), tuple(payments)


def posted_price_revenue(prior: Prior, prices: Sequence[Number]) -> Number:
    """Expected revenue of the sequential posted-price mechanism with item prices ``prices``."""
    if len(prices) != prior.m:
        raise MechanismError(f"expected {prior.m} prices, got {len(prices)}")
    total: Number = 0
    for profile in prior.profiles():
        _, payments = posted_price_outcome(prior, prices, profile)
        total = total + prior.profile_probability(profile) * sum(payments, 0)
    return total


def best_posted_price_revenue(
    prior: Prior, grid: Optional[Sequence[Sequence[Number]]] = None
) -> Tuple[Tuple[Number, ...], Number]:
    """
    Best item prices over a grid, by enumeration.

    The default grid for item j is the set of positive values any type has
    for j.

    Returns:
        (prices, revenue) of the first best price vector in grid order
    """
    if grid is None:
        grid = [
            sorted({spec.values[j] for bidder in prior.bidders for spec in bidder.types if spec.values[j] > 0})
            or [0]
            for j in range(prior.m)
        ]
    best_prices: Tuple[Number, ...] = tuple(0 for _ in range(prior.m))
    best_revenue = posted_price_revenue(prior, best_prices)
    for prices in itertools.product(*grid):
        revenue = posted_price_revenue(prior, prices)
        if revenue > best_revenue:
            best_prices, best_revenue = tuple(prices), revenue
    return best_prices, best_revenue
