"""
Tests for budgetmech.mechanism.

Covers prior validation, the optimal mechanism LP on small priors with known
revenue, every checker against hand-built and corrupted lottery tables, the
posted-price benchmark and the virtual welfare mechanism runner.
"""

from fractions import Fraction

import numpy as np
import pytest

from budgetmech.exceptions import (
    MechanismError,
    OffSupportTypeError,
    PriorValidationError,
    SizeLimitError,
)
from budgetmech.harness import GeneratorConfig, generate_priors
from budgetmech.mechanism import (
    BicMode,
    BidderPrior,
    ExPostKind,
    LotteryEntry,
    MappingDistribution,
    Prior,
    TypeSpec,
    VirtualMapping,
    best_posted_price_revenue,
    bic_epsilon,
    build_solution,
    check_bic,
    check_ex_post,
    check_interim_ir,
    check_lotteries,
    enumerate_allocations,
    evaluate_virtual_welfare_mechanism,
    induced_instance,
    posted_price_outcome,
    posted_price_revenue,
    run_virtual_welfare_mechanism,
    solve_optimal_mechanism,
    solve_single_item_optimal,
)
from budgetmech.model import UNASSIGNED, Allocation, normalize, objective
from budgetmech.numeric import ArithmeticMode

HALF = Fraction(1, 2)


def point_mass(value, budget):
    return Prior(1, [BidderPrior([TypeSpec([value], budget, 1)])])


def two_type_prior():
    """One bidder, one item, value 1 or 2 with probability 1/2, budget 10."""
    return Prior(1, [BidderPrior([TypeSpec([1], 10, HALF), TypeSpec([2], 10, HALF)])])


def unit_mapping(prior):
    """Multiplier 1 and zero virtual values for every type."""
    return VirtualMapping(
        [[1] * len(b.types) for b in prior.bidders],
        [[[0] * prior.m for _ in b.types] for b in prior.bidders],
    )


def pooled_price_table():
    """Both types get the item; the high type alone pays 2."""
    return {
        (0,): [LotteryEntry((0,), 1, (0,))],
        (1,): [LotteryEntry((0,), 1, (2,))],
    }


class TestPrior:
    """Construction checks of finite priors."""

    def test_dimensions(self):
        prior = Prior(2, [BidderPrior([TypeSpec([1, 2], 3, 1)]), BidderPrior([TypeSpec([0, 0], 0, 1)])])

        assert prior.n == 2
        assert prior.profile_count == 1
        assert list(prior.profiles()) == [(0, 0)]

    def test_probabilities_must_sum_to_one(self):
        with pytest.raises(PriorValidationError):
            Prior(1, [BidderPrior([TypeSpec([1], 1, HALF)])])

    def test_value_count_must_match_items(self):
        with pytest.raises(PriorValidationError):
            Prior(2, [BidderPrior([TypeSpec([1], 1, 1)])])

    def test_negative_value_rejected(self):
        with pytest.raises(PriorValidationError):
            Prior(1, [BidderPrior([TypeSpec([-1], 1, 1)])])

    def test_bidder_without_types_rejected(self):
        with pytest.raises(PriorValidationError):
            Prior(1, [BidderPrior([])])

    def test_profile_probability(self):
        prior = Prior(
            1,
            [
                BidderPrior([TypeSpec([1], 1, HALF), TypeSpec([2], 1, HALF)]),
                BidderPrior([TypeSpec([1], 1, Fraction(1, 3)), TypeSpec([3], 1, Fraction(2, 3))]),
            ],
        )

        assert prior.profile_probability((1, 1)) == Fraction(1, 3)
        assert prior.profile_probability((1, 1), skip=0) == Fraction(2, 3)
        assert list(prior.profiles()) == [(0, 0), (0, 1), (1, 0), (1, 1)]

    def test_allocation_enumeration_order(self):
        allocations = enumerate_allocations(1, 2)

        assert len(allocations) == 4
        assert allocations[0] == (UNASSIGNED, UNASSIGNED)
        assert allocations[-1] == (0, 0)


class TestOptimalMechanism:
    """Revenue of the mechanism LP on priors with known optima."""

    def test_budget_caps_point_mass_revenue(self):
        solution = solve_optimal_mechanism(point_mass(10, 2), mode=ArithmeticMode.EXACT)

        assert solution.revenue == 2
        assert solution.interim.allocation[0][0][0] == 1
        assert solution.interim.payments[0][0] == 2

    def test_point_mass_full_surplus(self):
        assert solve_optimal_mechanism(point_mass(2, 10), mode="exact").revenue == 2

    def test_two_types(self):
        solution = solve_optimal_mechanism(two_type_prior(), BicMode.FULL, "exact")

        assert solution.revenue == 1
        assert solution.bic_mode is BicMode.FULL
        assert solution.mode is ArithmeticMode.EXACT

    def test_two_bidders_sell_to_either(self):
        prior = Prior(1, [BidderPrior([TypeSpec([1], 1, 1)]), BidderPrior([TypeSpec([1], 1, 1)])])

        assert solve_single_item_optimal(prior, mode="exact").revenue == 1

    def test_float_mode_agrees(self):
        assert solve_optimal_mechanism(two_type_prior()).revenue == pytest.approx(1)

    def test_budget_mode_from_string(self):
        solution = solve_optimal_mechanism(two_type_prior(), "budget-downward", "exact")

        assert solution.bic_mode is BicMode.BUDGET_DOWNWARD

    def test_outputs_pass_every_checker(self):
        config = GeneratorConfig(seed=12, count=6, n_range=(1, 2), m_range=(1, 2), types_range=(1, 2))
        for prior in generate_priors(config):
            for bic_mode in BicMode:
                solution = solve_optimal_mechanism(prior, bic_mode)

                assert check_bic(solution, prior, bic_mode) == []
                assert check_ex_post(solution, prior) == []
                assert check_interim_ir(solution, prior) == []
                assert check_lotteries(solution, prior) == []

    def test_size_limit(self):
        with pytest.raises(SizeLimitError):
            solve_optimal_mechanism(two_type_prior(), max_variables=1)

    def test_single_item_needs_one_item(self):
        prior = Prior(2, [BidderPrior([TypeSpec([1, 1], 1, 1)])])

        with pytest.raises(PriorValidationError):
            solve_single_item_optimal(prior)

    def test_lottery_lookup(self):
        solution = solve_optimal_mechanism(point_mass(10, 2), mode="exact")

        (entry,) = solution.lottery((0,))
        assert entry.allocation == (0,)
        assert entry.payments == (2,)
        assert solution.lottery((5,)) == ()

    @pytest.mark.slow
    def test_budget_downward_dominates_full(self):
        config = GeneratorConfig(seed=50, count=50, n_range=(1, 2), m_range=(1, 2), types_range=(1, 2))
        for prior in generate_priors(config):
            full = solve_optimal_mechanism(prior, BicMode.FULL).revenue
            downward = solve_optimal_mechanism(prior, BicMode.BUDGET_DOWNWARD).revenue

            assert downward >= full - 1e-9
            assert downward >= best_posted_price_revenue(prior)[1] - 1e-7


class TestCheckers:
    """Checkers on hand-built and corrupted lottery tables."""

    def test_pooled_price_breaks_bic(self):
        prior = two_type_prior()
        solution = build_solution(prior, pooled_price_table(), mode="exact")

        (violation,) = check_bic(solution, prior, BicMode.FULL)

        assert (violation.bidder, violation.true_type, violation.reported_type) == (0, 1, 0)
        assert violation.slack == -2
        assert bic_epsilon(solution, prior, BicMode.FULL) == 2
        assert check_ex_post(solution, prior) == []

    def test_single_type_prior_is_vacuously_bic(self):
        prior = point_mass(1, 1)
        solution = build_solution(prior, {(0,): [LotteryEntry((0,), 1, (1,))]})

        assert check_bic(solution, prior) == []
        assert bic_epsilon(solution, prior) == 0

    def test_overcharge_detected(self):
        prior = point_mass(1, 10)
        solution = build_solution(prior, {(0,): [LotteryEntry((0,), 1, (5,))]}, mode="exact")

        (violation,) = check_ex_post(solution, prior)

        assert violation.kind is ExPostKind.EX_POST_IR
        assert violation.amount == 4
        assert check_interim_ir(solution, prior) == [(0, 0, -4)]

    def test_budget_overrun_detected(self):
        prior = point_mass(10, 2)
        solution = build_solution(prior, {(0,): [LotteryEntry((0,), 1, (3,))]}, mode="exact")

        kinds = [v.kind for v in check_ex_post(solution, prior)]

        assert kinds == [ExPostKind.EX_POST_BUDGET]

    def test_positive_transfer_detected(self):
        prior = point_mass(1, 1)
        solution = build_solution(prior, {(0,): [LotteryEntry((UNASSIGNED,), 1, (-1,))]})

        kinds = [v.kind for v in check_ex_post(solution, prior)]

        assert kinds == [ExPostKind.NO_POSITIVE_TRANSFERS]

    def test_corrupted_lp_output_detected(self):
        prior = point_mass(10, 2)
        solution = solve_optimal_mechanism(prior, mode="exact")
        corrupted = {
            profile: [LotteryEntry(e.allocation, e.weight, tuple(z + 5 for z in e.payments)) for e in entries]
            for profile, entries in solution.table
        }

        broken = build_solution(prior, corrupted, mode="exact")

        assert check_ex_post(broken, prior)
        assert broken.revenue == 7

    def test_lottery_weights(self):
        prior = point_mass(1, 1)
        short = build_solution(prior, {(0,): [LotteryEntry((0,), HALF, (0,))]}, mode="exact")
        unknown = build_solution(prior, {(0,): [LotteryEntry((3,), 1, (0,))]})

        assert check_lotteries(short, prior) == ["profile (0,): weights sum to 1/2"]
        assert "unknown bidder" in check_lotteries(unknown, prior)[0]

    def test_budget_downward_ignores_upward_lies(self):
        # the rich type gains by claiming the poor budget, a covered lie in both modes
        prior = Prior(1, [BidderPrior([TypeSpec([2], 1, HALF), TypeSpec([2], 10, HALF)])])
        table = {
            (0,): [LotteryEntry((0,), 1, (0,))],
            (1,): [LotteryEntry((0,), 1, (2,))],
        }
        solution = build_solution(prior, table, mode="exact")

        assert len(check_bic(solution, prior, BicMode.FULL)) == 1
        assert len(check_bic(solution, prior, BicMode.BUDGET_DOWNWARD)) == 1

        # the poor type gains by claiming the rich budget; only FULL covers that lie
        flipped = build_solution(
            prior,
            {(0,): [LotteryEntry((0,), 1, (1,))], (1,): [LotteryEntry((0,), 1, (0,))]},
            mode="exact",
        )

        assert check_bic(flipped, prior, BicMode.BUDGET_DOWNWARD) == []
        assert len(check_bic(flipped, prior, BicMode.FULL)) == 1


class TestPostedPrices:
    """Sequential posted-price benchmark."""

    def test_two_type_grid(self):
        prior = two_type_prior()

        assert posted_price_revenue(prior, [1]) == 1
        assert posted_price_revenue(prior, [2]) == 1
        assert best_posted_price_revenue(prior) == ((1,), 1)

    def test_budget_blocks_purchase(self):
        prior = point_mass(10, 2)

        assert posted_price_revenue(prior, [3]) == 0
        assert posted_price_revenue(prior, [2]) == 2

    def test_bidders_buy_in_order(self):
        prior = Prior(1, [BidderPrior([TypeSpec([5], 5, 1)]), BidderPrior([TypeSpec([9], 9, 1)])])

        allocation, payments = posted_price_outcome(prior, [4], (0, 0))

        assert allocation == (0,)
        assert payments == (4, 0)

    def test_price_count_checked(self):
        with pytest.raises(MechanismError):
            posted_price_revenue(two_type_prior(), [1, 2])

    def test_full_bic_can_fall_below_posted_prices(self):
        # the low-budget type would claim the high budget under a price of 4
        prior = Prior(1, [BidderPrior([TypeSpec([10], 1, HALF), TypeSpec([4], 4, HALF)])])

        full = solve_single_item_optimal(prior, BicMode.FULL, "exact")
        default = solve_single_item_optimal(prior, mode="exact")

        assert best_posted_price_revenue(prior) == ((4,), 2)
        assert full.revenue == 1
        assert default.bic_mode is BicMode.BUDGET_DOWNWARD
        assert default.revenue == 2

    @pytest.mark.slow
    def test_single_item_optimum_beats_posted_prices(self):
        config = GeneratorConfig(seed=77, count=20, n_range=(1, 3), m_range=(1, 1), types_range=(1, 3))
        for prior in generate_priors(config):
            approx = solve_single_item_optimal(prior)
            exact = solve_single_item_optimal(prior, mode=ArithmeticMode.EXACT)

            assert float(exact.revenue) == pytest.approx(approx.revenue, abs=1e-8)
            assert exact.revenue >= best_posted_price_revenue(prior.to_mode("exact"))[1]


class TestMappingDistribution:
    """Validation of distributions over virtual mappings."""

    def test_empty_rejected(self):
        with pytest.raises(PriorValidationError):
            MappingDistribution([])

    def test_weights_must_be_positive(self):
        mapping = unit_mapping(point_mass(1, 1))

        with pytest.raises(PriorValidationError):
            MappingDistribution([(0, mapping), (1, mapping)])

    def test_weights_must_sum_to_one(self):
        mapping = unit_mapping(point_mass(1, 1))

        with pytest.raises(PriorValidationError):
            MappingDistribution([(HALF, mapping)])

    def test_negative_multiplier_rejected(self):
        prior = point_mass(1, 1)
        delta = MappingDistribution.point_mass(VirtualMapping([[-1]], [[[0]]]))

        with pytest.raises(PriorValidationError):
            delta.check(prior)

    def test_mapping_must_cover_types(self):
        prior = two_type_prior()
        delta = MappingDistribution.point_mass(VirtualMapping([[1]], [[[0]]]))

        with pytest.raises(PriorValidationError):
            delta.check(prior)


class TestVirtualWelfareMechanism:
    """Running the mechanism on reported types."""

    def setup_method(self):
        self.prior = Prior(1, [BidderPrior([TypeSpec([3], 5, 1)]), BidderPrior([TypeSpec([4], 2, 1)])])

    def test_unit_mapping_maximizes_capped_welfare(self):
        delta = MappingDistribution.point_mass(unit_mapping(self.prior))

        outcome = run_virtual_welfare_mechanism(self.prior, delta, (0, 0), seed=1)

        assert outcome.allocation == Allocation((0,))
        assert outcome.prices.prices == (3, 0)
        assert outcome.mapping_index == 0

    def test_single_item_goes_to_largest_virtual_value(self):
        prior = Prior(1, [BidderPrior([TypeSpec([1], 1, 1)]) for _ in range(3)])
        positive = VirtualMapping([[0]] * 3, [[[2]], [[5]], [[-1]]])
        negative = VirtualMapping([[0]] * 3, [[[-2]], [[-5]], [[-1]]])

        first = run_virtual_welfare_mechanism(prior, MappingDistribution.point_mass(positive), (0, 0, 0), 0)
        second = run_virtual_welfare_mechanism(prior, MappingDistribution.point_mass(negative), (0, 0, 0), 0)

        assert first.allocation == Allocation((1,))
        assert first.prices.prices == (0, 0, 0)
        assert second.allocation == Allocation((UNASSIGNED,))

    def test_seed_fixes_the_sampled_mapping(self):
        zero = VirtualMapping([[0], [0]], [[[0]], [[3]]])
        delta = MappingDistribution([(HALF, unit_mapping(self.prior)), (HALF, zero)])

        runs = [run_virtual_welfare_mechanism(self.prior, delta, (0, 0), seed) for seed in range(40)]
        again = [run_virtual_welfare_mechanism(self.prior, delta, (0, 0), seed) for seed in range(40)]

        assert [r.mapping_index for r in runs] == [r.mapping_index for r in again]
        assert {r.mapping_index for r in runs} == {0, 1}
        for run in runs:
            expected = (0,) if run.mapping_index == 0 else (1,)
            assert run.allocation.assignment == expected

    def test_off_support_report_rejected(self):
        delta = MappingDistribution.point_mass(unit_mapping(self.prior))

        with pytest.raises(OffSupportTypeError):
            run_virtual_welfare_mechanism(self.prior, delta, (0, 3), seed=0)
        with pytest.raises(MechanismError):
            run_virtual_welfare_mechanism(self.prior, delta, (0,), seed=0)

    def test_approx_solver(self):
        delta = MappingDistribution.point_mass(unit_mapping(self.prior))

        outcome = run_virtual_welfare_mechanism(self.prior, delta, (0, 0), seed=0, solver="approx")

        assert 3 * outcome.objective_value >= 3 - 1e-9

    def test_selected_allocation_is_an_argmax(self):
        rng = np.random.default_rng(6)
        config = GeneratorConfig(seed=6, count=15, n_range=(1, 3), m_range=(1, 3), types_range=(1, 2))
        for prior in generate_priors(config):
            mapping = VirtualMapping(
                [[round(float(rng.uniform(0, 2)), 2) for _ in b.types] for b in prior.bidders],
                [
                    [[round(float(rng.uniform(-5, 5)), 2) for _ in range(prior.m)] for _ in b.types]
                    for b in prior.bidders
                ],
            )
            profile = tuple(int(rng.integers(len(b.types))) for b in prior.bidders)

            outcome = run_virtual_welfare_mechanism(
                prior, MappingDistribution.point_mass(mapping), profile, seed=0
            )

            instance = normalize(induced_instance(prior, mapping, profile))
            best = max(objective(instance, Allocation(a)) for a in enumerate_allocations(prior.n, prior.m))
            assert outcome.objective_value == pytest.approx(best, abs=1e-9)

    def test_lottery_table_of_the_mechanism(self):
        prior = point_mass(10, 2)
        delta = MappingDistribution.point_mass(unit_mapping(prior))

        solution = evaluate_virtual_welfare_mechanism(prior, delta, mode="exact")

        assert solution.revenue == 2
        assert solution.bic_mode is None
        assert check_ex_post(solution, prior) == []
        assert check_lotteries(solution, prior) == []
