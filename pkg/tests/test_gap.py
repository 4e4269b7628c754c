"""
Tests for budgetmech.gap.

Covers the BAVWM embedding, the assignment LP, precondition checks of the
rounding step and its cost and load guarantees on seeded random instances.
"""

from fractions import Fraction

import numpy as np
import pytest

from budgetmech.exceptions import (
    GuaranteeViolationError,
    InfeasibleError,
    InstanceValidationError,
    NotNormalizedError,
    RoundingError,
)
from budgetmech.gap import (
    FractionalAssignment,
    GapInstance,
    IntegralAssignment,
    MachineKind,
    _check_rounding_bounds,
    assignment_cost,
    build_gap_from_bavwm,
    build_gap_lp,
    fractional_cost,
    machine_loads,
    solve_gap_lp,
    st_round,
)
from budgetmech.harness import GeneratorConfig, generate_gap_instances, generate_instances
from budgetmech.model import BavwmInstance, normalize
from budgetmech.numeric import arithmetic

F = Fraction


def two_machine_gap():
    """Dummy machine 0 and machine 1 with capacity 2."""
    return GapInstance(
        processing=[[0, 0, 0], [F(3, 2), 1, 1]],
        cost=[[0, 0, 0], [3, 2, 2]],
        capacities=[0, 2],
    )


class TestGapInstance:
    """Construction checks and eligibility."""

    def test_dimensions_inferred(self):
        gap = two_machine_gap()

        assert gap.machines == 2
        assert gap.jobs == 3

    def test_negative_processing_rejected(self):
        with pytest.raises(InstanceValidationError):
            GapInstance([[-1]], [[0]], [1])

    def test_ragged_rows_rejected(self):
        with pytest.raises(InstanceValidationError):
            GapInstance([[1, 1], [1]], [[0, 0], [0, 0]], [1, 1])

    def test_eligibility(self):
        gap = GapInstance([[2, 1]], [[1, 1]], [1])

        assert not gap.eligible(0, 0)
        assert gap.eligible(0, 1)


class TestEmbedding:
    """BAVWM instance as a GAP instance with 2n + 1 machines."""

    def test_machine_layout(self):
        instance = normalize(BavwmInstance(2, 2, [[1, 5], [2, 2]], [3, 4], [2, 1], [[-1, 0], [1, 1]]))

        embedding = build_gap_from_bavwm(instance)
        gap = embedding.gap

        assert gap.machines == 5
        assert embedding.hat_machines == (1, 2)
        assert embedding.bar_machines == (3, 4)
        assert gap.capacities == (0, 0, 0, 3, 4)
        assert gap.processing[3] == (1, 3)
        assert gap.cost[1] == (-1, 0)
        assert gap.cost[3] == (2 * 1 - 1, 2 * 3 + 0)
        assert embedding.role_of(0).kind is MachineKind.DUMMY
        assert embedding.role_of(4).agent == 1
        assert embedding.machine_for(MachineKind.HAT, 1) == 2

    def test_requires_normalized_instance(self):
        with pytest.raises(NotNormalizedError):
            build_gap_from_bavwm(BavwmInstance(1, 1, [[1]], [1], [1], [[0]]))


class TestGapLp:
    """The assignment LP."""

    def test_only_eligible_pairs_get_variables(self):
        gap = GapInstance([[0, 0], [2, 1]], [[0, 0], [1, 1]], [0, 1])

        _, index = build_gap_lp(gap)

        assert (1, 0) not in index
        assert set(index) == {(0, 0), (0, 1), (1, 1)}

    def test_job_without_machine_is_infeasible(self):
        gap = GapInstance([[2]], [[1]], [1])

        with pytest.raises(InfeasibleError):
            solve_gap_lp(gap)

    def test_small_instance(self):
        gap = GapInstance(processing=[[0, 0], [1, 1]], cost=[[0, 0], [5, 4]], capacities=[0, 1])

        frac = solve_gap_lp(gap, "exact")

        assert fractional_cost(gap, frac) == 5
        assert frac.objective_value == 5
        assert st_round(gap, frac, "exact").machine_of == (1, 0)


class TestStRound:
    """Rounding guarantees and preconditions."""

    def test_rounds_fractional_assignment(self):
        gap = two_machine_gap()
        frac = FractionalAssignment([[0, F(1, 2), 1], [1, F(1, 2), 0]])

        result = st_round(gap, frac, "exact")

        assert fractional_cost(gap, frac) == 4
        assert result.machine_of == (1, 1, 0)
        assert assignment_cost(gap, result) == 5
        assert machine_loads(gap, result) == (0, F(5, 2))

    def test_integral_input_keeps_its_cost(self):
        gap = two_machine_gap()
        frac = FractionalAssignment([[0, 1, 1], [1, 0, 0]])

        result = st_round(gap, frac, "exact")

        assert frac.is_integral()
        assert result.machine_of == (1, 0, 0)
        assert assignment_cost(gap, result) == fractional_cost(gap, frac) == 3

    def test_job_assigned_twice_rejected(self):
        gap = two_machine_gap()

        with pytest.raises(RoundingError):
            st_round(gap, FractionalAssignment([[1, 0, 1], [1, 1, 0]]), "exact")

    def test_over_capacity_rejected(self):
        gap = two_machine_gap()

        with pytest.raises(RoundingError):
            st_round(gap, FractionalAssignment([[0, 0, 0], [1, 1, 1]]), "exact")

    def test_ineligible_placement_rejected(self):
        gap = GapInstance([[0], [3]], [[0], [1]], [0, 2])

        with pytest.raises(RoundingError):
            st_round(gap, FractionalAssignment([[F(1, 2)], [F(1, 2)]]), "exact")

    def test_out_of_range_value_rejected(self):
        gap = two_machine_gap()

        with pytest.raises(RoundingError):
            st_round(gap, FractionalAssignment([[-1, 0, 1], [2, 1, 0]]), "exact")

    def test_wrong_shape_rejected(self):
        with pytest.raises(RoundingError):
            st_round(two_machine_gap(), FractionalAssignment([[1, 1, 1]]), "exact")

    def test_integral_assignment_helpers(self):
        gap = two_machine_gap()
        assignment = IntegralAssignment([1, 0, 1])

        assert assignment_cost(gap, assignment) == 5
        assert machine_loads(gap, assignment) == (0, F(5, 2))


class TestRoundingGuarantees:
    """Cost never drops and loads stay within twice the capacity."""

    @pytest.mark.slow
    def test_random_gap_instances(self):
        config = GeneratorConfig(seed=17, count=200, n_range=(1, 3), m_range=(1, 6))
        for gap in generate_gap_instances(config):
            frac = solve_gap_lp(gap)
            result = st_round(gap, frac)

            assert assignment_cost(gap, result) >= fractional_cost(gap, frac) - 1e-7
            for load, capacity in zip(machine_loads(gap, result), gap.capacities):
                assert load <= 2 * capacity + 1e-9

    def test_exact_mode_on_embeddings(self):
        config = GeneratorConfig(seed=4, count=20, n_range=(1, 2), m_range=(1, 4))
        for instance in generate_instances(config):
            gap = build_gap_from_bavwm(instance.to_mode("exact")).gap
            frac = solve_gap_lp(gap, "exact")
            result = st_round(gap, frac, "exact")

            assert assignment_cost(gap, result) >= fractional_cost(gap, frac)
            for load, capacity in zip(machine_loads(gap, result), gap.capacities):
                assert load <= 2 * capacity


class TestGapLpOptimality:
    """The LP value bounds the cost of every integral assignment that fits."""

    def test_sampled_assignments_never_beat_the_lp(self):
        rng = np.random.default_rng(31)
        config = GeneratorConfig(seed=31, count=30, n_range=(1, 3), m_range=(1, 5))
        feasible = 0
        for gap in generate_gap_instances(config):
            lp_value = solve_gap_lp(gap).objective_value
            for _ in range(50):
                assignment = IntegralAssignment(rng.integers(0, gap.machines, size=gap.jobs).tolist())
                loads = machine_loads(gap, assignment)
                if any(load > capacity for load, capacity in zip(loads, gap.capacities)):
                    continue
                feasible += 1

                assert lp_value >= assignment_cost(gap, assignment) - 1e-9

        assert feasible > 0

    def test_exact_lp_dominates_every_fitting_assignment(self):
        gap = two_machine_gap()
        lp_value = solve_gap_lp(gap, "exact").objective_value
        best = max(
            assignment_cost(gap, IntegralAssignment(machines))
            for machines in np.ndindex(*(gap.machines,) * gap.jobs)
            if all(
                load <= capacity
                for load, capacity in zip(
                    machine_loads(gap, IntegralAssignment(machines)), gap.capacities
                )
            )
        )

        assert best == 4
        assert lp_value >= best


class TestGuaranteeTolerance:
    """Rounding guarantees are checked with an absolute tolerance."""

    def test_small_cost_drop_on_large_costs_is_caught(self):
        gap = GapInstance(
            processing=[[0.0], [0.0]],
            cost=[[9999.999999], [10000.0]],
            capacities=[0.0, 1.0],
        )
        frac = FractionalAssignment([[0.0], [1.0]])

        with pytest.raises(GuaranteeViolationError):
            _check_rounding_bounds(gap, frac, IntegralAssignment([0]), arithmetic("float"))

    def test_drop_within_tolerance_passes(self):
        gap = GapInstance(
            processing=[[0.0], [0.0]],
            cost=[[1.0 - 1e-12], [1.0]],
            capacities=[0.0, 1.0],
        )
        frac = FractionalAssignment([[0.0], [1.0]])

        _check_rounding_bounds(gap, frac, IntegralAssignment([0]), arithmetic("float"))
