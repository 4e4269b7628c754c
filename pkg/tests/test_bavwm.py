"""
Tests for budgetmech.bavwm.

Exercises exhaustive search, the LP relaxation, rounding to a split
allocation, the three-bin repair step and the end-to-end 3-approximation,
including the one-third guarantee on seeded random instances.
"""

from fractions import Fraction

import pytest

from budgetmech.bavwm import (
    BavwmSolver,
    SolveMethod,
    build_relaxation,
    drop_negative_hat_items,
    partition_bins,
    round_to_split,
    solve_approx,
    solve_bavwm,
    solve_exact,
    solve_single_item,
    tripartition_select,
)
from budgetmech.config import solver_config
from budgetmech.exceptions import (
    InstanceValidationError,
    InvalidAllocationError,
    RoundingError,
    SizeLimitError,
)
from budgetmech.harness import GeneratorConfig, double_credit_instance, generate_instances
from budgetmech.lp import LpSolution, LpStatus, solve_lp
from budgetmech.model import (
    UNASSIGNED,
    Allocation,
    BavwmInstance,
    SplitAllocation,
    bar_loads,
    normalize,
    objective,
    split_objective,
)
from budgetmech.numeric import ArithmeticMode


def exact_double_credit():
    return normalize(double_credit_instance().to_mode("exact"))


class TestSolveExact:
    """Exhaustive search."""

    def test_double_credit_optimum(self):
        result = solve_exact(double_credit_instance(), "exact")

        assert result.objective_value == 1
        assert result.allocation == Allocation((UNASSIGNED, 0))
        assert result.prices.prices == (3,)
        assert result.method is SolveMethod.EXACT

    def test_raw_instance_is_normalized(self):
        instance = BavwmInstance(2, 1, [[5], [1]], [2, 1], [-1, 1], [[1], [0]])

        result = solve_exact(instance, "exact")

        # ties keep the first allocation found; agent 0 pays nothing
        assert result.allocation == Allocation((0,))
        assert result.objective_value == 1
        assert result.prices.prices[0] == 0

    def test_size_limit(self):
        instance = BavwmInstance(2, 3, [[1] * 3] * 2, [1, 1], [1, 1], [[0] * 3] * 2)

        with pytest.raises(SizeLimitError):
            solve_exact(instance, limit=26)
        assert solve_exact(instance, limit=27).objective_value == 2

    def test_empty_instances(self):
        no_items = BavwmInstance(2, 0, [[], []], [1, 1], [1, 1], [[], []])
        no_agents = BavwmInstance(0, 2, [], [], [], [])

        for instance in (no_items, no_agents):
            assert solve_exact(instance).objective_value == 0
            assert solve_approx(instance).objective_value == 0

    def test_single_item_scan_matches_search(self):
        config = GeneratorConfig(seed=21, count=40, n_range=(1, 4), m_range=(1, 1))
        for instance in generate_instances(config):
            scan = solve_single_item(instance, "exact")
            search = solve_exact(instance, "exact")
            assert scan.objective_value == search.objective_value

    def test_single_item_needs_one_item(self):
        with pytest.raises(InstanceValidationError):
            solve_single_item(double_credit_instance())

    def test_single_item_keeps_negative_item(self):
        instance = BavwmInstance(2, 1, [[0], [0]], [1, 1], [1, 1], [[-1], [-2]])

        assert solve_single_item(instance).allocation == Allocation((UNASSIGNED,))


class TestRelaxation:
    """LP relaxation and rounding to a split allocation."""

    def test_double_credit_relaxation_value(self):
        relaxation = build_relaxation(exact_double_credit())

        solution = solve_lp(relaxation.lp, "exact")

        # the budget row 3 xbar_0 + 3 xbar_1 <= 3 caps the bar credit at 1
        assert solution.objective_value == 1
        assert relaxation.lp.variable_count == 4
        assert relaxation.lp.constraint_count == 3

    def test_split_values_shape(self):
        instance = exact_double_credit()
        relaxation = build_relaxation(instance)
        solution = solve_lp(relaxation.lp, "exact")

        bar, hat = relaxation.split_values(solution)

        assert sum(bar[0]) == 1
        assert sum(hat[0]) == 0

    def test_round_to_split_bounds(self):
        config = GeneratorConfig(seed=9, count=25, n_range=(1, 3), m_range=(1, 4))
        for instance in generate_instances(config):
            instance = instance.to_mode("exact")
            relaxation = build_relaxation(instance)
            solution = solve_lp(relaxation.lp, "exact")

            split = round_to_split(instance, solution, "exact", relaxation)

            assert split_objective(instance, split) >= solution.objective_value
            for load, budget in zip(bar_loads(instance, split), instance.budgets):
                assert load <= 2 * budget

    def test_round_to_split_needs_optimal_solution(self):
        bad = LpSolution(LpStatus.INFEASIBLE, (), None, ArithmeticMode.EXACT)

        with pytest.raises(RoundingError):
            round_to_split(exact_double_credit(), bad)


class TestTripartition:
    """Three-bin repair of splits with bar load up to twice the budget."""

    def test_load_exactly_twice_the_budget(self):
        instance = exact_double_credit()
        split = SplitAllocation((0, 0), (UNASSIGNED, UNASSIGNED))

        bins = partition_bins(instance, split, "exact")
        selected = tripartition_select(instance, split, "exact")

        assert bins[0].loads == (3, 3, 0)
        assert bins[0].chosen == 0
        assert selected == SplitAllocation((0, UNASSIGNED), (UNASSIGNED, UNASSIGNED))
        assert split_objective(instance, selected) == 1

    def test_greedy_order_and_bins(self):
        instance = normalize(
            BavwmInstance(1, 5, [[4, 3, 3, 2, 2]], [7], [1], [[0, 0, 0, 0, 5]]).to_mode("exact")
        )
        split = SplitAllocation((0,) * 5, (UNASSIGNED,) * 5)

        (entry,) = partition_bins(instance, split, "exact")

        assert entry.bins == ((0,), (1, 3), (2, 4))
        assert entry.loads == (4, 5, 5)
        assert entry.scores == (4, 5, 10)
        assert entry.chosen == 2

    def test_hat_items_survive_selection(self):
        instance = exact_double_credit()
        split = SplitAllocation((0, UNASSIGNED), (UNASSIGNED, 0))

        selected = tripartition_select(instance, split, "exact")

        assert selected.hat == (UNASSIGNED, 0)

    def test_rejects_load_above_twice_the_budget(self):
        instance = normalize(BavwmInstance(1, 3, [[3, 3, 3]], [3], [1], [[0, 0, 0]]))

        with pytest.raises(InvalidAllocationError):
            partition_bins(instance, SplitAllocation((0, 0, 0), (UNASSIGNED,) * 3))

    def test_drop_negative_hat_items(self):
        instance = normalize(BavwmInstance(2, 3, [[1] * 3] * 2, [5, 5], [1, 1], [[-1, 2, 0], [0, 0, -3]]))
        split = SplitAllocation((UNASSIGNED,) * 3, (0, 0, 1))

        cleaned, dropped = drop_negative_hat_items(instance, split)

        assert dropped == (0, 2)
        assert cleaned.hat == (UNASSIGNED, 0, UNASSIGNED)


class TestSolveApprox:
    """End-to-end approximation."""

    def test_double_credit(self):
        result = solve_approx(double_credit_instance(), "exact")

        assert result.certificate == 1
        assert result.objective_value == 1
        assert result.method is SolveMethod.APPROX
        assert result.trace.lp_value == 1

    def test_trace_is_consistent(self):
        config = GeneratorConfig(seed=31, count=20, n_range=(1, 3), m_range=(1, 5))
        for instance in generate_instances(config):
            result = solve_approx(instance)
            trace = result.trace

            assert trace.rounded_value >= trace.lp_value - 1e-7
            assert result.allocation == trace.selected.merged()
            for load, budget in zip(bar_loads(instance, trace.selected), instance.budgets):
                assert load <= budget + 1e-9
            assert objective(instance, result.allocation) == pytest.approx(result.objective_value)

    def test_exact_arithmetic_result(self):
        config = GeneratorConfig(seed=5, count=10, n_range=(1, 2), m_range=(1, 4))
        for instance in generate_instances(config):
            result = solve_approx(instance, ArithmeticMode.EXACT)
            assert isinstance(result.certificate, Fraction)
            assert 3 * result.objective_value >= result.certificate

    def test_dump_lp(self, tmp_path):
        path = tmp_path / "relaxation.lp"

        solve_approx(double_credit_instance(), dump_lp=path)

        text = path.read_text()
        assert "budget_0" in text
        assert "xbar_0_1" in text

    @pytest.mark.slow
    def test_one_third_of_the_optimum(self):
        config = GeneratorConfig(seed=2026, count=500, n_range=(1, 3), m_range=(1, 6))
        for instance in generate_instances(config):
            exact = solve_exact(instance)
            approx = solve_approx(instance)

            assert approx.objective_value >= exact.objective_value / 3 - 1e-9
            assert approx.certificate >= exact.objective_value - 1e-7


class TestDispatch:
    """Method selection in solve_bavwm."""

    def test_auto_single_item(self):
        instance = BavwmInstance(1, 1, [[2]], [1], [1], [[0]])

        result = solve_bavwm(instance)

        assert result.method is SolveMethod.EXACT
        assert result.objective_value == 1

    def test_auto_falls_back_to_approximation(self):
        with solver_config(exhaustive_limit=2):
            result = solve_bavwm(double_credit_instance(), "auto")

        assert result.method is SolveMethod.APPROX

    def test_explicit_methods(self):
        assert solve_bavwm(double_credit_instance(), "exact").certificate is None
        assert solve_bavwm(double_credit_instance(), SolveMethod.APPROX).certificate is not None


class TestBavwmSolver:
    """A configured solver reused across instances."""

    def test_counts_solves_per_method(self):
        solver = BavwmSolver()

        solver.solve(double_credit_instance())
        solver.solve(BavwmInstance(1, 1, [[2]], [1], [1], [[0]]))
        with solver_config(exhaustive_limit=2):
            solver.solve(double_credit_instance())

        assert solver.solves == {"exact": 2, "approx": 1}

    def test_mode_is_fixed_at_construction(self):
        solver = BavwmSolver("approx", "exact")

        with solver_config(default_mode=ArithmeticMode.FLOAT):
            result = solver.solve(double_credit_instance())

        assert solver.arith.exact
        assert isinstance(result.certificate, Fraction)
        assert result.objective_value == 1

    def test_dump_lp_applies_to_every_approx_solve(self, tmp_path):
        path = tmp_path / "relaxation.lp"
        solver = BavwmSolver(SolveMethod.APPROX, dump_lp=path)

        solver.solve(double_credit_instance())

        assert "budget_0" in path.read_text()

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            BavwmSolver("greedy")

    def test_agrees_with_one_off_solves(self):
        config = GeneratorConfig(seed=17, count=15, n_range=(1, 3), m_range=(1, 4))
        solver = BavwmSolver(SolveMethod.APPROX, "exact")
        for instance in generate_instances(config):
            shared = solver.solve(instance)
            fresh = solve_bavwm(instance, SolveMethod.APPROX, "exact")

            assert shared.allocation == fresh.allocation
            assert shared.objective_value == fresh.objective_value

        assert solver.solves == {"approx": 15}
