"""
Tests for budgetmech.harness.

Generators are checked for determinism and validity, ratio benchmarks for
their aggregates and rendering, and the verification suite for a clean run.
"""

import sys

import pytest

from budgetmech import harness
from budgetmech.config import solver_config
from budgetmech.exceptions import ConfigurationError
from budgetmech.harness import (
    BenchReport,
    CheckResult,
    GeneratorConfig,
    InstanceBenchmark,
    VerificationReport,
    approximation_ratio,
    bench_ratio,
    double_credit_instance,
    generate_gap_instances,
    generate_instances,
    generate_priors,
    generate_raw_instances,
    verify_suite,
)
from budgetmech.model import validate


def row(index, ratio, violation=False, skipped=False):
    return InstanceBenchmark(
        index=index,
        n=1,
        m=2,
        exact_objective=None if skipped else 3.0,
        approx_objective=None if skipped else 3.0 * ratio,
        lp_bound=None,
        ratio=None if skipped else ratio,
        wall_time=0.01,
        skipped=skipped,
        violation=violation,
    )


class TestGeneratorConfig:
    """Range and count checks."""

    @pytest.mark.parametrize(
        "overrides",
        [
            {"n_range": (2, 1)},
            {"m_range": (-1, 2)},
            {"types_range": (0, 2)},
            {"count": 0},
            {"vmax": -1.0},
        ],
    )
    def test_invalid_settings(self, overrides):
        with pytest.raises(ConfigurationError):
            GeneratorConfig(**overrides)


class TestGenerators:
    """Seeded instance, GAP and prior generation."""

    def setup_method(self):
        self.config = GeneratorConfig(seed=3, count=15, n_range=(1, 3), m_range=(1, 4))

    def test_same_seed_same_instances(self):
        first = generate_instances(self.config)
        second = generate_instances(self.config)

        assert [(i.values, i.budgets, i.multipliers) for i in first] == [
            (i.values, i.budgets, i.multipliers) for i in second
        ]

    def test_different_seed_different_instances(self):
        other = GeneratorConfig(seed=4, count=15, n_range=(1, 3), m_range=(1, 4))

        assert [i.values for i in generate_instances(self.config)] != [
            i.values for i in generate_instances(other)
        ]

    def test_instances_are_valid_and_normalized(self):
        for instance in generate_instances(self.config):
            assert instance.normalized
            assert validate(instance) == []
            assert 1 <= instance.n <= 3
            assert 1 <= instance.m <= 4
            assert all(m >= 0 for m in instance.multipliers)

    def test_raw_instances_keep_negative_multipliers(self):
        raw = generate_raw_instances(GeneratorConfig(seed=0, count=40))

        assert any(m < 0 for instance in raw for m in instance.multipliers)
        assert not any(instance.normalized for instance in raw)

    def test_gap_instances_have_a_dummy(self):
        for gap in generate_gap_instances(self.config):
            assert gap.capacities[0] == 0
            assert all(p == 0 for p in gap.processing[0])
            assert all(c == 0 for c in gap.cost[0])

    def test_priors(self):
        config = GeneratorConfig(seed=8, count=10, n_range=(1, 2), m_range=(1, 2), types_range=(1, 3))

        for prior in generate_priors(config):
            for bidder in prior.bidders:
                assert 1 <= len(bidder.types) <= 3
                assert sum(spec.probability for spec in bidder.types) == 1

    def test_double_credit_instance(self):
        instance = double_credit_instance()

        assert (instance.n, instance.m) == (1, 2)
        assert instance.budgets == (3,)


class TestApproximationRatio:
    """Ratio convention at a zero optimum."""

    def test_zero_optimum(self):
        assert approximation_ratio(0.0, 0.0) == 1.0
        assert approximation_ratio(0.0, -1.0) == 0.0

    def test_ratio(self):
        assert approximation_ratio(3.0, 1.0) == pytest.approx(1 / 3)


class TestBenchRatio:
    """Benchmarks of the approximation against exhaustive search."""

    def setup_method(self):
        self.instances = generate_instances(GeneratorConfig(seed=1, count=20, n_range=(1, 3), m_range=(1, 4)))

    def test_no_violations(self):
        report = bench_ratio(self.instances)

        assert not report.has_violations()
        assert len(report.completed) == 20
        assert report.min_ratio >= 1 / 3 - 1e-9
        assert report.min_ratio <= report.mean_ratio

    def test_workers_keep_order(self):
        serial = bench_ratio(self.instances).to_dict(include_timing=False)
        threaded = bench_ratio(self.instances, workers=4).to_dict(include_timing=False)

        assert serial == threaded

    def test_oversized_instances_are_skipped(self):
        with solver_config(exhaustive_limit=1):
            report = bench_ratio(self.instances[:3])

        assert len(report.skipped) == 3
        assert report.min_ratio is None
        assert str(report).endswith("0 completed, 3 skipped, min ratio n/a, 0 violations")


class TestBenchReport:
    """Aggregates and rendering."""

    def test_aggregates(self):
        report = BenchReport([row(0, 1.0), row(1, 0.5), row(2, 0.2, violation=True), row(3, 0, skipped=True)])

        assert report.violations == 1
        assert report.has_violations()
        assert report.min_ratio == pytest.approx(0.2)
        assert report.mean_ratio == pytest.approx(1.7 / 3)

    def test_to_dict(self):
        data = BenchReport([row(0, 1.0)]).to_dict(include_timing=False)

        assert "wall_time" not in data["instances"][0]
        assert data["aggregates"] == {
            "completed": 1,
            "skipped": 0,
            "min_ratio": 1.0,
            "mean_ratio": 1.0,
            "violations": 0,
        }

    def test_str(self):
        text = str(BenchReport([row(0, 1.0), row(1, 0.2, violation=True), row(2, 0, skipped=True)]))

        assert "✓ #0 (n=1, m=2)" in text
        assert "✗ #1" in text
        assert "- #2 (n=1, m=2) skipped" in text

    def test_empty(self):
        assert str(BenchReport()) == "No instances benchmarked"


class TestVerification:
    """The coded verification suite."""

    def test_report_rendering(self):
        report = VerificationReport(
            [CheckResult("V001", "first", True, "ok"), CheckResult("V002", "second", False, "broken")]
        )

        assert report.has_failures()
        assert [c.code for c in report.failures] == ["V002"]
        assert str(report).splitlines()[:2] == ["✓ V001 first: ok", "✗ V002 second: broken"]
        assert report.to_dict()["passed"] is False

    @pytest.mark.slow
    def test_suite_passes(self):
        report = verify_suite(GeneratorConfig(seed=0, count=6, n_range=(1, 2), m_range=(1, 3)))

        assert not report.has_failures(), str(report)
        assert [c.code for c in report.checks] == [f"V00{k}" for k in range(1, 10)]

    def test_oracle_check_matches_linprog(self, monkeypatch):
        pytest.importorskip("scipy.optimize")
        monkeypatch.setattr(harness, "VERIFICATION_CHECKS", [])

        report = verify_suite(GeneratorConfig(seed=5, count=8, n_range=(1, 3), m_range=(1, 4)), oracle=True)

        assert [c.code for c in report.checks] == ["V010"]
        assert report.checks[0].passed, report.checks[0].message
        assert report.checks[0].message == "8 assignment LPs match linprog"

    def test_missing_scipy_is_a_failed_check(self, monkeypatch):
        monkeypatch.setitem(sys.modules, "scipy.optimize", None)
        monkeypatch.setattr(harness, "VERIFICATION_CHECKS", [])

        report = verify_suite(GeneratorConfig(seed=5, count=2), oracle=True)

        assert report.has_failures()
        assert report.checks[0].message.startswith("ModuleNotFoundError in lp oracle during import")

    def test_oracle_is_opt_in(self, monkeypatch):
        monkeypatch.setattr(harness, "VERIFICATION_CHECKS", [])

        assert verify_suite(GeneratorConfig(seed=5, count=2)).checks == []
