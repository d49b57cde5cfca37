import math
import unittest

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pydantic import ValidationError

from bdsim.core.errors import ConfigurationError
from bdsim.estimators.replicates import run_replicates
from bdsim.estimators.stats import EstimateReport, MomentAccumulator, fit_line, two_sample_ks, z_score
from bdsim.simulation.kernel import RandomSource


class MomentAccumulatorTests(unittest.TestCase):
    def test_mean_and_variance(self) -> None:
        acc = MomentAccumulator.from_values([1.0, 2.0, 3.0, 4.0])
        self.assertEqual(acc.mean, 2.5)
        self.assertAlmostEqual(acc.variance, 5.0 / 3.0)
        self.assertAlmostEqual(acc.standard_error, math.sqrt(5.0 / 12.0))

    def test_single_value_has_zero_error(self) -> None:
        acc = MomentAccumulator.from_values([7.0])
        self.assertEqual(acc.variance, 0.0)
        self.assertEqual(acc.standard_error, 0.0)

    def test_empty_mean_raises(self) -> None:
        with self.assertRaises(ConfigurationError):
            _ = MomentAccumulator().mean


@given(
    left=st.lists(st.floats(min_value=-1e3, max_value=1e3), min_size=1, max_size=20),
    right=st.lists(st.floats(min_value=-1e3, max_value=1e3), min_size=1, max_size=20),
)
@settings(max_examples=50, deadline=None)
def test_merge_matches_a_single_pass(left: list[float], right: list[float]) -> None:
    merged = MomentAccumulator.from_values(left).merge(MomentAccumulator.from_values(right))
    whole = MomentAccumulator.from_values(left + right)
    assert merged.count == whole.count
    assert merged.mean == pytest.approx(whole.mean, abs=1e-9)


class EstimateReportTests(unittest.TestCase):
    def test_interval_is_filled(self) -> None:
        report = EstimateReport(point_estimate=1.0, standard_error=0.1, replicate_count=30, horizon=100.0)
        self.assertAlmostEqual(report.ci95[0], 1.0 - 0.196)
        self.assertAlmostEqual(report.ci95[1], 1.0 + 0.196)

    def test_inconsistent_interval_rejected(self) -> None:
        with self.assertRaises(ValidationError):
            EstimateReport(point_estimate=1.0, standard_error=0.1, replicate_count=30, horizon=1.0, ci95=(0.0, 5.0))
        with self.assertRaises(ValidationError):
            EstimateReport(point_estimate=1.0, standard_error=-0.1, replicate_count=30, horizon=1.0)

    def test_zero_error_is_allowed(self) -> None:
        report = EstimateReport.from_values([0.0] * 30, horizon=100.0)
        self.assertEqual(report.ci95, (0.0, 0.0))
        self.assertTrue(report.within(0.0))

    def test_overlaps(self) -> None:
        a = EstimateReport(point_estimate=0.0, standard_error=1.0, replicate_count=2, horizon=1.0)
        b = EstimateReport(point_estimate=3.0, standard_error=1.0, replicate_count=2, horizon=1.0)
        c = EstimateReport(point_estimate=10.0, standard_error=1.0, replicate_count=2, horizon=1.0)
        self.assertTrue(a.overlaps(b))
        self.assertFalse(a.overlaps(c))


def test_fit_line_on_exact_points() -> None:
    fit = fit_line([1.0, 2.0, 3.0, 4.0], [3.0, 5.0, 7.0, 9.0])
    assert fit.slope == pytest.approx(2.0)
    assert fit.intercept == pytest.approx(1.0)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.slope_ci95()[0] == pytest.approx(2.0)


def test_fit_line_edge_cases() -> None:
    assert math.isnan(fit_line([1.0, 2.0], [0.0, 1.0]).slope_ci95()[0])
    assert fit_line([1.0, 2.0, 3.0], [4.0, 4.0, 4.0]).slope == 0.0
    with pytest.raises(ConfigurationError):
        fit_line([1.0, 1.0], [0.0, 1.0])
    with pytest.raises(ConfigurationError):
        fit_line([1.0], [0.0])


def test_z_score() -> None:
    assert z_score(1.0, 3.0, 1.0, 4.0) == 0.0
    assert z_score(6.0, 3.0, 1.0, 4.0) == pytest.approx(1.0)
    assert z_score(1.0, 0.0, 1.0, 0.0) == 0.0
    assert z_score(2.0, 0.0, 1.0, 0.0) == math.inf


def test_two_sample_ks_identical_samples() -> None:
    result = two_sample_ks([0.1, 0.2, 0.3], [0.1, 0.2, 0.3])
    assert result.statistic == 0.0
    assert result.pvalue == pytest.approx(1.0)


class ReplicateRunnerTests(unittest.TestCase):
    def test_results_are_in_replicate_order(self) -> None:
        src = RandomSource(5)
        values = run_replicates(lambda stream: stream.stream_id, src, 6)
        self.assertEqual(values, list(range(6)))

    def test_thread_count_does_not_change_results(self) -> None:
        src = RandomSource(99)
        serial = run_replicates(lambda stream: float(stream.uniforms(3).sum()), src, 20)
        threaded = run_replicates(lambda stream: float(stream.uniforms(3).sum()), src, 20, threads=4)
        self.assertEqual(serial, threaded)

    def test_bad_counts(self) -> None:
        with self.assertRaises(ConfigurationError):
            run_replicates(lambda stream: 0, RandomSource(0), 0)
        with self.assertRaises(ConfigurationError):
            run_replicates(lambda stream: 0, RandomSource(0), 3, threads=0)
