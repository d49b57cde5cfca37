import unittest

from bdsim.core.errors import ConfigurationError, UnsupportedConfigurationError
from bdsim.estimators.bees import (
    STATISTICS,
    escape_velocity,
    recurrence_profile,
    recurrence_return_counter,
    stationarity_diagnostic,
    summarise_returns,
)
from bdsim.estimators.speed import CriticalSpeedCache
from bdsim.simulation.kernel import RandomSource


def _cache() -> CriticalSpeedCache:
    cache = CriticalSpeedCache(RandomSource(0))
    cache.put(2, 0.5, 0.01)
    return cache


class EscapeVelocityTests(unittest.TestCase):
    def test_escape_matches_the_prediction(self) -> None:
        report = escape_velocity(2, 1.0, 300.0, 30, RandomSource(1), critical=_cache())
        self.assertEqual(report.diagnostics["predicted"], 0.5)
        self.assertTrue(report.within(0.5, se_multiple=4.0, allowance=0.05), report.point_estimate)

    def test_negative_drift_escapes_left(self) -> None:
        report = escape_velocity(2, -1.0, 300.0, 30, RandomSource(2), critical=_cache())
        self.assertEqual(report.diagnostics["predicted"], -0.5)
        self.assertLess(report.point_estimate, 0.0)

    def test_subcritical_drift_is_refused(self) -> None:
        with self.assertRaises(ConfigurationError):
            escape_velocity(2, 0.1, 100.0, 5, RandomSource(3), critical=_cache())


class StationarityTests(unittest.TestCase):
    def test_table_shape(self) -> None:
        table = stationarity_diagnostic(2, 0.1, 20.0, 5.0, 40, [0.0, 0.0], [20.0, 20.0], RandomSource(4), chains=10)
        self.assertEqual(table.column("statistic"), list(STATISTICS))
        self.assertEqual(table.column("samples_a"), [40] * 4)
        self.assertTrue(all(0.0 <= value <= 1.0 for value in table.column("ks_distance")))

    def test_shared_randomness_with_equal_starts_is_identical(self) -> None:
        table = stationarity_diagnostic(
            2, 0.1, 5.0, 2.0, 20, [1.0, 1.0], [1.0, 1.0], RandomSource(5), chains=5, shared_randomness=True
        )
        self.assertEqual(table.column("ks_distance"), [0.0] * 4)

    def test_subcritical_starts_forget_their_origin(self) -> None:
        table = stationarity_diagnostic(2, 0.1, 60.0, 10.0, 200, [0.0, 0.0], [5.0, 5.0], RandomSource(7), chains=50)
        self.assertEqual(table.column("samples_b"), [200] * 4)
        for name, distance in zip(table.column("statistic"), table.column("ks_distance")):
            self.assertLess(distance, 0.3, name)

    def test_supercritical_starts_stay_apart(self) -> None:
        table = stationarity_diagnostic(2, 1.5, 20.0, 2.0, 200, [0.0, 0.0], [20.0, 20.0], RandomSource(8), chains=50)
        row = table.column("statistic").index("center_of_mass")
        self.assertGreater(table.column("ks_distance")[row], 0.6)
        self.assertLess(table.column("pvalue")[row], 1e-6)

    def test_bad_arguments(self) -> None:
        with self.assertRaises(ConfigurationError):
            stationarity_diagnostic(2, 0.1, 5.0, 1.0, 20, [0.0], [0.0, 0.0], RandomSource(0))
        with self.assertRaises(ConfigurationError):
            stationarity_diagnostic(2, 0.1, 5.0, 1.0, 4, [0.0, 0.0], [0.0, 0.0], RandomSource(0), chains=10)


class RecurrenceTests(unittest.TestCase):
    def test_returns_are_counted(self) -> None:
        summary = recurrence_return_counter(2, 0.1, 200.0, RandomSource(6), init=[1.0, 1.0])
        self.assertGreater(summary.count, 0)
        self.assertLessEqual(summary.last_return, 200.0)

    def test_zero_horizon(self) -> None:
        summary = recurrence_return_counter(2, 0.1, 0.0, RandomSource(6), init=[1.0, 1.0])
        self.assertEqual(summary.count, 0)
        self.assertIsNone(summary.last_return)

    def test_only_one_dimensional_bees(self) -> None:
        with self.assertRaises(UnsupportedConfigurationError):
            recurrence_return_counter(2, 0.1, 10.0, RandomSource(0), dimension=2)
        with self.assertRaises(UnsupportedConfigurationError):
            recurrence_return_counter(2, 0.1, 10.0, RandomSource(0), rule="kill_left")

    def test_profile_and_summary(self) -> None:
        table = recurrence_profile(2, 0.1, 100.0, 5, RandomSource(7))
        self.assertEqual(table.column("replicate"), list(range(5)))
        summary = summarise_returns(table)
        self.assertEqual(set(summary), {"mean_count", "count_stderr", "terminated_fraction"})
        self.assertGreaterEqual(summary["terminated_fraction"], 0.0)
        self.assertLessEqual(summary["terminated_fraction"], 1.0)
