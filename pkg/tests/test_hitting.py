import unittest

from bdsim.core.errors import ConfigurationError
from bdsim.estimators.hitting import bees_return_time, hitting_time_linearity, nbbm_passage_time
from bdsim.estimators.speed import CriticalSpeedCache
from bdsim.simulation.kernel import RandomSource


def _cache(speed: float = 0.5) -> CriticalSpeedCache:
    cache = CriticalSpeedCache(RandomSource(0))
    cache.put(2, speed, 0.01)
    return cache


class PassageTimeTests(unittest.TestCase):
    def test_nbbm_passage_is_positive(self) -> None:
        value = nbbm_passage_time(2, 0.1, 2.0, 1e5, RandomSource(1))
        self.assertGreater(value, 0.0)

    def test_nbbm_level_zero_is_immediate(self) -> None:
        self.assertEqual(nbbm_passage_time(2, 0.1, 0.0, 1e5, RandomSource(1)), 0.0)

    def test_bees_return_is_positive(self) -> None:
        value = bees_return_time(2, 0.1, 1.0, 1e5, 1e-6, RandomSource(2))
        self.assertGreater(value, 0.0)


class HittingLinearityTests(unittest.TestCase):
    def test_nbbm_table_and_fit(self) -> None:
        result = hitting_time_linearity("nbbm_drift", 2, 0.1, [1.0, 2.0, 4.0], 40, RandomSource(3), critical=_cache())
        self.assertEqual(result.table.columns, ["r", "mean_tau", "stderr"])
        self.assertEqual(result.table.column("r"), [1.0, 2.0, 4.0])
        self.assertGreater(result.fit.slope, 0.0)
        self.assertEqual(result.critical.speed, 0.5)

    def test_bees_rows(self) -> None:
        result = hitting_time_linearity("bees_drift", 2, 0.1, [1.0, 2.0], 10, RandomSource(4), critical=_cache())
        self.assertTrue(all(value > 0.0 for value in result.table.column("mean_tau")))

    def test_rows_use_independent_streams(self) -> None:
        first = hitting_time_linearity("nbbm_drift", 2, 0.1, [1.0], 5, RandomSource(5), critical=_cache())
        second = hitting_time_linearity("nbbm_drift", 2, 0.1, [1.0, 2.0], 5, RandomSource(5), critical=_cache())
        self.assertEqual(first.table.rows[0], second.table.rows[0])

    def test_supercritical_drift_is_refused(self) -> None:
        with self.assertRaises(ConfigurationError):
            hitting_time_linearity("nbbm_drift", 2, 0.8, [1.0, 2.0], 5, RandomSource(6), critical=_cache())

    def test_bad_arguments(self) -> None:
        with self.assertRaises(ConfigurationError):
            hitting_time_linearity("bbm", 2, 0.1, [1.0], 5, RandomSource(0), critical=_cache())
        with self.assertRaises(ConfigurationError):
            hitting_time_linearity("bees_drift", 2, 0.1, [0.0, 1.0], 5, RandomSource(0), critical=_cache())
