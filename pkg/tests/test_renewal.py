import math
import unittest

import numpy as np

from bdsim.core.errors import ConfigurationError, PreconditionError
from bdsim.estimators.renewal import (
    IncrementLaw,
    RenewalChainSample,
    compose_increments,
    first_passage_counts,
    n2_renewal_chain,
    random_sum_first_passage,
)
from bdsim.simulation.kernel import RandomSource


class ComposeIncrementsTests(unittest.TestCase):
    def test_shared_horizon_mean(self) -> None:
        increments, gaps = compose_increments(0.2, 20000, RandomSource(1))
        self.assertLess(abs(increments.mean() - 0.3), 0.03)
        self.assertLess(abs(gaps.mean() - 1.0), 0.04)
        self.assertTrue(np.all(gaps > 0.0))

    def test_independent_laplace_mean(self) -> None:
        increments, _ = compose_increments(0.0, 20000, RandomSource(2), "independent_laplace")
        self.assertLess(abs(increments.mean() - 3.0 / (4.0 * math.sqrt(2.0))), 0.035)

    def test_three_uniforms_per_draw(self) -> None:
        src = RandomSource(3)
        compose_increments(0.0, 17, src)
        self.assertEqual(src.counter, 51)

    def test_unknown_composition(self) -> None:
        with self.assertRaises(ConfigurationError):
            compose_increments(0.0, 5, RandomSource(0), "product")


class RenewalChainTests(unittest.TestCase):
    def test_sample_rejects_non_positive_gaps(self) -> None:
        with self.assertRaises(ValueError):
            RenewalChainSample(np.array([1.0, 2.0]), np.array([1.0, 0.0]))
        with self.assertRaises(ValueError):
            RenewalChainSample(np.array([1.0]), np.array([1.0, 2.0]))

    def test_ratio_estimate(self) -> None:
        sample = RenewalChainSample(np.array([1.0, 3.0]), np.array([1.0, 1.0]))
        ratio, _ = sample.ratio_estimate()
        self.assertEqual(ratio, 2.0)

    def test_direct_only(self) -> None:
        result = n2_renewal_chain(0.0, 50, 4, RandomSource(4), simulate=False)
        self.assertEqual(result.direct.size, 200)
        self.assertIsNone(result.extracted)
        self.assertEqual(len(result.summary_table().rows), 1)

    def test_simulated_chain_matches_direct_composition(self) -> None:
        result = n2_renewal_chain(0.1, 200, 5, RandomSource(5))
        self.assertEqual(result.extracted.size, 1000)
        self.assertTrue(np.all(result.extracted.gaps > 0.0))
        self.assertGreater(result.ks.pvalue, 1e-4)
        table = result.summary_table()
        self.assertEqual(table.column("source"), ["direct", "simulation"])
        self.assertIsNone(table.rows[0][-1])

    def test_steps_must_be_positive(self) -> None:
        with self.assertRaises(ConfigurationError):
            n2_renewal_chain(0.0, 0, 2, RandomSource(0))


class RandomSumTests(unittest.TestCase):
    def test_law_parse(self) -> None:
        self.assertEqual(IncrementLaw.parse("normal_shift:0.5"), IncrementLaw("normal_shift", 0.5))
        self.assertEqual(IncrementLaw.parse("n2-renewal"), IncrementLaw("n2_renewal", 0.0))
        with self.assertRaises(ConfigurationError):
            IncrementLaw.parse("cauchy")

    def test_first_passage_of_unit_steps(self) -> None:
        sampler = IncrementLaw.parse("constant_one").sampler()
        self.assertEqual(first_passage_counts([0.0, 0.5, 3.0, 3.2, 600.0], sampler, RandomSource(0)), [0, 1, 3, 4, 600])

    def test_constant_law_is_exact(self) -> None:
        result = random_sum_first_passage("constant_one", [5.0, 10.0, 20.0], 5, RandomSource(6))
        self.assertEqual(result.table.column("mean_tau"), [5.0, 10.0, 20.0])
        self.assertEqual(result.table.column("stderr"), [0.0, 0.0, 0.0])
        self.assertAlmostEqual(result.fit.slope, 1.0)
        self.assertEqual(result.pilot_mean, 1.0)

    def test_normal_shift_slope(self) -> None:
        result = random_sum_first_passage("normal_shift:1.0", [5.0, 10.0, 20.0, 40.0], 200, RandomSource(7))
        self.assertLess(abs(result.fit.slope - 1.0), 0.1)

    def test_non_positive_mean_is_refused(self) -> None:
        with self.assertRaises(PreconditionError):
            random_sum_first_passage("normal_shift:-1", [1.0, 2.0], 5, RandomSource(8))
        with self.assertRaises(PreconditionError):
            random_sum_first_passage("n2_renewal:0.8", [1.0, 2.0], 5, RandomSource(8))
