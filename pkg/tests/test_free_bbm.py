import math
import unittest
from unittest import mock

import numpy as np
import pytest

from bdsim.core.errors import ConfigurationError, PreconditionError, ResourceCapError
from bdsim.simulation.free_bbm import (
    Functional,
    HorizonLaw,
    embedded_selection_trace,
    fit_radius_tail,
    many_to_one_check,
    radius_tail_profile,
    simulate_bbm,
)
from bdsim.simulation.kernel import RandomSource, sup_abs_exceedance_probability
from bdsim.simulation.particles import new_system, simulate_until
from bdsim.simulation.rules import ScoreRule
from bdsim.utils.tables import ResultTable


class ForestTests(unittest.TestCase):
    def test_zero_horizon_is_a_single_particle(self) -> None:
        src = RandomSource(1)
        forest = simulate_bbm(0.0, src)
        self.assertEqual(forest.population, 1)
        np.testing.assert_array_equal(forest.positions, [0.0])
        self.assertEqual(src.counter, 3)

    def test_three_uniforms_per_segment(self) -> None:
        src = RandomSource(2)
        forest = simulate_bbm(2.0, src)
        self.assertEqual(src.counter, 3 * forest.seg_label.size)

    def test_every_label_ends_alive(self) -> None:
        forest = simulate_bbm(2.5, RandomSource(3))
        self.assertEqual(forest.population, forest.labels_ever)
        self.assertEqual(forest.population, forest.branch_count + 1)
        self.assertEqual(forest.to_graph().number_of_nodes(), forest.labels_ever)

    def test_start_shifts_the_cloud(self) -> None:
        plain = simulate_bbm(1.0, RandomSource(4))
        shifted = simulate_bbm(1.0, RandomSource(4), start=5.0)
        np.testing.assert_allclose(shifted.positions, plain.positions + 5.0)

    def test_cap_raises(self) -> None:
        with self.assertRaises(ResourceCapError):
            simulate_bbm(10.0, RandomSource(5), cap=5)
        with self.assertRaises(ConfigurationError):
            simulate_bbm(-1.0, RandomSource(5))

    def test_newick_is_binary(self) -> None:
        forest = simulate_bbm(2.0, RandomSource(6))
        text = forest.to_newick()
        self.assertTrue(text.endswith(";"))
        self.assertEqual(text.count("("), forest.population - 1)
        self.assertEqual(text.count(":"), 2 * forest.population - 1)

    def test_radius_flags_are_monotone_in_x(self) -> None:
        forest = simulate_bbm(2.0, RandomSource(7))
        flags = [forest.radius_exceeds(x) for x in (0.25, 0.5, 1.0, 2.0, 4.0, 50.0)]
        self.assertEqual(flags, sorted(flags, reverse=True))
        self.assertFalse(flags[-1])


class FunctionalTests(unittest.TestCase):
    def test_parse(self) -> None:
        self.assertEqual(Functional.parse("constant_one"), Functional("constant_one"))
        self.assertEqual(Functional.parse("terminal-exceeds:1.5"), Functional("terminal_exceeds", 1.5))
        with self.assertRaises(ConfigurationError):
            Functional.parse("terminal_exceeds")
        with self.assertRaises(ConfigurationError):
            Functional.parse("median")

    def test_expected_sum(self) -> None:
        self.assertAlmostEqual(Functional("constant_one").expected_sum(1.0), math.e)
        self.assertAlmostEqual(Functional("terminal_exceeds", 0.0).expected_sum(2.0), math.exp(2.0) / 2.0)
        sup = Functional("indicator_sup_exceeds", 1.0).expected_sum(1.0)
        terminal = Functional("terminal_exceeds", 1.0).expected_sum(1.0)
        self.assertGreater(sup, terminal)

    def test_brownian_value_uses_two_uniforms(self) -> None:
        src = RandomSource(8)
        value = Functional("indicator_sup_exceeds", 0.5).over_brownian(1.0, src)
        self.assertIn(value, (0.0, 1.0))
        self.assertEqual(src.counter, 2)


def test_many_to_one_population_matches_growth() -> None:
    result = many_to_one_check("constant_one", 1.0, 400, RandomSource(11))
    assert result.rhs_estimate == pytest.approx(math.e)
    assert result.rhs_stderr == 0.0
    assert abs(result.z_score) < 4.0
    assert result.oracle == pytest.approx(math.e)


def test_many_to_one_terminal_functional() -> None:
    result = many_to_one_check("terminal_exceeds:0.5", 1.0, 400, RandomSource(12))
    assert abs(result.z_score) < 4.5
    assert abs(result.lhs_estimate - result.oracle) < 4.5 * result.lhs_stderr


def test_many_to_one_sup_exceedance() -> None:
    result = many_to_one_check("indicator_sup_exceeds:1.0", 1.0, 800, RandomSource(13))
    assert result.functional == "indicator_sup_exceeds(1)"
    assert result.oracle == pytest.approx(math.e * sup_abs_exceedance_probability(1.0, 1.0))
    assert abs(result.z_score) < 4.5
    assert abs(result.lhs_estimate - result.oracle) < 4.5 * result.lhs_stderr
    assert abs(result.rhs_estimate - result.oracle) < 4.5 * result.rhs_stderr


class RadiusTailTests(unittest.TestCase):
    def test_horizon_law_parse(self) -> None:
        self.assertEqual(HorizonLaw.parse("fixed:2"), HorizonLaw("fixed", 2.0))
        self.assertEqual(HorizonLaw.parse("exponential:0.5").kind, "exponential")
        for bad in ("uniform:1", "fixed:-1", "exponential:0", "fixed"):
            with self.assertRaises(ConfigurationError):
                HorizonLaw.parse(bad)

    def test_fixed_law_consumes_nothing(self) -> None:
        src = RandomSource(0)
        self.assertEqual(HorizonLaw("fixed", 3.0).draw(src), 3.0)
        self.assertEqual(src.counter, 0)

    def test_profile_is_non_increasing(self) -> None:
        table = radius_tail_profile("fixed:1", [0.5, 1.0, 2.0, 4.0], 200, RandomSource(21))
        self.assertEqual(table.columns, ["x", "empirical_tail", "stderr"])
        tails = table.column("empirical_tail")
        self.assertEqual(tails, sorted(tails, reverse=True))
        self.assertGreater(tails[0], 0.5)

    def test_fit_recovers_a_known_envelope(self) -> None:
        table = ResultTable("radius_tail", ["x", "empirical_tail", "stderr"])
        for x in (1.0, 4.0, 9.0, 16.0):
            table.append(x, math.exp(-math.sqrt(x)), 0.001)
        table.append(25.0, 0.5 * math.exp(-5.0), 0.0001)
        fit = fit_radius_tail(table, holdout_xs=[25.0])
        self.assertAlmostEqual(fit.slope, -1.0, places=9)
        self.assertAlmostEqual(fit.envelope_c, 1.0, places=9)
        self.assertTrue(fit.holdout_ok)
        self.assertEqual(len(fit.holdout), 1)

    def test_fit_needs_two_positive_points(self) -> None:
        table = ResultTable("radius_tail", ["x", "empirical_tail", "stderr"], [[1.0, 0.2, 0.01], [4.0, 0.0, 0.0]])
        with self.assertRaises(PreconditionError):
            fit_radius_tail(table)


class EmbeddingTests(unittest.TestCase):
    def test_selected_particles_match_the_particle_system(self) -> None:
        src = RandomSource(31)
        check = embedded_selection_trace(3, 4.0, src)
        self.assertTrue(check.ok)
        self.assertIsNone(check.first_violation_event)
        self.assertEqual(check.max_discrepancy, 0.0)
        self.assertGreater(check.events, 0)
        self.assertGreater(check.max_population, 3)

        state = new_system(3, 1, None, ScoreRule.of("kill_left"))
        simulate_until(state, 4.0, RandomSource(31))
        np.testing.assert_array_equal(check.selected_positions, state.values)

    def test_offset_start_and_used_stream(self) -> None:
        src = RandomSource(5, 2)
        src.uniforms(7)
        check = embedded_selection_trace(4, 2.5, src, init=[1.0, -0.5, 0.0, 2.0])
        self.assertTrue(check.ok)

    def test_wrong_selection_rule_is_flagged(self) -> None:
        def drop_rightmost(positions, rule, time=0.0):
            return int(np.argmax(np.asarray(positions)[:, 0]))

        with mock.patch("bdsim.simulation.free_bbm.select_victim", drop_rightmost):
            check = embedded_selection_trace(4, 3.0, RandomSource(1))
        self.assertFalse(check.ok)
        self.assertGreater(check.violations, 0)
        self.assertIsNotNone(check.first_violation_event)
        self.assertGreater(check.max_discrepancy, 0.0)

    def test_bad_arguments(self) -> None:
        with self.assertRaises(ConfigurationError):
            embedded_selection_trace(0, 1.0, RandomSource(0))
        with self.assertRaises(ConfigurationError):
            embedded_selection_trace(2, 1.0, RandomSource(0), init=[0.0])
