import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from bdsim.core.errors import ConfigurationError, PreconditionError
from bdsim.simulation.couplings import (
    Comparison,
    assert_coupling_invariant,
    couple_bees_to_killright,
    couple_monotone,
    run_coupling,
)
from bdsim.simulation.kernel import RandomSource
from bdsim.simulation.particles import advance_to_next_event, new_system
from bdsim.simulation.rules import ScoreRule


class MonotoneCouplingTests(unittest.TestCase):
    def test_no_violations_from_common_start(self) -> None:
        for n, n_prime in [(2, 4), (1, 3), (3, 3)]:
            pair = couple_monotone(n, n_prime, [0.0] * n, [0.0] * n_prime, RandomSource(100 + n))
            report = run_coupling(pair, 3000)
            self.assertTrue(report.ok, report.first_violation.describe() if report.first_violation else "")
            self.assertEqual(report.events, 3000)

    def test_ordered_but_distinct_start(self) -> None:
        pair = couple_monotone(2, 4, [-1.0, 0.0], [-5.0, -2.0, 0.5, 1.0], RandomSource(7))
        self.assertTrue(run_coupling(pair, 2000).ok)

    def test_both_sides_keep_their_sizes(self) -> None:
        pair = couple_monotone(2, 5, [0.0, 0.0], [0.0] * 5, RandomSource(1))
        run_coupling(pair, 100)
        self.assertEqual(pair.system_a.n, 2)
        self.assertEqual(pair.system_b.n, 5)
        self.assertEqual(pair.system_a.time, pair.system_b.time)
        self.assertEqual(pair.comparison, Comparison.COMPONENTWISE_LEQ)

    def test_smaller_system_is_aligned_at_the_top(self) -> None:
        init_b = [-9.0, -8.0, -7.0, 1.0, 2.0]
        pair = couple_monotone(2, 5, [1.0, 2.0], init_b, RandomSource(12))
        self.assertEqual(pair.rank_offset, 3)
        left, right = pair.compared_values()
        np.testing.assert_array_equal(left, [1.0, 2.0])
        np.testing.assert_array_equal(right, [1.0, 2.0])
        self.assertTrue(run_coupling(pair, 1000).ok)

    def test_rejects_bad_sizes_and_unordered_start(self) -> None:
        with self.assertRaises(ConfigurationError):
            couple_monotone(4, 2, [0.0] * 4, [0.0] * 2, RandomSource(0))
        with self.assertRaises(PreconditionError):
            couple_monotone(2, 4, [5.0, 5.0], [0.0] * 4, RandomSource(0))
        with self.assertRaises(ConfigurationError):
            couple_monotone(2, 4, [0.0] * 2, [0.0] * 4, RandomSource(0), pairing="diagonal")

    def test_debug_rows(self) -> None:
        pair = couple_monotone(2, 3, [0.0] * 2, [0.0] * 3, RandomSource(3), debug=True)
        run_coupling(pair, 10)
        table = pair.debug_table()
        self.assertEqual(table.columns, ["event_index", "rank", "value_a", "value_b", "slack"])
        self.assertEqual(len(table.rows), 20)
        self.assertEqual(len(pair.permutations), 10)
        self.assertTrue(all(row[4] >= 0.0 for row in table.rows))


class KillRightCouplingTests(unittest.TestCase):
    def test_domination_for_several_drifts(self) -> None:
        for mu in (0.0, 0.3, 1.0, -0.4):
            pair = couple_bees_to_killright(3, mu, [0.0] * 3, RandomSource(55))
            report = run_coupling(pair, 3000)
            self.assertTrue(report.ok, f"mu={mu}: {report.first_violation}")

    def test_reported_positions_include_the_drift(self) -> None:
        pair = couple_bees_to_killright(2, 1.0, [0.0, 0.0], RandomSource(2))
        run_coupling(pair, 50)
        np.testing.assert_allclose(pair.system_b.positions[:, 0], pair.frame_b + pair.time)

    def test_initial_conditions_must_match(self) -> None:
        with self.assertRaises(PreconditionError):
            couple_bees_to_killright(2, 0.5, [0.0, 0.0], RandomSource(0), init_b=[1.0, 0.0])
        with self.assertRaises(ConfigurationError):
            couple_bees_to_killright(2, 0.5, [0.0], RandomSource(0))


@given(
    seed=st.integers(min_value=0, max_value=2**32),
    n=st.integers(min_value=1, max_value=4),
    extra=st.integers(min_value=0, max_value=3),
)
@settings(max_examples=25, deadline=None)
def test_monotone_invariant_property(seed: int, n: int, extra: int) -> None:
    pair = couple_monotone(n, n + extra, [0.0] * n, [0.0] * (n + extra), RandomSource(seed))
    for _ in range(200):
        pair.advance()
        assert assert_coupling_invariant(pair).ok


@given(seed=st.integers(min_value=0, max_value=2**32), mu=st.floats(min_value=-2.0, max_value=2.0))
@settings(max_examples=25, deadline=None)
def test_killright_invariant_property(seed: int, mu: float) -> None:
    pair = couple_bees_to_killright(2, mu, [0.0, 0.0], RandomSource(seed))
    report = run_coupling(pair, 200)
    assert report.violations == 0


def test_reversed_pairing_is_reported() -> None:
    reports = []
    for seed in range(20):
        pair = couple_monotone(2, 4, [0.0] * 2, [0.0] * 4, RandomSource(seed), pairing="reversed")
        report = run_coupling(pair, 2000)
        assert report.events == 2000
        assert pair.system_a.n == 2 and pair.system_b.n == 4
        reports.append(report)

    assert sum(report.violations for report in reports) > 0
    flagged = [report for report in reports if report.violations]
    for report in flagged:
        first = report.first_violation
        assert first is not None and not first.ok
        assert 1 <= first.event_index <= 2000
        assert first.event_time > 0.0
        assert first.value_a > first.value_b
        assert f"event {first.event_index} " in first.describe()


def test_describe_mentions_rank() -> None:
    pair = couple_monotone(1, 2, [0.0], [0.0, 0.0], RandomSource(1))
    pair.system_a.positions[:] = 10.0
    check = assert_coupling_invariant(pair)
    assert not check.ok
    assert "rank 0" in check.describe()
    assert check.value_a == 10.0


class CoupledMarginalTests(unittest.TestCase):
    """Each side of a coupling, read after a fixed number of events, has its uncoupled law."""

    REPS = 300
    EVENTS = 40

    def _uncoupled(self, n: int, rule: ScoreRule, mu: float = 0.0) -> list[float]:
        src = RandomSource(2)
        values = []
        for index in range(self.REPS):
            state = new_system(n, 1, None, rule, mu)
            stream = src.replicate(index)
            for _ in range(self.EVENTS):
                advance_to_next_event(state, stream)
            values.append(float(state.values.mean()))
        return values

    def _coupled(self, build) -> tuple[list[float], list[float]]:
        src = RandomSource(1)
        side_a, side_b = [], []
        for index in range(self.REPS):
            pair = build(src.replicate(index))
            for _ in range(self.EVENTS):
                pair.advance()
            side_a.append(float(pair.system_a.values.mean()))
            side_b.append(float(pair.system_b.values.mean()))
        return side_a, side_b

    def test_killright_and_bees_sides(self) -> None:
        mu = 0.6
        side_a, side_b = self._coupled(lambda stream: couple_bees_to_killright(3, mu, [0.0] * 3, stream))
        self.assertGreater(stats.ks_2samp(side_a, self._uncoupled(3, ScoreRule.of("kill_right"))).pvalue, 1e-3)
        self.assertGreater(stats.ks_2samp(side_b, self._uncoupled(3, ScoreRule.of("bees"), mu)).pvalue, 1e-3)

    def test_monotone_larger_side(self) -> None:
        _, side_b = self._coupled(lambda stream: couple_monotone(2, 4, [0.0] * 2, [0.0] * 4, stream))
        self.assertGreater(stats.ks_2samp(side_b, self._uncoupled(4, ScoreRule.of("kill_left"))).pvalue, 1e-3)
