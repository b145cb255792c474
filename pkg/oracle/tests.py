import itertools
from math import comb

import numpy as np
from django.test import SimpleTestCase

from core.exceptions import ParameterError
from engine.process import OutcomeKind, apply_pair, draw_pair
from kernel.params import ModelParams
from kernel.rules import AttractionRepulsion

from .forcing import forced_path_probability, forcing_sequence, verify_forcing
from .martingale import (expected_deltas, expected_h_change, find_submartingale_counterexample, h_energy,
                         search_counterexamples)

HALF = ModelParams(tau=0.5, lam=0.5, mu=0.5)


class ForcingSequenceTests(SimpleTestCase):

    def test_far_pair_is_driven_to_the_poles(self):
        params = ModelParams(tau=0.4, lam=0.5, mu=0.5)
        trajectory = forcing_sequence([0.1, 0.6], params, 0.1)
        self.assertTrue(trajectory.reached)
        self.assertEqual(trajectory.terminal_kind, OutcomeKind.POLARIZED)
        self.assertEqual(trajectory.sequence, [(0, 1)] * 3)
        np.testing.assert_allclose(trajectory.states[1], [0.05, 0.8], atol=1e-12)
        np.testing.assert_allclose(trajectory.states[2], [0.025, 0.9], atol=1e-12)
        np.testing.assert_allclose(trajectory.states[3], [0.0125, 0.95], atol=1e-12)

    def test_close_cluster_contracts_to_consensus(self):
        trajectory = forcing_sequence([0.3, 0.35, 0.4], HALF, 0.01)
        self.assertTrue(trajectory.reached)
        self.assertEqual(trajectory.terminal_kind, OutcomeKind.CONSENSUS)

    def test_already_trivialized_needs_no_pairs(self):
        trajectory = forcing_sequence([0.0, 0.0, 0.0], HALF, 0.1)
        self.assertTrue(trajectory.reached)
        self.assertEqual(trajectory.sequence, [])
        self.assertEqual(len(trajectory.states), 1)

    def test_budget_exhaustion_is_in_band(self):
        trajectory = forcing_sequence([0.1, 0.5, 0.9, 0.45], HALF, 0.01, max_len=2)
        self.assertFalse(trajectory.reached)
        self.assertIsNone(trajectory.terminal_kind)
        self.assertEqual(len(trajectory.sequence), 2)

    def test_consecutive_states_differ_only_at_the_forced_pair(self):
        params = ModelParams(tau=0.4, lam=0.5, mu=0.5)
        config = np.random.default_rng(5).random(6)
        trajectory = forcing_sequence(config, params, params.stopping_epsilon)
        self.assertEqual(len(trajectory.states), len(trajectory.sequence) + 1)
        for (i, j), before, after in zip(trajectory.sequence, trajectory.states, trajectory.states[1:]):
            untouched = [k for k in range(6) if k not in (i, j)]
            np.testing.assert_array_equal(before[untouched], after[untouched])

    def test_rejects_epsilon_outside_absorbing_range(self):
        with self.assertRaises(ParameterError):
            forcing_sequence([0.2, 0.3], HALF, 0.3)

    def test_random_starts_are_forced_into_the_neighborhood(self):
        rng = np.random.default_rng(17)
        for tau in (0.4, 0.6):
            params = ModelParams(tau=tau, lam=0.5, mu=0.5)
            for _ in range(1000):
                self.assertTrue(verify_forcing(rng.random(6), params, params.stopping_epsilon))

    def test_small_tolerance_regimes(self):
        rng = np.random.default_rng(23)
        for tau in (0.15, 0.3, 0.5, 0.8):
            params = ModelParams(tau=tau, lam=0.3, mu=0.4)
            for _ in range(100):
                self.assertTrue(verify_forcing(rng.random(5), params, params.stopping_epsilon))

    def test_forced_path_has_at_least_uniform_probability(self):
        params = ModelParams(tau=0.4, lam=0.5, mu=0.5)
        config = [0.1, 0.45, 0.7]
        trajectory = forcing_sequence(config, params, 0.05, max_len=3)
        sequence = trajectory.sequence[:3]
        self.assertGreaterEqual(forced_path_probability(config, sequence, params), comb(3, 2) ** -len(sequence))


class EnergyTests(SimpleTestCase):

    def test_energy_examples(self):
        self.assertAlmostEqual(h_energy([0.0, 0.5, 1.0], 0.5), 0.5)
        self.assertAlmostEqual(h_energy([0.3] * 5, 0.4), comb(5, 2) * 0.4)
        self.assertAlmostEqual(h_energy([0.0, 1.0], 0.3), 0.7)

    def test_energy_bounds_and_symmetries(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            n = int(rng.integers(2, 8))
            tau = float(rng.uniform(0.05, 0.95))
            config = rng.random(n)
            h = h_energy(config, tau)
            self.assertGreaterEqual(h, 0.0)
            self.assertLessEqual(h, comb(n, 2) * max(tau, 1 - tau) + 1e-12)
            self.assertAlmostEqual(h_energy(rng.permutation(config), tau), h, places=12)
            self.assertAlmostEqual(h_energy(1 - config, tau), h, places=12)

    def test_exact_drift_example(self):
        report = expected_h_change([0.1, 0.5, 0.9], HALF)
        self.assertAlmostEqual(report.h_value, 0.5, places=12)
        self.assertAlmostEqual(report.expected_next_h, 0.5, places=12)
        self.assertAlmostEqual(report.delta, 0.0, places=12)
        self.assertEqual([pair for pair, _ in report.per_pair_outcomes], [(0, 1), (0, 2), (1, 2)])

    def test_trivialized_configurations_have_no_drift(self):
        for config in ([0.0, 1.0, 1.0, 0.0], [0.4] * 4):
            self.assertAlmostEqual(expected_h_change(config, HALF).delta, 0.0, places=12)

    def test_exact_drift_agrees_with_sampled_scheduler(self):
        rule = AttractionRepulsion(HALF)
        rng = np.random.default_rng(9)
        config = rng.random(5)
        report = expected_h_change(config, HALF)
        samples = np.array([h_energy(apply_pair(config, *draw_pair(rng, 5), rule), HALF.tau)
                            for _ in range(20_000)])
        sigma = samples.std() / np.sqrt(len(samples))
        self.assertLess(abs(samples.mean() - report.expected_next_h), 4 * sigma + 1e-12)

    def test_three_agents_never_drift_down(self):
        configs = np.random.default_rng(12).random((100_000, 3))
        self.assertGreaterEqual(expected_deltas(configs, HALF).min(), -1e-12)


class CounterexampleSearchTests(SimpleTestCase):

    def test_none_for_three_agents(self):
        self.assertIsNone(find_submartingale_counterexample(3, HALF, 100_000, seed=1))

    def test_found_for_four_agents(self):
        config = find_submartingale_counterexample(4, HALF, 100_000, seed=1)
        self.assertIsNotNone(config)
        self.assertLess(expected_h_change(config, HALF).delta, -1e-9)

    def test_none_for_two_agents(self):
        self.assertIsNone(find_submartingale_counterexample(2, HALF, 10_000, seed=1))

    def test_merged_search_is_deterministic(self):
        first = search_counterexamples(4, HALF, 20_000, seeds=[3, 1, 2])
        second = search_counterexamples(4, HALF, 20_000, seeds=[1, 2, 3])
        np.testing.assert_array_equal(first, second)

    def test_exhaustive_pairs_match_report(self):
        config = [0.2, 0.3, 0.75, 0.9]
        report = expected_h_change(config, HALF)
        self.assertEqual(len(report.per_pair_outcomes), len(list(itertools.combinations(range(4), 2))))
