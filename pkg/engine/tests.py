import itertools
from collections import Counter

import numpy as np
from django.test import SimpleTestCase

from core.exceptions import ParameterError, SchedulerError
from core.seeding import stream
from core.testing import slow
from kernel.params import ModelParams
from kernel.rules import AttractionRepulsion

from .process import (EmpiricalSamples, OutcomeKind, ProcessState, SchedulerKind, Uniform01,
                      apply_pair, classify, draw_matching, run_to_trivialization, sample_initial, step)
from .sweeps import estimate_p_polarization, sweep, two_agent_p_polarization

HALF = ModelParams(tau=0.5, lam=0.5, mu=0.5)


class SampleInitialTests(SimpleTestCase):

    def test_uniform_draws_are_reproducible(self):
        first = sample_initial(4, Uniform01(), np.random.default_rng(7))
        second = sample_initial(4, Uniform01(), np.random.default_rng(7))
        np.testing.assert_array_equal(first, second)
        self.assertTrue(np.all((first >= 0) & (first <= 1)))

    def test_single_atom_resampling(self):
        config = sample_initial(3, EmpiricalSamples((0.5,)), np.random.default_rng(1))
        np.testing.assert_array_equal(config, [0.5, 0.5, 0.5])

    def test_uniform_mean(self):
        config = sample_initial(10_000, Uniform01(), np.random.default_rng(2))
        self.assertLess(abs(config.mean() - 0.5), 0.02)

    def test_rejects_bad_samples(self):
        with self.assertRaises(ParameterError):
            EmpiricalSamples(())
        with self.assertRaises(ParameterError):
            EmpiricalSamples((0.2, 1.5))
        with self.assertRaises(ParameterError):
            sample_initial(1, Uniform01(), np.random.default_rng(0))


class StepTests(SimpleTestCase):

    def setUp(self):
        self.rule = AttractionRepulsion(HALF)

    def test_two_agents_always_meet(self):
        state = ProcessState.start([0.2, 0.4], seed=3)
        state = step(state, SchedulerKind.UNIFORM_PAIR, self.rule)
        np.testing.assert_allclose(state.config, [0.25, 0.35], atol=1e-12)
        self.assertEqual(state.time, 1)

    def test_forced_pair_leaves_third_agent(self):
        config = apply_pair(np.array([0.2, 0.4, 0.9]), 0, 1, self.rule)
        np.testing.assert_allclose(config, [0.25, 0.35, 0.9], atol=1e-12)
        self.assertEqual(config[2], 0.9)

    def test_uniform_pair_changes_only_the_chosen_pair(self):
        state = ProcessState.start(np.random.default_rng(0).random(12), seed=9)
        for _ in range(200):
            after = step(state, SchedulerKind.UNIFORM_PAIR, self.rule)
            changed = np.flatnonzero(after.config != state.config)
            self.assertLessEqual(len(changed), 2)
            state = after

    def test_matching_covers_every_agent_once(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            left, right = draw_matching(rng, 10)
            self.assertEqual(sorted(np.concatenate([left, right])), list(range(10)))

    def test_matchings_of_four_are_uniform(self):
        rng = np.random.default_rng(5)
        counts = Counter()
        draws = 100_000
        for _ in range(draws):
            left, right = draw_matching(rng, 4)
            counts[frozenset(frozenset(p) for p in zip(left.tolist(), right.tolist()))] += 1
        self.assertEqual(len(counts), 3)
        for count in counts.values():
            self.assertAlmostEqual(count / draws, 1 / 3, delta=0.02)

    def test_matching_rejects_odd_population(self):
        state = ProcessState.start([0.1, 0.2, 0.3], seed=1)
        with self.assertRaises(SchedulerError):
            step(state, SchedulerKind.RANDOM_MATCHING, self.rule)

    def test_equal_streams_give_equal_trajectories(self):
        initial = np.random.default_rng(8).random(6)
        a = ProcessState.start(initial, seed=42, stream_index=(3,))
        b = ProcessState.start(initial, seed=42, stream_index=(3,))
        for _ in range(50):
            a = step(a, SchedulerKind.RANDOM_MATCHING, self.rule)
            b = step(b, SchedulerKind.RANDOM_MATCHING, self.rule)
            np.testing.assert_array_equal(a.config, b.config)


class ClassifyTests(SimpleTestCase):

    def test_polarized(self):
        outcome = classify([0.01, 0.99, 0.995], 0.05)
        self.assertEqual(outcome.kind, OutcomeKind.POLARIZED)
        self.assertFalse(outcome.degenerate_pole)

    def test_consensus(self):
        outcome = classify([0.48, 0.50, 0.52], 0.05)
        self.assertEqual(outcome.kind, OutcomeKind.CONSENSUS)
        self.assertAlmostEqual(outcome.alpha, 0.5)

    def test_single_pole_counts_as_polarized(self):
        outcome = classify([0.01, 0.02], 0.05)
        self.assertEqual(outcome.kind, OutcomeKind.POLARIZED)
        self.assertTrue(outcome.degenerate_pole)

    def test_nontrivialized(self):
        self.assertEqual(classify([0.1, 0.5, 0.9], 0.05).kind, OutcomeKind.NON_TRIVIALIZED)

    def test_rejects_bad_epsilon(self):
        for epsilon in (0.0, 0.5, -1.0):
            with self.assertRaises(ParameterError):
                classify([0.1, 0.2], epsilon)

    def test_neighborhoods_are_absorbing(self):
        params = ModelParams(tau=0.4, lam=0.5, mu=0.5)
        rule = AttractionRepulsion(params)
        epsilon = params.stopping_epsilon
        rng = np.random.default_rng(6)
        for _ in range(200):
            n = int(rng.integers(2, 6))
            if rng.random() < 0.5:
                config = np.where(rng.random(n) < 0.5, rng.random(n) * epsilon, 1 - rng.random(n) * epsilon)
            else:
                config = 0.5 + (rng.random(n) - 0.5) * 1.9 * epsilon
            kind = classify(config, epsilon).kind
            self.assertNotEqual(kind, OutcomeKind.NON_TRIVIALIZED)
            for i, j in itertools.combinations(range(n), 2):
                self.assertEqual(classify(apply_pair(config, i, j, rule), epsilon).kind, kind)


class RunToTrivializationTests(SimpleTestCase):

    def setUp(self):
        self.rule = AttractionRepulsion(HALF)

    def test_far_pair_polarizes(self):
        run = run_to_trivialization([0.1, 0.8], self.rule, SchedulerKind.UNIFORM_PAIR, 0.1, 100,
                                    np.random.default_rng(0))
        self.assertEqual(run.outcome.kind, OutcomeKind.POLARIZED)
        self.assertLessEqual(run.steps, 4)

    def test_close_pair_is_already_consensus(self):
        run = run_to_trivialization([0.4, 0.5], self.rule, SchedulerKind.UNIFORM_PAIR, 0.1, 100,
                                    np.random.default_rng(0))
        self.assertEqual(run.outcome.kind, OutcomeKind.CONSENSUS)
        self.assertEqual(run.steps, 0)

    def test_close_pair_contracts_to_consensus(self):
        run = run_to_trivialization([0.3, 0.6], self.rule, SchedulerKind.UNIFORM_PAIR, 0.05, 100,
                                    np.random.default_rng(0))
        self.assertEqual(run.outcome.kind, OutcomeKind.CONSENSUS)
        self.assertEqual(run.steps, 2)

    def test_start_inside_neighborhood_takes_zero_steps(self):
        run = run_to_trivialization([0.01, 0.99, 0.0], self.rule, SchedulerKind.UNIFORM_PAIR, 0.05, 100,
                                    np.random.default_rng(0), record=True)
        self.assertEqual(run.steps, 0)
        self.assertEqual(len(run.trajectory), 1)

    def test_budget_exhaustion_is_in_band(self):
        run = run_to_trivialization([0.1, 0.5, 0.9, 0.3], self.rule, SchedulerKind.UNIFORM_PAIR, 0.01, 1,
                                    np.random.default_rng(0))
        self.assertEqual(run.outcome.kind, OutcomeKind.NON_TRIVIALIZED)
        self.assertEqual(run.steps, 1)

    def test_trajectory_is_decimated(self):
        initial = np.random.default_rng(1).random(20)
        run = run_to_trivialization(initial, self.rule, SchedulerKind.UNIFORM_PAIR, HALF.stopping_epsilon,
                                    100_000, np.random.default_rng(2), record=True)
        self.assertTrue(run.outcome.trivialized)
        times = [t for t, _ in run.trajectory]
        self.assertEqual(times[0], 0)
        self.assertEqual(times[-1], run.steps)
        self.assertTrue(all(t % 100 == 0 for t in times[1:-1]))

    def test_matching_runs_trivialize(self):
        initial = np.random.default_rng(3).random(20)
        run = run_to_trivialization(initial, self.rule, SchedulerKind.RANDOM_MATCHING, HALF.stopping_epsilon,
                                    None, np.random.default_rng(4))
        self.assertTrue(run.outcome.trivialized)


class EstimateTests(SimpleTestCase):

    def test_two_agents_match_quadrature(self):
        params = ModelParams(tau=0.4, lam=0.5, mu=0.5)
        result = estimate_p_polarization(params, 2, 10_000, SchedulerKind.UNIFORM_PAIR, master_seed=11)
        exact = two_agent_p_polarization(params)
        # gap beyond tau, plus starts already sitting near a single pole
        self.assertAlmostEqual(exact, 0.36 + 2 * params.stopping_epsilon ** 2, delta=0.01)
        sigma = np.sqrt(exact * (1 - exact) / result.runs)
        self.assertLess(abs(result.p_hat - exact), 4 * sigma + 0.005)
        self.assertEqual(result.nontrivialized, 0)

    def test_estimate_is_independent_of_workers(self):
        params = ModelParams(tau=0.5, lam=0.5, mu=0.5)
        one = estimate_p_polarization(params, 6, 40, SchedulerKind.RANDOM_MATCHING, master_seed=3, workers=1)
        two = estimate_p_polarization(params, 6, 40, SchedulerKind.RANDOM_MATCHING, master_seed=3, workers=2)
        self.assertEqual(one, two)

    def test_sweep_cardinality_and_order(self):
        results = sweep([0.7, 0.3, 0.5], [20, 2], HALF, 5, master_seed=1)
        self.assertEqual([(r.n, r.tau) for r in results],
                         [(2, 0.3), (2, 0.5), (2, 0.7), (20, 0.3), (20, 0.5), (20, 0.7)])
        self.assertTrue(all(r.runs == 5 for r in results))

    def test_sweep_is_reproducible(self):
        first = sweep([0.4, 0.6], [4], HALF, 20, master_seed=9)
        second = sweep([0.4, 0.6], [4], HALF, 20, master_seed=9)
        self.assertEqual(first, second)

    def test_cells_do_not_depend_on_grid_neighbours(self):
        alone = sweep([0.6], [4], HALF, 20, master_seed=9)
        together = sweep([0.4, 0.6], [4], HALF, 20, master_seed=9)
        self.assertEqual(alone[0], together[1])

    def test_rejects_empty_grid(self):
        with self.assertRaises(ParameterError):
            sweep([], [4], HALF, 5, master_seed=1)


class DeskScaleTests(SimpleTestCase):

    @slow
    def test_every_run_trivializes(self):
        for tau in (0.3, 0.5, 0.7):
            for n in (3, 5, 20):
                result = estimate_p_polarization(ModelParams(tau, 0.5, 0.5), n, 200, SchedulerKind.UNIFORM_PAIR,
                                                 master_seed=2024, max_steps=1_000_000)
                self.assertEqual(result.nontrivialized, 0, (tau, n))


class PhaseCurveTests(SimpleTestCase):
    grid = [round(0.30 + 0.05 * k, 2) for k in range(11)]

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.curves = {}

    def curve(self, n):
        if n not in self.curves:
            self.curves[n] = sweep(self.grid, [n], HALF, 500, master_seed=7)
        return self.curves[n]

    @staticmethod
    def width(results):
        taus = [r.tau for r in results]
        ps = [r.p_hat for r in results]

        def crossing(level):
            for k in range(len(ps) - 1):
                if ps[k] >= level >= ps[k + 1] and ps[k] != ps[k + 1]:
                    return taus[k] + (ps[k] - level) / (ps[k] - ps[k + 1]) * (taus[k + 1] - taus[k])
            return taus[0] if ps[0] < level else taus[-1]

        return crossing(0.1) - crossing(0.9)

    @slow
    def test_transition_for_large_population(self):
        results = {r.tau: r for r in self.curve(100)}
        self.assertGreaterEqual(results[0.4].p_hat, 0.95)
        self.assertLessEqual(results[0.65].p_hat, 0.05)
        ordered = self.curve(100)
        for before, after in zip(ordered, ordered[1:]):
            slack = 3 * max(before.ci_halfwidth, after.ci_halfwidth, 0.005)
            self.assertLessEqual(after.p_hat, before.p_hat + slack, (before.tau, after.tau))

    @slow
    def test_curve_steepens_with_population(self):
        self.assertLess(self.width(self.curve(100)), self.width(self.curve(4)))
