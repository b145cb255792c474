import numpy as np
from django.test import SimpleTestCase

from core.exceptions import ParameterError

from .contract import check_rule_contract
from .params import ModelParams
from .rules import (AttractionRepulsion, BoundedConfidence, FunctionRule, NeutralBandRule,
                    ar_interact, bc_interact, build_rule)


class ModelParamsTests(SimpleTestCase):

    def test_nu_is_half_lambda(self):
        params = ModelParams(tau=0.5, lam=0.3, mu=0.5)
        self.assertEqual(params.nu, 0.15)

    def test_rejects_out_of_range_values(self):
        for bad in ({'tau': 0.0}, {'tau': 1.0}, {'lam': 1.2}, {'mu': -0.1}):
            values = {'tau': 0.5, 'lam': 0.5, 'mu': 0.5, **bad}
            with self.assertRaises(ParameterError):
                ModelParams(**values)

    def test_stopping_epsilon_stays_inside_absorbing_range(self):
        self.assertAlmostEqual(ModelParams(0.4, 0.5, 0.5).stopping_epsilon, 0.99 * 0.2)
        self.assertAlmostEqual(ModelParams(0.7, 0.5, 0.5).stopping_epsilon, 0.99 * 0.15)


class BoundedConfidenceTests(SimpleTestCase):

    def setUp(self):
        self.params = ModelParams(tau=0.5, lam=0.5, mu=0.5)

    def test_close_pair_moves_together(self):
        x, y = bc_interact(0.2, 0.4, self.params)
        self.assertAlmostEqual(x, 0.25, places=12)
        self.assertAlmostEqual(y, 0.35, places=12)

    def test_far_pair_has_no_effect(self):
        self.assertEqual(bc_interact(0.1, 0.8, self.params), (0.1, 0.8))

    def test_zero_gap_is_fixed(self):
        self.assertEqual(bc_interact(0.3, 0.3, self.params), (0.3, 0.3))

    def test_rule_object_matches_function(self):
        rule = BoundedConfidence(self.params)
        self.assertEqual(rule.interact(0.2, 0.4), bc_interact(0.2, 0.4, self.params))


class AttractionRepulsionTests(SimpleTestCase):

    def setUp(self):
        self.params = ModelParams(tau=0.5, lam=0.5, mu=0.5)
        self.rule = AttractionRepulsion(self.params)

    def test_attraction_branch(self):
        x, y = ar_interact(0.2, 0.4, self.params)
        self.assertAlmostEqual(x, 0.25, places=12)
        self.assertAlmostEqual(y, 0.35, places=12)

    def test_repulsion_branch(self):
        x, y = ar_interact(0.1, 0.8, self.params)
        self.assertAlmostEqual(x, 0.05, places=12)
        self.assertAlmostEqual(y, 0.9, places=12)

    def test_extreme_pair_is_fixed(self):
        self.assertEqual(ar_interact(0.0, 1.0, self.params), (0.0, 1.0))
        self.assertEqual(ar_interact(1.0, 0.0, self.params), (1.0, 0.0))

    def test_threshold_tie_attracts(self):
        x, y = ar_interact(0.25, 0.75, self.params)
        self.assertAlmostEqual(y - x, 0.25, places=12)

    def test_order_invariance_and_exactness_on_random_pairs(self):
        rng = np.random.default_rng(3)
        for x, y in rng.random((2000, 2)):
            a, b = ar_interact(x, y, self.params)
            c, d = ar_interact(y, x, self.params)
            self.assertEqual((a, b), (d, c))
            self.assertTrue(0.0 <= a <= 1.0 and 0.0 <= b <= 1.0)
            gap = abs(x - y)
            if gap <= self.params.tau:
                self.assertAlmostEqual(abs(a - b), (1 - self.params.lam) * gap, delta=1e-12)
                self.assertTrue(min(x, y) - 1e-12 <= min(a, b) and max(a, b) <= max(x, y) + 1e-12)
            else:
                lo, hi = min(x, y), max(x, y)
                new_lo, new_hi = min(a, b), max(a, b)
                self.assertAlmostEqual(new_lo, (1 - self.params.mu) * lo, delta=1e-12)
                self.assertAlmostEqual(new_hi, 1 - (1 - self.params.mu) * (1 - hi), delta=1e-12)
                self.assertAlmostEqual(new_hi - new_lo, (1 - self.params.mu) * gap + self.params.mu, delta=1e-12)

    def test_vectorized_form_matches_scalar_bitwise(self):
        rng = np.random.default_rng(11)
        xs, ys = rng.random(500), rng.random(500)
        a, b = self.rule.interact_many(xs, ys)
        for i in range(500):
            self.assertEqual((a[i], b[i]), self.rule.interact(xs[i], ys[i]))

    def test_build_rule_by_name(self):
        self.assertEqual(build_rule('attraction-repulsion', self.params), self.rule)
        with self.assertRaises(ParameterError):
            build_rule('majority', self.params)


class RuleContractTests(SimpleTestCase):

    def test_attraction_repulsion_satisfies_contract(self):
        report = check_rule_contract(AttractionRepulsion(ModelParams(0.5, 0.5, 0.5)), 10_000, seed=1)
        self.assertTrue(report.ok, report.violations[:5])
        self.assertEqual(report.violations, [])
        self.assertAlmostEqual(report.worst_attraction_ratio, 0.5, places=9)
        self.assertGreater(report.worst_repulsion_ratio, 1.0)

    def test_bounded_confidence_breaks_fixed_point_condition(self):
        report = check_rule_contract(BoundedConfidence(ModelParams(0.5, 0.5, 0.5)), 10_000, seed=1)
        self.assertFalse(report.fixed_points_ok)
        self.assertTrue(report.order_invariance_ok)
        self.assertTrue(report.attraction_ok)
        self.assertAlmostEqual(report.worst_repulsion_ratio, 1.0)

    def test_zero_gap_pairs_are_allowed_fixed_points(self):
        report = check_rule_contract(AttractionRepulsion(ModelParams(0.3, 0.4, 0.6)), 500, seed=5)
        self.assertFalse([v for v in report.violations if v[0] == v[1]])

    def test_neutral_band_rule_is_flagged(self):
        report = check_rule_contract(NeutralBandRule(0.3, 0.6, 0.5, 0.5), 2_000, seed=2)
        self.assertTrue(report.order_invariance_ok)
        self.assertFalse(report.repulsion_ok)

    def test_asymmetric_user_rule_stays_order_invariant(self):
        rule = FunctionRule(lambda x, y: x + 0.3 * (y - x) if abs(x - y) <= 0.4 else x, tau=0.4)
        report = check_rule_contract(rule, 1_000, seed=4)
        self.assertTrue(report.order_invariance_ok)
        self.assertFalse(report.fixed_points_ok)

    def test_rejects_empty_sample(self):
        with self.assertRaises(ParameterError):
            check_rule_contract(AttractionRepulsion(ModelParams(0.5, 0.5, 0.5)), 0, seed=0)
