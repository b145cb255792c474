import math

import numpy as np
from django.test import SimpleTestCase

from core.exceptions import ParameterError, SchedulerError
from core.seeding import stream
from core.testing import slow
from engine.process import SchedulerKind, Uniform01, apply_matching, apply_pair, draw_matching, draw_pair, sample_initial
from kernel.params import ModelParams
from kernel.rules import AttractionRepulsion, ar_interact

from .domains import Hypercube, UnitDisk, boundary_intersections, build_domain
from .dynamics import (OutcomeLabel, SpatialModelParams, interact_points, matching_round, pair_step, run_multidim,
                       summarize_clusters)

HALF = ModelParams(tau=0.5, lam=0.5, mu=0.5)
SQUARE = Hypercube(2)
DISK = UnitDisk()


def line_distance(point, p, q):
    u = (q - p) / np.linalg.norm(q - p)
    w = point - p
    return np.linalg.norm(w - np.dot(w, u) * u)


class BoundaryIntersectionTests(SimpleTestCase):

    def test_axis_parallel_line_in_square(self):
        a, b = boundary_intersections([0.2, 0.5], [0.9, 0.5], SQUARE)
        np.testing.assert_allclose(a, [0.0, 0.5], atol=1e-12)
        np.testing.assert_allclose(b, [1.0, 0.5], atol=1e-12)

    def test_disk_diameter(self):
        a, b = boundary_intersections([-0.5, 0.0], [0.5, 0.0], DISK)
        np.testing.assert_allclose(a, [-1.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(b, [1.0, 0.0], atol=1e-12)

    def test_interval_endpoints(self):
        a, b = boundary_intersections([0.3], [0.7], Hypercube(1))
        self.assertEqual((a[0], b[0]), (0.0, 1.0))

    def test_diagonal_hits_corners(self):
        a, b = boundary_intersections([0.3, 0.3], [0.6, 0.6], SQUARE)
        np.testing.assert_allclose(a, [0.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(b, [1.0, 1.0], atol=1e-12)

    def test_point_on_a_face_is_its_own_hit(self):
        a, _ = boundary_intersections([0.0, 0.4], [0.5, 0.6], SQUARE)
        np.testing.assert_array_equal(a, [0.0, 0.4])

    def test_hits_are_ordered_along_the_line(self):
        rng = np.random.default_rng(4)
        for domain in (Hypercube(3), DISK):
            for _ in range(200):
                p, q = domain.sample(2, rng)
                a, b = boundary_intersections(p, q, domain)
                u = q - p
                self.assertLessEqual(np.dot(a - p, u), 1e-12)
                self.assertGreaterEqual(np.dot(b - q, u), -1e-12)
                self.assertTrue(domain.contains(a) and domain.contains(b))
                self.assertLess(line_distance(a, p, q), 1e-10)
                self.assertLess(line_distance(b, p, q), 1e-10)
                self.assertLess(domain.boundary_distance(a), 1e-10)
                self.assertLess(domain.boundary_distance(b), 1e-10)

    def test_coincident_points_are_rejected(self):
        with self.assertRaises(ParameterError):
            boundary_intersections([0.4, 0.4], [0.4, 0.4], SQUARE)

    def test_points_outside_are_rejected(self):
        with self.assertRaises(ParameterError):
            boundary_intersections([0.9, 0.9], [0.0, 0.0], DISK)

    def test_disk_needs_two_dimensions(self):
        with self.assertRaises(ParameterError):
            build_domain('disk', 3)


class InteractPointsTests(SimpleTestCase):

    def test_attraction_in_square(self):
        p, q = interact_points([0.2, 0.2], [0.4, 0.4], HALF, SQUARE)
        np.testing.assert_allclose(p, [0.25, 0.25], atol=1e-12)
        np.testing.assert_allclose(q, [0.35, 0.35], atol=1e-12)

    def test_repulsion_in_square(self):
        p, q = interact_points([0.2, 0.5], [0.9, 0.5], HALF, SQUARE)
        np.testing.assert_allclose(p, [0.1, 0.5], atol=1e-12)
        np.testing.assert_allclose(q, [0.95, 0.5], atol=1e-12)

    def test_repulsion_in_disk(self):
        p, q = interact_points([-0.5, 0.0], [0.5, 0.0], HALF, DISK)
        np.testing.assert_allclose(p, [-0.75, 0.0], atol=1e-12)
        np.testing.assert_allclose(q, [0.75, 0.0], atol=1e-12)

    def test_coincident_points_do_not_move(self):
        p, q = interact_points([0.3, 0.6], [0.3, 0.6], HALF, SQUARE)
        np.testing.assert_array_equal(p, [0.3, 0.6])
        np.testing.assert_array_equal(q, [0.3, 0.6])

    def test_one_dimension_matches_the_kernel(self):
        rng = np.random.default_rng(8)
        line = Hypercube(1)
        for _ in range(2000):
            x, y = rng.random(2)
            p, q = interact_points([x], [y], HALF, line)
            self.assertEqual((p[0], q[0]), ar_interact(x, y, HALF))

    def test_geometric_properties(self):
        rng = np.random.default_rng(10)
        for domain in (SQUARE, Hypercube(3), DISK):
            params = SpatialModelParams.for_domain(0.5, 0.4, 0.6, domain)
            for _ in range(300):
                p, q = domain.sample(2, rng)
                p_new, q_new = interact_points(p, q, params, domain)
                self.assertTrue(domain.contains(p_new) and domain.contains(q_new))
                self.assertLess(line_distance(p_new, p, q), 1e-10)
                self.assertLess(line_distance(q_new, p, q), 1e-10)
                q_swap, p_swap = interact_points(q, p, params, domain)
                np.testing.assert_allclose(p_swap, p_new, atol=1e-12)
                np.testing.assert_allclose(q_swap, q_new, atol=1e-12)
                u = q - p
                if np.linalg.norm(u) <= params.tau:
                    np.testing.assert_allclose(p_new + q_new, p + q, atol=1e-12)
                    self.assertAlmostEqual(np.linalg.norm(q_new - p_new), (1 - params.lam) * np.linalg.norm(u))
                else:
                    a, b = boundary_intersections(p, q, domain)
                    s = [np.dot(v - p, u) for v in (a, p_new, p, q, q_new, b)]
                    self.assertTrue(all(x <= y + 1e-12 for x, y in zip(s, s[1:])), s)


class SpatialModelParamsTests(SimpleTestCase):

    def test_tau_may_reach_the_diameter(self):
        params = SpatialModelParams.for_domain(1.0, 0.5, 0.5, SQUARE)
        self.assertEqual(params.tau, 1.0)
        self.assertEqual(params.nu, 0.25)
        self.assertEqual(params.with_tau(math.sqrt(2)).diameter, math.sqrt(2))

    def test_tau_beyond_the_diameter_is_rejected(self):
        with self.assertRaises(ParameterError):
            SpatialModelParams.for_domain(2.5, 0.5, 0.5, DISK)


class ClusterTests(SimpleTestCase):

    def test_two_blobs(self):
        points = np.array([[0.0, 0.0], [0.01, 0.0], [0.0, 0.02], [1.0, 1.0], [0.99, 1.0]])
        summary = summarize_clusters(points, 0.05)
        self.assertEqual(summary.counts, [3, 2])
        self.assertEqual(sum(summary.counts), 5)
        np.testing.assert_allclose(summary.centers[1], [0.995, 1.0])

    def test_chain_is_one_cluster(self):
        points = np.linspace(0.0, 0.4, 21)[:, np.newaxis]
        self.assertEqual(len(summarize_clusters(points, 0.05).clusters), 1)

    def test_separation_is_the_closest_cross_cluster_pair(self):
        points = np.array([[0.0, 0.0], [0.01, 0.0], [0.0, 0.02], [1.0, 1.0], [0.99, 1.0]])
        summary = summarize_clusters(points, 0.05)
        self.assertAlmostEqual(summary.separation, math.sqrt(0.99 ** 2 + 0.98 ** 2), places=12)

    def test_one_cluster_has_no_separation(self):
        points = np.linspace(0.0, 0.4, 21)[:, np.newaxis]
        self.assertEqual(summarize_clusters(points, 0.05).separation, math.inf)


class RunMultidimTests(SimpleTestCase):

    def test_matching_in_one_dimension_replays_the_engine(self):
        line, n = Hypercube(1), 20
        rule = AttractionRepulsion(HALF)
        engine_rng, geometry_rng = stream(5), stream(5)
        config = sample_initial(n, Uniform01(), engine_rng)
        points = line.sample(n, geometry_rng)
        for _ in range(200):
            config = apply_matching(config, *draw_matching(engine_rng, n), rule)
            points = matching_round(points, HALF, line, geometry_rng)
            np.testing.assert_array_equal(points[:, 0], config)

    def test_pairs_in_one_dimension_replay_the_engine(self):
        line, n = Hypercube(1), 7
        rule = AttractionRepulsion(HALF.with_tau(0.3))
        engine_rng, geometry_rng = stream(9), stream(9)
        config = sample_initial(n, Uniform01(), engine_rng)
        points = line.sample(n, geometry_rng)
        for _ in range(1000):
            config = apply_pair(config, *draw_pair(engine_rng, n), rule)
            points = pair_step(points, HALF.with_tau(0.3), line, geometry_rng)
        np.testing.assert_array_equal(points[:, 0], config)

    def test_full_tolerance_contracts_to_one_cluster(self):
        params = SpatialModelParams.for_domain(math.sqrt(2), 0.5, 0.5, SQUARE)
        run = run_multidim(40, params, SQUARE, epsilon=0.01, seed=3)
        self.assertEqual(run.label, OutcomeLabel.CONSENSUS)
        self.assertEqual(run.summary.counts, [40])

    def test_slow_merging_clusters_do_not_count_as_stationary(self):
        # with a coarse epsilon, points stop moving by more than epsilon well before nearby clusters merge
        run = run_multidim(40, HALF, SQUARE, epsilon=0.2, seed=5)
        self.assertNotEqual(run.label, OutcomeLabel.UNDECIDED)
        self.assertGreater(run.summary.separation, HALF.tau)

    def test_round_budget_exhaustion_is_undecided(self):
        run = run_multidim(40, HALF, SQUARE, max_rounds=1, seed=3, record_rounds=(0, 1))
        self.assertEqual(run.label, OutcomeLabel.UNDECIDED)
        self.assertEqual(run.rounds, 1)
        self.assertEqual([r for r, _ in run.snapshots], [0, 1])
        self.assertEqual(sum(run.summary.counts), 40)

    def test_same_seed_same_run(self):
        first = run_multidim(30, HALF, DISK, SchedulerKind.UNIFORM_PAIR, max_rounds=50, seed=11)
        second = run_multidim(30, HALF, DISK, SchedulerKind.UNIFORM_PAIR, max_rounds=50, seed=11)
        np.testing.assert_array_equal(first.points, second.points)
        self.assertTrue(np.all(DISK.contains(first.points)))

    def test_odd_population_cannot_be_matched(self):
        with self.assertRaises(SchedulerError):
            run_multidim(5, HALF, SQUARE, seed=1)


class GeometryAcceptanceTests(SimpleTestCase):

    @slow
    def test_square_splits_into_corners(self):
        run = run_multidim(400, SpatialModelParams.for_domain(0.5, 0.5, 0.5, SQUARE), SQUARE, seed=1)
        self.assertEqual(len(run.summary.clusters), 4)
        for center, count in run.summary.clusters:
            self.assertTrue(0.15 <= count / 400 <= 0.35)
            self.assertLess(SQUARE.boundary_distance(np.array(center)), 0.05)

    @slow
    def test_square_with_unit_tolerance_meets_in_the_middle(self):
        run = run_multidim(400, SpatialModelParams.for_domain(1.0, 0.5, 0.5, SQUARE), SQUARE, seed=1)
        self.assertEqual(len(run.summary.clusters), 1)
        self.assertGreater(SQUARE.boundary_distance(run.summary.centers[0]), 0.05)

    @slow
    def test_disk_clusters_are_spaced_along_the_border(self):
        params = SpatialModelParams.for_domain(0.5, 0.5, 0.5, DISK)
        run = run_multidim(400, params, DISK, seed=1)
        self.assertNotEqual(run.label, OutcomeLabel.UNDECIDED)
        self.assertGreater(run.summary.separation, params.tau)
        epsilon = run.summary.linkage_radius
        centers = run.summary.centers
        for i in range(len(centers)):
            for j in range(i + 1, len(centers)):
                self.assertGreaterEqual(np.linalg.norm(centers[i] - centers[j]), params.tau - epsilon)
