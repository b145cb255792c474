import numpy as np
from django.test import SimpleTestCase

from core.exceptions import BracketError, NumericalInstability, ParameterError
from core.testing import slow
from engine.process import apply_matching, draw_matching
from kernel.params import ModelParams
from kernel.rules import AttractionRepulsion

from .solver import (DensityGrid, InitialDensity, LimitKind, PdeParams, bisect_critical_tau, euler_step, evolve,
                     find_critical_tau, histogram_l1, initial_density, mass_drift, pde_rhs)

HALF = ModelParams(tau=0.5, lam=0.5, mu=0.5)


def pde(tau=0.5, **kwargs):
    return PdeParams(model=HALF.with_tau(tau), **kwargs)


class DensityGridTests(SimpleTestCase):

    def test_builtin_densities_are_normalized_and_symmetric(self):
        for kind in InitialDensity:
            grid = initial_density(kind, 400)
            self.assertAlmostEqual(grid.mass, 1.0, places=12)
            np.testing.assert_array_equal(grid.values, grid.values[::-1])

    def test_rejects_negative_values(self):
        with self.assertRaises(ParameterError):
            DensityGrid([1.0, -0.5, 1.0])

    def test_rejects_zero_mass(self):
        with self.assertRaises(ParameterError):
            DensityGrid.from_values(np.zeros(101))

    def test_window_masses_partition_the_total(self):
        grid = initial_density(InitialDensity.TRIANGLE, 400)
        edges = np.linspace(0.0, 1.0, 8)
        total = sum(grid.window_mass(a, b) for a, b in zip(edges[:-1], edges[1:]))
        self.assertAlmostEqual(total, 1.0, places=12)


class PdeParamsTests(SimpleTestCase):

    def test_defaults(self):
        params = pde()
        self.assertEqual(params.grid_size, 400)
        self.assertEqual(params.dt, 1.0)
        self.assertEqual(params.snapshot_times, (0.0, 10.0, 20.0))

    def test_rejects_bad_values(self):
        for kwargs in ({'dt': 0.0}, {'grid_size': 49}, {'classify_window': 0.3}, {'classify_mass': 0.5}):
            with self.subTest(**kwargs), self.assertRaises(ParameterError):
                pde(**kwargs)

    def test_window_must_fit_inside_half_tau(self):
        with self.assertRaises(ParameterError):
            pde(tau=0.08, classify_window=0.05)

    def test_with_tau_keeps_numerics(self):
        params = pde(dt=0.5, grid_size=200).with_tau(0.6)
        self.assertEqual(params.model.tau, 0.6)
        self.assertEqual((params.dt, params.grid_size), (0.5, 200))


class PdeRhsTests(SimpleTestCase):

    def setUp(self):
        self.uniform = initial_density(InitialDensity.UNIFORM, 400)

    def test_uniform_center_is_stationary(self):
        self.assertAlmostEqual(pde_rhs(self.uniform, pde())[200], 0.0, places=10)

    def test_uniform_near_lower_pole(self):
        self.assertAlmostEqual(pde_rhs(self.uniform, pde())[40], 2 / 15, places=10)

    def test_uniform_mass_is_conserved(self):
        self.assertLess(abs(mass_drift(self.uniform, pde())), 1e-12)

    def test_triangle_mass_is_conserved(self):
        self.assertLess(abs(mass_drift(initial_density(InitialDensity.TRIANGLE, 400), pde())), 1e-12)

    def test_rates_are_cell_averages_for_a_linear_profile(self):
        # near x = 0.1 the uniform rate is 4x/3, so every cell there averages to its node value
        rhs = pde_rhs(self.uniform, pde())
        np.testing.assert_allclose(rhs[36:45], 4 * np.arange(36, 45) / 400 / 3, atol=1e-10)

    def test_rhs_of_symmetric_density_is_symmetric(self):
        grid = initial_density(InitialDensity.BETA, 400)
        rhs = pde_rhs(grid, pde(tau=0.52))
        np.testing.assert_allclose(rhs, rhs[::-1], atol=1e-10)


class MassConservationTests(SimpleTestCase):

    def max_step_drift(self, kind, grid_size, steps):
        params = pde(tau=0.52, grid_size=grid_size)
        grid = initial_density(kind, grid_size)
        drifts = []
        for k in range(1, steps + 1):
            grid = euler_step(grid, params, step=k)
            drifts.append(abs(grid.drift))
        return max(drifts)

    def test_drift_stays_at_rounding_level_along_a_trajectory(self):
        for kind in (InitialDensity.UNIFORM, InitialDensity.TRIANGLE):
            with self.subTest(kind=kind):
                self.assertLess(self.max_step_drift(kind, 400, 30), 1e-12)

    def test_late_snapshots_conserve_mass_on_both_grids(self):
        for grid_size in (400, 800):
            params = pde(tau=0.52, grid_size=grid_size, t_max=30.0, classify_window=0.001, classify_mass=1.0,
                         snapshot_times=(20.0, 30.0))
            snapshots, _ = evolve(initial_density(InitialDensity.UNIFORM, grid_size), params)
            self.assertEqual([s.t for s in snapshots], [20.0, 30.0])
            for snapshot in snapshots:
                with self.subTest(grid_size=grid_size, t=snapshot.t):
                    self.assertLess(abs(mass_drift(snapshot.grid, params)), 1e-12)

    def test_unit_step_needs_no_clipping(self):
        grid = initial_density(InitialDensity.TRIANGLE, 400)
        for k in range(1, 11):
            grid = euler_step(grid, pde(tau=0.52), step=k)
            self.assertLess(grid.clipped, 1e-12)


class EulerStepTests(SimpleTestCase):

    def test_uniform_center_value_is_unchanged(self):
        grid = euler_step(initial_density(InitialDensity.UNIFORM, 400), pde())
        self.assertAlmostEqual(grid.values[200], 1.0, places=10)

    def test_output_is_normalized(self):
        grid = euler_step(initial_density(InitialDensity.TRIANGLE, 400), pde(tau=0.3))
        self.assertAlmostEqual(grid.mass, 1.0, places=12)
        self.assertTrue(np.all(grid.values >= 0.0))

    def test_symmetry_is_preserved_step_by_step(self):
        params = pde(tau=0.52)
        grid = initial_density(InitialDensity.TRIANGLE, 400)
        for _ in range(10):
            grid = euler_step(grid, params)
            self.assertLess(np.abs(grid.values - grid.values[::-1]).max(), 1e-8)

    def test_step_records_drift(self):
        grid = initial_density(InitialDensity.TRIANGLE, 400)
        params = pde()
        self.assertAlmostEqual(euler_step(grid, params).drift, mass_drift(grid, params), places=12)

    def test_huge_step_is_unstable(self):
        with self.assertRaises(NumericalInstability) as caught:
            euler_step(initial_density(InitialDensity.UNIFORM, 400), pde(dt=1e8), step=3)
        self.assertEqual(caught.exception.step, 3)


class EvolveTests(SimpleTestCase):

    def test_wide_tolerance_contracts_to_center(self):
        snapshots, limit = evolve(initial_density(InitialDensity.TRIANGLE, 400), pde(tau=0.9))
        self.assertEqual(limit.kind, LimitKind.CONSENSUS)
        self.assertGreaterEqual(limit.center_mass, 0.95)
        self.assertEqual(snapshots[0].t, 0.0)

    def test_bracket_ends(self):
        uniform = initial_density(InitialDensity.UNIFORM, 400)
        self.assertEqual(evolve(uniform, pde(tau=0.4))[1].kind, LimitKind.POLARIZED)
        self.assertEqual(evolve(uniform, pde(tau=0.7))[1].kind, LimitKind.CONSENSUS)

    def test_snapshots_follow_requested_times(self):
        params = pde(tau=0.52, t_max=20.0, classify_window=0.001, classify_mass=1.0)
        snapshots, limit = evolve(initial_density(InitialDensity.UNIFORM, 400), params)
        self.assertEqual([s.t for s in snapshots], [0.0, 10.0, 20.0])
        self.assertEqual(limit.kind, LimitKind.UNDECIDED)
        self.assertEqual(limit.time, 20.0)

    def test_grid_size_must_match(self):
        with self.assertRaises(ParameterError):
            evolve(initial_density(InitialDensity.UNIFORM, 200), pde())

    def test_coarse_bisection_stops_after_two_midpoints(self):
        result = bisect_critical_tau(pde(), 0.4, 0.7, 0.1)
        self.assertLessEqual(len(result.iterations), 2)
        self.assertLess(result.hi - result.lo, 0.1)
        self.assertTrue(0.4 <= result.tau <= 0.7)

    def test_same_regime_bracket_is_rejected(self):
        with self.assertRaises(BracketError):
            find_critical_tau(pde(), 0.7, 0.8, 0.05)


class HistogramTests(SimpleTestCase):

    def test_evenly_spread_agents_match_uniform_density(self):
        positions = (np.arange(100_000) + 0.5) / 100_000
        self.assertLess(histogram_l1(positions, initial_density(InitialDensity.UNIFORM, 400)), 1e-9)

    def test_all_agents_in_one_bin(self):
        distance = histogram_l1(np.full(10, 0.005), initial_density(InitialDensity.UNIFORM, 400))
        self.assertAlmostEqual(distance, 2 * 0.99, places=9)


class MeanFieldAcceptanceTests(SimpleTestCase):

    @slow
    def test_regime_split(self):
        uniform = initial_density(InitialDensity.UNIFORM, 400)
        self.assertEqual(evolve(uniform, pde(tau=0.52, t_max=30.0))[1].kind, LimitKind.POLARIZED)
        self.assertEqual(evolve(uniform, pde(tau=0.53, t_max=30.0))[1].kind, LimitKind.CONSENSUS)

    @slow
    def test_critical_tau(self):
        tau_c = find_critical_tau(pde(), 0.45, 0.60, 0.005)
        self.assertTrue(0.516 <= tau_c <= 0.536, tau_c)

    @slow
    def test_agents_follow_the_density(self):
        # histograms pooled over seeds; next to the critical tau single runs part ways after t=10
        n = 100_000
        for tau, times in ((0.4, (10, 20)), (0.52, (10,))):
            params = pde(tau=tau)
            rule = AttractionRepulsion(HALF.with_tau(tau))
            grid, grids = initial_density(InitialDensity.UNIFORM, 400), {}
            for t in range(1, max(times) + 1):
                grid = euler_step(grid, params, step=t)
                grids[t] = grid
            pooled = {t: [] for t in times}
            for seed in (1, 2, 3):
                rng = np.random.default_rng(seed)
                config = rng.random(n)
                for t in range(1, max(times) + 1):
                    config = apply_matching(config, *draw_matching(rng, n), rule)
                    if t in pooled:
                        pooled[t].append(config)
            for t in times:
                with self.subTest(tau=tau, t=t):
                    self.assertLess(histogram_l1(np.concatenate(pooled[t]), grids[t]), 0.15)
