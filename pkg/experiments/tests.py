import json
import os
import tempfile
from io import StringIO
from pathlib import Path
from unittest import mock

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase, override_settings

from core.exceptions import BracketError, ConfigError
from geometry.dynamics import SpatialModelParams

from .config import parse_config, suggest
from .models import ExperimentKind, ExperimentRun
from .runner import EXPERIMENTS, run_experiment

MINIMAL_SWEEP = """{
  "experiment": "sweep",
  "tau_grid": [0.3, 0.5, 0.7],
  "n_list": [20],
  "runs": 100,
  "seed": 1
}
"""

BAD_TAU = """{
  "experiment": "sweep",
  "model": {
    "tau": 1.2
  },
  "tau_grid": [0.3],
  "n_list": [20]
}
"""


def config_text(**data):
    return json.dumps(data, indent=2)


class ParseConfigTests(SimpleTestCase):

    def errors_of(self, text):
        with self.assertRaises(ConfigError) as caught:
            parse_config(text)
        return caught.exception.errors

    def test_minimal_sweep_gets_engine_defaults(self):
        config = parse_config(MINIMAL_SWEEP)
        self.assertEqual(config.experiment, 'sweep')
        self.assertEqual(config.tau_grid, [0.3, 0.5, 0.7])
        self.assertEqual(config.n_list, [20])
        self.assertEqual((config.runs, config.seed), (100, 1))
        self.assertEqual((config.model.tau, config.model.lam, config.model.mu), (0.5, 0.5, 0.5))
        self.assertEqual(config.scheduler, 'random-matching')
        self.assertIsNone(config.epsilon)

    def test_out_of_range_tau_names_its_path_and_line(self):
        errors = self.errors_of(BAD_TAU)
        self.assertEqual(len(errors), 1)
        path, line, message = errors[0]
        self.assertEqual(path, 'model.tau')
        self.assertEqual(line, 4)
        self.assertIn('1.2', message)

    def test_unknown_key_suggests_the_known_one(self):
        errors = self.errors_of(config_text(experiment='sweep', taus=[0.3], n_list=[20]))
        paths = [path for path, _, _ in errors]
        self.assertIn('taus', paths)
        message = dict((path, message) for path, _, message in errors)['taus']
        self.assertIn("'tau_grid'", message)

    def test_unknown_section_key(self):
        errors = self.errors_of(config_text(experiment='rule-check', model={'lamda': 0.5}))
        self.assertEqual(errors[0][0], 'model.lamda')
        self.assertIn("'lam'", errors[0][2])

    def test_missing_required_key(self):
        errors = self.errors_of(config_text(experiment='sweep', tau_grid=[0.5]))
        self.assertEqual([path for path, _, _ in errors], ['n_list'])

    def test_invalid_json_reports_the_line(self):
        errors = self.errors_of('{\n  "experiment": "sweep",\n  "runs": ,\n}')
        self.assertEqual(errors[0][0], '<document>')
        self.assertEqual(errors[0][1], 3)

    def test_unknown_experiment(self):
        errors = self.errors_of(config_text(experiment='bake'))
        self.assertEqual(errors[0][0], 'experiment')

    def test_wrong_types_are_rejected(self):
        errors = self.errors_of(config_text(experiment='sweep', tau_grid='0.5', n_list=[20.5]))
        self.assertEqual(sorted(path for path, _, _ in errors), ['n_list', 'tau_grid'])

    def test_overrides_replace_config_keys(self):
        config = parse_config(MINIMAL_SWEEP, overrides={'seed': 99, 'output_dir': '/tmp/x'})
        self.assertEqual(config.seed, 99)
        self.assertEqual(config.output_dir, '/tmp/x')

    def test_multidim_allows_tau_up_to_the_diameter(self):
        config = parse_config(config_text(experiment='multidim', n=20, model={'tau': 1.0},
                                          domain={'kind': 'hypercube', 'dimension': 2}))
        self.assertIsInstance(config.model, SpatialModelParams)
        self.assertEqual(config.domain.dimension, 2)
        errors = self.errors_of(config_text(experiment='simulate', n=20, model={'tau': 1.0}))
        self.assertEqual(errors[0][0], 'model.tau')

    def test_disk_needs_two_dimensions(self):
        errors = self.errors_of(config_text(experiment='multidim', n=20, domain={'kind': 'disk', 'dimension': 3}))
        self.assertEqual(errors[0][0], 'domain')

    def test_pde_defaults(self):
        config = parse_config(config_text(experiment='pde', model={'tau': 0.52}))
        self.assertEqual(config.pde.grid_size, 400)
        self.assertEqual(config.pde.dt, 1.0)
        self.assertEqual(config.pde.snapshot_times, (0.0, 10.0, 20.0))
        self.assertEqual(config.as_dict()['pde']['initial'], 'uniform')

    def test_pde_window_checked_against_tau(self):
        errors = self.errors_of(config_text(experiment='pde', model={'tau': 0.05}, pde={'classify_window': 0.05}))
        self.assertEqual(errors[0][0], 'pde')

    def test_suggestions(self):
        self.assertEqual(suggest('taus', ['tau_grid', 'runs', 'n_list']), 'tau_grid')
        self.assertEqual(suggest('sede', ['seed', 'seeds', 'runs']), 'seed')
        self.assertIsNone(suggest('zzz', ['seed', 'runs']))


class RunExperimentTests(TestCase):

    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.tmp = Path(tmp.name)

    def run_config(self, name, workers=1, **data):
        config = parse_config(config_text(**data))
        return run_experiment(config, output_dir=self.tmp / name, workers=workers), self.tmp / name

    def lines(self, path):
        return path.read_text(encoding='utf-8').split('\n')[:-1]

    def test_sweep_csv(self):
        manifest, out = self.run_config('sweep', experiment='sweep', tau_grid=[0.7, 0.3], n_list=[4], runs=20, seed=1)
        lines = self.lines(out / 'sweep.csv')
        self.assertEqual(lines[0], 'n,tau,runs,polarized,p_hat,ci95,mean_steps,nontrivialized')
        self.assertEqual(len(lines), 3)
        self.assertTrue(lines[1].startswith('4,0.3,20,'))
        self.assertTrue(lines[2].startswith('4,0.7,20,'))
        self.assertEqual(manifest.output_files, ['manifest.json', 'sweep.csv'])

    def test_sweep_is_byte_identical_across_worker_counts(self):
        data = dict(experiment='sweep', tau_grid=[0.4, 0.6], n_list=[6], runs=24, seed=5)
        _, first = self.run_config('one', workers=1, **data)
        _, second = self.run_config('two', workers=2, **data)
        self.assertEqual((first / 'sweep.csv').read_bytes(), (second / 'sweep.csv').read_bytes())

    def test_manifest_lists_every_file(self):
        manifest, out = self.run_config('sim', experiment='simulate', n=20, model={'tau': 0.4}, seed=3)
        self.assertEqual(sorted(os.listdir(out)), manifest.output_files)
        written = json.loads((out / 'manifest.json').read_text())
        self.assertEqual(written['master_seed'], 3)
        self.assertEqual(written['config_echo']['model']['tau'], 0.4)
        self.assertIn(written['summary']['outcome'], ('polarized', 'consensus'))
        for key in ('tool_version', 'started', 'finished', 'output_files'):
            self.assertIn(key, written)

    def test_simulate_trajectory(self):
        _, out = self.run_config('sim', experiment='simulate', n=20, model={'tau': 0.6}, seed=3)
        lines = self.lines(out / 'trajectory.csv')
        self.assertEqual(lines[0], 't,agent,opinion')
        self.assertTrue(lines[1].startswith('0,0,'))
        self.assertEqual((len(lines) - 1) % 20, 0)

    def test_pde_density_rows(self):
        _, out = self.run_config('pde', experiment='pde', model={'tau': 0.52}, snapshot_times=[0, 10, 20],
                                 pde={'grid_size': 50, 't_max': 20, 'classify_window': 0.001, 'classify_mass': 1.0})
        lines = self.lines(out / 'density.csv')
        self.assertEqual(lines[0], 't,x,f')
        self.assertEqual(len(lines) - 1, 3 * 51)
        self.assertEqual(lines[1].split(',')[:2], ['0', '0'])
        self.assertEqual(lines[-1].split(',')[:2], ['20', '1'])

    def test_martingale_not_found_for_three_agents(self):
        _, out = self.run_config('mart', experiment='martingale', n=3, budget=2000, seeds=[1, 2])
        payload = json.loads((out / 'counterexample.json').read_text())
        self.assertIs(payload['found'], False)
        self.assertNotIn('configuration', payload)

    def test_rule_report(self):
        _, out = self.run_config('rule', experiment='rule-check', model={'rule': 'bounded-confidence'}, samples=200)
        report = json.loads((out / 'rule_report.json').read_text())
        self.assertEqual(report['rule'], 'bounded-confidence')
        self.assertIs(report['fixed_points_ok'], False)
        self.assertIs(report['order_invariance_ok'], True)

    def test_multidim_points(self):
        manifest, out = self.run_config('md', experiment='multidim', n=20, max_steps=5, snapshot_times=[0],
                                        domain={'kind': 'hypercube', 'dimension': 2})
        lines = self.lines(out / 'points.csv')
        self.assertEqual(lines[0], 'round,agent,x1,x2')
        self.assertEqual(len(lines) - 1, 2 * 20)
        self.assertEqual(manifest.summary['label'], 'undecided')

    def test_force_check(self):
        _, out = self.run_config('force', experiment='force-check', n=5, samples=20, tau_grid=[0.4, 0.6])
        payload = json.loads((out / 'force_check.json').read_text())
        self.assertEqual([r['tau'] for r in payload['results']], [0.4, 0.6])
        self.assertTrue(all(r['reached'] == 20 for r in payload['results']))

    def test_registry_records_finished_runs(self):
        manifest, out = self.run_config('rule', experiment='rule-check', samples=100, seed=8)
        run = ExperimentRun.objects.get()
        self.assertEqual(run.status, 'finished')
        self.assertEqual(run.master_seed, 8)
        self.assertEqual(run.output_files, manifest.output_files)
        self.assertEqual(run.output_dir, str(out))

    def test_invalid_bracket_fails_the_run(self):
        with self.assertRaises(BracketError):
            self.run_config('tc', experiment='critical-tau', pde={'grid_size': 100, 'bracket': [0.7, 0.8]})
        self.assertEqual(ExperimentRun.objects.get().status, 'failed')


class CommandTests(TestCase):

    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.tmp = Path(tmp.name)

    def write(self, text):
        path = self.tmp / 'config.json'
        path.write_text(text, encoding='utf-8')
        return str(path)

    def test_runs_and_reports(self):
        stdout = StringIO()
        path = self.write(config_text(experiment='rule-check', samples=100))
        call_command('polarlab', path, output_dir=str(self.tmp / 'out'), seed=4, stdout=stdout)
        self.assertIn('Wrote 2 files', stdout.getvalue())
        self.assertTrue((self.tmp / 'out' / 'rule_report.json').exists())
        self.assertEqual(ExperimentRun.objects.get().master_seed, 4)

    def test_config_error_exits_with_two(self):
        with self.assertRaises(CommandError) as caught:
            call_command('polarlab', self.write(BAD_TAU), stdout=StringIO())
        self.assertEqual(caught.exception.returncode, 2)
        self.assertIn('model.tau', str(caught.exception))

    def test_missing_file_exits_with_four(self):
        with self.assertRaises(CommandError) as caught:
            call_command('polarlab', str(self.tmp / 'absent.json'), stdout=StringIO())
        self.assertEqual(caught.exception.returncode, 4)

    def test_bracket_error_exits_with_three(self):
        path = self.write(config_text(experiment='critical-tau', pde={'grid_size': 100, 'bracket': [0.7, 0.8]}))
        with self.assertRaises(CommandError) as caught:
            call_command('polarlab', path, output_dir=str(self.tmp / 'out'), stdout=StringIO())
        self.assertEqual(caught.exception.returncode, 3)

    def test_odd_population_under_matching_exits_with_two(self):
        path = self.write(config_text(experiment='simulate', n=5))
        with self.assertRaises(CommandError) as caught:
            call_command('polarlab', path, output_dir=str(self.tmp / 'out'), stdout=StringIO())
        self.assertEqual(caught.exception.returncode, 2)

    def workers_seen(self, *args, **data):
        seen = []

        def record(config, out, workers):
            seen.append(workers)
            return [], {}

        path = self.write(config_text(experiment='rule-check', samples=10, **data))
        with mock.patch.dict(EXPERIMENTS, {ExperimentKind.RULE_CHECK: record}):
            call_command('polarlab', path, *args, output_dir=str(self.tmp / 'out'), stdout=StringIO())
        return seen

    def test_config_workers_apply_without_the_flag(self):
        self.assertEqual(self.workers_seen(workers=3), [3])

    def test_workers_flag_overrides_the_config(self):
        self.assertEqual(self.workers_seen('--workers', '2', workers=3), [2])

    @override_settings(POLARLAB_WORKERS=5)
    def test_settings_supply_the_default_workers(self):
        self.assertEqual(self.workers_seen(), [5])

    def test_show_runs(self):
        stdout = StringIO()
        call_command('show_runs', stdout=stdout)
        self.assertIn('No runs recorded yet.', stdout.getvalue())
        call_command('polarlab', self.write(config_text(experiment='rule-check', samples=50)),
                     output_dir=str(self.tmp / 'out'), stdout=StringIO())
        stdout = StringIO()
        call_command('show_runs', stdout=stdout)
        self.assertIn('rule-check seed=0 (finished)', stdout.getvalue())
