from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from core.exceptions import (BracketError, ConfigError, NumericalInstability, ParameterError,
                             SchedulerError)
from experiments.config import parse_config
from experiments.runner import run_experiment

CONFIG_ERROR = 2
NUMERICS_ERROR = 3
IO_ERROR = 4


class Command(BaseCommand):
    help = 'Run the experiment described by a JSON config file and write its CSV/JSON outputs'

    def add_arguments(self, parser):
        parser.add_argument('config', help='Path to the JSON experiment config')
        parser.add_argument('--output-dir', help='Directory for data files and manifest.json')
        parser.add_argument('--seed', type=int, help='Master seed, overrides the config')
        parser.add_argument('--workers', type=int,
                            help='Worker processes for Monte-Carlo runs (default: the config, then POLARLAB_WORKERS)')

    def handle(self, *args, **options):
        path = Path(options['config'])
        try:
            text = path.read_text(encoding='utf-8')
        except (OSError, UnicodeDecodeError) as exc:
            raise CommandError(f'cannot read {path}: {exc}', returncode=IO_ERROR)

        try:
            config = parse_config(text, overrides={'seed': options['seed'], 'output_dir': options['output_dir']})
        except ConfigError as exc:
            raise CommandError(f'invalid config {path}:\n{exc}', returncode=CONFIG_ERROR)

        self.stdout.write(f'Running {config.experiment} experiment (seed {config.seed})...')
        try:
            manifest = run_experiment(config, workers=options['workers'])
        except (NumericalInstability, BracketError) as exc:
            raise CommandError(str(exc), returncode=NUMERICS_ERROR)
        except (ParameterError, SchedulerError) as exc:
            raise CommandError(str(exc), returncode=CONFIG_ERROR)
        except OSError as exc:
            raise CommandError(f'cannot write outputs: {exc}', returncode=IO_ERROR)

        for name in manifest.output_files:
            self.stdout.write(f'  {name}')
        self.stdout.write(self.style.SUCCESS(
            f'Wrote {len(manifest.output_files)} files to {manifest.config_echo["output_dir"]}'))
