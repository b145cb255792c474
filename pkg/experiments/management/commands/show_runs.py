from django.core.management.base import BaseCommand

from experiments.models import ExperimentRun


class Command(BaseCommand):
    help = 'List the most recent experiment runs'

    def add_arguments(self, parser):
        parser.add_argument('--limit', type=int, default=10)
        parser.add_argument('--experiment', help='Only runs of this experiment kind')

    def handle(self, *args, **options):
        runs = ExperimentRun.objects.all()
        if options['experiment']:
            runs = runs.filter(experiment=options['experiment'])
        runs = runs[:options['limit']]
        if not runs:
            self.stdout.write('No runs recorded yet.')
            return
        for run in runs:
            self.stdout.write(f'{run.started_at:%Y-%m-%d %H:%M:%S}  {run}  {run.output_dir}')
