from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('experiment', models.CharField(choices=[('simulate', 'Single trajectory'), ('sweep', 'Polarization probability sweep'), ('pde', 'Mean-field density evolution'), ('critical-tau', 'Critical tolerance by bisection'), ('force-check', 'Forcing oracle over random starts'), ('martingale', 'Energy drift counterexample search'), ('multidim', 'Multi-dimensional population run'), ('rule-check', 'Interaction rule contract check')], max_length=20)),
                ('master_seed', models.BigIntegerField()),
                ('tool_version', models.CharField(max_length=20)),
                ('output_dir', models.CharField(max_length=500)),
                ('config', models.JSONField(help_text='Resolved config echo')),
                ('output_files', models.JSONField(default=list)),
                ('status', models.CharField(choices=[('running', 'Running'), ('finished', 'Finished'), ('failed', 'Failed')], default='running', max_length=10)),
                ('error', models.TextField(blank=True)),
                ('started_at', models.DateTimeField()),
                ('finished_at', models.DateTimeField(blank=True, null=True)),
            ],
            options={
                'db_table': 'experiment_run',
                'ordering': ['-started_at', '-id'],
            },
        ),
    ]
