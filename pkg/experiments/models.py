from django.db import models


class ExperimentKind(models.TextChoices):
    SIMULATE = 'simulate', 'Single trajectory'
    SWEEP = 'sweep', 'Polarization probability sweep'
    PDE = 'pde', 'Mean-field density evolution'
    CRITICAL_TAU = 'critical-tau', 'Critical tolerance by bisection'
    FORCE_CHECK = 'force-check', 'Forcing oracle over random starts'
    MARTINGALE = 'martingale', 'Energy drift counterexample search'
    MULTIDIM = 'multidim', 'Multi-dimensional population run'
    RULE_CHECK = 'rule-check', 'Interaction rule contract check'


class ExperimentRun(models.Model):
    STATUS_CHOICES = [
        ('running', 'Running'),
        ('finished', 'Finished'),
        ('failed', 'Failed'),
    ]

    experiment = models.CharField(max_length=20, choices=ExperimentKind.choices)
    master_seed = models.BigIntegerField()
    tool_version = models.CharField(max_length=20)
    output_dir = models.CharField(max_length=500)
    config = models.JSONField(help_text="Resolved config echo")
    output_files = models.JSONField(default=list)
    status = models.CharField(max_length=10, choices=STATUS_CHOICES, default='running')
    error = models.TextField(blank=True)
    started_at = models.DateTimeField()
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        ordering = ['-started_at', '-id']
        db_table = 'experiment_run'

    def __str__(self):
        return f"{self.experiment} seed={self.master_seed} ({self.status})"
