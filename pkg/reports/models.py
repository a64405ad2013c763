"""
Run registry: one row per management-command invocation.
"""

from django.db import models


class RunRecord(models.Model):
    """
    Track pipeline runs for audit and comparison.
    """

    STATUS_CHOICES = [
        ('ok', 'Succeeded'),
        ('usage', 'Usage or config error'),
        ('data', 'Data error'),
        ('numeric', 'Numeric failure'),
    ]

    command = models.CharField(max_length=50)
    seed = models.BigIntegerField(default=0)
    build_id = models.CharField(max_length=100, blank=True)
    status = models.CharField(max_length=10, choices=STATUS_CHOICES, default='ok')
    exit_code = models.PositiveSmallIntegerField(default=0)

    # Inputs and outputs
    output_dir = models.CharField(max_length=500, blank=True)
    config_json = models.JSONField(default=dict, help_text='Resolved run configuration')
    report_json = models.JSONField(default=dict, help_text='Report payload (results only)')
    error = models.TextField(blank=True)

    started_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-started_at']
        verbose_name = 'Run Record'

    def __str__(self):
        return f"{self.command} (seed {self.seed}) - {self.get_status_display()}"
