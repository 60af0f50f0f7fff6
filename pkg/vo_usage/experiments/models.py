from django.db import models

from assignment.utils import StrategyKind
from policy.utils import PolicyKind


class ExperimentRun(models.Model):
    """One simulated cell (sync mode, strategy, policy, seed) and its headline metrics."""

    SYNC_CHOICES = [
        ("on", "Synchronized"),
        ("off", "Un-synchronized"),
    ]

    sync = models.CharField(max_length=3, choices=SYNC_CHOICES)
    strategy = models.CharField(max_length=20, choices=StrategyKind.choices)
    policy = models.CharField(max_length=20, choices=PolicyKind.choices)
    seed = models.PositiveIntegerField()
    aru = models.FloatField(help_text="Aggregated resource utilization, 0..1")
    art_s = models.FloatField(null=True, blank=True,
                              help_text="Aggregated response time in simulated seconds; empty when no job completed")
    completed = models.FloatField(help_text="Completed jobs (seed mean for averaged rows)")
    incomplete = models.FloatField()
    horizon_s = models.PositiveIntegerField()
    config_digest = models.CharField(max_length=16, blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ["-created_at", "sync", "strategy", "policy", "seed"]

    def __str__(self):
        return f"{self.strategy}/{self.policy} sync={self.sync} seed={self.seed}"

    @classmethod
    def from_report(cls, cell, report, horizon_s, config_digest=""):
        return cls(
            sync=cell.sync,
            strategy=cell.strategy.value,
            policy=cell.policy.value,
            seed=cell.seed,
            aru=report.aru,
            art_s=report.art_overall,
            completed=report.completed_total,
            incomplete=report.incomplete_count,
            horizon_s=horizon_s,
            config_digest=config_digest,
        )
