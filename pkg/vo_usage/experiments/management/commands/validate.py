from django.core.management.base import BaseCommand

from policy.utils import check_oversubscription
from simulation.exceptions import ConfigError

from experiments.utils.commands import add_config_argument, config_failure, config_path
from experiments.utils.config import load_config


class Command(BaseCommand):
    help = "Check an experiment config and its policy statements; report oversubscribed sites."

    def add_arguments(self, parser):
        add_config_argument(parser)

    def handle(self, *args, **options):
        path = config_path(options)
        try:
            config = load_config(path)
        except ConfigError as exc:
            for error in exc.errors:
                self.stderr.write(f"error: {error}")
            raise config_failure(exc) from exc

        warnings = check_oversubscription(config.policies, config.sites)
        for warning in warnings:
            if warning.informational:
                self.stdout.write(f"note: {warning}")
            else:
                self.stdout.write(self.style.WARNING(f"warning: {warning}"))
        counted = sum(1 for warning in warnings if not warning.informational)
        self.stdout.write(
            f"{path}: {len(config.sites)} sites, {config.total_cpus} CPUs, "
            f"{len(config.policies)} statements"
        )
        self.stdout.write(self.style.SUCCESS(f"0 errors, {counted} oversubscription warnings"))
