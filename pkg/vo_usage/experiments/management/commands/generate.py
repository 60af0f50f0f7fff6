from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from workload.utils import workload_counts, write_workload

from experiments.utils.commands import (
    CONFIG_ERROR,
    add_config_argument,
    load_from_options,
    out_dir,
    runtime_failure,
)


class Command(BaseCommand):
    help = "Generate the workload file described by a config's generation block."

    def add_arguments(self, parser):
        add_config_argument(parser)
        parser.add_argument("--out", type=Path, help="Output CSV file (default: <VOSIM_OUT>/workload.csv)")
        parser.add_argument("--seed", type=int, help="Generation seed")
        parser.add_argument("--sync", choices=["on", "off"], help="Synchronized or un-synchronized bursts")
        parser.add_argument("--scale", type=float, help="Scale factor on the reference job counts")

    def handle(self, *args, **options):
        config = load_from_options(options)
        if config.generation is None:
            raise CommandError("The config names a workload file; there is nothing to generate",
                               returncode=CONFIG_ERROR)
        target = options.get("out") or out_dir({}) / "workload.csv"

        jobs = config.resolve_jobs()
        try:
            write_workload(jobs, target)
        except OSError as exc:
            raise runtime_failure(exc) from exc

        for vo, count in workload_counts(jobs).items():
            self.stdout.write(f"{vo}: {count} jobs")
        self.stdout.write(self.style.SUCCESS(f"Wrote {len(jobs)} jobs to {target}"))
