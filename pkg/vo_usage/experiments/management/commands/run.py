import logging
from pathlib import Path

from django.core.management.base import BaseCommand

from policy.exceptions import LedgerError
from simulation.exceptions import ConfigError, SimulationInvariantError
from simulation.utils import run, write_result

from experiments.models import ExperimentRun
from experiments.utils.commands import (
    add_config_argument,
    add_override_arguments,
    config_failure,
    config_path,
    load_from_options,
    out_dir,
    runtime_failure,
)
from experiments.utils.config import config_digest
from experiments.utils.plan import Cell

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = "Run one experiment cell and write audit.csv, usage.csv, jobs.csv and metrics.json."

    def add_arguments(self, parser):
        add_config_argument(parser)
        add_override_arguments(parser)
        parser.add_argument("--out", type=Path, help="Output directory (default: $VOSIM_OUT)")
        parser.add_argument("--record", action="store_true", help="Store the result as an ExperimentRun row")

    def handle(self, *args, **options):
        config = load_from_options(options)
        target = out_dir(options)
        try:
            result = run(config)
            paths = write_result(result, target)
        except ConfigError as exc:
            raise config_failure(exc) from exc
        except (SimulationInvariantError, LedgerError, OSError) as exc:
            raise runtime_failure(exc) from exc

        report = result.report
        for warning in result.warnings:
            self.stdout.write(self.style.WARNING(f"warning: {warning}"))
        self.stdout.write(
            f"{config.strategy.label} / {config.policy_kind.label}, sync {'on' if config.sync else 'off'}, "
            f"seed {config.seed}, horizon {config.horizon_s} s"
        )
        self.stdout.write(f"ARU {report.aru:.4f}")
        art = "--" if report.art_overall is None else f"{report.art_overall:.2f} s"
        self.stdout.write(f"ART {art} over {report.completed_total} completed jobs, {report.incomplete_count} incomplete")
        for vo in result.vo_ids:
            vo_art = report.art_per_vo.get(vo)
            self.stdout.write(
                f"  {vo}: ARU {report.aru_per_vo.get(vo, 0.0):.4f}, "
                f"ART {'--' if vo_art is None else f'{vo_art:.2f} s'}, "
                f"completed {report.completed_counts.get(vo, 0)}"
            )

        if options.get("record"):
            cell = Cell("on" if config.sync else "off", config.strategy, config.policy_kind, config.seed)
            row = ExperimentRun.from_report(cell, report, config.horizon_s, config_digest(config_path(options)))
            row.save()
            logger.info("Recorded %s", row)
        self.stdout.write(self.style.SUCCESS(f"Wrote {', '.join(path.name for path in paths.values())} to {target}"))
