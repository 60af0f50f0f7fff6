from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from assignment.utils import StrategyKind
from metrics.exceptions import SummaryError
from metrics.utils import POLICY_ORDER, STRATEGY_ORDER, render_summary, summarize, summary_header, summary_rows
from metrics.utils.pdf import summary_pdf
from policy.utils import PolicyKind
from simulation.exceptions import ConfigError
from vo_usage.files import atomic_write

from experiments.exceptions import CellError
from experiments.models import ExperimentRun
from experiments.utils.commands import (
    CONFIG_ERROR,
    add_config_argument,
    add_override_arguments,
    config_failure,
    config_path,
    load_from_options,
    out_dir,
    positive_int,
    runtime_failure,
    write_csv,
)
from experiments.utils.config import config_digest
from experiments.utils.plan import (
    SYNC_ORDER,
    ExperimentPlan,
    averaged,
    execute,
    parse_seed_range,
    per_seed,
    seed_label,
)


class Command(BaseCommand):
    help = "Run the strategy x policy grid for each sync mode and seed; write per-seed and averaged tables."

    def add_arguments(self, parser):
        add_config_argument(parser)
        add_override_arguments(parser, cell=False)
        parser.add_argument("--seeds", default="0", help="Seed range N..M, or a comma-separated list")
        parser.add_argument("--strategy", type=StrategyKind.parse, action="append",
                            help="Restrict to a strategy (repeatable)")
        parser.add_argument("--policy", choices=PolicyKind.values, action="append",
                            help="Restrict to a usage policy kind (repeatable)")
        parser.add_argument("--out", type=Path, help="Output directory (default: $VOSIM_OUT)")
        parser.add_argument("--jobs", type=positive_int, help="Worker processes (default: available CPUs)")
        parser.add_argument("--compare-paper", "--compare-published", dest="compare_published", action="store_true",
                            help="Add the published reference values next to the computed ones")
        parser.add_argument("--record", action="store_true", help="Store per-seed cells as ExperimentRun rows")
        parser.add_argument("--pdf", action="store_true", help="Also write summary.pdf")
        parser.add_argument("--keep-traces", action="store_true",
                            help="Write audit/usage/jobs CSVs for every cell")

    def handle(self, *args, **options):
        try:
            seeds = parse_seed_range(options["seeds"])
        except ValueError as exc:
            raise CommandError(f"Bad --seeds value {options['seeds']!r}: {exc}", returncode=CONFIG_ERROR)

        # --sync narrows the sweep instead of overriding the base config
        config = load_from_options(options, sync=None)
        syncs = (options["sync"],) if options.get("sync") else SYNC_ORDER
        strategies = tuple(s for s in STRATEGY_ORDER if s in (options.get("strategy") or STRATEGY_ORDER))
        policies = tuple(p for p in POLICY_ORDER if p in (options.get("policy") or POLICY_ORDER))
        try:
            plan = ExperimentPlan(config, strategies, policies, syncs, seeds)
        except ConfigError as exc:
            raise config_failure(exc) from exc

        target = out_dir(options)
        compare = options["compare_published"]
        try:
            reports = execute(plan, jobs=options.get("jobs"),
                              trace_root=target / "traces" if options["keep_traces"] else None)
        except CellError as exc:
            raise runtime_failure(exc) from exc

        tables = []
        try:
            for sync in syncs:
                for seed in seeds:
                    self._write_tables(target / f"seed-{seed}", per_seed(reports, sync, seed), sync, compare)
                tables += self._write_tables(target, averaged(reports, sync, seeds), sync, compare)
        except SummaryError as exc:
            raise runtime_failure(exc) from exc

        header = ["seed"] + summary_header(compare)
        rows = [
            [seed] + row
            for sync in syncs for seed in seeds
            for row in summary_rows(per_seed(reports, sync, seed), sync, compare)
        ]
        write_csv(target / "summary_per_seed.csv", header, rows)
        write_csv(target / "summary_mean.csv", summary_header(compare), [
            row for sync in syncs for row in summary_rows(averaged(reports, sync, seeds), sync, compare)
        ])

        for table in tables:
            self.stdout.write(render_summary(table))
        if options["pdf"]:
            with atomic_write(target / "summary.pdf", mode="wb") as handle:
                title = f"Usage-policy experiment summary, {seed_label(seeds)}"
                handle.write(summary_pdf(tables, title).getvalue())
        if options["record"]:
            digest = config_digest(config_path(options))
            ExperimentRun.objects.bulk_create(
                ExperimentRun.from_report(cell, report, config.horizon_s, digest)
                for cell, report in reports.items()
            )
        self.stdout.write(self.style.SUCCESS(
            f"{len(reports)} cells over {len(seeds)} seed(s); tables written to {target}"
        ))

    def _write_tables(self, directory, results, sync, compare):
        tables = summarize(results, sync, compare)
        for table in tables:
            write_csv(directory / f"table_{table.metric}_sync-{sync}.csv", table.header(), table.rows())
        return tables
