import csv
import json
import tempfile
from io import StringIO
from pathlib import Path

from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase

from assignment.utils import StrategyKind
from policy.utils import PolicyKind
from simulation.exceptions import ConfigError
from workload.utils import HEADER

from .models import ExperimentRun
from .utils.config import load_config, read_document
from .management.commands.sweep import Command as SweepCommand
from .utils.plan import Cell, ExperimentPlan, averaged, parse_seed_range, seed_label

# Keeps command tests quick: a one-minute horizon and about five jobs per workload.
QUICK = ["--horizon", "60", "--scale", "0.05"]
WORKLOAD_HEADER = ",".join(HEADER) + "\n"

SMALL_CONFIG = {
    "sites": [{"id": "S1", "cpus": 4}, {"id": "S2", "cpus": 8, "staging_delay_s": 2}],
    "policies": {"statements": [
        "[CPU, S1, VO0, (1hour, 40%), (1minute, 60%)]",
        "[CPU, S1, VO1, (1hour, 50%), (1minute, 70%)]",
        "[CPU, S2, VO0, (1hour, 30%), (1minute, 50%)]",
        "[CPU, S2, VO1, (1hour, 60%), (1minute, 80%)]",
    ]},
    "workloads": {"scale": 0.05, "vo_count": 2},
    "simulation": {"horizon_s": 600, "measurement_interval_s": 30},
}


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as handle:
        return list(csv.reader(handle))


class CommandTestMixin:
    def setUp(self):
        super().setUp()
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)

    def write_config(self, document, name="config.json"):
        path = self.root / name
        path.write_text(json.dumps(document), encoding="utf-8")
        return path

    def call(self, *args):
        out, err = StringIO(), StringIO()
        call_command(*args, stdout=out, stderr=err)
        return out.getvalue(), err.getvalue()


class ConfigLoadingTests(CommandTestMixin, SimpleTestCase):
    def test_bundled_config(self):
        config = load_config(settings.VOSIM["DEFAULT_CONFIG"])
        self.assertEqual(len(config.sites), 10)
        self.assertEqual(config.total_cpus, 174)
        self.assertEqual(len(config.policies), 60)
        self.assertEqual((config.policy_kind, config.strategy, config.sync), (PolicyKind.NO_LIMIT, StrategyKind.RANDOM, True))
        self.assertIsNone(config.jobs)

    def test_overrides(self):
        config = load_config(self.write_config(SMALL_CONFIG), policy=PolicyKind.COMMITMENT,
                             strategy=StrategyKind.LEAST_USED, sync="off", seed=7, horizon=300, scale=0.5)
        self.assertEqual(config.policy_kind, PolicyKind.COMMITMENT)
        self.assertEqual(config.strategy, StrategyKind.LEAST_USED)
        self.assertFalse(config.sync)
        self.assertEqual((config.seed, config.horizon_s, config.generation.scale), (7, 300, 0.5))

    def test_every_error_is_listed_with_its_path(self):
        document = dict(SMALL_CONFIG, sites=[{"id": "S1", "cpus": 0}, {"id": "S2", "cpus": 8}],
                        workloads={"scale": -1})
        with self.assertRaises(ConfigError) as caught:
            load_config(self.write_config(document))
        errors = caught.exception.errors
        self.assertTrue(any(error.startswith("sites[0].cpus:") for error in errors), errors)
        self.assertIn("workloads.scale: must be positive", errors)

    def test_bad_statement_is_numbered(self):
        document = dict(SMALL_CONFIG, policies={"statements": [
            "[CPU, S1, VO0, (1hour, 40%), (1minute, 60%)]",
            "[CPU, S1, VO1, (1hour, 50%)",
        ]})
        with self.assertRaises(ConfigError) as caught:
            load_config(self.write_config(document))
        self.assertEqual(len(caught.exception.errors), 1)
        self.assertTrue(caught.exception.errors[0].startswith("policies: statement 2:"))

    def test_unknown_policy_site(self):
        document = dict(SMALL_CONFIG, policies={"statements": ["[CPU, S9, VO0, (1hour, 40%), (1minute, 60%)]"]})
        with self.assertRaises(ConfigError) as caught:
            load_config(self.write_config(document))
        self.assertIn("policies: statement for unknown site S9", caught.exception.errors)

    def test_workload_file_is_read_relative_to_config(self):
        (self.root / "jobs.csv").write_text(WORKLOAD_HEADER + "VO0-W0-0000,VO0,W0,W0,0,10,1\n", encoding="utf-8")
        config = load_config(self.write_config(dict(SMALL_CONFIG, workloads={"file": "jobs.csv"})))
        self.assertIsNone(config.generation)
        self.assertEqual([job.job_id for job in config.resolve_jobs()], ["VO0-W0-0000"])

    def test_scale_needs_generation_block(self):
        (self.root / "jobs.csv").write_text(WORKLOAD_HEADER, encoding="utf-8")
        path = self.write_config(dict(SMALL_CONFIG, workloads={"file": "jobs.csv"}))
        with self.assertRaises(ConfigError):
            load_config(path, scale=0.5)

    def test_unreadable_documents(self):
        cases = [
            ("{\n  \"sites\": [,]\n}", "invalid JSON at line 2"),
            ("[]", "the top level must be an object"),
        ]
        for text, message in cases:
            with self.subTest(text=text):
                path = self.root / "broken.json"
                path.write_text(text, encoding="utf-8")
                with self.assertRaises(ConfigError) as caught:
                    read_document(path)
                self.assertIn(message, caught.exception.errors[0])
        with self.assertRaises(ConfigError) as caught:
            read_document(self.root / "absent.json")
        self.assertIn("config file not found", caught.exception.errors[0])


class ExperimentPlanTests(SimpleTestCase):
    def setUp(self):
        self.base = load_config(settings.VOSIM["DEFAULT_CONFIG"])

    def test_cells_in_plan_order(self):
        plan = ExperimentPlan(self.base, seeds=(3, 4))
        cells = plan.cells()
        self.assertEqual(len(cells), 3 * 4 * 2 * 2)
        self.assertEqual(cells[0], Cell("on", StrategyKind.RANDOM, PolicyKind.NO_LIMIT, 3))
        self.assertEqual(cells[-1], Cell("off", StrategyKind.LEAST_USED, PolicyKind.COMMITMENT, 4))
        self.assertEqual(cells[0].trace_dir, "sync-on/seed-3/random-no-limit")

    def test_config_for_cell(self):
        plan = ExperimentPlan(self.base)
        config = plan.config_for(Cell("off", StrategyKind.ROUND_ROBIN, PolicyKind.FIXED, 9), record_audit=True)
        self.assertEqual((config.sync, config.strategy, config.policy_kind, config.seed, config.record_audit),
                         (False, StrategyKind.ROUND_ROBIN, PolicyKind.FIXED, 9, True))
        self.assertEqual(config.sites, self.base.sites)

    def test_invalid_plans(self):
        cases = [
            ({"seeds": ()}, "sweep: seeds must not be empty"),
            ({"seeds": (1, 1)}, "sweep: seeds must be distinct"),
            ({"syncs": ("maybe",)}, "sweep: sync modes are 'on' and 'off'"),
            ({"strategies": ()}, "sweep: strategies must not be empty"),
        ]
        for changes, message in cases:
            with self.subTest(changes=changes):
                with self.assertRaises(ConfigError) as caught:
                    ExperimentPlan(self.base, **changes)
                self.assertIn(message, caught.exception.errors)

    def test_parse_seed_range(self):
        cases = [("1..3", (1, 2, 3)), ("5", (5,)), ("2,1", (2, 1)), (" 0..0 ", (0,))]
        for text, expected in cases:
            with self.subTest(text=text):
                self.assertEqual(parse_seed_range(text), expected)
        for text in ("3..1", "a..b", "x"):
            with self.subTest(text=text):
                with self.assertRaises(ValueError):
                    parse_seed_range(text)

    def test_averaged_ignores_other_cells(self):
        self.assertEqual(averaged({}, "on", (1,)), {})

    def test_seed_label(self):
        cases = [((4,), "Seed 4"), ((1, 2, 3), "Seeds 1..3"), ((2, 1), "Seeds 1..2"), ((7, 3, 5), "Seeds 3, 5, 7")]
        for seeds, expected in cases:
            with self.subTest(seeds=seeds):
                self.assertEqual(seed_label(seeds), expected)


class ValidateCommandTests(CommandTestMixin, SimpleTestCase):
    def test_bundled_config_is_clean(self):
        out, _ = self.call("validate")
        self.assertIn("10 sites, 174 CPUs, 60 statements", out)
        self.assertIn("0 errors, 0 oversubscription warnings", out)

    def test_oversubscribed_site(self):
        document = dict(SMALL_CONFIG, policies={"statements": [
            "[CPU, S1, VO0, (1hour, 40%), (1minute, 80%)]",
            "[CPU, S1, VO1, (1hour, 80%), (1minute, 80%)]",
        ]})
        out, _ = self.call("validate", "--config", str(self.write_config(document)))
        self.assertIn("warning: S1: epoch shares sum to 120.0% > 100%", out)
        self.assertIn("note: S1: burst shares (informational)", out)
        self.assertIn("0 errors, 1 oversubscription warnings", out)

    def test_truncated_policy_line(self):
        (self.root / "broken.policy").write_text(
            "# two statements\n"
            "[CPU, S1, VO0, (1hour, 40%), (1minute, 60%)]\n"
            "[CPU, S1, VO1, (1hour, 50%), (1minute\n",
            encoding="utf-8",
        )
        path = self.write_config(dict(SMALL_CONFIG, policies={"file": "broken.policy"}))
        err = StringIO()
        with self.assertRaises(CommandError) as caught:
            call_command("validate", "--config", str(path), stdout=StringIO(), stderr=err)
        self.assertEqual(caught.exception.returncode, 2)
        self.assertIn("line 3", str(caught.exception))
        self.assertIn("error: ", err.getvalue())

    def test_missing_config(self):
        with self.assertRaises(CommandError) as caught:
            self.call("validate", "--config", str(self.root / "absent.json"))
        self.assertEqual(caught.exception.returncode, 2)
        self.assertIn("config file not found", str(caught.exception))


class GenerateCommandTests(CommandTestMixin, SimpleTestCase):
    def test_reference_counts(self):
        target = self.root / "workload.csv"
        out, _ = self.call("generate", "--out", str(target), "--seed", "4")
        self.assertIn("VO0: 180 jobs", out)
        self.assertIn("VO1: 260 jobs", out)
        self.assertEqual(len(read_csv(target)), 1 + 3 * (180 + 260))

    def test_scaled(self):
        target = self.root / "small.csv"
        out, _ = self.call("generate", "--out", str(target), "--scale", "0.1", "--sync", "off")
        self.assertIn("VO0: 18 jobs", out)
        self.assertIn("VO1: 26 jobs", out)

    def test_needs_generation_block(self):
        (self.root / "jobs.csv").write_text(WORKLOAD_HEADER, encoding="utf-8")
        path = self.write_config(dict(SMALL_CONFIG, workloads={"file": "jobs.csv"}))
        with self.assertRaises(CommandError) as caught:
            self.call("generate", "--config", str(path), "--out", str(self.root / "w.csv"))
        self.assertEqual(caught.exception.returncode, 2)


class RunCommandTests(CommandTestMixin, TestCase):
    def run_into(self, name, *args):
        target = self.root / name
        out, _ = self.call("run", "--out", str(target), *args)
        return target, out

    def test_writes_outputs(self):
        target, out = self.run_into("one", *QUICK, "--policy", "commitment", "--strategy", "round-robin")
        self.assertEqual(sorted(p.name for p in target.iterdir()), ["audit.csv", "jobs.csv", "metrics.json", "usage.csv"])
        self.assertIn("Round Robin / Cm-limit, sync on", out)
        self.assertIn("ARU ", out)
        usage = read_csv(target / "usage.csv")
        self.assertEqual(usage[0], ["interval_start_s", "site", "vo", "cpu_seconds"])
        self.assertEqual(len(usage), 1 + 2 * 10 * 6)
        metrics = json.loads((target / "metrics.json").read_text(encoding="utf-8"))
        self.assertTrue(0 <= metrics["aru"] <= 1)

    def test_deterministic(self):
        first, _ = self.run_into("a", *QUICK, "--seed", "3", "--policy", "extensible")
        second, _ = self.run_into("b", *QUICK, "--seed", "3", "--policy", "extensible")
        for name in ("audit.csv", "usage.csv", "jobs.csv", "metrics.json"):
            with self.subTest(name=name):
                self.assertEqual((first / name).read_bytes(), (second / name).read_bytes())

    def test_small_config(self):
        target, out = self.run_into("small", "--config", str(self.write_config(SMALL_CONFIG)), "--policy", "fixed")
        self.assertIn("VO0: ARU", out)
        self.assertEqual(len(read_csv(target / "usage.csv")), 1 + 20 * 2 * 2)

    def test_horizon_must_fit_measurement_interval(self):
        with self.assertRaises(CommandError) as caught:
            self.run_into("bad", "--horizon", "45")
        self.assertEqual(caught.exception.returncode, 2)
        self.assertIn("not a multiple of measurement_interval_s", str(caught.exception))

    def test_missing_workload_file(self):
        path = self.write_config(dict(SMALL_CONFIG, workloads={"file": "nowhere.csv"}))
        with self.assertRaises(CommandError) as caught:
            self.run_into("missing", "--config", str(path))
        self.assertEqual(caught.exception.returncode, 2)
        self.assertIn("nowhere.csv", str(caught.exception))

    def test_unknown_strategy(self):
        with self.assertRaises(CommandError):
            self.run_into("unknown", *QUICK, "--strategy", "fastest")

    def test_record(self):
        self.run_into("recorded", *QUICK, "--seed", "2", "--policy", "fixed", "--record")
        row = ExperimentRun.objects.get()
        self.assertEqual((row.sync, row.strategy, row.policy, row.seed, row.horizon_s), ("on", "random", "fixed", 2, 60))
        self.assertEqual(len(row.config_digest), 16)


class SweepCommandTests(CommandTestMixin, TestCase):
    def sweep_into(self, name, *args):
        target = self.root / name
        out, _ = self.call("sweep", "--out", str(target), *QUICK, *args)
        return target, out

    def test_single_seed_tables(self):
        target, out = self.sweep_into("single", "--seeds", "1", "--jobs", "1")
        for sync in ("on", "off"):
            for metric in ("aru", "art"):
                name = f"table_{metric}_sync-{sync}.csv"
                with self.subTest(name=name):
                    averaged_table = (target / name).read_bytes()
                    self.assertEqual(averaged_table, (target / "seed-1" / name).read_bytes())
        per_seed = read_csv(target / "summary_per_seed.csv")
        self.assertEqual(per_seed[0][:4], ["seed", "sync", "strategy", "policy"])
        self.assertEqual(len(per_seed), 1 + 24)
        self.assertEqual(len(read_csv(target / "summary_mean.csv")), 1 + 24)
        self.assertIn("ARU, synchronized", out)
        self.assertIn("ART, un-synchronized", out)
        self.assertIn("24 cells over 1 seed(s)", out)

    def test_seed_order_does_not_change_averages(self):
        first, _ = self.sweep_into("forward", "--seeds", "1,2", "--sync", "on", "--jobs", "1")
        second, _ = self.sweep_into("backward", "--seeds", "2,1", "--sync", "on", "--jobs", "1")
        for name in ("table_aru_sync-on.csv", "table_art_sync-on.csv", "summary_mean.csv"):
            with self.subTest(name=name):
                self.assertEqual((first / name).read_bytes(), (second / name).read_bytes())
        self.assertFalse((first / "table_aru_sync-off.csv").exists())

    def test_worker_pool_matches_inline_run(self):
        inline, _ = self.sweep_into("inline", "--seeds", "1", "--sync", "off", "--jobs", "1")
        pooled, _ = self.sweep_into("pooled", "--seeds", "1", "--sync", "off", "--jobs", "2")
        for name in ("summary_per_seed.csv", "table_aru_sync-off.csv", "table_art_sync-off.csv"):
            with self.subTest(name=name):
                self.assertEqual((inline / name).read_bytes(), (pooled / name).read_bytes())

    def test_restricted_grid_leaves_holes(self):
        target, _ = self.sweep_into("partial", "--sync", "on", "--strategy", "random", "--policy", "fixed",
                                    "--policy", "no-limit", "--jobs", "1")
        rows = read_csv(target / "table_aru_sync-on.csv")
        self.assertEqual(rows[1][0], "Random")
        self.assertNotEqual(rows[1][1], "--")
        self.assertEqual(rows[1][3:], ["--", "--"])
        self.assertEqual(rows[2][1:], ["--"] * 4)

    def test_compare_published_pdf_and_record(self):
        target, _ = self.sweep_into("full", "--seeds", "1", "--jobs", "1", "--compare-paper", "--pdf", "--record")
        header = read_csv(target / "summary_mean.csv")[0]
        self.assertEqual(header[-2:], ["published_aru", "published_art_s"])
        self.assertEqual(read_csv(target / "table_aru_sync-on.csv")[1][-1], "0.78")
        self.assertTrue((target / "summary.pdf").read_bytes().startswith(b"%PDF"))
        self.assertEqual(ExperimentRun.objects.count(), 24)
        self.assertEqual(ExperimentRun.objects.filter(sync="off", policy="commitment").count(), 3)

    def test_comparison_flag_spellings(self):
        parser = SweepCommand().create_parser("manage.py", "sweep")
        for flag in ("--compare-paper", "--compare-published"):
            with self.subTest(flag=flag):
                self.assertTrue(parser.parse_args([flag]).compare_published)
        self.assertFalse(parser.parse_args([]).compare_published)

    def test_keep_traces(self):
        target, _ = self.sweep_into("traces", "--sync", "on", "--strategy", "least-used", "--policy", "extensible",
                                    "--jobs", "1", "--keep-traces")
        trace = target / "traces" / "sync-on" / "seed-0" / "least-used-extensible"
        self.assertEqual(sorted(p.name for p in trace.iterdir()), ["audit.csv", "jobs.csv", "metrics.json", "usage.csv"])

    def test_bad_seed_range(self):
        with self.assertRaises(CommandError) as caught:
            self.sweep_into("bad", "--seeds", "4..2")
        self.assertEqual(caught.exception.returncode, 2)
