import itertools
from types import SimpleNamespace

from django.test import SimpleTestCase

from assignment.utils import StrategyKind
from policy.utils import PolicyKind

from .exceptions import SummaryError
from .utils import (
    HOLE,
    MetricsReport,
    all_cells,
    average_reports,
    build_report,
    compute_art,
    compute_aru,
    published_value,
    render_summary,
    summarize,
    summary_header,
    summary_rows,
)
from .utils.pdf import summary_pdf


def record(vo, response_s=None):
    return SimpleNamespace(vo_id=vo, completed=response_s is not None, response_s=response_s)


def report(aru, art=None, **changes):
    options = dict(aru=aru, art_overall=art, art_per_vo={"VO0": art}, aru_per_vo={"VO0": aru},
                   completed_counts={"VO0": 3}, incomplete_count=1, generated_count=4,
                   usage_series=((0, 10.0), (30, 20.0)))
    options.update(changes)
    return MetricsReport(**options)


def full_grid(aru=0.5, art=12.0):
    return {cell: report(aru, art) for cell in all_cells()}


class ComputeAruTests(SimpleTestCase):
    def test_examples(self):
        cases = [
            (626400, 174, 3600, 1.0),
            (0, 174, 3600, 0.0),
            (150, 2, 100, 0.75),
        ]
        for executed, cpus, horizon, expected in cases:
            with self.subTest(executed=executed, cpus=cpus):
                self.assertAlmostEqual(compute_aru([executed], cpus, horizon), expected)

    def test_accepts_usage_mapping(self):
        usage = {(0, "S1", "VO0"): 60.0, (0, "S2", "VO1"): 90.0}
        self.assertAlmostEqual(compute_aru(usage, 2, 100), 0.75)

    def test_rejects_degenerate_grid(self):
        for cpus, horizon in ((0, 100), (2, 0)):
            with self.subTest(cpus=cpus, horizon=horizon):
                with self.assertRaises(ValueError):
                    compute_aru([1.0], cpus, horizon)


class ComputeArtTests(SimpleTestCase):
    def test_examples(self):
        self.assertEqual(compute_art([record("VO0", 100)]), 100)
        self.assertEqual(compute_art([record("VO0", 10), record("VO0", 20), record("VO0", 30)]), 20)

    def test_weights_every_job_equally(self):
        records = [record("VO0", 10)] + [record("VO1", 30) for _ in range(3)]
        self.assertEqual(compute_art(records), 25)
        self.assertEqual(compute_art(records, "VO0"), 10)
        self.assertEqual(compute_art(records, "VO1"), 30)

    def test_incomplete_jobs_are_excluded(self):
        self.assertEqual(compute_art([record("VO0", 40), record("VO0")]), 40)
        self.assertIsNone(compute_art([record("VO0")]))
        self.assertIsNone(compute_art([]))

    def test_scales_with_response_times(self):
        responses = [3, 17, 41, 2]
        base = compute_art([record("VO0", r) for r in responses])
        for factor in (2, 7, 0.5):
            with self.subTest(factor=factor):
                self.assertAlmostEqual(compute_art([record("VO0", r * factor) for r in responses]), base * factor)


class BuildReportTests(SimpleTestCase):
    def setUp(self):
        self.usage = {
            (0, "S1", "VO0"): 30.0,
            (0, "S2", "VO1"): 45.0,
            (30, "S1", "VO0"): 15.0,
            (30, "S1", "VO1"): 10.0,
        }
        self.records = [record("VO0", 20), record("VO0", 40), record("VO1", 35), record("VO1")]
        self.report = build_report(self.records, self.usage, total_cpus=4, horizon_s=60,
                                   measurement_interval_s=30, vo_ids=["VO0", "VO1"])

    def test_per_vo_utilization_adds_up(self):
        self.assertAlmostEqual(self.report.aru, 100 / 240)
        self.assertAlmostEqual(sum(self.report.aru_per_vo.values()), self.report.aru)
        self.assertAlmostEqual(self.report.aru_per_vo["VO0"], 45 / 240)

    def test_counts_and_response_times(self):
        self.assertEqual(self.report.completed_counts, {"VO0": 2, "VO1": 1})
        self.assertEqual(self.report.incomplete_count, 1)
        self.assertEqual(self.report.generated_count, 4)
        self.assertEqual(self.report.completed_total, 3)
        self.assertAlmostEqual(self.report.art_overall, 95 / 3)
        self.assertEqual(self.report.art_per_vo, {"VO0": 30, "VO1": 35})

    def test_usage_series_covers_every_interval(self):
        self.assertEqual(self.report.usage_series, ((0, 75.0), (30, 25.0)))
        quiet = build_report([], {}, total_cpus=4, horizon_s=90, measurement_interval_s=30, vo_ids=["VO0"])
        self.assertEqual(quiet.usage_series, ((0, 0.0), (30, 0.0), (60, 0.0)))
        self.assertEqual(quiet.aru, 0.0)
        self.assertIsNone(quiet.art_overall)

    def test_as_dict(self):
        data = self.report.as_dict()
        self.assertEqual(data["completed_total"], 3)
        self.assertEqual(data["usage_series"], [[0, 75.0], [30, 25.0]])


class AverageReportsTests(SimpleTestCase):
    def setUp(self):
        self.reports = [
            report(0.4, 10.0, usage_series=((0, 10.0),)),
            report(0.6, None, art_per_vo={"VO0": None}),
            report(0.8, 30.0, completed_counts={"VO0": 6}),
        ]

    def test_single_report_is_unchanged(self):
        only = self.reports[0]
        self.assertEqual(average_reports([only]), only)

    def test_order_does_not_matter(self):
        expected = average_reports(self.reports)
        for order in itertools.permutations(self.reports):
            with self.subTest(order=[r.aru for r in order]):
                self.assertEqual(average_reports(list(order)), expected)

    def test_means_skip_missing_response_times(self):
        mean = average_reports(self.reports)
        self.assertAlmostEqual(mean.aru, 0.6)
        self.assertAlmostEqual(mean.art_overall, 20.0)
        self.assertAlmostEqual(mean.completed_counts["VO0"], 4.0)
        self.assertEqual(mean.usage_series, ((0, 10.0), (30, 40 / 3)))

    def test_nothing_to_average(self):
        with self.assertRaises(ValueError):
            average_reports([])


class SummaryTests(SimpleTestCase):
    def test_published_values(self):
        self.assertEqual(published_value("aru", "on", StrategyKind.RANDOM, PolicyKind.COMMITMENT), 0.78)
        self.assertEqual(published_value("art", "off", StrategyKind.ROUND_ROBIN, PolicyKind.NO_LIMIT), 7.78)
        self.assertEqual(published_value("aru", "off", StrategyKind.LEAST_USED, PolicyKind.EXTENSIBLE), 0.72)

    def test_empty_grid(self):
        with self.assertRaises(SummaryError) as caught:
            summarize({}, "on")
        self.assertEqual(len(caught.exception.missing), 12)
        self.assertIn("Random/No-limit", caught.exception.missing)

    def test_full_grid(self):
        aru, art = summarize(full_grid(), "on")
        self.assertEqual((aru.metric, art.metric), ("aru", "art"))
        self.assertEqual(aru.header(), ["Policy/UP"] + [p.label for p in (
            PolicyKind.NO_LIMIT, PolicyKind.FIXED, PolicyKind.EXTENSIBLE, PolicyKind.COMMITMENT)])
        self.assertEqual(aru.rows()[0], ["Random", "0.50", "0.50", "0.50", "0.50"])
        self.assertEqual(art.rows()[2][1:], ["12.00"] * 4)
        self.assertEqual(aru.missing(), [])
        self.assertEqual(aru.title, "ARU, synchronized")
        self.assertEqual(summarize(full_grid(), "off")[1].title, "ART, un-synchronized")

    def test_holes(self):
        results = full_grid()
        del results[(StrategyKind.LEAST_USED, PolicyKind.FIXED)]
        results[(StrategyKind.RANDOM, PolicyKind.NO_LIMIT)] = report(0.3, None)
        with self.assertLogs("metrics.utils.summary", level="WARNING"):
            aru, art = summarize(results, "on")
        self.assertEqual(aru.rows()[2][2], HOLE)
        self.assertEqual(aru.missing(), ["Least Used/Fix-limit"])
        self.assertEqual(art.rows()[0][1], HOLE)

    def test_compare_published_columns(self):
        aru, _ = summarize(full_grid(), "on", compare_published=True)
        self.assertEqual(len(aru.header()), 9)
        self.assertEqual(aru.header()[-1], "Cm-limit (published)")
        self.assertEqual(aru.rows()[0][-1], "0.78")

    def test_machine_rows(self):
        results = full_grid()
        del results[(StrategyKind.RANDOM, PolicyKind.FIXED)]
        rows = list(summary_rows(results, "off", compare_published=True))
        self.assertEqual(len(rows), 12)
        self.assertEqual(len(summary_header(True)), len(rows[0]))
        self.assertEqual(rows[0], ["off", "random", "no-limit", "0.500000", "12.000000", "3", "1", "0.70", "10.30"])
        self.assertEqual(rows[1][3:7], [HOLE] * 4)

    def test_render_summary(self):
        aru, _ = summarize(full_grid(aru=0.123), "on")
        text = render_summary(aru)
        lines = text.splitlines()
        self.assertEqual(lines[0], "ARU, synchronized")
        self.assertTrue(lines[1].startswith("Policy/UP"))
        self.assertEqual(set(lines[2]), {"-"})
        self.assertEqual(len(lines), 6)
        self.assertTrue(lines[3].startswith("Random"))
        self.assertTrue(lines[3].endswith("0.12"))

    def test_pdf(self):
        tables = summarize(full_grid(), "on") + summarize(full_grid(), "off")
        self.assertTrue(summary_pdf(tables).getvalue().startswith(b"%PDF"))
