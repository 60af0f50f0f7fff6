import random
from dataclasses import dataclass, field
from types import SimpleNamespace

from django.conf import settings
from django.test import SimpleTestCase

from .exceptions import (
    FractionOutOfRange,
    LedgerError,
    PolicyError,
    PolicySyntaxError,
    UnknownDurationUnit,
    UnknownResourceKind,
)
from .utils import (
    LimitTuple,
    Outcome,
    PolicyKind,
    PolicySet,
    RejectReason,
    ResourceKind,
    UsageLedger,
    UsagePolicyStatement,
    admit,
    admit_commitment,
    admit_extensible,
    admit_fixed,
    assess,
    check_oversubscription,
    format_policy_file,
    format_statement,
    parse_policy_file,
    parse_statement,
)

REFERENCE_STATEMENTS = [
    "[CPU, Site1, VO0, (1hour, 10%), (1minute, 40%)]",
    "[CPU, Site2, VO0, (1hour, 10%), (1minute, 40%)]",
    "[CPU, Site1, VO1, (1hour, 20%), (1minute, 60%)]",
    "[CPU, Site2, VO1, (1hour, 20%), (1minute, 60%)]",
]

DURATION_PAIRS = [
    ("1month", "1day"),
    ("2weeks", "1week"),
    ("1day", "1hour"),
    ("3hours", "90minutes"),
    ("1hour", "1minute"),
    ("90minutes", "45seconds"),
    ("1week", "2days"),
    ("10minutes", "10seconds"),
]
PERCENT_PAIRS = [("10", "40"), ("20", "60"), ("12.5", "50"), ("0", "5"), ("33", "100"), ("7.25", "40")]


def statement_corpus():
    corpus = list(REFERENCE_STATEMENTS)
    for i in range(46):
        epoch, burst = DURATION_PAIRS[i % len(DURATION_PAIRS)]
        share, peak = PERCENT_PAIRS[i % len(PERCENT_PAIRS)]
        corpus.append(f"[CPU, Site{i % 10 + 1}, VO{i % 6}, ({epoch}, {share}%), ({burst}, {peak}%)]")
    return corpus


def statement(site, vo, epoch_s, share, burst_s, peak):
    return UsagePolicyStatement(
        ResourceKind.CPU, site, vo, LimitTuple(epoch_s, share), LimitTuple(burst_s, peak)
    )


@dataclass
class FakeSite:
    site_id: str
    cpu_count: int
    sited: dict = field(default_factory=dict)
    total_allocation: float = 1.0

    def vo_cpus(self, vo):
        return self.sited.get(vo, 0)

    def allocated_cpus(self):
        return sum(self.sited.values())


class StatementParserTests(SimpleTestCase):
    def test_reference_statements(self):
        """Durations are normalised to seconds and percentages to fractions"""
        cases = [
            ("[CPU, Site1, VO0, (1month, 10%), (1day, 40%)]", 2592000, 0.10, 86400, 0.40),
            ("[CPU, Site1, VO0, (1hour, 10%), (1minute, 40%)]", 3600, 0.10, 60, 0.40),
        ]
        for text, epoch_s, share, burst_s, peak in cases:
            with self.subTest(text=text):
                stmt = parse_statement(text)
                self.assertEqual(stmt.resource_kind, ResourceKind.CPU)
                self.assertEqual((stmt.site_id, stmt.vo_id), ("Site1", "VO0"))
                self.assertEqual(stmt.epoch, LimitTuple(epoch_s, share))
                self.assertEqual(stmt.burst, LimitTuple(burst_s, peak))
                self.assertEqual(stmt.share, share)

    def test_format_uses_largest_exact_unit(self):
        self.assertEqual(
            format_statement(statement("Site1", "VO0", 3600, 0.10, 60, 0.40)),
            "[CPU, Site1, VO0, (1hour, 10%), (1minute, 40%)]",
        )
        self.assertEqual(
            format_statement(statement("S", "V", 90, 0.5, 90, 0.5)),
            "[CPU, S, V, (90seconds, 50%), (90seconds, 50%)]",
        )

    def test_corpus_round_trip(self):
        corpus = statement_corpus()
        self.assertEqual(len(corpus), 50)
        for text in corpus:
            with self.subTest(text=text):
                stmt = parse_statement(text)
                self.assertEqual(format_statement(stmt), text)
                self.assertEqual(parse_statement(format_statement(stmt)), stmt)

    def test_round_trip_of_statements_built_in_code(self):
        rng = random.Random(11)
        fractions = [0.0, 1.0, 0.1 + 0.2, 1e-300, 5e-324, 0.8444218515250481]
        fractions += [rng.random() for _ in range(5000)]
        for share in fractions:
            stmt = statement("Site1", "VO0", 3600, share, 60, 1.0 - share)
            with self.subTest(share=share):
                self.assertEqual(parse_statement(format_statement(stmt)), stmt)

    def test_lenient_input_parses_to_canonical_form(self):
        stmt = parse_statement("  [cpu,Site1 ,VO0,( 1 hours ,10 %),(1 minutes, 40%)]  ")
        self.assertEqual(format_statement(stmt), REFERENCE_STATEMENTS[0])

    def test_error_positions(self):
        """Every malformed statement reports the offending column"""
        cases = [
            ("[GPU, Site1, VO0, (1hour, 10%), (1minute, 40%)]", UnknownResourceKind, 1),
            ("[CPU, Site1, VO0, (1fortnight, 10%), (1minute, 40%)]", UnknownDurationUnit, 20),
            ("[CPU, Site1, VO0, (1hour, 120%), (1minute, 40%)]", FractionOutOfRange, 26),
            ("[CPU, Site1, VO0, (1hour, 10%)", PolicySyntaxError, 30),
            ("[CPU, Site1, VO0, (1minute, 10%), (1hour, 40%)]", PolicySyntaxError, 34),
            ("[CPU, Site1, VO0, (1hour, 10%), (1minute, 40%)]]", PolicySyntaxError, 47),
            ("[CPU Site1, VO0, (1hour, 10%), (1minute, 40%)]", PolicySyntaxError, 5),
            ("[CPU, Site1, VO0, (1.5hours, 10%), (1minute, 40%)]", PolicySyntaxError, 19),
            ("[CPU, Site1, VO0, (0hours, 10%), (1minute, 40%)]", PolicySyntaxError, 19),
            ("[CPU, Site1, VO0, (1hour; 10%), (1minute, 40%)]", PolicySyntaxError, 24),
        ]
        for text, error, column in cases:
            with self.subTest(text=text):
                with self.assertRaises(error) as caught:
                    parse_statement(text)
                self.assertEqual(caught.exception.position, column)
                self.assertIn(f"column {column + 1}", str(caught.exception))

    def test_policy_file_errors_carry_line_numbers(self):
        text = "# header\n\n" + REFERENCE_STATEMENTS[0] + "\n[CPU, Site1, VO1, (1hour, 20%)\n"
        with self.assertRaises(PolicySyntaxError) as caught:
            parse_policy_file(text)
        self.assertEqual(caught.exception.line, 4)
        self.assertIn("line 4", str(caught.exception))

    def test_policy_file_skips_comments(self):
        text = "# shares\n" + REFERENCE_STATEMENTS[0] + "  # statement (1)\n\n" + REFERENCE_STATEMENTS[2] + "\n"
        statements = parse_policy_file(text)
        self.assertEqual(len(statements), 2)
        self.assertEqual(format_policy_file(statements),
                         REFERENCE_STATEMENTS[0] + "\n" + REFERENCE_STATEMENTS[2] + "\n")

    def test_bundled_policy_file(self):
        text = (settings.BASE_DIR / "config" / "grid3_reference.policy").read_text(encoding="utf-8")
        statements = parse_policy_file(text)
        self.assertEqual(len(statements), 60)
        body = "".join(line + "\n" for line in text.splitlines() if line and not line.startswith("#"))
        self.assertEqual(format_policy_file(statements), body)
        for canonical in REFERENCE_STATEMENTS:
            self.assertIn(parse_statement(canonical), statements)


class PolicySetTests(SimpleTestCase):
    def test_lookup(self):
        policies = PolicySet(parse_statement(text) for text in REFERENCE_STATEMENTS)
        self.assertEqual(len(policies), 4)
        self.assertEqual(policies.get("Site2", "VO1").share, 0.20)
        self.assertIsNone(policies.get("Site3", "VO0"))
        self.assertEqual(policies.vos_at("Site1"), ("VO0", "VO1"))
        self.assertEqual(policies.max_interval_s(), 3600)

    def test_duplicate_statement(self):
        with self.assertRaises(PolicyError):
            PolicySet([parse_statement(REFERENCE_STATEMENTS[0])] * 2)


class OversubscriptionTests(SimpleTestCase):
    sites = [SimpleNamespace(site_id="Site1"), SimpleNamespace(site_id="Site2")]

    def test_reference_shares_fit(self):
        statements = [parse_statement(text) for text in REFERENCE_STATEMENTS]
        warnings = check_oversubscription(statements, self.sites)
        self.assertEqual([w for w in warnings if not w.informational], [])

    def test_oversubscribed_site(self):
        statements = [
            statement("Site1", "VO1", 3600, 0.40, 60, 0.50),
            statement("Site1", "VO2", 3600, 0.80, 60, 0.50),
            statement("Site2", "VO1", 3600, 0.40, 60, 0.50),
        ]
        warnings = check_oversubscription(statements, self.sites)
        self.assertEqual(len(warnings), 1)
        self.assertEqual((warnings[0].site_id, warnings[0].limit), ("Site1", "epoch"))
        self.assertAlmostEqual(warnings[0].total, 1.2)
        self.assertIn("Site1", str(warnings[0]))

    def test_no_statements(self):
        self.assertEqual(check_oversubscription([], self.sites), [])


class UsageLedgerTests(SimpleTestCase):
    def test_single_sample(self):
        ledger = UsageLedger({"S1": 10}).record_tick("S1", "V0", 3, 0)
        self.assertEqual(ledger.window_average("S1", "V0", 1, 1), 0.3)
        self.assertEqual(ledger.window_average("S1", "V0", 10, 1), 0.03)

    def test_constant_signal(self):
        ledger = UsageLedger({"S1": 10})
        for tick in range(100):
            ledger.record_tick("S1", "V0", 4, tick)
        for window in (1, 10, 50, 100):
            with self.subTest(window=window):
                self.assertEqual(ledger.window_average("S1", "V0", window, 100), 0.4)

    def test_empty_window(self):
        ledger = UsageLedger({"S1": 10})
        self.assertEqual(ledger.window_average("S1", "V0", 60, 0), 0.0)
        ledger.record_tick("S1", "V0", 5, 0)
        self.assertEqual(ledger.window_average("S1", "V1", 60, 1), 0.0)

    def test_half_window(self):
        ledger = UsageLedger({"S1": 10})
        for tick in range(20):
            ledger.record_tick("S1", "V0", 10 if tick < 10 else 0, tick)
        self.assertEqual(ledger.window_average("S1", "V0", 20, 20), 0.5)

    def test_matches_direct_summation(self):
        rng = random.Random(7)
        samples = [rng.randint(0, 8) for _ in range(400)]
        ledger = UsageLedger({"S1": 8}, retention_s=200)
        for tick, cpus in enumerate(samples):
            ledger.record_tick("S1", "V0", cpus, tick)
            for window in (1, 7, 60, 200):
                now = tick + 1
                expected = sum(samples[max(0, now - window):now]) / (window * 8)
                self.assertEqual(ledger.window_average("S1", "V0", window, now), min(1.0, expected))

    def test_tick_step(self):
        ledger = UsageLedger({"S1": 10}, tick_step_s=5)
        for tick in range(4):
            ledger.record_tick("S1", "V0", 2, tick)
        # four 5 s ticks at 2 CPUs = 40 CPU-s over 20 s on 10 CPUs
        self.assertEqual(ledger.window_average("S1", "V0", 20, 4), 0.2)

    def test_rejects_bad_samples(self):
        ledger = UsageLedger({"S1": 10}).record_tick("S1", "V0", 1, 5)
        cases = [
            lambda: ledger.record_tick("S1", "V0", 1, 5),
            lambda: ledger.record_tick("S1", "V0", 1, 4),
            lambda: ledger.record_tick("S1", "V0", 11, 6),
            lambda: ledger.record_tick("S1", "V0", -1, 6),
            lambda: ledger.record_tick("S9", "V0", 1, 6),
            lambda: ledger.window_average("S1", "V0", 7200, 6),
            lambda: ledger.window_average("S1", "V0", 0, 6),
        ]
        for index, call in enumerate(cases):
            with self.subTest(case=index):
                with self.assertRaises(LedgerError):
                    call()

    def test_eviction_keeps_recent_window(self):
        ledger = UsageLedger({"S1": 4}, retention_s=10)
        for tick in range(10000):
            ledger.record_tick("S1", "V0", tick % 5 and 4, tick)
        self.assertEqual(ledger.window_average("S1", "V0", 10, 10000), 0.8)


class FixedLimitTests(SimpleTestCase):
    stmt = statement("S1", "V", 3600, 0.40, 60, 0.40)

    def test_cases(self):
        cases = [
            ({"V": 2}, 2, Outcome.RUN),
            ({"V": 3}, 2, Outcome.REJECT),
            ({"V": 4, "W": 6}, 1, Outcome.REJECT),
            ({"W": 10}, 4, Outcome.RUN),
        ]
        for sited, j, outcome in cases:
            with self.subTest(sited=sited, j=j):
                decision = admit_fixed(self.stmt, FakeSite("S1", 10, sited), "V", j)
                self.assertEqual(decision.outcome, outcome)
                if outcome == Outcome.REJECT:
                    self.assertEqual(decision.reason, RejectReason.FIXED_LIMIT_EXCEEDED)

    def test_zero_share(self):
        stmt = statement("S1", "V", 3600, 0.0, 60, 0.0)
        for j in (1, 5, 10):
            with self.subTest(j=j):
                self.assertFalse(admit_fixed(stmt, FakeSite("S1", 10), "V", j).admitted)

    def test_fractional_limit(self):
        # 30% of 7 CPUs is 2.1: two CPUs fit, three do not
        stmt = statement("S1", "V", 3600, 0.30, 60, 0.30)
        self.assertTrue(admit_fixed(stmt, FakeSite("S1", 7), "V", 2).admitted)
        self.assertFalse(admit_fixed(stmt, FakeSite("S1", 7), "V", 3).admitted)


class ExtensibleLimitTests(SimpleTestCase):
    stmt = statement("S1", "V", 3600, 0.40, 60, 0.40)

    def test_cases(self):
        cases = [
            ({"V": 4}, 2, Outcome.RUN, None),
            ({"V": 4, "W": 6}, 1, Outcome.REJECT, RejectReason.NO_CAPACITY),
            ({"W": 10}, 2, Outcome.RUN, None),
        ]
        for sited, j, outcome, reason in cases:
            with self.subTest(sited=sited, j=j):
                decision = admit_extensible(self.stmt, FakeSite("S1", 10, sited), "V", j)
                self.assertEqual((decision.outcome, decision.reason), (outcome, reason))


class CommitmentTests(SimpleTestCase):
    def setUp(self):
        self.v = statement("S1", "V", 100, 0.10, 10, 0.50)
        self.w = statement("S1", "W", 100, 0.90, 10, 0.95)
        self.policies = PolicySet([self.v, self.w])

    def _ledger(self, cpus, samples):
        ledger = UsageLedger({"S1": cpus}, retention_s=100)
        for tick, usage in enumerate(samples):
            for vo, used in usage.items():
                ledger.record_tick("S1", vo, used, tick)
        return ledger

    def test_over_used(self):
        ledger = self._ledger(10, [{"V": 3, "W": 0}] * 50)
        decision = admit_commitment(self.v, self.policies, ledger, FakeSite("S1", 10), "V", 1, 50)
        self.assertEqual(decision.reason, RejectReason.EPOCH_EXCEEDED)

    def test_un_allocated_site(self):
        policies = PolicySet([statement("S1", "V", 100, 0.10, 10, 0.40)])
        ledger = UsageLedger({"S1": 10}, retention_s=100)
        decision = admit_commitment(policies.get("S1", "V"), policies, ledger, FakeSite("S1", 10), "V", 3, 0)
        self.assertEqual(decision.outcome, Outcome.RUN)

    def test_over_allocated_site_queues(self):
        ledger = self._ledger(100, [{"V": 5, "W": 95}] * 10)
        site = FakeSite("S1", 100, {"V": 5, "W": 95})
        assessment = assess(PolicyKind.COMMITMENT, self.policies, ledger, site, "V", 1, 10)
        self.assertEqual(assessment.decision.outcome, Outcome.QUEUE)
        self.assertAlmostEqual(assessment.ba, 0.05)
        self.assertAlmostEqual(assessment.ea, 0.005)

    def test_fallthrough(self):
        ledger = self._ledger(20, [{"V": 0, "W": 19}] * 10)
        decision = admit_commitment(self.v, self.policies, ledger, FakeSite("S1", 20), "V", 2, 10)
        self.assertEqual(decision.reason, RejectReason.FALLTHROUGH)

    def test_sub_allocated_site_runs(self):
        ledger = self._ledger(20, [{"V": 1, "W": 10}] * 10)
        decision = admit_commitment(self.v, self.policies, ledger, FakeSite("S1", 20), "V", 2, 10)
        self.assertEqual(decision.outcome, Outcome.RUN)

    def test_burst_share_exhausted(self):
        ledger = self._ledger(20, [{"V": 10, "W": 0}] * 10)
        # EA = 100/2000 = 0.05 is within the epoch share, BA = 0.5 is not below the burst share
        decision = admit_commitment(self.v, self.policies, ledger, FakeSite("S1", 20), "V", 1, 10)
        self.assertEqual(decision.reason, RejectReason.FALLTHROUGH)

    def test_admission_is_monotone_in_job_size(self):
        rng = random.Random(11)
        for trial in range(200):
            cpus = rng.randint(1, 12)
            samples = [{"V": rng.randint(0, cpus // 2), "W": rng.randint(0, cpus - cpus // 2)} for _ in range(20)]
            ledger = self._ledger(cpus, samples)
            site = FakeSite("S1", cpus, {"V": rng.randint(0, 2)})
            admitted = [
                admit(kind, self.policies, ledger, site, "V", j, 20).admitted
                for kind in PolicyKind for j in range(1, cpus + 1)
            ]
            for kind_index in range(len(PolicyKind)):
                row = admitted[kind_index * cpus:(kind_index + 1) * cpus]
                with self.subTest(trial=trial, kind=kind_index):
                    self.assertEqual(row, sorted(row, reverse=True))


class AssessTests(SimpleTestCase):
    def test_dispatch(self):
        policies = PolicySet([statement("S1", "V", 3600, 0.40, 60, 0.40)])
        ledger = UsageLedger({"S1": 10})
        site = FakeSite("S1", 10, {"V": 4, "W": 6})
        self.assertEqual(assess(PolicyKind.NO_LIMIT, policies, ledger, site, "V", 5, 0).decision.outcome,
                         Outcome.RUN)
        missing = assess(PolicyKind.FIXED, policies, ledger, site, "W", 1, 0)
        self.assertEqual(missing.decision.reason, RejectReason.FALLTHROUGH)
        self.assertEqual((missing.c_i, missing.free), (6, 0))

    def test_job_needs_a_cpu(self):
        with self.assertRaises(ValueError):
            assess(PolicyKind.NO_LIMIT, PolicySet(), UsageLedger({"S1": 1}), FakeSite("S1", 1), "V", 0, 0)
