from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from django.test import SimpleTestCase

from policy.utils import (
    AdmissionDecision,
    Assessment,
    LimitTuple,
    Outcome,
    PolicyKind,
    PolicySet,
    ResourceKind,
    UsageLedger,
    UsagePolicyStatement,
)
from workload.utils import JobSpec

from .utils import AssignmentState, Candidate, StrategyKind, admissible_sites, assess_sites, select_site


@dataclass
class FakeSite:
    site_id: str
    cpu_count: int
    running: int = 0
    waiting: int = 0
    sited: dict = field(default_factory=dict)
    total_allocation: float = 1.0

    def vo_cpus(self, vo):
        return self.sited.get(vo, 0)

    def allocated_cpus(self):
        return sum(self.sited.values())

    def running_cpus(self):
        return self.running

    def waiting_cpus(self):
        return self.waiting


def candidates_for(sites):
    return [
        Candidate(index, site, Assessment(AdmissionDecision.run(), 0, site.cpu_count))
        for index, site in enumerate(sites)
    ]


def job(vo="V", cpus=1):
    return JobSpec(f"{vo}-W0-0000", vo, "W0", "W0", submit_time_s=0, duration_s=10, cpus_required=cpus)


def statement(site, vo, epoch_s, share, burst_s, peak):
    return UsagePolicyStatement(ResourceKind.CPU, site, vo, LimitTuple(epoch_s, share), LimitTuple(burst_s, peak))


class SelectSiteTests(SimpleTestCase):
    def setUp(self):
        self.sites = [FakeSite("S1", 7), FakeSite("S2", 15), FakeSite("S3", 27)]

    def test_single_candidate(self):
        only = candidates_for(self.sites)[1:2]
        for strategy in StrategyKind:
            with self.subTest(strategy=strategy):
                state = AssignmentState(site_count=3, seed=1)
                self.assertIs(select_site(strategy, state, only, "V"), only[0])

    def test_no_candidates(self):
        for strategy in StrategyKind:
            with self.subTest(strategy=strategy):
                self.assertIsNone(select_site(strategy, AssignmentState(site_count=3), [], "V"))

    def test_round_robin_wraps(self):
        state = AssignmentState(site_count=3)
        candidates = candidates_for(self.sites)
        picked = [select_site(StrategyKind.ROUND_ROBIN, state, candidates, "V").site.site_id for _ in range(4)]
        self.assertEqual(picked, ["S1", "S2", "S3", "S1"])

    def test_round_robin_skips_missing_sites(self):
        state = AssignmentState(site_count=3)
        candidates = candidates_for(self.sites)
        partial = [candidates[0], candidates[2]]
        picked = [select_site(StrategyKind.ROUND_ROBIN, state, partial, "V").index for _ in range(3)]
        self.assertEqual(picked, [0, 2, 0])

    def test_round_robin_cursor_per_vo(self):
        state = AssignmentState(site_count=3)
        candidates = candidates_for(self.sites)
        select_site(StrategyKind.ROUND_ROBIN, state, candidates, "V")
        self.assertEqual(select_site(StrategyKind.ROUND_ROBIN, state, candidates, "W").index, 0)
        self.assertEqual(select_site(StrategyKind.ROUND_ROBIN, state, candidates, "V").index, 1)

    def test_round_robin_fairness(self):
        sites = [FakeSite(f"S{i}", 4) for i in range(5)]
        state = AssignmentState(site_count=5)
        candidates = candidates_for(sites)
        counts = Counter(select_site(StrategyKind.ROUND_ROBIN, state, candidates, "V").index for _ in range(5 * 7))
        self.assertEqual(counts, Counter({i: 7 for i in range(5)}))

    def test_least_used_breaks_ties_by_index(self):
        self.sites[0].running, self.sites[1].running, self.sites[2].running = 5, 5, 9
        chosen = select_site(StrategyKind.LEAST_USED, AssignmentState(site_count=3), candidates_for(self.sites), "V")
        self.assertEqual(chosen.site.site_id, "S2")

    def test_least_used_can_count_queued_work(self):
        self.sites[0].running, self.sites[1].running, self.sites[2].running = 5, 5, 9
        self.sites[1].waiting = 10
        state = AssignmentState(site_count=3)
        candidates = candidates_for(self.sites)
        self.assertEqual(select_site(StrategyKind.LEAST_USED, state, candidates, "V").index, 1)
        self.assertEqual(select_site(StrategyKind.LEAST_USED, state, candidates, "V", include_queued=True).index, 2)

    def test_random_follows_seeded_generator(self):
        candidates = candidates_for(self.sites)
        state = AssignmentState(site_count=3, seed=5)
        picked = [select_site(StrategyKind.RANDOM, state, candidates, "V").index for _ in range(50)]
        rng = np.random.default_rng(5)
        self.assertEqual(picked, [int(rng.integers(3)) for _ in range(50)])
        self.assertEqual(set(picked), {0, 1, 2})

    def test_state_needs_a_site(self):
        with self.assertRaises(ValueError):
            AssignmentState(site_count=0)


class AssessSitesTests(SimpleTestCase):
    def test_fixed_limit_everywhere(self):
        sites = [FakeSite("S1", 10, sited={"V": 4}), FakeSite("S2", 10, sited={"V": 4})]
        policies = PolicySet([statement(s.site_id, "V", 3600, 0.4, 60, 0.4) for s in sites])
        found = admissible_sites(job(), sites, PolicyKind.FIXED, policies, UsageLedger({"S1": 10, "S2": 10}), 0)
        self.assertEqual(found, [])

    def test_no_limit_admits_everywhere(self):
        sites = [FakeSite("S1", 10, sited={"V": 10}), FakeSite("S2", 3)]
        found = admissible_sites(job(), sites, PolicyKind.NO_LIMIT, PolicySet(), UsageLedger({"S1": 10, "S2": 3}), 0)
        self.assertEqual([c.site.site_id for c in found], ["S1", "S2"])

    def test_mixed_commitment_decisions(self):
        sites = [FakeSite("A", 10), FakeSite("B", 100), FakeSite("C", 10)]
        policies = PolicySet(
            [statement(s.site_id, "V", 100, 0.10, 10, 0.50) for s in sites]
            + [statement("B", "W", 100, 0.90, 10, 0.95)]
        )
        ledger = UsageLedger({"A": 10, "B": 100, "C": 10}, retention_s=100)
        for tick in range(20):
            ledger.record_tick("B", "V", 5, tick)
            ledger.record_tick("B", "W", 95, tick)
            ledger.record_tick("C", "V", 10, tick)

        assessed = assess_sites(job(), sites, PolicyKind.COMMITMENT, policies, ledger, 20)
        self.assertEqual([c.decision.outcome for c in assessed], [Outcome.RUN, Outcome.QUEUE, Outcome.REJECT])
        found = admissible_sites(job(), sites, PolicyKind.COMMITMENT, policies, ledger, 20)
        self.assertEqual([(c.index, c.site.site_id) for c in found], [(0, "A"), (1, "B")])

    def test_sites_too_small_are_skipped(self):
        sites = [FakeSite("S1", 7), FakeSite("S2", 15)]
        assessed = assess_sites(job(cpus=8), sites, PolicyKind.NO_LIMIT, PolicySet(), UsageLedger({"S1": 7, "S2": 15}), 0)
        self.assertEqual([(c.index, c.site.site_id) for c in assessed], [(1, "S2")])


class StrategyKindTests(SimpleTestCase):
    def test_parse(self):
        cases = [
            ("random", StrategyKind.RANDOM),
            ("Round Robin", StrategyKind.ROUND_ROBIN),
            ("round_robin", StrategyKind.ROUND_ROBIN),
            ("LEAST-USED", StrategyKind.LEAST_USED),
        ]
        for text, kind in cases:
            with self.subTest(text=text):
                self.assertIs(StrategyKind.parse(text), kind)
        with self.assertRaises(ValueError):
            StrategyKind.parse("fastest")
