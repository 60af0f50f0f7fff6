import math
import os
import random
import tempfile
import unittest
from collections import Counter
from fractions import Fraction
from pathlib import Path
from statistics import fmean

import numpy as np
from django.conf import settings
from django.test import SimpleTestCase, tag

from assignment.utils import StrategyKind
from policy.utils import LimitTuple, PolicyKind, PolicySet, ResourceKind, UsagePolicyStatement, parse_policy_file
from workload.utils import JobSpec

from .exceptions import ConfigError, SimulationInvariantError
from .utils import GenerationSpec, JobState, SimConfig, SiteSpec, World, run, step, write_result

EPSILON = 1e-9
REFERENCE_CPUS = (7, 7, 7, 15, 15, 15, 15, 27, 27, 39)


def statement(site, vo, epoch_s, share, burst_s, peak):
    return UsagePolicyStatement(ResourceKind.CPU, site, vo, LimitTuple(epoch_s, share), LimitTuple(burst_s, peak))


def job(job_id, vo="V", submit=0, duration=10, cpus=1):
    return JobSpec(job_id, vo, "W0", "W0", submit_time_s=submit, duration_s=duration, cpus_required=cpus)


def reference_config(**changes):
    text = (settings.BASE_DIR / "config" / "grid3_reference.policy").read_text(encoding="utf-8")
    options = dict(
        sites=tuple(SiteSpec(f"Site{i + 1}", cpus) for i, cpus in enumerate(REFERENCE_CPUS)),
        policies=PolicySet(parse_policy_file(text)),
        generation=GenerationSpec(),
    )
    options.update(changes)
    return SimConfig(**options)


def run_world(config, jobs, observe=None):
    """Drive the engine tick by tick, calling `observe(world)` after each tick."""
    world = World(config, tuple(sorted(jobs, key=lambda j: (j.submit_time_s, j.job_id))))
    for tick in range(config.horizon_ticks):
        step(world, tick)
        if observe:
            observe(world)
    return world


class ReferenceSimulator:
    """
    Tick-by-tick evaluator written straight from the admission rules: usage
    windows are summed sample by sample, every queued job is evaluated at
    every site on every pass, and completion ticks come from the duration.
    """

    def __init__(self, config, jobs):
        self.config = config
        self.step = config.tick_step_s
        self.sites = list(config.sites)
        self.statements = list(config.policies)
        self.jobs = sorted(jobs, key=lambda j: (j.submit_time_s, j.job_id))
        self.vos = sorted({j.vo_id for j in jobs} | {s.vo_id for s in self.statements})
        self.rng = np.random.default_rng(config.seed)
        self.cursors = {}
        self.phase = {j.job_id: "new" for j in self.jobs}
        self.site_of = {}
        self.ready_at = {}
        self.finish_at = {}
        self.staged = {index: [] for index in range(len(self.sites))}
        self.fifo = {index: [] for index in range(len(self.sites))}
        self.planner = {vo: [] for vo in self.vos}
        self.samples = {}
        self.assigned = {}
        self.started = {}
        self.completed = {}
        self.rejections = Counter()
        self.placements = []

    def _cpus(self, job_id):
        return next(j.cpus_required for j in self.jobs if j.job_id == job_id)

    def _vo(self, job_id):
        return next(j.vo_id for j in self.jobs if j.job_id == job_id)

    def _on_site(self, index, phases, vo=None):
        return sum(
            self._cpus(job_id) for job_id, site in self.site_of.items()
            if site == index and self.phase[job_id] in phases and (vo is None or self._vo(job_id) == vo)
        )

    def _average(self, index, vo, window_s, now):
        site = self.sites[index]
        ticks = max(1, window_s // self.step)
        used = sum(self.samples.get((index, vo, k), 0) for k in range(now - ticks, now))
        return min(1.0, used * self.step / (window_s * site.cpu_count))

    def _admitted(self, index, vo, cpus, now):
        site = self.sites[index]
        kind = self.config.policy_kind
        if kind == PolicyKind.NO_LIMIT:
            return True
        stmt = next((s for s in self.statements if (s.site_id, s.vo_id) == (site.site_id, vo)), None)
        if stmt is None:
            return False
        sited = self._on_site(index, ("staging", "queued", "running"), vo)
        free = site.cpu_count - self._on_site(index, ("staging", "queued", "running"))
        within_share = sited + cpus <= stmt.epoch.fraction * site.cpu_count + EPSILON
        if kind == PolicyKind.FIXED:
            return within_share
        if kind == PolicyKind.EXTENSIBLE:
            return within_share or cpus <= free

        if self._average(index, vo, stmt.epoch.interval_s, now) > stmt.epoch.fraction:
            return False
        ba = self._average(index, vo, stmt.burst.interval_s, now)
        sigma = 0.0
        for peer in self.statements:
            if peer.site_id == site.site_id:
                sigma += self._average(index, peer.vo_id, peer.burst.interval_s, now)
        j = cpus / site.cpu_count
        under_burst = ba + j < stmt.burst.fraction
        if under_burst and (sigma <= EPSILON or sigma + j < site.total_allocation):
            return True
        return abs(sigma - site.total_allocation) <= EPSILON and ba + j < stmt.epoch.fraction

    def _choose(self, vo, admitted):
        strategy = self.config.strategy
        if strategy == StrategyKind.RANDOM:
            return admitted[int(self.rng.integers(len(admitted)))]
        if strategy == StrategyKind.ROUND_ROBIN:
            n = len(self.sites)
            cursor = self.cursors.get(vo, 0)
            chosen = min(admitted, key=lambda index: (index - cursor) % n)
            self.cursors[vo] = (chosen + 1) % n
            return chosen
        return min(admitted, key=lambda index: (
            Fraction(self._on_site(index, ("running",)), self.sites[index].cpu_count), index))

    def _complete(self, tick):
        for job_id, finish in self.finish_at.items():
            if self.phase[job_id] == "running" and finish <= tick:
                self.phase[job_id] = "done"
                self.completed[job_id] = tick

    def run(self):
        horizon = self.config.horizon_ticks
        for tick in range(horizon):
            self._complete(tick)

            for index, site in enumerate(self.sites):
                for job_id in list(self.staged[index]):
                    if self.ready_at[job_id] <= tick:
                        self.staged[index].remove(job_id)
                        self.phase[job_id] = "queued"
                        self.fifo[index].append(job_id)
                while self.fifo[index]:
                    head = self.fifo[index][0]
                    if self._cpus(head) > site.cpu_count - self._on_site(index, ("running",)):
                        break
                    self.fifo[index].pop(0)
                    self.phase[head] = "running"
                    self.started[head] = tick
                    self.finish_at[head] = tick + math.ceil(self._duration(head) / self.step)

            for index in range(len(self.sites)):
                for vo in self.vos:
                    self.samples[(index, vo, tick)] = self._on_site(index, ("running",), vo)

            for j in self.jobs:
                if self.phase[j.job_id] == "new" and math.ceil(j.submit_time_s / self.step) <= tick:
                    self.phase[j.job_id] = "planner"
                    self.planner[j.vo_id].append(j.job_id)
            for vo in self.vos:
                waiting = []
                for job_id in self.planner[vo]:
                    cpus = self._cpus(job_id)
                    admitted = [
                        index for index, site in enumerate(self.sites)
                        if cpus <= site.cpu_count and self._admitted(index, vo, cpus, tick + 1)
                    ]
                    if not admitted:
                        self.rejections[job_id] += 1
                        waiting.append(job_id)
                        continue
                    index = self._choose(vo, admitted)
                    self.site_of[job_id] = index
                    self.assigned[job_id] = tick
                    self.placements.append((tick, job_id, self.sites[index].site_id))
                    delay = math.ceil(self.sites[index].staging_delay_s / self.step)
                    if delay:
                        self.phase[job_id] = "staging"
                        self.ready_at[job_id] = tick + delay
                        self.staged[index].append(job_id)
                    else:
                        self.phase[job_id] = "queued"
                        self.fifo[index].append(job_id)
                self.planner[vo] = waiting
        self._complete(horizon)
        return self

    def _duration(self, job_id):
        return next(j.duration_s for j in self.jobs if j.job_id == job_id)

    def timeline(self, job_id):
        index = self.site_of.get(job_id)
        return (
            None if index is None else self.sites[index].site_id,
            self.assigned.get(job_id),
            self.started.get(job_id),
            self.completed.get(job_id),
            self.rejections[job_id],
        )


def small_instance(rng):
    step_s = rng.choice((1, 1, 2, 3))
    sites = tuple(
        SiteSpec(f"S{i}", rng.randint(1, 4), rng.choice((0, 0, 2, 5)), rng.choice((1.0, 1.0, 0.5)))
        for i in range(rng.randint(1, 2))
    )
    vos = ["V0", "V1"][:rng.randint(1, 2)]
    statements = []
    for site in sites:
        for vo in vos:
            if rng.random() < 0.8:
                epoch = rng.choice((10, 30, 60))
                burst = rng.choice([b for b in (2, 5, 10) if b <= epoch])
                statements.append(statement(site.site_id, vo, epoch, rng.choice((0.0, 0.25, 0.5, 0.75, 1.0)),
                                            burst, rng.choice((0.25, 0.5, 0.75, 1.0))))
    jobs = tuple(
        job(f"J{k}", rng.choice(vos), rng.randint(0, 20), rng.randint(1, 40), rng.randint(1, 3))
        for k in range(rng.randint(1, 3))
    )
    return SimConfig(
        sites=sites,
        policy_kind=rng.choice(list(PolicyKind)),
        policies=PolicySet(statements),
        strategy=rng.choice(list(StrategyKind)),
        jobs=jobs,
        seed=rng.randint(0, 1000),
        tick_step_s=step_s,
        horizon_s=60,
        measurement_interval_s=30,
        check_invariants=True,
    )


class OracleEquivalenceTests(SimpleTestCase):
    def test_small_instances_match_reference(self):
        """Placements, start and completion ticks and rejection counts agree with the brute-force evaluator"""
        rng = random.Random(2024)
        for instance in range(600):
            config = small_instance(rng)
            result = run(config)
            reference = ReferenceSimulator(config, config.jobs).run()
            placements = [(e.tick, e.job_id, e.site) for e in result.audit if e.selected]
            with self.subTest(instance=instance):
                self.assertEqual(placements, reference.placements)
                for record in result.records:
                    self.assertEqual(
                        (record.assigned_site, record.t_assigned, record.t_started, record.t_completed,
                         record.rejection_count),
                        reference.timeline(record.job_id),
                    )


def random_policy_config(rng, kind):
    sites = tuple(SiteSpec(f"S{i}", rng.randint(1, 16), rng.choice((0, 0, 3))) for i in range(rng.randint(1, 5)))
    vos = [f"V{k}" for k in range(rng.randint(1, 4))]
    statements = [
        statement(site.site_id, vo, rng.choice((60, 120, 300)), rng.choice((0.1, 0.2, 0.25, 0.4, 0.5)),
                  rng.choice((10, 30, 60)), rng.choice((0.3, 0.4, 0.6, 0.8)))
        for site in sites for vo in vos
    ]
    jobs = tuple(
        job(f"J{k:03d}", rng.choice(vos), rng.randint(0, 300), rng.randint(5, 120), rng.randint(1, 4))
        for k in range(rng.randint(5, 60))
    )
    return SimConfig(
        sites=sites, policy_kind=kind, policies=PolicySet(statements), strategy=rng.choice(list(StrategyKind)),
        jobs=jobs, seed=rng.randint(0, 10_000), horizon_s=600, measurement_interval_s=30, check_invariants=True,
    )


class PolicySafetyTests(SimpleTestCase):
    def test_fixed_limit_never_exceeded(self):
        rng = random.Random(1)
        for instance in range(100):
            config = random_policy_config(rng, PolicyKind.FIXED)
            violations = []

            def observe(world):
                for site in world.sites:
                    for vo, used in site.vo_running.items():
                        stmt = config.policies.get(site.site_id, vo)
                        cap = 0 if stmt is None else math.floor(stmt.share * site.cpu_count + EPSILON)
                        if used > cap:
                            violations.append((world.tick, site.site_id, vo, used, cap))

            run_world(config, config.jobs, observe)
            with self.subTest(instance=instance):
                self.assertEqual(violations, [])

    def test_extensible_overflow_only_into_free_cpus(self):
        rng = random.Random(2)
        overflows = 0
        for instance in range(100):
            config = random_policy_config(rng, PolicyKind.EXTENSIBLE)
            result = run(config)
            cpus = {record.job_id: record.spec.cpus_required for record in result.records}
            sizes = {site.site_id: site.cpu_count for site in config.sites}
            for entry in result.audit:
                if not entry.selected:
                    continue
                stmt = config.policies.get(entry.site, entry.vo)
                if entry.c_i + cpus[entry.job_id] > stmt.share * sizes[entry.site] + EPSILON:
                    overflows += 1
                    with self.subTest(instance=instance, job=entry.job_id):
                        self.assertGreaterEqual(entry.free, cpus[entry.job_id])
        self.assertGreater(overflows, 0)

    def test_commitment_never_admits_over_epoch(self):
        rng = random.Random(3)
        for instance in range(100):
            config = random_policy_config(rng, PolicyKind.COMMITMENT)
            result = run(config)
            for entry in result.audit:
                if entry.decision.admitted:
                    stmt = config.policies.get(entry.site, entry.vo)
                    with self.subTest(instance=instance, job=entry.job_id):
                        self.assertLessEqual(entry.ea, stmt.epoch.fraction)


class TimelineTests(SimpleTestCase):
    def single_site(self, jobs, cpus=1, **changes):
        options = dict(sites=(SiteSpec("S1", cpus),), jobs=tuple(jobs), horizon_s=60, measurement_interval_s=30)
        options.update(changes)
        return SimConfig(**options)

    def test_zero_jobs(self):
        result = run(self.single_site([], horizon_s=120))
        self.assertEqual(result.ticks_executed, 120)
        self.assertEqual(result.report.aru, 0.0)
        self.assertIsNone(result.report.art_overall)
        self.assertEqual(result.records, ())

    def test_unloaded_job(self):
        result = run(self.single_site([job("A", duration=100)], horizon_s=300, measurement_interval_s=30))
        record = result.records[0]
        self.assertEqual(record.state, JobState.COMPLETED)
        self.assertEqual((record.t_submitted, record.t_assigned, record.t_started, record.t_completed),
                         (0, 0, 1, 101))
        self.assertLessEqual(abs(record.response_s - 100), 1)
        self.assertEqual(result.report.art_overall, 101.0)
        self.assertAlmostEqual(result.report.aru, 100 / 300)

    def test_site_queue_runs_without_readmission(self):
        result = run(self.single_site([job("A"), job("B")]))
        a, b = result.records
        self.assertEqual((a.t_assigned, a.t_started, a.t_completed), (0, 1, 11))
        self.assertEqual((b.t_assigned, b.t_started, b.t_completed), (0, 11, 21))
        self.assertEqual(b.rejection_count, 0)
        self.assertEqual(len([e for e in result.audit if e.job_id == "B"]), 1)

    def test_rejected_job_stays_with_the_planner(self):
        config = self.single_site(
            [job("A"), job("B")], cpus=4, policy_kind=PolicyKind.FIXED,
            policies=PolicySet([statement("S1", "V", 3600, 0.25, 60, 0.25)]),
        )
        states = []
        run_world(config, config.jobs, lambda world: states.append(world.records["B"].state))
        self.assertEqual(states[:11], [JobState.PLANNER_QUEUED] * 11)

        result = run(config)
        b = result.records[1]
        self.assertEqual(b.rejection_count, 11)
        self.assertEqual((b.t_assigned, b.t_started, b.t_completed), (11, 12, 22))
        self.assertAlmostEqual(result.report.aru, 20 / 240)

    def test_fixed_limit_holds_within_one_pass(self):
        config = self.single_site(
            [job(f"J{k}") for k in range(5)], cpus=4, policy_kind=PolicyKind.FIXED,
            policies=PolicySet([statement("S1", "V", 3600, 0.5, 60, 0.5)]),
        )
        world = World(config, config.jobs)
        step(world, 0)
        placed = [r for r in world.records.values() if r.assigned_site]
        held = [r for r in world.records.values() if not r.assigned_site]
        self.assertEqual(len(placed), 2)
        self.assertEqual([r.rejection_count for r in held], [1, 1, 1])
        # later jobs of the same size are held without another look at the site
        self.assertEqual(len(world.audit), 3)

    def test_staging_delay(self):
        result = run(self.single_site([job("A", duration=10)],
                                      sites=(SiteSpec("S1", 1, staging_delay_s=5),)))
        a = result.records[0]
        self.assertEqual((a.t_assigned, a.t_started, a.t_completed), (0, 5, 15))

    def test_submission_waits_for_its_tick(self):
        result = run(self.single_site([job("A", submit=7, duration=3)], tick_step_s=5))
        a = result.records[0]
        # first tick starting at or after 7 s is tick 2 (10 s)
        self.assertEqual((a.t_submitted, a.t_started, a.t_completed), (2, 3, 4))
        self.assertEqual(a.response_s, 4 * 5 - 7)

    def test_unfinished_jobs_are_counted(self):
        result = run(self.single_site([job("A", duration=100)]))
        self.assertEqual(result.records[0].state, JobState.RUNNING)
        self.assertEqual(result.report.incomplete_count, 1)
        self.assertIsNone(result.report.art_overall)
        self.assertEqual(result.report.aru, 59 / 60)

    def test_oversized_job_is_never_placed(self):
        result = run(self.single_site([job("A", cpus=2)]))
        self.assertIsNone(result.records[0].assigned_site)
        self.assertEqual(result.records[0].rejection_count, 60)

    def test_head_only_planner(self):
        config = self.single_site(
            [job("A", cpus=2), job("B")], cpus=4, policy_kind=PolicyKind.FIXED,
            policies=PolicySet([statement("S1", "V", 3600, 0.25, 60, 0.25)]), planner_mode="head-only",
        )
        world = World(config, config.jobs)
        step(world, 0)
        self.assertEqual([r.assigned_site for r in world.records.values()], [None, None])
        self.assertEqual(len(world.audit), 1)

    def test_step_must_follow_previous_tick(self):
        world = World(self.single_site([]), ())
        step(world, 0)
        with self.assertRaises(SimulationInvariantError):
            step(world, 2)

    def test_oversubscription_is_reported_not_fatal(self):
        config = self.single_site(
            [job("A", vo="V1")], policy_kind=PolicyKind.FIXED,
            policies=PolicySet([statement("S1", "V1", 3600, 0.4, 60, 0.4), statement("S1", "V2", 3600, 0.8, 60, 0.5)]),
        )
        result = run(config)
        self.assertEqual(len(result.warnings), 1)
        self.assertIn("S1", result.warnings[0])


class ConfigTests(SimpleTestCase):
    def test_errors_are_listed_together(self):
        config = SimConfig(
            sites=(SiteSpec("S1", 4), SiteSpec("S1", 0)),
            policies=PolicySet([statement("S9", "V", 3600, 0.1, 60, 0.4)]),
            horizon_s=100,
            measurement_interval_s=30,
        )
        with self.assertRaises(ConfigError) as caught:
            run(config)
        errors = caught.exception.errors
        self.assertEqual(len(errors), 5)
        self.assertTrue(any("duplicate site id S1" in e for e in errors))
        self.assertTrue(any("unknown site S9" in e for e in errors))
        self.assertTrue(any("not a multiple" in e for e in errors))
        self.assertTrue(any("workload" in e for e in errors))

    def test_tick_step_must_divide_interval(self):
        config = SimConfig(sites=(SiteSpec("S1", 1),), jobs=(), tick_step_s=7, horizon_s=60, measurement_interval_s=30)
        self.assertEqual(config.errors(), ["simulation: tick_step_s must divide measurement_interval_s"])

    def test_overrides_skip_none(self):
        config = reference_config().with_overrides(seed=4, horizon_s=None)
        self.assertEqual((config.seed, config.horizon_s), (4, 3600))
        self.assertEqual(config.total_cpus, 174)


class ResultTests(SimpleTestCase):
    def test_conservation_on_reference_grid(self):
        for kind in PolicyKind:
            with self.subTest(kind=kind):
                config = reference_config(
                    policy_kind=kind, horizon_s=900, check_invariants=True,
                    generation=GenerationSpec(scale=0.25),
                )
                result = run(config)
                self.assertEqual(result.report.generated_count, len(config.resolve_jobs()))
                capacity = {site.site_id: site.cpu_count * 30 for site in config.sites}
                for start, site, vo, cpu_seconds in result.usage_rows():
                    self.assertLessEqual(cpu_seconds, capacity[site])
                self.assertTrue(0.0 <= result.report.aru <= 1.0)

    def test_identical_runs_write_identical_files(self):
        config = reference_config(
            horizon_s=600, strategy=StrategyKind.RANDOM, sync=False, seed=1, generation=GenerationSpec(scale=0.2),
        )
        with tempfile.TemporaryDirectory() as first, tempfile.TemporaryDirectory() as second:
            write_result(run(config), first)
            write_result(run(config), second)
            names = sorted(p.name for p in Path(first).iterdir())
            self.assertEqual(names, ["audit.csv", "jobs.csv", "metrics.json", "usage.csv"])
            for name in names:
                with self.subTest(file=name):
                    self.assertEqual((Path(first) / name).read_bytes(), (Path(second) / name).read_bytes())

    def test_usage_matrix_shape(self):
        config = reference_config(horizon_s=120, generation=GenerationSpec(scale=0.05))
        result = run(config)
        rows = list(result.usage_rows())
        self.assertEqual(len(rows), 4 * 10 * 6)
        self.assertEqual(rows[0][:3], (0, "Site1", "VO0"))
        self.assertEqual(sum(row[3] for row in rows), sum(result.usage.values()))


@tag("trend")
@unittest.skipUnless(os.environ.get("VOSIM_TREND_TESTS") == "1", "set VOSIM_TREND_TESTS=1 for trend checks")
class TrendTests(SimpleTestCase):
    """Directional comparisons between policies on the reference grid, synchronized, ten seeds."""

    seeds = range(1, 11)

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.reports = {}
        for seed in cls.seeds:
            for strategy in StrategyKind:
                for kind in PolicyKind:
                    config = reference_config(policy_kind=kind, strategy=strategy, seed=seed, record_audit=False)
                    cls.reports[(seed, strategy, kind)] = run(config).report

    def art(self, seed, strategy, kind):
        return self.reports[(seed, strategy, kind)].art_overall

    def mean(self, metric, strategy, kind):
        return fmean(getattr(self.reports[(s, strategy, kind)], metric) for s in self.seeds)

    def test_no_limit_responds_fastest(self):
        for strategy in StrategyKind:
            with self.subTest(strategy=strategy):
                self.assertLessEqual(self.mean("art_overall", strategy, PolicyKind.NO_LIMIT),
                                     self.mean("art_overall", strategy, PolicyKind.FIXED))
                agree = sum(self.art(s, strategy, PolicyKind.NO_LIMIT) <= self.art(s, strategy, PolicyKind.FIXED)
                            for s in self.seeds)
                self.assertGreaterEqual(agree, 8)

    def test_commitment_uses_the_grid_at_least_as_well_as_fixed(self):
        for strategy in (StrategyKind.RANDOM, StrategyKind.ROUND_ROBIN):
            with self.subTest(strategy=strategy):
                self.assertGreaterEqual(self.mean("aru", strategy, PolicyKind.COMMITMENT) + 0.02,
                                        self.mean("aru", strategy, PolicyKind.FIXED))

    def test_extensible_responds_fastest_among_limits(self):
        for strategy in StrategyKind:
            with self.subTest(strategy=strategy):
                ext = self.mean("art_overall", strategy, PolicyKind.EXTENSIBLE)
                self.assertLessEqual(ext, self.mean("art_overall", strategy, PolicyKind.FIXED))
                self.assertLessEqual(ext, self.mean("art_overall", strategy, PolicyKind.COMMITMENT))
                agree = sum(
                    self.art(s, strategy, PolicyKind.EXTENSIBLE) <= min(
                        self.art(s, strategy, PolicyKind.FIXED), self.art(s, strategy, PolicyKind.COMMITMENT))
                    for s in self.seeds
                )
                self.assertGreaterEqual(agree, 7)
