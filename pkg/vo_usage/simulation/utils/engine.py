"""
Fixed-step simulation of planners and sites under a usage policy.

Each tick runs, in order: completions, the site start phase (staging
arrivals, then FIFO starts while CPUs suffice), the ledger sample, the
planner phase (arrivals, then admission and assignment per VO in id
order) and finally the work advance of running jobs.
"""
import logging
from typing import Optional

from assignment.utils import assess_sites, select_site
from metrics.utils import build_report
from policy.utils import check_oversubscription

from ..exceptions import SimulationInvariantError
from .result import SimResult
from .world import AuditEntry, JobRecord, JobState, PlannerMode, SimConfig, World

logger = logging.getLogger(__name__)


def _complete_finished(world: World, tick: int):
    for site in world.sites:
        done = [record for record in site.running.values() if record.remaining_s <= 0]
        for record in done:
            site.finish(record)
            record.state = JobState.COMPLETED
            record.t_completed = tick
            record.response_s = tick * world.step_s - record.spec.submit_time_s


def _start_waiting(world: World, tick: int):
    for site in world.sites:
        if site.staging:
            still_staging = []
            for record in site.staging:
                if record.stage_ready_tick <= tick:
                    record.state = JobState.SITE_QUEUED
                    site.wait_queue.append(record)
                else:
                    still_staging.append(record)
            site.staging = still_staging

        queue = site.wait_queue
        while queue and queue[0].spec.cpus_required <= site.free_cpus():
            record = queue.popleft()
            site.start(record)
            record.state = JobState.RUNNING
            record.t_started = tick
        if site.running_total > site.cpu_count:
            raise SimulationInvariantError(f"tick {tick}: {site!r} runs past capacity")


def _sample_usage(world: World, tick: int):
    for site in world.sites:
        for vo in world.vo_ids:
            world.ledger.record_tick(site.site_id, vo, site.vo_running[vo], tick)


def _assign(world: World, record: JobRecord, site, tick: int):
    site.accept(record)
    record.t_assigned = tick
    record.assigned_site = site.site_id
    delay_ticks = -(-site.spec.staging_delay_s // world.step_s)
    if delay_ticks > 0:
        record.state = JobState.STAGING
        record.stage_ready_tick = tick + delay_ticks
        site.staging.append(record)
    else:
        record.state = JobState.SITE_QUEUED
        site.wait_queue.append(record)


def _plan(world: World, tick: int):
    config = world.config
    while world.next_arrival < len(world.arrivals):
        record = world.arrivals[world.next_arrival]
        if world.arrival_tick(record) > tick:
            break
        record.t_submitted = tick
        world.planner_queues[record.vo_id].append(record)
        world.next_arrival += 1

    # usage up to and including this tick's sample
    now_tick = tick + 1
    head_only = config.planner_mode == PlannerMode.HEAD_ONLY

    for vo in world.vo_ids:
        queue = world.planner_queues[vo]
        if not queue:
            continue
        held = []
        # a request that found no site rules out every larger one for this pass
        refused_cpus: Optional[int] = None
        while queue:
            record = queue.popleft()
            cpus = record.spec.cpus_required
            if refused_cpus is not None and cpus >= refused_cpus:
                record.rejection_count += 1
                held.append(record)
                continue

            assessed = assess_sites(record.spec, world.sites, config.policy_kind, config.policies,
                                    world.ledger, now_tick)
            candidates = [c for c in assessed if c.decision.admitted]
            chosen = select_site(config.strategy, world.assignment, candidates, vo,
                                 include_queued=config.least_used_includes_queued)
            if config.record_audit:
                for candidate in assessed:
                    a = candidate.assessment
                    world.audit.append(AuditEntry(
                        tick=tick, job_id=record.job_id, vo=vo, site=candidate.site.site_id,
                        decision=a.decision, c_i=a.c_i, free=a.free, ea=a.ea, ba=a.ba,
                        selected=chosen is candidate,
                    ))
            if chosen is not None:
                _assign(world, record, chosen.site, tick)
                continue

            record.rejection_count += 1
            held.append(record)
            refused_cpus = cpus if refused_cpus is None else min(refused_cpus, cpus)
            if head_only:
                held.extend(queue)
                queue.clear()
        queue.extend(held)


def _advance(world: World, tick: int):
    step = world.step_s
    interval = world.config.measurement_interval_s
    interval_start = (tick * step // interval) * interval
    usage = world.usage
    for site in world.sites:
        for record in site.running.values():
            worked = min(step, record.remaining_s)
            record.remaining_s -= step
            key = (interval_start, site.site_id, record.vo_id)
            usage[key] = usage.get(key, 0) + worked * record.spec.cpus_required


def check_invariants(world: World):
    """Capacity safety and job conservation; raises SimulationInvariantError."""
    for site in world.sites:
        if site.running_total > site.cpu_count:
            raise SimulationInvariantError(f"{site!r} runs past capacity")
        if sum(r.spec.cpus_required for r in site.running.values()) != site.running_total:
            raise SimulationInvariantError(f"{site!r} running tally drifted")
    counts = world.state_counts()
    placed = {
        JobState.PLANNER_QUEUED: sum(len(q) for q in world.planner_queues.values()),
        JobState.STAGING: sum(len(site.staging) for site in world.sites),
        JobState.SITE_QUEUED: sum(len(site.wait_queue) for site in world.sites),
        JobState.RUNNING: sum(len(site.running) for site in world.sites),
    }
    for state, found in placed.items():
        if counts.get(state, 0) != found:
            raise SimulationInvariantError(
                f"tick {world.tick}: {counts.get(state, 0)} jobs marked {state.label}, {found} held as such"
            )
    if sum(counts.values()) != world.next_arrival:
        raise SimulationInvariantError(f"tick {world.tick}: submitted jobs not conserved")


def step(world: World, tick: int) -> World:
    if tick != world.tick + 1:
        raise SimulationInvariantError(f"tick {tick} does not follow tick {world.tick}")
    _complete_finished(world, tick)
    _start_waiting(world, tick)
    _sample_usage(world, tick)
    _plan(world, tick)
    _advance(world, tick)
    world.tick = tick
    if world.config.check_invariants:
        check_invariants(world)
    return world


def run(config: SimConfig) -> SimResult:
    config.validate()
    warnings = []
    for warning in check_oversubscription(config.policies, config.sites):
        if warning.informational:
            logger.info("Policy check: %s", warning)
        else:
            logger.warning("Policy check: %s", warning)
            warnings.append(str(warning))

    jobs = config.resolve_jobs()
    world = World(config, jobs)

    logger.info(
        "Running %s/%s sync=%s seed=%d: %d jobs, %d sites, %d ticks",
        config.strategy.value, config.policy_kind.value, "on" if config.sync else "off",
        config.seed, len(jobs), len(world.sites), config.horizon_ticks,
    )
    for tick in range(config.horizon_ticks):
        step(world, tick)
    # work finished during the last tick completes exactly at the horizon
    _complete_finished(world, config.horizon_ticks)

    result = SimResult(
        config=config,
        records=tuple(world.records[job.job_id] for job in jobs),
        usage=world.usage,
        audit=world.audit,
        warnings=warnings,
        ticks_executed=world.tick + 1,
        vo_ids=tuple(world.vo_ids),
        site_ids=tuple(site.site_id for site in world.sites),
    )
    result.report = build_report(
        records=result.records,
        usage=result.usage,
        total_cpus=config.total_cpus,
        horizon_s=config.horizon_s,
        measurement_interval_s=config.measurement_interval_s,
        vo_ids=result.vo_ids,
    )
    logger.info(
        "Finished %s/%s seed=%d: ARU=%.3f, ART=%s, %d incomplete",
        config.strategy.value, config.policy_kind.value, config.seed, result.report.aru,
        "n/a" if result.report.art_overall is None else f"{result.report.art_overall:.2f}",
        result.report.incomplete_count,
    )
    return result
