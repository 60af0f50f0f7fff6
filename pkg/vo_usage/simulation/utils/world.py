from collections import Counter, deque
from dataclasses import dataclass, field, replace
from typing import Deque, Dict, List, Optional, Tuple

from django.db import models

from assignment.utils import AssignmentState, StrategyKind
from policy.utils import AdmissionDecision, PolicyKind, PolicySet, UsageLedger
from workload.utils import REFERENCE_ROWS, JobSpec, SyncMode, build_grid3_workloads

from ..exceptions import ConfigError


class JobState(models.TextChoices):
    PLANNER_QUEUED = "planner-queued", "PlannerQueued"
    STAGING = "staging", "Staging"
    SITE_QUEUED = "site-queued", "SiteQueued"
    RUNNING = "running", "Running"
    COMPLETED = "completed", "Completed"


class PlannerMode(models.TextChoices):
    EVERY_JOB = "every-job", "Every queued job"
    HEAD_ONLY = "head-only", "Queue head only"


@dataclass(frozen=True)
class SiteSpec:
    site_id: str
    cpu_count: int
    staging_delay_s: int = 0
    total_allocation: float = 1.0


@dataclass(frozen=True)
class GenerationSpec:
    """How to build the reference workload set when no workload file is given."""

    scale: float = 1.0
    seed: Optional[int] = None
    vo_count: int = 6
    mean_interarrival_s: float = 5.0
    interarrival_stddev_s: Optional[float] = None
    burst_count: int = 4
    burst_offsets_s: Optional[Tuple[int, ...]] = None
    swap_distributions: bool = False
    unsync_max_shift_s: int = 450
    rows: tuple = REFERENCE_ROWS


@dataclass(frozen=True)
class SimConfig:
    sites: Tuple[SiteSpec, ...]
    policy_kind: PolicyKind = PolicyKind.NO_LIMIT
    policies: PolicySet = field(default_factory=PolicySet)
    strategy: StrategyKind = StrategyKind.RANDOM
    jobs: Optional[Tuple[JobSpec, ...]] = None
    generation: Optional[GenerationSpec] = None
    sync: bool = True
    seed: int = 0
    tick_step_s: int = 1
    horizon_s: int = 3600
    measurement_interval_s: int = 30
    planner_mode: PlannerMode = PlannerMode.EVERY_JOB
    least_used_includes_queued: bool = False
    record_audit: bool = True
    check_invariants: bool = False

    @property
    def horizon_ticks(self) -> int:
        return self.horizon_s // self.tick_step_s

    @property
    def total_cpus(self) -> int:
        return sum(site.cpu_count for site in self.sites)

    @property
    def sync_mode(self) -> SyncMode:
        if self.sync:
            return SyncMode.on()
        shift = self.generation.unsync_max_shift_s if self.generation else 450
        return SyncMode.off(offset_seed=self.seed, max_shift_s=shift)

    def with_overrides(self, **changes) -> "SimConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def errors(self) -> List[str]:
        problems = []
        if not self.sites:
            problems.append("sites: at least one site is required")
        seen = set()
        for site in self.sites:
            if site.site_id in seen:
                problems.append(f"sites: duplicate site id {site.site_id}")
            seen.add(site.site_id)
            if site.cpu_count < 1:
                problems.append(f"sites: {site.site_id} needs at least one CPU")
            if site.staging_delay_s < 0:
                problems.append(f"sites: {site.site_id} has a negative staging delay")
            if site.total_allocation <= 0:
                problems.append(f"sites: {site.site_id} total allocation must be positive")
        for stmt in self.policies:
            if stmt.site_id not in seen:
                problems.append(f"policies: statement for unknown site {stmt.site_id}")
        if self.tick_step_s < 1:
            problems.append("simulation: tick_step_s must be at least 1")
        if self.horizon_s < 1:
            problems.append("simulation: horizon_s must be positive")
        if self.measurement_interval_s < 1:
            problems.append("simulation: measurement_interval_s must be positive")
        elif self.horizon_s % self.measurement_interval_s:
            problems.append(
                f"simulation: horizon_s {self.horizon_s} is not a multiple of "
                f"measurement_interval_s {self.measurement_interval_s}"
            )
        if self.tick_step_s >= 1 and self.measurement_interval_s >= 1 \
                and self.measurement_interval_s % self.tick_step_s:
            problems.append("simulation: tick_step_s must divide measurement_interval_s")
        if self.seed < 0:
            problems.append("simulation: seed must be non-negative")
        if self.jobs is None and self.generation is None:
            problems.append("workloads: give a workload file or a generation block")
        if self.jobs is not None:
            ids = Counter(job.job_id for job in self.jobs)
            duplicates = sorted(job_id for job_id, n in ids.items() if n > 1)
            if duplicates:
                problems.append(f"workloads: duplicate job ids {', '.join(duplicates[:5])}")
        return problems

    def validate(self) -> "SimConfig":
        problems = self.errors()
        if problems:
            raise ConfigError(problems)
        return self

    def resolve_jobs(self) -> Tuple[JobSpec, ...]:
        if self.jobs is not None:
            return tuple(sorted(self.jobs, key=lambda job: (job.submit_time_s, job.job_id)))
        gen = self.generation
        return tuple(build_grid3_workloads(
            scale=gen.scale,
            seed=gen.seed if gen.seed is not None else self.seed,
            sync=self.sync_mode,
            vo_count=gen.vo_count,
            horizon_s=self.horizon_s,
            burst_count=gen.burst_count,
            burst_offsets_s=gen.burst_offsets_s,
            mean_interarrival_s=gen.mean_interarrival_s,
            interarrival_stddev_s=gen.interarrival_stddev_s,
            rows=gen.rows,
            swap_distributions=gen.swap_distributions,
        ))


@dataclass
class JobRecord:
    spec: JobSpec
    state: JobState = JobState.PLANNER_QUEUED
    t_submitted: Optional[int] = None
    t_assigned: Optional[int] = None
    t_started: Optional[int] = None
    t_completed: Optional[int] = None
    assigned_site: Optional[str] = None
    rejection_count: int = 0
    remaining_s: int = 0
    stage_ready_tick: Optional[int] = None
    response_s: Optional[int] = None

    @property
    def job_id(self):
        return self.spec.job_id

    @property
    def vo_id(self):
        return self.spec.vo_id

    @property
    def completed(self) -> bool:
        return self.state == JobState.COMPLETED


@dataclass
class AuditEntry:
    tick: int
    job_id: str
    vo: str
    site: str
    decision: AdmissionDecision
    c_i: int
    free: int
    ea: Optional[float] = None
    ba: Optional[float] = None
    selected: bool = False


class SiteState:
    """
    A site's CPU pool, its running set and its FIFO wait queue.

    `vo_cpus` counts every CPU already sited for the VO (staging, waiting
    and running), which is what admission compares against the limits.
    """

    def __init__(self, spec: SiteSpec, index: int):
        self.spec = spec
        self.index = index
        self.running: Dict[str, JobRecord] = {}
        self.wait_queue: Deque[JobRecord] = deque()
        self.staging: List[JobRecord] = []
        self.vo_running: Counter = Counter()
        self.vo_sited: Counter = Counter()
        self.running_total = 0
        self.sited_total = 0

    @property
    def site_id(self) -> str:
        return self.spec.site_id

    @property
    def cpu_count(self) -> int:
        return self.spec.cpu_count

    @property
    def total_allocation(self) -> float:
        return self.spec.total_allocation

    def vo_cpus(self, vo: str) -> int:
        return self.vo_sited[vo]

    def allocated_cpus(self) -> int:
        return self.sited_total

    def running_cpus(self) -> int:
        return self.running_total

    def waiting_cpus(self) -> int:
        return self.sited_total - self.running_total

    def free_cpus(self) -> int:
        return self.cpu_count - self.running_total

    def accept(self, record: JobRecord):
        cpus = record.spec.cpus_required
        self.vo_sited[record.vo_id] += cpus
        self.sited_total += cpus

    def start(self, record: JobRecord):
        cpus = record.spec.cpus_required
        self.running[record.job_id] = record
        self.vo_running[record.vo_id] += cpus
        self.running_total += cpus

    def finish(self, record: JobRecord):
        cpus = record.spec.cpus_required
        del self.running[record.job_id]
        self.vo_running[record.vo_id] -= cpus
        self.running_total -= cpus
        self.vo_sited[record.vo_id] -= cpus
        self.sited_total -= cpus

    def __repr__(self):
        return f"<SiteState {self.site_id} {self.running_total}/{self.cpu_count} running, {len(self.wait_queue)} waiting>"


class World:
    """Mutable state of one simulation; owned by a single thread."""

    def __init__(self, config: SimConfig, jobs: Tuple[JobSpec, ...]):
        self.config = config
        self.step_s = config.tick_step_s
        self.sites = [SiteState(spec, index) for index, spec in enumerate(config.sites)]
        self.records: Dict[str, JobRecord] = {
            job.job_id: JobRecord(job, remaining_s=job.duration_s) for job in jobs
        }
        self.arrivals: List[JobRecord] = [self.records[job.job_id] for job in jobs]
        self.next_arrival = 0
        self.vo_ids = sorted({job.vo_id for job in jobs} | {stmt.vo_id for stmt in config.policies})
        self.planner_queues: Dict[str, Deque[JobRecord]] = {vo: deque() for vo in self.vo_ids}
        retention = max(config.policies.max_interval_s(), config.horizon_s, config.tick_step_s)
        self.ledger = UsageLedger(
            {site.site_id: site.cpu_count for site in config.sites},
            tick_step_s=config.tick_step_s,
            retention_s=retention,
        )
        self.assignment = AssignmentState(site_count=len(self.sites), seed=config.seed)
        self.audit: List[AuditEntry] = []
        self.usage: Dict[Tuple[int, str, str], int] = {}
        self.tick = -1

    def arrival_tick(self, record: JobRecord) -> int:
        return -(-record.spec.submit_time_s // self.step_s)

    def state_counts(self) -> Counter:
        return Counter(record.state for record in self.records.values() if record.t_submitted is not None)
