"""
Synthetic per-VO burst workloads.

Every workload splits its jobs evenly over a fixed number of bursts. Job
durations are Poisson, gaps between consecutive submissions within a
burst are Gaussian truncated at zero (or the other way round with
`swap_distributions`).
"""
import logging
import zlib
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_BURST_COUNT = 4
DEFAULT_HORIZON_S = 3600
DEFAULT_MEAN_INTERARRIVAL_S = 5.0
DEFAULT_VO_COUNT = 6


@dataclass(frozen=True)
class WorkloadRow:
    """One line of the grid-wide workload summary."""

    vo_index: int
    workload_index: int
    job_count: int
    mean_duration_s: int


REFERENCE_ROWS = (
    WorkloadRow(0, 0, 80, 200),
    WorkloadRow(0, 1, 100, 300),
    WorkloadRow(1, 0, 120, 150),
    WorkloadRow(1, 1, 140, 250),
)


@dataclass(frozen=True)
class JobSpec:
    job_id: str
    vo_id: str
    group_id: str
    workload_id: str
    submit_time_s: int
    duration_s: int
    cpus_required: int = 1

    def __post_init__(self):
        if self.submit_time_s < 0:
            raise ValueError(f"{self.job_id}: negative submit time")
        if self.duration_s < 1:
            raise ValueError(f"{self.job_id}: duration must be at least 1 s")
        if self.cpus_required < 1:
            raise ValueError(f"{self.job_id}: needs at least one CPU")


@dataclass(frozen=True)
class WorkloadSpec:
    vo_id: str
    workload_id: str
    job_count: int
    mean_duration_s: float
    mean_interarrival_s: float
    interarrival_stddev_s: float
    burst_offsets_s: Tuple[int, ...]
    group_id: Optional[str] = None
    cpus_required: int = 1
    swap_distributions: bool = False

    def __post_init__(self):
        if self.job_count <= 0:
            raise ValueError("job_count must be positive")
        if not self.burst_offsets_s:
            raise ValueError("at least one burst offset is required")
        if any(b < a for a, b in zip(self.burst_offsets_s, self.burst_offsets_s[1:])):
            raise ValueError("burst offsets must be non-decreasing")

    @property
    def group(self) -> str:
        return self.group_id or self.workload_id


@dataclass(frozen=True)
class SyncMode:
    """Synchronized bursts start at the same instants for every VO; unsynchronized ones get a per-VO shift."""

    synchronized: bool = True
    offset_seed: int = 0
    max_shift_s: int = 450

    @classmethod
    def on(cls):
        return cls(synchronized=True)

    @classmethod
    def off(cls, offset_seed: int = 0, max_shift_s: int = 450):
        return cls(synchronized=False, offset_seed=offset_seed, max_shift_s=max_shift_s)

    @property
    def label(self) -> str:
        return "on" if self.synchronized else "off"

    def _shift_rng(self, vo_id: str) -> np.random.Generator:
        return np.random.default_rng([self.offset_seed, zlib.crc32(vo_id.encode("utf-8"))])

    def shift_for(self, vo_id: str) -> int:
        """First draw for one VO, before collisions with other VOs are resolved."""
        if self.synchronized or self.max_shift_s <= 0:
            return 0
        return int(self._shift_rng(vo_id).integers(0, self.max_shift_s + 1))

    def shifts_for(self, vo_ids: Iterable[str]) -> Dict[str, int]:
        """
        Shifts for a set of VOs, pairwise distinct whenever the shift range
        has room for them. VOs are visited in sorted order; one whose draw is
        taken keeps drawing from its own stream.
        """
        vos = sorted(set(vo_ids))
        if self.synchronized or self.max_shift_s <= 0:
            return {vo: 0 for vo in vos}
        shifts: Dict[str, int] = {}
        taken = set()
        for vo in vos:
            rng = self._shift_rng(vo)
            shift = int(rng.integers(0, self.max_shift_s + 1))
            while shift in taken and len(taken) <= self.max_shift_s:
                shift = int(rng.integers(0, self.max_shift_s + 1))
            shifts[vo] = shift
            taken.add(shift)
        return shifts


def even_burst_offsets(horizon_s: int = DEFAULT_HORIZON_S, burst_count: int = DEFAULT_BURST_COUNT) -> Tuple[int, ...]:
    return tuple(horizon_s * k // burst_count for k in range(burst_count))


def _positive_poisson(rng: np.random.Generator, mean: float) -> int:
    while True:
        value = int(rng.poisson(mean))
        if value > 0:
            return value


def _draw_duration(rng, spec: WorkloadSpec) -> int:
    if spec.swap_distributions:
        while True:
            value = int(round(rng.normal(spec.mean_duration_s, spec.mean_duration_s / 4)))
            if value >= 1:
                return value
    return _positive_poisson(rng, spec.mean_duration_s)


def _draw_gap(rng, spec: WorkloadSpec) -> float:
    if spec.swap_distributions:
        return float(rng.poisson(spec.mean_interarrival_s))
    return max(0.0, float(rng.normal(spec.mean_interarrival_s, spec.interarrival_stddev_s)))


def generate_workload(spec: WorkloadSpec, sync: SyncMode, seed: int, shift: Optional[int] = None) -> List[JobSpec]:
    """
    Jobs for one workload, sorted by submit time; fully determined by
    (spec, sync, seed). `shift` overrides the VO's own draw.
    """
    rng = np.random.default_rng(seed)
    bursts = len(spec.burst_offsets_s)
    base, extra = divmod(spec.job_count, bursts)
    if shift is None:
        shift = sync.shift_for(spec.vo_id)

    jobs = []
    serial = 0
    for burst, offset in enumerate(spec.burst_offsets_s):
        clock = float(offset + shift)
        for _ in range(base + (1 if burst < extra else 0)):
            jobs.append(JobSpec(
                job_id=f"{spec.vo_id}-{spec.workload_id}-{serial:04d}",
                vo_id=spec.vo_id,
                group_id=spec.group,
                workload_id=spec.workload_id,
                submit_time_s=int(round(clock)),
                duration_s=_draw_duration(rng, spec),
                cpus_required=spec.cpus_required,
            ))
            clock += _draw_gap(rng, spec)
            serial += 1
    jobs.sort(key=lambda job: (job.submit_time_s, job.job_id))
    return jobs


def grid3_workload_specs(
    scale: float = 1.0,
    vo_count: int = DEFAULT_VO_COUNT,
    horizon_s: int = DEFAULT_HORIZON_S,
    burst_count: int = DEFAULT_BURST_COUNT,
    burst_offsets_s: Optional[Sequence[int]] = None,
    mean_interarrival_s: float = DEFAULT_MEAN_INTERARRIVAL_S,
    interarrival_stddev_s: Optional[float] = None,
    rows: Sequence[WorkloadRow] = REFERENCE_ROWS,
    swap_distributions: bool = False,
) -> List[WorkloadSpec]:
    """
    Two workloads per VO. VOs beyond those listed in `rows` reuse the rows
    cyclically (VO2 follows VO0, VO3 follows VO1, ...).
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    offsets = tuple(burst_offsets_s) if burst_offsets_s else even_burst_offsets(horizon_s, burst_count)
    stddev = interarrival_stddev_s if interarrival_stddev_s is not None else mean_interarrival_s / 4
    templates: Dict[int, List[WorkloadRow]] = {}
    for row in rows:
        templates.setdefault(row.vo_index, []).append(row)
    template_vos = sorted(templates)

    specs = []
    for vo in range(vo_count):
        template = templates[template_vos[vo % len(template_vos)]]
        for row in sorted(template, key=lambda r: r.workload_index):
            specs.append(WorkloadSpec(
                vo_id=f"VO{vo}",
                workload_id=f"W{row.workload_index}",
                job_count=max(1, int(round(scale * row.job_count))),
                mean_duration_s=row.mean_duration_s,
                mean_interarrival_s=mean_interarrival_s,
                interarrival_stddev_s=stddev,
                burst_offsets_s=offsets,
                swap_distributions=swap_distributions,
            ))
    return specs


def _child_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def instantiate(specs: Iterable[WorkloadSpec], sync: SyncMode, seed: int) -> List[JobSpec]:
    specs = list(specs)
    shifts = sync.shifts_for(spec.vo_id for spec in specs)
    jobs = []
    for index, spec in enumerate(specs):
        jobs.extend(generate_workload(spec, sync, _child_seed(seed, index), shifts[spec.vo_id]))
    jobs.sort(key=lambda job: (job.submit_time_s, job.job_id))
    return jobs


def build_grid3_workloads(scale: float, seed: int, sync: SyncMode = SyncMode.on(), **options) -> List[JobSpec]:
    """The six-VO reference workload set, instantiated into jobs."""
    specs = grid3_workload_specs(scale=scale, **options)
    jobs = instantiate(specs, sync, seed)
    logger.info("Generated %d jobs over %d workloads (scale=%s, seed=%s, sync=%s)",
                len(jobs), len(specs), scale, seed, sync.label)
    return jobs


def workload_counts(jobs: Iterable[JobSpec]) -> Dict[str, int]:
    counts = Counter(job.vo_id for job in jobs)
    return dict(sorted(counts.items()))
