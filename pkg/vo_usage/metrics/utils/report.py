"""
Aggregated resource utilization (ARU) and aggregated response time (ART).

    ARU = sum of executed CPU-seconds / (grid CPUs * horizon)
    ART = mean of (completion - submission) over completed jobs
"""
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple, Union


@dataclass(frozen=True)
class MetricsReport:
    aru: float
    art_overall: Optional[float]
    art_per_vo: Dict[str, Optional[float]] = field(default_factory=dict)
    aru_per_vo: Dict[str, float] = field(default_factory=dict)
    completed_counts: Dict[str, float] = field(default_factory=dict)
    incomplete_count: float = 0
    generated_count: float = 0
    usage_series: Tuple[Tuple[int, float], ...] = ()

    @property
    def completed_total(self):
        return sum(self.completed_counts.values())

    def as_dict(self) -> dict:
        data = asdict(self)
        data["usage_series"] = [list(point) for point in self.usage_series]
        data["completed_total"] = self.completed_total
        return data


def compute_aru(usage_matrix: Union[Mapping, Iterable[float]], total_cpus: int, horizon_s: int) -> float:
    if total_cpus < 1 or horizon_s <= 0:
        raise ValueError("ARU needs at least one CPU and a positive horizon")
    values = usage_matrix.values() if isinstance(usage_matrix, Mapping) else usage_matrix
    return math.fsum(values) / (total_cpus * horizon_s)


def compute_art(records: Iterable, vo: Optional[str] = None) -> Optional[float]:
    """Mean response time of completed jobs, or None when there are none in scope."""
    responses = [
        record.response_s for record in records
        if record.completed and (vo is None or record.vo_id == vo)
    ]
    if not responses:
        return None
    return math.fsum(responses) / len(responses)


def build_report(records: Sequence, usage: Mapping[Tuple[int, str, str], float], total_cpus: int,
                 horizon_s: int, measurement_interval_s: int, vo_ids: Sequence[str]) -> MetricsReport:
    per_vo_usage: Dict[str, list] = {vo: [] for vo in vo_ids}
    per_interval: Dict[int, list] = {start: [] for start in range(0, horizon_s, measurement_interval_s)}
    for (start, _site, vo), cpu_seconds in usage.items():
        per_vo_usage.setdefault(vo, []).append(cpu_seconds)
        per_interval.setdefault(start, []).append(cpu_seconds)

    completed_counts = {vo: 0 for vo in vo_ids}
    for record in records:
        if record.completed:
            completed_counts[record.vo_id] = completed_counts.get(record.vo_id, 0) + 1

    return MetricsReport(
        aru=compute_aru(usage, total_cpus, horizon_s),
        art_overall=compute_art(records),
        art_per_vo={vo: compute_art(records, vo) for vo in vo_ids},
        aru_per_vo={vo: compute_aru(values, total_cpus, horizon_s) for vo, values in per_vo_usage.items()},
        completed_counts=completed_counts,
        incomplete_count=sum(1 for record in records if not record.completed),
        generated_count=len(records),
        usage_series=tuple((start, math.fsum(values)) for start, values in sorted(per_interval.items())),
    )


def _mean(values) -> Optional[float]:
    present = [value for value in values if value is not None]
    return math.fsum(present) / len(present) if present else None


def average_reports(reports: Sequence[MetricsReport]) -> MetricsReport:
    """Seed average; independent of the order of `reports`."""
    if not reports:
        raise ValueError("nothing to average")
    vos = sorted({vo for report in reports for vo in report.art_per_vo})
    starts = sorted({start for report in reports for start, _ in report.usage_series})
    series = [dict(report.usage_series) for report in reports]
    return MetricsReport(
        aru=_mean(report.aru for report in reports),
        art_overall=_mean(report.art_overall for report in reports),
        art_per_vo={vo: _mean(report.art_per_vo.get(vo) for report in reports) for vo in vos},
        aru_per_vo={vo: _mean(report.aru_per_vo.get(vo, 0.0) for report in reports) for vo in vos},
        completed_counts={vo: _mean(report.completed_counts.get(vo, 0) for report in reports) for vo in vos},
        incomplete_count=_mean(report.incomplete_count for report in reports),
        generated_count=_mean(report.generated_count for report in reports),
        usage_series=tuple((start, _mean(s.get(start, 0.0) for s in series)) for start in starts),
    )
