from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .world import AuditEntry, JobRecord, SimConfig


@dataclass
class SimResult:
    config: SimConfig
    records: Tuple[JobRecord, ...]
    usage: Dict[Tuple[int, str, str], int]
    audit: List[AuditEntry]
    warnings: List[str] = field(default_factory=list)
    ticks_executed: int = 0
    vo_ids: Tuple[str, ...] = ()
    site_ids: Tuple[str, ...] = ()
    report: Optional[object] = None

    def usage_rows(self):
        """Full (interval_start_s, site, vo, cpu_seconds) matrix in a stable order, zeros included."""
        interval = self.config.measurement_interval_s
        for start in range(0, self.config.horizon_s, interval):
            for site in self.site_ids:
                for vo in self.vo_ids:
                    yield start, site, vo, self.usage.get((start, site, vo), 0)

    def completed(self):
        return [record for record in self.records if record.completed]
