from .files import HEADER, read_workload, write_workload
from .generator import (
    REFERENCE_ROWS,
    JobSpec,
    SyncMode,
    WorkloadRow,
    WorkloadSpec,
    build_grid3_workloads,
    even_burst_offsets,
    generate_workload,
    grid3_workload_specs,
    instantiate,
    workload_counts,
)

__all__ = [
    "HEADER",
    "REFERENCE_ROWS",
    "JobSpec",
    "SyncMode",
    "WorkloadRow",
    "WorkloadSpec",
    "build_grid3_workloads",
    "even_burst_offsets",
    "generate_workload",
    "grid3_workload_specs",
    "instantiate",
    "read_workload",
    "workload_counts",
    "write_workload",
]
