from .engine import check_invariants, run, step
from .export import write_result
from .result import SimResult
from .world import (
    AuditEntry,
    GenerationSpec,
    JobRecord,
    JobState,
    PlannerMode,
    SimConfig,
    SiteSpec,
    SiteState,
    World,
)

__all__ = [
    "AuditEntry",
    "GenerationSpec",
    "JobRecord",
    "JobState",
    "PlannerMode",
    "SimConfig",
    "SimResult",
    "SiteSpec",
    "SiteState",
    "World",
    "check_invariants",
    "run",
    "step",
    "write_result",
]
